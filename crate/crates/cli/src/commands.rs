//! Command-line surface: `simulate`, `analyze`, `bench`, and `report`.

use std::fs;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use pcmap_core::combine::pc_field;
use pcmap_core::metrics::StudySummary;
use pcmap_core::procedures::{default_tau_grid, superimpose, AdaFilterIndexing, MethodConfig};
use pcmap_core::simulate::{
    generate_matrix, run_study, EquiCorrScenario, PhantomScenario, StudyScenario,
};
use pcmap_core::Granularity;

use crate::error::{io_err, CliError, Result};
use crate::io::{
    detect_format, file_digest, fmt_f64, read_pvalue_matrix, write_atomic, write_lower_bounds,
    write_pvalue_matrix, write_rejections, write_truth, MatrixFormat,
};
use crate::manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(
    name = "pcmap",
    version,
    about = "Partial-conjunction testing of voxel x subject p-value maps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one replication of a scenario as p-value matrix + truth files
    Simulate(SimulateArgs),
    /// Run a testing procedure on a p-value matrix file
    Analyze(AnalyzeArgs),
    /// Monte Carlo study: per-trial metrics and aggregate FDR/power
    Bench(BenchArgs),
    /// Merge bench aggregates into a comparison table
    Report(ReportArgs),
}

/// Scenario selection, either from a JSON file or from flags.
#[derive(Debug, Args, Default)]
pub struct ScenarioArgs {
    /// Scenario JSON file (kind: equicorr | phantom)
    #[arg(long)]
    pub scenario: Option<PathBuf>,

    /// Scenario kind when configuring by flags: equicorr | phantom
    #[arg(long)]
    pub kind: Option<String>,

    /// Seed override (applies to file and flag scenarios)
    #[arg(long)]
    pub seed: Option<u64>,

    /// Voxel count (equicorr)
    #[arg(long, visible_alias = "m")]
    pub voxels: Option<usize>,

    /// Subject count
    #[arg(long, visible_alias = "s")]
    pub subjects: Option<usize>,

    /// Observations per subject map (equicorr)
    #[arg(long, visible_alias = "n")]
    pub observations: Option<usize>,

    /// Equi-correlation between voxels (equicorr)
    #[arg(long)]
    pub rho: Option<f64>,

    /// Activation profile base (equicorr)
    #[arg(long)]
    pub c: Option<f64>,

    /// Per-test target power (equicorr)
    #[arg(long)]
    pub eta: Option<f64>,

    /// Calibration level for the per-test power (equicorr)
    #[arg(long)]
    pub alpha_cal: Option<f64>,

    /// Grid dimensions, e.g. 10x10x10 (phantom)
    #[arg(long)]
    pub grid: Option<String>,

    /// Sphere center in 1-based voxel coordinates, e.g. 5.5,5.5,5.5 (phantom)
    #[arg(long)]
    pub sphere_center: Option<String>,

    /// Sphere radius in voxel units (phantom)
    #[arg(long)]
    pub sphere_radius: Option<f64>,

    /// Signal-to-noise ratio (phantom)
    #[arg(long)]
    pub snr: Option<f64>,
}

impl ScenarioArgs {
    pub fn resolve(&self) -> Result<StudyScenario> {
        let mut scenario = if let Some(path) = &self.scenario {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            serde_json::from_str::<StudyScenario>(&text).map_err(|e| {
                CliError::Format(format!("{}: invalid scenario: {e}", path.display()))
            })?
        } else {
            match self.kind.as_deref() {
                Some("equicorr") => {
                    let mut s = EquiCorrScenario::default();
                    if let Some(v) = self.voxels {
                        s.voxels = v;
                    }
                    if let Some(v) = self.subjects {
                        s.subjects = v;
                    }
                    if let Some(v) = self.observations {
                        s.observations = v;
                    }
                    if let Some(v) = self.rho {
                        s.rho = v;
                    }
                    if let Some(v) = self.c {
                        s.c = v;
                    }
                    if let Some(v) = self.eta {
                        s.eta = v;
                    }
                    if let Some(v) = self.alpha_cal {
                        s.alpha_cal = v;
                    }
                    StudyScenario::Equicorr(s)
                }
                Some("phantom") => {
                    let mut s = PhantomScenario::default();
                    if let Some(g) = &self.grid {
                        s.grid = parse_grid(g)?;
                    }
                    if let Some(v) = self.subjects {
                        s.subjects = v;
                    }
                    if let Some(center) = &self.sphere_center {
                        s.sphere_center = parse_vec3(center)?;
                    }
                    if let Some(v) = self.sphere_radius {
                        s.sphere_radius = v;
                    }
                    if let Some(v) = self.snr {
                        s.snr = v;
                    }
                    StudyScenario::Phantom(s)
                }
                Some(other) => {
                    return Err(CliError::Config(format!(
                        "unknown scenario kind {other:?}, expected equicorr or phantom"
                    )))
                }
                None => {
                    return Err(CliError::Config(
                        "either --scenario FILE or --kind is required".into(),
                    ))
                }
            }
        };
        if let Some(seed) = self.seed {
            match &mut scenario {
                StudyScenario::Equicorr(s) => s.seed = seed,
                StudyScenario::Phantom(s) => s.seed = seed,
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }
}

/// Procedure selection flags.
#[derive(Debug, Args)]
pub struct MethodArgs {
    /// bh-selective | cofilter-fixed | cofilter-adaptive | adafilter
    #[arg(long)]
    pub method: Option<String>,

    /// FDR level
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,

    /// Fixed selection threshold for cofilter-fixed
    #[arg(long)]
    pub tau: Option<f64>,

    /// Threshold grid for cofilter-adaptive: "start:step:end" or a comma
    /// list; default 0.01:0.01:1.00
    #[arg(long)]
    pub tau_grid: Option<String>,

    /// Order-statistic indexing for adafilter: standard | literal
    #[arg(long, default_value = "standard")]
    pub adafilter_indexing: String,
}

impl MethodArgs {
    pub fn resolve(&self) -> Result<MethodConfig> {
        let name = self
            .method
            .as_deref()
            .ok_or_else(|| CliError::Config("--method is required".into()))?;
        let method = match name {
            "bh-selective" => MethodConfig::bh_selective(self.alpha),
            "cofilter-fixed" => {
                let tau = self
                    .tau
                    .ok_or_else(|| CliError::Config("cofilter-fixed requires --tau".into()))?;
                MethodConfig::cofilter_fixed(self.alpha, tau)
            }
            "cofilter-adaptive" => {
                let grid = match &self.tau_grid {
                    Some(spec) => parse_tau_grid(spec)?,
                    None => default_tau_grid(),
                };
                MethodConfig::cofilter_adaptive(self.alpha, grid)
            }
            "adafilter" => {
                let indexing = match self.adafilter_indexing.as_str() {
                    "standard" => AdaFilterIndexing::Standard,
                    "literal" => AdaFilterIndexing::Literal,
                    other => {
                        return Err(CliError::Config(format!(
                            "unknown adafilter indexing {other:?}, expected standard or literal"
                        )))
                    }
                };
                MethodConfig::adafilter(self.alpha, indexing)
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown method {other:?}, expected bh-selective, cofilter-fixed, \
                     cofilter-adaptive, or adafilter"
                )))
            }
        };
        method.validate()?;
        Ok(method)
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    /// 1-based replication index to generate
    #[arg(long, default_value_t = 1)]
    pub replication: u64,

    /// Output matrix encoding: csv | binary
    #[arg(long, default_value = "csv")]
    pub format: String,

    /// Output directory (pvalues.{csv|bin}, truth.csv, manifest.json)
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Input p-value matrix file
    #[arg(long)]
    pub input: PathBuf,

    /// Input encoding: auto | csv | binary
    #[arg(long, default_value = "auto")]
    pub format: String,

    #[command(flatten)]
    pub method: MethodArgs,

    /// "all" (superimpose into lower bounds) or a single granularity
    #[arg(long, default_value = "all")]
    pub gamma: String,

    /// Grid dimensions for coordinate output, e.g. 10x10x10
    #[arg(long)]
    pub grid: Option<String>,

    /// Output CSV path (lower bounds or rejections)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,

    /// Reproduce scenario/method/replications from a manifest or a
    /// previous aggregate.json
    #[arg(long)]
    pub from_manifest: Option<PathBuf>,

    #[command(flatten)]
    pub method: MethodArgs,

    /// Number of Monte Carlo replications
    #[arg(long)]
    pub replications: Option<usize>,

    /// Output directory (trials.csv, aggregate.json, manifest.json)
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Aggregate JSON files produced by bench
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,

    /// Output comparison table CSV
    #[arg(long)]
    pub out: PathBuf,
}

/// Aggregate document written by bench: the reproducible manifest plus the
/// study summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateDocument {
    pub manifest: RunManifest,
    pub summary: StudySummary,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Report(args) => cmd_report(args),
    }
}

fn parse_grid(spec: &str) -> Result<[usize; 3]> {
    let parts: Vec<&str> = spec.split(['x', 'X']).collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "grid {spec:?} must look like 10x10x10"
        )));
    }
    let mut dims = [0usize; 3];
    for (d, part) in dims.iter_mut().zip(&parts) {
        *d = part
            .parse()
            .map_err(|_| CliError::Config(format!("grid {spec:?} must look like 10x10x10")))?;
    }
    Ok(dims)
}

fn parse_vec3(spec: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "coordinate {spec:?} must look like 5.5,5.5,5.5"
        )));
    }
    let mut out = [0.0f64; 3];
    for (v, part) in out.iter_mut().zip(&parts) {
        *v = part.parse().map_err(|_| {
            CliError::Config(format!("coordinate {spec:?} must look like 5.5,5.5,5.5"))
        })?;
    }
    Ok(out)
}

fn parse_tau_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || CliError::Config(format!("invalid tau grid {spec:?}"));
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].parse().map_err(|_| bad())?;
        let step: f64 = parts[1].parse().map_err(|_| bad())?;
        let end: f64 = parts[2].parse().map_err(|_| bad())?;
        if !(step > 0.0 && end >= start) {
            return Err(bad());
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        (0..count).map(|i| start + i as f64 * step).collect()
    } else {
        spec.split(',')
            .map(|part| part.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<f64>>>()?
    };
    if grid.is_empty() {
        return Err(bad());
    }
    Ok(grid)
}

fn resolve_input_format(path: &Path, format: &str) -> Result<MatrixFormat> {
    match format {
        "csv" => Ok(MatrixFormat::Csv),
        "binary" => Ok(MatrixFormat::Binary),
        "auto" => detect_format(path),
        other => Err(CliError::Config(format!(
            "unknown input format {other:?}, expected auto, csv, or binary"
        ))),
    }
}

fn write_json_document<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        let text = serde_json::to_string_pretty(value).expect("serialization cannot fail");
        writeln!(w, "{text}").map_err(io_err(path))?;
        Ok(())
    })
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let scenario = args.scenario.resolve()?;
    if args.replication == 0 {
        return Err(CliError::Config("--replication is 1-based".into()));
    }
    let format = match args.format.as_str() {
        "csv" => MatrixFormat::Csv,
        "binary" => MatrixFormat::Binary,
        other => {
            return Err(CliError::Config(format!(
                "unknown output format {other:?}, expected csv or binary"
            )))
        }
    };
    let matrix = generate_matrix(&scenario, args.replication - 1)?;
    let truth = scenario.truth()?;

    let matrix_path = args.out_dir.join(format!("pvalues.{}", format.extension()));
    write_pvalue_matrix(&matrix_path, &matrix, format)?;
    write_truth(&args.out_dir.join("truth.csv"), &truth)?;

    let mut manifest = RunManifest::new("simulate").with_scenario(&scenario);
    manifest.replication = Some(args.replication);
    manifest.output_format = Some(args.format.clone());
    manifest.write_sidecar(&args.out_dir.join("manifest.json"))?;
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let format = resolve_input_format(&args.input, &args.format)?;
    let matrix = read_pvalue_matrix(&args.input, format)?;
    let method = args.method.resolve()?;
    let grid = args.grid.as_deref().map(parse_grid).transpose()?;

    let mut manifest = RunManifest::new("analyze").with_method(&method);
    manifest.input_digest = Some(file_digest(&args.input)?);
    manifest.gamma = Some(args.gamma.clone());

    if args.gamma == "all" {
        let outcome = superimpose(&matrix, &method)?;
        write_lower_bounds(&args.out, &outcome.bounds, grid)?;
    } else {
        let g: usize = args.gamma.parse().map_err(|_| {
            CliError::Config(format!(
                "--gamma must be \"all\" or a positive integer, got {:?}",
                args.gamma
            ))
        })?;
        let gamma = Granularity::new(g, matrix.subject_count())?;
        let field = pc_field(&matrix);
        let set = method.run_single_gamma(&matrix, &field, gamma)?;
        write_rejections(&args.out, &set)?;
    }

    let mut sidecar = args.out.as_os_str().to_os_string();
    sidecar.push(".manifest.json");
    manifest.write_sidecar(Path::new(&sidecar))?;
    Ok(())
}

fn load_manifest(path: &Path) -> Result<RunManifest> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    if let Ok(doc) = serde_json::from_str::<AggregateDocument>(&text) {
        return Ok(doc.manifest);
    }
    serde_json::from_str::<RunManifest>(&text)
        .map_err(|e| CliError::Format(format!("{}: not a manifest: {e}", path.display())))
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    let (scenario, method, replications) = if let Some(path) = &args.from_manifest {
        let manifest = load_manifest(path)?;
        let scenario = manifest.scenario.ok_or_else(|| {
            CliError::Config(format!("{}: manifest lacks a scenario", path.display()))
        })?;
        let method = manifest.method.ok_or_else(|| {
            CliError::Config(format!("{}: manifest lacks a method", path.display()))
        })?;
        let replications = args
            .replications
            .or(manifest.replications)
            .ok_or_else(|| CliError::Config("--replications is required".into()))?;
        (scenario, method, replications)
    } else {
        let scenario = args.scenario.resolve()?;
        let method = args.method.resolve()?;
        let replications = args
            .replications
            .ok_or_else(|| CliError::Config("--replications is required".into()))?;
        (scenario, method, replications)
    };

    let outcome = run_study(&scenario, &method, replications)?;

    let mut manifest = RunManifest::new("bench")
        .with_scenario(&scenario)
        .with_method(&method);
    manifest.replications = Some(replications);

    let trials_path = args.out_dir.join("trials.csv");
    let subjects = scenario.subject_count();
    let has_tau = outcome
        .trials
        .first()
        .is_some_and(|t| t.tau_per_gamma.is_some());
    write_atomic(&trials_path, |w| {
        let mut header = String::from("rep,fdp,beta,n_discoveries,n_false");
        for g in 1..=subjects {
            header.push_str(&format!(",rej_g{g}"));
        }
        if has_tau {
            for g in 1..=subjects {
                header.push_str(&format!(",tau_g{g}"));
            }
        }
        writeln!(w, "{header}").map_err(io_err(&trials_path))?;
        for (r, t) in outcome.trials.iter().enumerate() {
            let beta = t.power_beta.map(fmt_f64).unwrap_or_default();
            let mut line = format!(
                "{},{},{},{},{}",
                r + 1,
                fmt_f64(t.fdp),
                beta,
                t.n_discoveries,
                t.n_false
            );
            for &c in &t.per_gamma_rejections {
                line.push_str(&format!(",{c}"));
            }
            if has_tau {
                for &tau in t.tau_per_gamma.as_ref().expect("has_tau checked") {
                    line.push_str(&format!(",{}", fmt_f64(tau)));
                }
            }
            writeln!(w, "{line}").map_err(io_err(&trials_path))?;
        }
        Ok(())
    })?;

    let document = AggregateDocument {
        manifest: manifest.clone(),
        summary: outcome.summary,
    };
    write_json_document(&args.out_dir.join("aggregate.json"), &document)?;
    manifest.write_sidecar(&args.out_dir.join("manifest.json"))?;
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    struct Row {
        key_name: &'static str,
        key: f64,
        method: String,
        replications: usize,
        fdr: f64,
        fdr_se: Option<f64>,
        beta_mean: Option<f64>,
        beta_defined: usize,
    }

    let mut rows = Vec::new();
    let mut digests = Vec::new();
    for path in &args.inputs {
        digests.push(file_digest(path)?);
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let doc: AggregateDocument = serde_json::from_str(&text).map_err(|e| {
            CliError::Format(format!("{}: not a bench aggregate: {e}", path.display()))
        })?;
        let scenario = doc.manifest.scenario.as_ref().ok_or_else(|| {
            CliError::Format(format!("{}: aggregate lacks a scenario", path.display()))
        })?;
        let (key_name, key) = match scenario {
            StudyScenario::Equicorr(s) => ("rho", s.rho),
            StudyScenario::Phantom(s) => ("snr", s.snr),
        };
        let method = doc
            .manifest
            .method_id
            .clone()
            .or_else(|| doc.manifest.method.as_ref().map(|m| m.id().to_string()))
            .ok_or_else(|| {
                CliError::Format(format!("{}: aggregate lacks a method", path.display()))
            })?;
        rows.push(Row {
            key_name,
            key,
            method,
            replications: doc.summary.replications,
            fdr: doc.summary.fdr,
            fdr_se: doc.summary.fdr_se,
            beta_mean: doc.summary.beta_mean,
            beta_defined: doc.summary.beta_defined,
        });
    }
    rows.sort_by(|a, b| {
        a.key_name
            .cmp(b.key_name)
            .then(a.key.partial_cmp(&b.key).expect("finite key"))
            .then(a.method.cmp(&b.method))
    });
    write_atomic(&args.out, |w| {
        writeln!(
            w,
            "key_name,key,method,replications,fdr,fdr_se,beta_mean,beta_defined"
        )
        .map_err(io_err(&args.out))?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.key_name,
                fmt_f64(r.key),
                r.method,
                r.replications,
                fmt_f64(r.fdr),
                r.fdr_se.map(fmt_f64).unwrap_or_default(),
                r.beta_mean.map(fmt_f64).unwrap_or_default(),
                r.beta_defined
            )
            .map_err(io_err(&args.out))?;
        }
        Ok(())
    })?;

    let mut manifest = RunManifest::new("report");
    manifest.input_digests = Some(digests);
    let mut sidecar = args.out.as_os_str().to_os_string();
    sidecar.push(".manifest.json");
    manifest.write_sidecar(Path::new(&sidecar))
}
