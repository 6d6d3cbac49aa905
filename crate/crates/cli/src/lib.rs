//! Command-line front end for partial-conjunction analysis of voxel x
//! subject p-value maps: scenario simulation, procedure runs on matrix
//! files, Monte Carlo benchmarking, and report tables.

pub mod commands;
pub mod error;
pub mod io;
pub mod manifest;

pub use commands::{run, AggregateDocument, Cli};
pub use error::{CliError, Result};

/// Worker-thread cap from the environment; 0 or unset means automatic.
pub const THREADS_ENV: &str = "PCMAP_THREADS";

/// Runs a command under the thread pool configured by `PCMAP_THREADS`.
pub fn run_with_thread_env(cli: Cli) -> Result<()> {
    match std::env::var(THREADS_ENV) {
        Err(std::env::VarError::NotPresent) => run(cli),
        Err(e) => Err(CliError::Config(format!("{THREADS_ENV}: {e}"))),
        Ok(raw) => {
            let threads: usize = raw.trim().parse().map_err(|_| {
                CliError::Config(format!(
                    "{THREADS_ENV} must be a nonnegative integer, got {raw:?}"
                ))
            })?;
            if threads == 0 {
                return run(cli);
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            pool.install(|| run(cli))
        }
    }
}
