//! File formats: p-value matrices as CSV or binary, lower-bound and truth
//! tables as CSV. Voxel ids and coordinates in files are 1-based; float
//! text uses the shortest representation that round-trips exactly.
//!
//! Binary matrix layout: magic `PCM1`, little-endian u64 voxel count,
//! u64 subject count, then voxel-count x subject-count f64 values
//! row-major.
//!
//! All writers go through a `.partial` temp name and rename on success,
//! so an interrupted run never leaves a plausible-looking final file.

use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use pcmap_core::{LowerBounds, PValueMatrix, RejectionSet, TruthVector};

use crate::error::{io_err, CliError, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"PCM1";

/// Shortest exact text form of a double; switches to scientific notation
/// away from a readable range.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_os_string();
    name.push(".partial");
    PathBuf::from(name)
}

/// Writes through `<path>.partial`, renaming into place only on success.
pub fn write_atomic<F>(path: &Path, write_fn: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let tmp = partial_path(path);
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
    }
    let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    let mut writer = BufWriter::new(file);
    write_fn(&mut writer)?;
    writer.flush().map_err(io_err(&tmp))?;
    drop(writer);
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

/// Matrix file encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Binary => "bin",
        }
    }
}

/// Sniffs the format from the magic bytes.
pub fn detect_format(path: &Path) -> Result<MatrixFormat> {
    let mut file = fs::File::open(path).map_err(io_err(path))?;
    let mut magic = [0u8; 4];
    let n = file.read(&mut magic).map_err(io_err(path))?;
    if n == 4 && &magic == BINARY_MAGIC {
        Ok(MatrixFormat::Binary)
    } else {
        Ok(MatrixFormat::Csv)
    }
}

pub fn write_pvalue_matrix(path: &Path, matrix: &PValueMatrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Csv => write_atomic(path, |w| {
            let s = matrix.subject_count();
            let header: Vec<String> = (1..=s).map(|i| format!("s{i}")).collect();
            writeln!(w, "voxel,{}", header.join(",")).map_err(io_err(path))?;
            for j in 0..matrix.voxel_count() {
                let row: Vec<String> = matrix.row(j).iter().map(|&v| fmt_f64(v)).collect();
                writeln!(w, "{},{}", j + 1, row.join(",")).map_err(io_err(path))?;
            }
            Ok(())
        }),
        MatrixFormat::Binary => write_atomic(path, |w| {
            w.write_all(BINARY_MAGIC).map_err(io_err(path))?;
            w.write_all(&(matrix.voxel_count() as u64).to_le_bytes())
                .map_err(io_err(path))?;
            w.write_all(&(matrix.subject_count() as u64).to_le_bytes())
                .map_err(io_err(path))?;
            for &v in matrix.values() {
                w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
            }
            Ok(())
        }),
    }
}

pub fn read_pvalue_matrix(path: &Path, format: MatrixFormat) -> Result<PValueMatrix> {
    match format {
        MatrixFormat::Csv => read_matrix_csv(path),
        MatrixFormat::Binary => read_matrix_binary(path),
    }
}

fn invalid_entry_message(path: &Path, e: pcmap_core::Error) -> CliError {
    match e {
        pcmap_core::Error::InvalidEntry { row, col, value } => CliError::Format(format!(
            "{}: invalid p-value {} at row {}, column s{}",
            path.display(),
            fmt_f64(value),
            row,
            col
        )),
        other => CliError::Core(other),
    }
}

fn read_matrix_csv(path: &Path) -> Result<PValueMatrix> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| CliError::Format(format!("{}: empty file", path.display())))?;
    let cols: Vec<&str> = header.trim_end_matches('\r').split(',').collect();
    if cols.len() < 2 || cols[0] != "voxel" {
        return Err(CliError::Format(format!(
            "{}: malformed header, expected voxel,s1,...",
            path.display()
        )));
    }
    let subjects = cols.len() - 1;
    for (i, col) in cols[1..].iter().enumerate() {
        if *col != format!("s{}", i + 1) {
            return Err(CliError::Format(format!(
                "{}: malformed header, column {} is {:?}, expected \"s{}\"",
                path.display(),
                i + 2,
                col,
                i + 1
            )));
        }
    }
    let mut values = Vec::new();
    let mut row_count = 0usize;
    for (lineno, line) in lines.enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let row = lineno + 1; // 1-based data row
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != subjects + 1 {
            return Err(CliError::Format(format!(
                "{}: row {} has {} fields, expected {}",
                path.display(),
                row,
                fields.len(),
                subjects + 1
            )));
        }
        let id: usize = fields[0].parse().map_err(|_| {
            CliError::Format(format!(
                "{}: row {}: voxel id {:?} is not an integer",
                path.display(),
                row,
                fields[0]
            ))
        })?;
        if id != row {
            return Err(CliError::Format(format!(
                "{}: row {}: voxel id {} out of order",
                path.display(),
                row,
                id
            )));
        }
        for (i, field) in fields[1..].iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Format(format!(
                    "{}: row {}, column s{}: {:?} is not a number",
                    path.display(),
                    row,
                    i + 1,
                    field
                ))
            })?;
            values.push(v);
        }
        row_count += 1;
    }
    if row_count == 0 {
        return Err(CliError::Format(format!(
            "{}: no data rows",
            path.display()
        )));
    }
    PValueMatrix::from_flat(row_count, subjects, values).map_err(|e| invalid_entry_message(path, e))
}

fn read_matrix_binary(path: &Path) -> Result<PValueMatrix> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() < 20 || &bytes[..4] != BINARY_MAGIC {
        return Err(CliError::Format(format!(
            "{}: wrong magic, not a PCM1 matrix file",
            path.display()
        )));
    }
    let voxels = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let subjects = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let expected = voxels
        .checked_mul(subjects)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(20))
        .ok_or_else(|| {
            CliError::Format(format!(
                "{}: implausible dimensions {} x {}",
                path.display(),
                voxels,
                subjects
            ))
        })?;
    if bytes.len() != expected {
        return Err(CliError::Format(format!(
            "{}: truncated matrix, got {} bytes, expected {}",
            path.display(),
            bytes.len(),
            expected
        )));
    }
    let values: Vec<f64> = bytes[20..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    PValueMatrix::from_flat(voxels, subjects, values).map_err(|e| invalid_entry_message(path, e))
}

/// Lower bounds as plot-ready CSV: `voxel,d`, or `x,y,z,d` when grid
/// dimensions are given (row-major voxel order, 1-based coordinates).
pub fn write_lower_bounds(
    path: &Path,
    bounds: &LowerBounds,
    grid: Option<[usize; 3]>,
) -> Result<()> {
    if let Some(dims) = grid {
        let product: usize = dims.iter().product();
        if product != bounds.len() {
            return Err(CliError::Config(format!(
                "grid {}x{}x{} has {} voxels but bounds cover {}",
                dims[0],
                dims[1],
                dims[2],
                product,
                bounds.len()
            )));
        }
    }
    write_atomic(path, |w| {
        match grid {
            None => {
                writeln!(w, "voxel,d").map_err(io_err(path))?;
                for (j, &d) in bounds.values().iter().enumerate() {
                    writeln!(w, "{},{}", j + 1, d).map_err(io_err(path))?;
                }
            }
            Some([_, ny, nz]) => {
                writeln!(w, "x,y,z,d").map_err(io_err(path))?;
                for (j, &d) in bounds.values().iter().enumerate() {
                    let x = j / (ny * nz) + 1;
                    let y = (j / nz) % ny + 1;
                    let z = j % nz + 1;
                    writeln!(w, "{x},{y},{z},{d}").map_err(io_err(path))?;
                }
            }
        }
        Ok(())
    })
}

/// Ground-truth activation counts as CSV `voxel,delta`.
pub fn write_truth(path: &Path, truth: &TruthVector) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "voxel,delta").map_err(io_err(path))?;
        for (j, &d) in truth.counts().iter().enumerate() {
            writeln!(w, "{},{}", j + 1, d).map_err(io_err(path))?;
        }
        Ok(())
    })
}

/// A single-granularity rejection set as CSV `voxel` (1-based ids).
pub fn write_rejections(path: &Path, set: &RejectionSet) -> Result<()> {
    write_atomic(path, |w| {
        writeln!(w, "voxel").map_err(io_err(path))?;
        for &j in set.indices() {
            writeln!(w, "{}", j + 1).map_err(io_err(path))?;
        }
        Ok(())
    })
}

/// SHA-256 of a file, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = fs::read(path).map_err(io_err(path))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmpdir() -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "pcmap-io-test-{}-{:?}",
            std::process::id(),
            std::thread::current().id()
        ));
        fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tmpdir();
        let path = dir.join("m.csv");
        let matrix = PValueMatrix::new(vec![
            vec![0.1, 1.0, 1e-19],
            vec![0.0, 0.3333333333333333, 0.5],
        ])
        .unwrap();
        write_pvalue_matrix(&path, &matrix, MatrixFormat::Csv).unwrap();
        let back = read_pvalue_matrix(&path, MatrixFormat::Csv).unwrap();
        assert_eq!(matrix, back);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let dir = tmpdir();
        let path = dir.join("m.bin");
        let matrix = PValueMatrix::new(vec![vec![0.1, 0.2], vec![0.3, 0.4]]).unwrap();
        write_pvalue_matrix(&path, &matrix, MatrixFormat::Binary).unwrap();
        assert_eq!(detect_format(&path).unwrap(), MatrixFormat::Binary);
        let back = read_pvalue_matrix(&path, MatrixFormat::Binary).unwrap();
        assert_eq!(matrix, back);
    }

    #[test]
    fn formats_agree_after_round_trip() {
        let dir = tmpdir();
        let matrix = PValueMatrix::new(vec![vec![1e-300, 0.25], vec![0.7, 1.0]]).unwrap();
        let csv = dir.join("x.csv");
        let bin = dir.join("x.bin");
        write_pvalue_matrix(&csv, &matrix, MatrixFormat::Csv).unwrap();
        write_pvalue_matrix(&bin, &matrix, MatrixFormat::Binary).unwrap();
        let a = read_pvalue_matrix(&csv, MatrixFormat::Csv).unwrap();
        let b = read_pvalue_matrix(&bin, MatrixFormat::Binary).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_fixture_parses() {
        let dir = tmpdir();
        let path = dir.join("fixture.csv");
        fs::write(&path, "voxel,s1,s2\n1,0.1,0.2\n2,0.3,0.4\n").unwrap();
        let matrix = read_pvalue_matrix(&path, MatrixFormat::Csv).unwrap();
        assert_eq!(matrix.voxel_count(), 2);
        assert_eq!(matrix.row(0), &[0.1, 0.2]);
        assert_eq!(matrix.row(1), &[0.3, 0.4]);
    }

    #[test]
    fn csv_out_of_range_reports_location() {
        let dir = tmpdir();
        let path = dir.join("bad.csv");
        fs::write(&path, "voxel,s1,s2\n1,1.5,0.2\n").unwrap();
        let err = read_pvalue_matrix(&path, MatrixFormat::Csv).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 1"), "{msg}");
        assert!(msg.contains("column s1"), "{msg}");
    }

    #[test]
    fn csv_malformed_header() {
        let dir = tmpdir();
        let path = dir.join("hdr.csv");
        fs::write(&path, "id,s1\n1,0.5\n").unwrap();
        let err = read_pvalue_matrix(&path, MatrixFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("malformed header"));
    }

    #[test]
    fn csv_ragged_row() {
        let dir = tmpdir();
        let path = dir.join("ragged.csv");
        fs::write(&path, "voxel,s1,s2\n1,0.1,0.2\n2,0.3\n").unwrap();
        let err = read_pvalue_matrix(&path, MatrixFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn binary_wrong_magic() {
        let dir = tmpdir();
        let path = dir.join("not.bin");
        fs::write(&path, b"NOPE0000000000000000").unwrap();
        let err = read_pvalue_matrix(&path, MatrixFormat::Binary).unwrap_err();
        assert!(err.to_string().contains("wrong magic"));
    }

    #[test]
    fn lower_bounds_plain_and_grid() {
        let dir = tmpdir();
        let bounds = LowerBounds::new(vec![0, 2], 3).unwrap();
        let path = dir.join("d.csv");
        write_lower_bounds(&path, &bounds, None).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "voxel,d\n1,0\n2,2\n");

        let bounds = LowerBounds::new((0..8).map(|i| i % 3).collect(), 3).unwrap();
        let path = dir.join("grid.csv");
        write_lower_bounds(&path, &bounds, Some([2, 2, 2])).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y,z,d"));
        assert_eq!(lines.next(), Some("1,1,1,0"));
        assert_eq!(lines.next(), Some("1,1,2,1"));
        assert_eq!(lines.next(), Some("1,2,1,2"));

        let bad = write_lower_bounds(&dir.join("bad.csv"), &bounds, Some([3, 3, 3]));
        assert!(bad.is_err());
    }

    #[test]
    fn partial_suffix_left_on_failure() {
        let dir = tmpdir();
        let path = dir.join("fail.csv");
        let result = write_atomic(&path, |w| {
            writeln!(w, "halfway").ok();
            Err(CliError::Format("boom".into()))
        });
        assert!(result.is_err());
        assert!(!path.exists());
        assert!(partial_path(&path).exists());
    }

    #[test]
    fn fmt_round_trip_extremes() {
        for &v in &[0.0, 1.0, 0.1, 1e-300, 5e-324, 0.3333333333333333, 1e-19] {
            let s = fmt_f64(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(v.to_bits(), back.to_bits(), "{v} -> {s}");
        }
    }
}
