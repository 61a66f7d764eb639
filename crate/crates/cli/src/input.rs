//! Input loading, target parsing, and the CSV writers shared by the
//! subcommands. Floats are written in Rust's shortest round-trip decimal
//! form so written matrices read back bit-identically.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use ridgecond::condpath::ConditionPath;
use ridgecond::estimators::TargetSpec;
use ridgecond::ingest::{cov_ml, read_csv, to_correlation, Dataset};
use ridgecond::spectra::SymMatrix;
use ridgecond::{Error, Result};

use crate::args::HeaderMode;

/// Input resolved to the matrix the estimators consume.
pub struct LoadedInput {
    /// Covariance or correlation matrix, or the matrix given directly.
    pub matrix: SymMatrix,
    /// Column names, from the header or generated.
    pub names: Vec<String>,
}

fn is_missing_token(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

/// Header sniff: the first row is a header iff some cell is neither a
/// number nor a missing-value token.
fn sniff_header(path: &Path, delimiter: char) -> Result<bool> {
    let file = File::open(path)?;
    let mut line = String::new();
    BufReader::new(file).read_line(&mut line)?;
    let line = line.trim_end_matches(['\n', '\r']);
    if line.is_empty() {
        return Err(Error::InvalidInput(format!(
            "input file {} is empty",
            path.display()
        )));
    }
    Ok(line.split(delimiter).any(|cell| {
        let cell = cell.trim().trim_matches('"');
        !is_missing_token(cell) && cell.parse::<f64>().is_err()
    }))
}

pub fn resolve_header(path: &Path, mode: HeaderMode, delimiter: char) -> Result<bool> {
    match mode {
        HeaderMode::Yes => Ok(true),
        HeaderMode::No => Ok(false),
        HeaderMode::Auto => sniff_header(path, delimiter),
    }
}

pub fn load_dataset(path: &Path, header: HeaderMode, delimiter: char) -> Result<Dataset> {
    let has_header = resolve_header(path, header, delimiter)?;
    read_csv(path, has_header, delimiter)
}

fn matrix_from_dataset(data: &Dataset, origin: &Path) -> Result<SymMatrix> {
    if data.n() != data.p() {
        return Err(Error::InvalidInput(format!(
            "matrix input {} must be square, got {} rows x {} columns",
            origin.display(),
            data.n(),
            data.p()
        )));
    }
    SymMatrix::from_dense(data.p(), data.values())
}

/// Reads the input and produces the matrix to estimate from: the file
/// itself under --as-matrix, the ML covariance of its rows otherwise;
/// either is rescaled to a correlation matrix under --cor.
pub fn load_input(
    path: &Path,
    as_matrix: bool,
    cor: bool,
    header: HeaderMode,
    delimiter: char,
) -> Result<LoadedInput> {
    let data = load_dataset(path, header, delimiter)?;
    let names = data.names().to_vec();
    let matrix = if as_matrix {
        matrix_from_dataset(&data, path)?
    } else {
        cov_ml(&data)
    };
    let matrix = if cor { to_correlation(&matrix)? } else { matrix };
    Ok(LoadedInput { matrix, names })
}

/// Parses the --target syntax; file targets are read with the same
/// delimiter as the main input and an auto-sniffed header.
pub fn parse_target(text: &str, delimiter: char) -> Result<TargetSpec> {
    if let Some(rest) = text.strip_prefix("scalar:") {
        let phi: f64 = rest.parse().map_err(|_| {
            Error::InvalidInput(format!("cannot parse scalar target multiple {rest:?}"))
        })?;
        return Ok(TargetSpec::ScalarUnit(phi));
    }
    if let Some(rest) = text.strip_prefix("file:") {
        let path = PathBuf::from(rest);
        let data = load_dataset(&path, HeaderMode::Auto, delimiter)?;
        return Ok(TargetSpec::Custom(matrix_from_dataset(&data, &path)?));
    }
    match text.to_ascii_lowercase().as_str() {
        "null" => Ok(TargetSpec::Null),
        "dupv" => Ok(TargetSpec::DiagReciprocalVariance),
        "depv" => Ok(TargetSpec::DiagAverageEV),
        _ => Err(Error::InvalidInput(format!(
            "unknown target {text:?}; expected null, scalar:<phi>, dupv, depv, or file:<path>"
        ))),
    }
}

/// Worker count: the flag, else RIDGECOND_THREADS, else the machine's
/// available parallelism.
pub fn resolve_threads(flag: Option<usize>) -> Result<usize> {
    if let Some(t) = flag {
        if t == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        return Ok(t);
    }
    if let Ok(raw) = std::env::var("RIDGECOND_THREADS") {
        return raw
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&t| t >= 1)
            .ok_or_else(|| {
                Error::InvalidInput(format!(
                    "RIDGECOND_THREADS must be a positive integer, got {raw:?}"
                ))
            });
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Shortest decimal that round-trips to the same f64; infinities spelled
/// so the standard float parser reads them back.
pub fn fmt_f64(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// Full symmetric matrix as CSV with a header row of variable names.
pub fn write_matrix_csv(path: &Path, names: &[String], m: &SymMatrix) -> Result<()> {
    let p = m.dim();
    debug_assert_eq!(names.len(), p);
    let mut text = String::new();
    text.push_str(&names.join(","));
    text.push('\n');
    for j in 0..p {
        for k in 0..p {
            if k > 0 {
                text.push(',');
            }
            text.push_str(&fmt_f64(m.get(j, k)));
        }
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// Path table: one row per grid point. The aid columns are empty where the
/// aid is unavailable (infinite condition values; the acceleration stencil
/// at the endpoints).
pub fn write_path_csv(path: &Path, cp: &ConditionPath) -> Result<()> {
    let steps = cp.grid.steps();
    let mut text = String::from("index,lambda,ln_lambda,cond,digits_lost,acceleration\n");
    for (i, &lambda) in cp.grid.values().iter().enumerate() {
        let digits = cp
            .digits_lost
            .as_ref()
            .and_then(|d| d[i])
            .map_or(String::new(), |d| d.to_string());
        let accel = cp
            .acceleration
            .as_ref()
            .filter(|_| i > 0 && i + 1 < steps)
            .and_then(|a| a[i - 1])
            .map_or(String::new(), fmt_f64);
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            i,
            fmt_f64(lambda),
            fmt_f64(lambda.ln()),
            fmt_f64(cp.cond[i]),
            digits,
            accel
        ));
    }
    std::fs::write(path, text)?;
    Ok(())
}
