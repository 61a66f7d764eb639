//! Data-matrix loading and sample covariance/correlation construction.
//!
//! Input is a rectangular numeric CSV, rows as observations and columns as
//! variables. Missing values are an error, never imputed: the caller is told
//! how many cells are missing and where the first one sits. Covariances use
//! the maximum-likelihood divisor n by default; the unbiased n/(n-1) variant
//! is a separate constructor.

use std::path::Path;

use crate::error::{Error, Result};
use crate::spectra::SymMatrix;

/// Observations-by-variables data matrix with per-column names.
#[derive(Debug, Clone)]
pub struct Dataset {
    n: usize,
    p: usize,
    /// Row-major n*p values, all finite.
    values: Vec<f64>,
    names: Vec<String>,
}

impl Dataset {
    /// Wraps a row-major value buffer. Generated names V1..Vp fill in when
    /// `names` is `None`.
    pub fn new(n: usize, p: usize, values: Vec<f64>, names: Option<Vec<String>>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 observations, got {n}"
            )));
        }
        if p < 1 {
            return Err(Error::InvalidInput("need at least 1 variable".into()));
        }
        if values.len() != n * p {
            return Err(Error::InvalidInput(format!(
                "expected {n}x{p} = {} values, got {}",
                n * p,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite data value {v}")));
        }
        let names = match names {
            Some(names) => {
                if names.len() != p {
                    return Err(Error::InvalidInput(format!(
                        "{} names for {p} columns",
                        names.len()
                    )));
                }
                names
            }
            None => (1..=p).map(|j| format!("V{j}")).collect(),
        };
        Ok(Dataset {
            n,
            p,
            values,
            names,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

/// Reads a rectangular numeric CSV into a [`Dataset`].
///
/// Line numbers in errors are 1-based file lines (the header counts).
/// Malformed cells and ragged rows abort immediately; missing cells are
/// tallied across the whole file so the error can report their count.
pub fn read_csv(path: &Path, has_header: bool, delimiter: char) -> Result<Dataset> {
    if !delimiter.is_ascii() {
        return Err(Error::InvalidInput(format!(
            "delimiter must be an ASCII character, got {delimiter:?}"
        )));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .delimiter(delimiter as u8)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(csv_error)?;

    let names: Option<Vec<String>> = if has_header {
        let headers = reader.headers().map_err(csv_error)?;
        Some(headers.iter().map(str::to_owned).collect())
    } else {
        None
    };

    let mut p = names.as_ref().map(Vec::len);
    let mut values = Vec::new();
    let mut n = 0usize;
    let mut missing_count = 0usize;
    let mut first_missing: Option<(u64, u64)> = None;

    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |pos| pos.line());
        let width = *p.get_or_insert(record.len());
        if record.len() != width {
            return Err(Error::ParseError {
                line,
                column: None,
                message: format!("expected {width} fields, found {}", record.len()),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            if is_missing(cell) {
                missing_count += 1;
                first_missing.get_or_insert((line, j as u64 + 1));
                values.push(f64::NAN);
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => values.push(v),
                Ok(v) => {
                    return Err(Error::ParseError {
                        line,
                        column: Some(j as u64 + 1),
                        message: format!("non-finite value {v}"),
                    })
                }
                Err(_) => {
                    return Err(Error::ParseError {
                        line,
                        column: Some(j as u64 + 1),
                        message: format!("cannot parse {cell:?} as a number"),
                    })
                }
            }
        }
        n += 1;
    }

    if missing_count > 0 {
        let (line, column) = first_missing.expect("missing cells were seen");
        return Err(Error::MissingData {
            count: missing_count,
            line,
            column,
        });
    }
    let p = p.unwrap_or(0);
    if n == 0 || p == 0 {
        return Err(Error::InvalidInput("input contains no data rows".into()));
    }
    Dataset::new(n, p, values, names)
}

fn csv_error(e: csv::Error) -> Error {
    let line = match e.position() {
        Some(pos) => pos.line(),
        None => 0,
    };
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::ParseError {
            line,
            column: None,
            message: format!("{other:?}"),
        },
    }
}

/// Column means of a row subset.
fn subset_means(d: &Dataset, rows: &[usize]) -> Vec<f64> {
    let p = d.p();
    let mut mean = vec![0.0; p];
    for &i in rows {
        for (m, v) in mean.iter_mut().zip(d.row(i)) {
            *m += v;
        }
    }
    let inv = 1.0 / rows.len() as f64;
    for m in &mut mean {
        *m *= inv;
    }
    mean
}

/// Maximum-likelihood covariance (divisor = row count) of a row subset,
/// centered on the subset's own means. Shared by the full-sample
/// constructors and the per-fold computations in cross-validation.
pub(crate) fn cov_ml_of_rows(d: &Dataset, rows: &[usize]) -> (Vec<f64>, SymMatrix) {
    assert!(!rows.is_empty(), "covariance needs at least one row");
    let p = d.p();
    let mean = subset_means(d, rows);
    let mut packed = vec![0.0; p * (p + 1) / 2];
    let mut centered = vec![0.0; p];
    for &i in rows {
        for ((c, v), m) in centered.iter_mut().zip(d.row(i)).zip(&mean) {
            *c = v - m;
        }
        let mut idx = 0;
        for j in 0..p {
            let cj = centered[j];
            for (slot, ck) in packed[idx..idx + j + 1].iter_mut().zip(&centered) {
                *slot += cj * ck;
            }
            idx += j + 1;
        }
    }
    let inv = 1.0 / rows.len() as f64;
    for v in &mut packed {
        *v *= inv;
    }
    (mean, SymMatrix::from_packed(p, packed))
}

/// Sample covariance with the maximum-likelihood divisor n.
pub fn cov_ml(d: &Dataset) -> SymMatrix {
    let rows: Vec<usize> = (0..d.n()).collect();
    cov_ml_of_rows(d, &rows).1
}

/// Sample covariance with the unbiased divisor n - 1.
pub fn cov_unbiased(d: &Dataset) -> Result<SymMatrix> {
    if d.n() < 2 {
        return Err(Error::InvalidInput(format!(
            "unbiased covariance needs at least 2 observations, got {}",
            d.n()
        )));
    }
    let ml = cov_ml(d);
    let scale = d.n() as f64 / (d.n() - 1) as f64;
    SymMatrix::linear_combination(scale, &ml, 0.0, &ml)
}

/// Rescales a covariance to a correlation matrix with an exactly unit
/// diagonal. Columns are 1-based in the degenerate-variance error.
pub fn to_correlation(s: &SymMatrix) -> Result<SymMatrix> {
    let p = s.dim();
    let mut inv_sd = Vec::with_capacity(p);
    for j in 0..p {
        let v = s.get(j, j);
        if !(v > 0.0) {
            return Err(Error::DegenerateVariance { column: j + 1 });
        }
        inv_sd.push(1.0 / v.sqrt());
    }
    let mut r = SymMatrix::zeros(p);
    for j in 0..p {
        r.set(j, j, 1.0);
        for k in 0..j {
            r.set(j, k, s.get(j, k) * inv_sd[j] * inv_sd[k]);
        }
    }
    Ok(r)
}
