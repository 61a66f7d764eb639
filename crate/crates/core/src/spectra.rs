//! Dense symmetric matrices and their spectral decompositions.
//!
//! Every estimator and condition-number computation in this crate reduces to
//! a symmetric eigenproblem, so this module owns the storage type and the
//! eigensolver. The solver is a cyclic Jacobi iteration: slower than a
//! tridiagonalization pipeline but simple, deterministic, and exact enough at
//! the matrix sizes a desk analysis meets (p up to a few thousand).

use crate::error::{Error, Result};

/// Relative off-diagonal Frobenius threshold at which Jacobi stops.
const JACOBI_TOL: f64 = 1e-12;
/// Hard sweep cap; cyclic Jacobi on a symmetric matrix converges in far fewer.
const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense symmetric matrix with one stored entry per unordered index pair.
///
/// Symmetry is a property of the storage, not a runtime check: `get(j, k)`
/// and `get(k, j)` read the same slot, so the type cannot drift asymmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    /// Lower triangle, row-major: entry (j, k) with j >= k sits at j(j+1)/2 + k.
    data: Vec<f64>,
}

impl SymMatrix {
    fn packed_len(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    /// Zero matrix of dimension `dim` (`dim >= 1`).
    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        SymMatrix {
            dim,
            data: vec![0.0; Self::packed_len(dim)],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    /// `c * I`.
    pub fn scaled_identity(dim: usize, c: f64) -> Self {
        assert!(c.is_finite(), "scale must be finite");
        let mut m = Self::zeros(dim);
        for j in 0..dim {
            m.set(j, j, c);
        }
        m
    }

    /// Diagonal matrix from the given entries.
    pub fn diagonal(entries: &[f64]) -> Self {
        assert!(!entries.is_empty());
        assert!(entries.iter().all(|v| v.is_finite()), "entries must be finite");
        let mut m = Self::zeros(entries.len());
        for (j, &v) in entries.iter().enumerate() {
            m.set(j, j, v);
        }
        m
    }

    /// Builds from a full row-major `dim * dim` slice.
    ///
    /// The input must be symmetric within `1e-8 * max(1, max|a|)`; the stored
    /// matrix averages the two triangles so the result is exactly symmetric.
    pub fn from_dense(dim: usize, full: &[f64]) -> Result<Self> {
        if dim < 1 || full.len() != dim * dim {
            return Err(Error::InvalidInput(format!(
                "expected {dim}x{dim} = {} entries, got {}",
                dim * dim,
                full.len()
            )));
        }
        if let Some(v) = full.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite matrix entry {v}")));
        }
        let scale = full.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut m = Self::zeros(dim);
        for j in 0..dim {
            for k in 0..=j {
                let a = full[j * dim + k];
                let b = full[k * dim + j];
                if (a - b).abs() > 1e-8 * scale {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({j}, {k}): {a} vs {b}"
                    )));
                }
                m.set(j, k, 0.5 * (a + b));
            }
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        let (hi, lo) = if j >= k { (j, k) } else { (k, j) };
        self.data[hi * (hi + 1) / 2 + lo]
    }

    /// Sets entry (j, k), which is the same slot as (k, j).
    #[inline]
    pub fn set(&mut self, j: usize, k: usize, v: f64) {
        debug_assert!(v.is_finite());
        let (hi, lo) = if j >= k { (j, k) } else { (k, j) };
        self.data[hi * (hi + 1) / 2 + lo] = v;
    }

    /// Raw packed storage, exposed so tests can inject non-finite entries
    /// past the checks in [`SymMatrix::set`].
    #[cfg(test)]
    pub(crate) fn packed_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub(crate) fn from_packed(dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), Self::packed_len(dim));
        SymMatrix { dim, data }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|j| self.get(j, j)).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest absolute entrywise difference; dimensions must match.
    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Full row-major copy, both triangles populated.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dim;
        let mut full = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..=j {
                let v = self.get(j, k);
                full[j * n + k] = v;
                full[k * n + j] = v;
            }
        }
        full
    }

    /// `ca * a + cb * b`; dimensions must match.
    pub fn linear_combination(ca: f64, a: &SymMatrix, cb: f64, b: &SymMatrix) -> Result<SymMatrix> {
        if a.dim != b.dim {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: {} vs {}",
                a.dim, b.dim
            )));
        }
        let data = a
            .data
            .iter()
            .zip(&b.data)
            .map(|(x, y)| ca * x + cb * y)
            .collect();
        Ok(SymMatrix { dim: a.dim, data })
    }

    /// `self + c * I`.
    pub fn add_scaled_identity(&self, c: f64) -> SymMatrix {
        let mut m = self.clone();
        for j in 0..m.dim {
            let v = m.get(j, j);
            m.set(j, j, v + c);
        }
        m
    }

    /// Maximum absolute column sum (equals the row variant by symmetry).
    pub fn one_norm(&self) -> f64 {
        let n = self.dim;
        let mut best = 0.0f64;
        for k in 0..n {
            let sum: f64 = (0..n).map(|j| self.get(j, k).abs()).sum();
            best = best.max(sum);
        }
        best
    }

    /// Quadratic form x' A x.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let mut acc = 0.0;
        let mut idx = 0;
        for j in 0..self.dim {
            let row = &self.data[idx..idx + j];
            let mut off = 0.0;
            for (a, xv) in row.iter().zip(x.iter()) {
                off += a * xv;
            }
            acc += x[j] * (2.0 * off + self.data[idx + j] * x[j]);
            idx += j + 1;
        }
        acc
    }
}

/// Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix.
///
/// Eigenvectors are stored transposed so each one is a contiguous slice;
/// `eigenvector(j)` pairs with `eigenvalues()[j]`.
#[derive(Debug, Clone)]
pub struct SpectralDecomp {
    dim: usize,
    values: Vec<f64>,
    vectors_t: Vec<f64>,
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Eigenvalues sorted non-increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn eigenvector(&self, j: usize) -> &[f64] {
        &self.vectors_t[j * self.dim..(j + 1) * self.dim]
    }

    /// Coordinates of `y` in the eigenvector basis (V' y).
    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.dim);
        (0..self.dim)
            .map(|j| {
                self.eigenvector(j)
                    .iter()
                    .zip(y.iter())
                    .map(|(v, yv)| v * yv)
                    .sum()
            })
            .collect()
    }
}

/// Full spectral decomposition via cyclic Jacobi rotations.
///
/// Converges when the off-diagonal Frobenius norm drops to 1e-12 of the input
/// Frobenius norm, capped at 100 sweeps. Eigenvalues come back descending;
/// each eigenvector's largest-magnitude component is made non-negative so
/// non-degenerate decompositions are deterministic.
pub fn decompose(a: &SymMatrix) -> Result<SpectralDecomp> {
    if let Some(v) = a.data.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite matrix entry {v}")));
    }
    let n = a.dim;
    let mut full = a.to_dense();
    let mut vt = vec![0.0; n * n];
    for j in 0..n {
        vt[j * n + j] = 1.0;
    }
    jacobi(&mut full, &mut vt, n)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        full[j * n + j]
            .partial_cmp(&full[i * n + i])
            .expect("eigenvalues are finite")
    });

    let values: Vec<f64> = order.iter().map(|&j| full[j * n + j]).collect();
    let mut vectors_t = vec![0.0; n * n];
    for (row, &src) in order.iter().enumerate() {
        let v = &vt[src * n..(src + 1) * n];
        let dominant = v
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.abs().partial_cmp(&b.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let flip = if v[dominant] < 0.0 { -1.0 } else { 1.0 };
        for (dst, &s) in vectors_t[row * n..(row + 1) * n].iter_mut().zip(v.iter()) {
            *dst = flip * s;
        }
    }

    Ok(SpectralDecomp {
        dim: n,
        values,
        vectors_t,
    })
}

fn frobenius(m: &[f64]) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn off_diagonal_frobenius(a: &[f64], n: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..n {
        for &v in &a[i * n + i + 1..(i + 1) * n] {
            acc += v * v;
        }
    }
    (2.0 * acc).sqrt()
}

fn jacobi(a: &mut [f64], vt: &mut [f64], n: usize) -> Result<()> {
    let norm = frobenius(a);
    if norm == 0.0 {
        return Ok(());
    }
    let stop = JACOBI_TOL * norm;
    for sweep in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_frobenius(a, n) <= stop {
            return Ok(());
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(a, vt, n, p, q, sweep);
            }
        }
    }
    if off_diagonal_frobenius(a, n) <= stop {
        return Ok(());
    }
    Err(Error::NumericalFailure(format!(
        "Jacobi did not converge within {JACOBI_MAX_SWEEPS} sweeps"
    )))
}

#[inline]
fn rotate(a: &mut [f64], vt: &mut [f64], n: usize, p: usize, q: usize, sweep: usize) {
    let apq = a[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    // Entries this far below the diagonal scale cannot move the off-diagonal
    // norm; once past the opening sweeps, zero them instead of rotating.
    if sweep > 3 && apq.abs() <= 0.5 * f64::EPSILON * (app.abs() + aqq.abs()) {
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        return;
    }
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
        sign / (theta.abs() + (1.0 + theta * theta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;

    rotate_rows(a, n, p, q, c, s);
    // The row pass applied only half the similarity transform to the 2x2
    // (p, q) block; its closed form overwrites those four slots.
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    for j in 0..n {
        if j != p && j != q {
            a[j * n + p] = a[p * n + j];
            a[j * n + q] = a[q * n + j];
        }
    }
    rotate_rows(vt, n, p, q, c, s);
}

/// Applies the plane rotation to rows `p` and `q` of a row-major matrix.
#[inline]
fn rotate_rows(m: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    debug_assert!(p < q);
    let (head, tail) = m.split_at_mut(q * n);
    let row_p = &mut head[p * n..(p + 1) * n];
    let row_q = &mut tail[..n];
    for (x, y) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let g = *x;
        let h = *y;
        *x = c * g - s * h;
        *y = s * g + c * h;
    }
}

/// Re-forms V diag(f(d)) V' — a matrix function applied through the spectrum.
///
/// `f` must be finite on every eigenvalue.
pub fn reconstruct(d: &SpectralDecomp, f: impl Fn(f64) -> f64) -> Result<SymMatrix> {
    let n = d.dim;
    let mut w = Vec::with_capacity(n);
    for &ev in &d.values {
        let mapped = f(ev);
        if !mapped.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "eigenvalue map produced non-finite value at eigenvalue {ev}"
            )));
        }
        w.push(mapped);
    }
    let mut packed = vec![0.0; SymMatrix::packed_len(n)];
    for (j, &wj) in w.iter().enumerate() {
        if wj == 0.0 {
            continue;
        }
        let v = d.eigenvector(j);
        let mut idx = 0;
        for i in 0..n {
            let wi = wj * v[i];
            let row = &mut packed[idx..idx + i + 1];
            for (slot, &vk) in row.iter_mut().zip(v.iter()) {
                *slot += wi * vk;
            }
            idx += i + 1;
        }
    }
    Ok(SymMatrix::from_packed(n, packed))
}

/// Symmetric square root of a positive semi-definite matrix.
///
/// Eigenvalues in [-1e-10, 0) are treated as floating-point zeros and
/// clamped; anything below that threshold is a genuine violation.
pub fn matrix_sqrt(a: &SymMatrix) -> Result<SymMatrix> {
    let d = decompose(a)?;
    let min = *d.eigenvalues().last().expect("dim >= 1");
    if min < -1e-10 {
        return Err(Error::NotPositiveSemiDefinite {
            min_eigenvalue: min,
        });
    }
    reconstruct(&d, |x| if x <= 0.0 { 0.0 } else { x.sqrt() })
}
