//! Condition numbers along a penalty grid, plus the reading aids that make
//! the resulting plot interpretable.
//!
//! The central object is the condition-number path: the spectral (or exact
//! one-norm) condition number of a ridge estimate evaluated over a
//! log-equidistant grid of penalty values. Rotation-equivariant estimator
//! configurations need a single decomposition of the sample matrix for the
//! whole grid; everything else pays one decomposition per grid point. On top
//! of the path sit the digit-loss rule of thumb, the second-order finite
//! difference of the path (its acceleration in ln lambda), a flatness
//! heuristic that proposes a minimal penalty, and two closed-form
//! diagnostics: the equicorrelation condition number and the eigenvalue law
//! of identity-contaminated covariances.

use crate::error::{Error, Result};
use crate::estimators::{
    ridge_alt_eigmap, ridge_arch1, rotation_equivariant, scalar_phi, target_matrix,
    validate_target, EstimatorKind, ScalarMap, TargetSpec,
};
use crate::spectra::{decompose, reconstruct, SpectralDecomp, SymMatrix};

/// Which condition number the path carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondNorm {
    /// Ratio of extreme eigenvalues, infinite for singular matrices.
    Spectral,
    /// Product of maximum absolute column sums of the matrix and its inverse.
    One,
}

/// Log-equidistant penalty grid with pinned endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyGrid {
    lambda_min: f64,
    lambda_max: f64,
    values: Vec<f64>,
    tau: f64,
}

impl PenaltyGrid {
    /// Builds a grid of `steps` values with uniform spacing in ln lambda.
    ///
    /// Both endpoints are stored exactly as given; interior points are
    /// exp(ln lambda_min + s tau) with tau = (ln lambda_max - ln lambda_min)
    /// / (steps - 1).
    pub fn new(lambda_min: f64, lambda_max: f64, steps: usize) -> Result<Self> {
        if !(lambda_min.is_finite() && lambda_min > 0.0)
            || !(lambda_max.is_finite() && lambda_max > 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "grid endpoints must be positive and finite, got [{lambda_min}, {lambda_max}]"
            )));
        }
        if lambda_min >= lambda_max {
            return Err(Error::InvalidInput(format!(
                "grid needs lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]"
            )));
        }
        if steps < 3 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 3 steps, got {steps}"
            )));
        }
        let ln_min = lambda_min.ln();
        let tau = (lambda_max.ln() - ln_min) / (steps - 1) as f64;
        let mut values = Vec::with_capacity(steps);
        values.push(lambda_min);
        for s in 1..steps - 1 {
            values.push((ln_min + s as f64 * tau).exp());
        }
        values.push(lambda_max);
        Ok(PenaltyGrid {
            lambda_min,
            lambda_max,
            values,
            tau,
        })
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn steps(&self) -> usize {
        self.values.len()
    }

    /// Uniform spacing in ln lambda.
    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Grid values, ascending, endpoints exact.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Index and penalty value where the path first turns flat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KneePoint {
    pub lambda: f64,
    pub index: usize,
}

/// Condition numbers over a penalty grid with optional reading aids.
///
/// `cond` uses `f64::INFINITY` for singular estimates; the aids skip those
/// entries. `acceleration` holds one entry per interior grid point, entry i
/// belonging to grid index i + 1.
#[derive(Debug, Clone)]
pub struct ConditionPath {
    pub grid: PenaltyGrid,
    pub norm: CondNorm,
    pub cond: Vec<f64>,
    pub digits_lost: Option<Vec<Option<i32>>>,
    pub acceleration: Option<Vec<Option<f64>>>,
    pub knee: Option<KneePoint>,
}

fn cond_ratio(d1: f64, dp: f64) -> Result<f64> {
    if !(d1 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "largest eigenvalue {d1} is not positive; condition number undefined"
        )));
    }
    if dp <= 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(d1 / dp)
    }
}

/// Spectral condition number d_1 / d_p, infinite when d_p <= 0.
pub fn spectral_condition(a: &SymMatrix) -> Result<f64> {
    let d = decompose(a)?;
    let evs = d.eigenvalues();
    cond_ratio(evs[0], *evs.last().expect("dim >= 1"))
}

/// Exact one-norm condition number from a matrix and its inverse.
pub fn one_norm_condition(a: &SymMatrix, a_inv: &SymMatrix) -> f64 {
    assert_eq!(a.dim(), a_inv.dim(), "dimension mismatch");
    a.one_norm() * a_inv.one_norm()
}

/// Condition number of the ridge estimate at every grid value.
///
/// Single-threaded; see [`condition_path_with_threads`] for the parallel
/// variant of the per-grid-point (non-equivariant) path.
pub fn condition_path(
    s: &SymMatrix,
    kind: EstimatorKind,
    spec: &TargetSpec,
    grid: &PenaltyGrid,
    norm: CondNorm,
) -> Result<ConditionPath> {
    condition_path_with_threads(s, kind, spec, grid, norm, 1)
}

/// As [`condition_path`], spreading grid points over `threads` workers when
/// each point needs its own decomposition. The equivariant spectral path is
/// a cheap sequential sweep and ignores `threads`.
pub fn condition_path_with_threads(
    s: &SymMatrix,
    kind: EstimatorKind,
    spec: &TargetSpec,
    grid: &PenaltyGrid,
    norm: CondNorm,
    threads: usize,
) -> Result<ConditionPath> {
    // The penalty domains are intervals, so checking the endpoints covers
    // the whole grid.
    kind.check_lambda(grid.lambda_min())?;
    kind.check_lambda(grid.lambda_max())?;

    let target = match kind {
        EstimatorKind::ArchII => None,
        _ => {
            let t = target_matrix(spec, s)?;
            validate_target(kind, &t)?;
            Some(t)
        }
    };

    let cond = if rotation_equivariant(kind, spec, s) {
        let d = decompose(s)?;
        let map = ScalarMap {
            kind,
            phi: scalar_phi(spec, s).unwrap_or(0.0),
        };
        let evs = d.eigenvalues();
        let (d1, dp) = (evs[0], *evs.last().expect("dim >= 1"));
        match norm {
            // The maps are non-decreasing in d, so the estimate's extreme
            // eigenvalues are the mapped extremes of the sample spectrum.
            CondNorm::Spectral => grid
                .values()
                .iter()
                .map(|&l| cond_ratio(map.apply(d1, l), map.apply(dp, l)))
                .collect::<Result<Vec<_>>>()?,
            // Column sums need the full matrix, but the shared decomposition
            // still saves the per-lambda eigensolve.
            CondNorm::One => eval_grid(grid, threads, |l| one_norm_from_decomp(&d, map, l))?,
        }
    } else {
        let t = target.as_ref().expect("non-equivariant implies a target");
        match (kind, norm) {
            (EstimatorKind::ArchI, CondNorm::Spectral) => eval_grid(grid, threads, |l| {
                spectral_condition(&ridge_arch1(s, t, l)?)
            })?,
            (EstimatorKind::ArchI, CondNorm::One) => eval_grid(grid, threads, |l| {
                let est = ridge_arch1(s, t, l)?;
                let d = decompose(&est)?;
                let evs = d.eigenvalues();
                if *evs.last().expect("dim >= 1") <= 0.0 {
                    return Ok(f64::INFINITY);
                }
                let inv = reconstruct(&d, |x| 1.0 / x)?;
                Ok(one_norm_condition(&est, &inv))
            })?,
            (EstimatorKind::Alt, CondNorm::Spectral) => eval_grid(grid, threads, |l| {
                // The estimate's eigenvalues are the shifted sample spectrum
                // pushed through the (monotone) scalar map, so one
                // decomposition of s - lambda t per point suffices.
                let m = SymMatrix::linear_combination(1.0, s, -l, t)?;
                let d = decompose(&m)?;
                let evs = d.eigenvalues();
                cond_ratio(
                    alt_of(evs[0], l),
                    alt_of(*evs.last().expect("dim >= 1"), l),
                )
            })?,
            (EstimatorKind::Alt, CondNorm::One) => eval_grid(grid, threads, |l| {
                let m = SymMatrix::linear_combination(1.0, s, -l, t)?;
                let d = decompose(&m)?;
                let est = reconstruct(&d, |x| alt_of(x, l))?;
                let inv = reconstruct(&d, |x| 1.0 / alt_of(x, l))?;
                Ok(one_norm_condition(&est, &inv))
            })?,
            (EstimatorKind::ArchII, _) => unreachable!("ArchII is always equivariant"),
        }
    };

    Ok(ConditionPath {
        grid: grid.clone(),
        norm,
        cond,
        digits_lost: None,
        acceleration: None,
        knee: None,
    })
}

/// Alternative-estimator map applied to an eigenvalue of s - lambda t.
fn alt_of(x: f64, lambda: f64) -> f64 {
    // phi = 0 because the target shift already happened inside the matrix.
    ridge_alt_eigmap(x, 0.0, lambda)
}

fn one_norm_from_decomp(d: &SpectralDecomp, map: ScalarMap, lambda: f64) -> Result<f64> {
    let mapped: Vec<f64> = d.eigenvalues().iter().map(|&x| map.apply(x, lambda)).collect();
    // The maps are monotone, so the last mapped value is the smallest.
    if *mapped.last().expect("dim >= 1") <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let est = reconstruct(d, |x| map.apply(x, lambda))?;
    let inv = reconstruct(d, |x| 1.0 / map.apply(x, lambda))?;
    Ok(one_norm_condition(&est, &inv))
}

/// Runs `eval` on every grid value, chunking across `threads` workers.
///
/// Grid points are independent pure computations over shared read-only
/// inputs writing to disjoint output slots; the first error wins.
fn eval_grid<F>(grid: &PenaltyGrid, threads: usize, eval: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let values = grid.values();
    let threads = threads.max(1).min(values.len());
    if threads == 1 {
        return values.iter().map(|&l| eval(l)).collect();
    }
    let mut cond = vec![0.0f64; values.len()];
    let chunk = values.len().div_ceil(threads);
    let eval = &eval;
    let first_error = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(threads);
        for (vals, out) in values.chunks(chunk).zip(cond.chunks_mut(chunk)) {
            handles.push(scope.spawn(move || -> Result<()> {
                for (&l, slot) in vals.iter().zip(out.iter_mut()) {
                    *slot = eval(l)?;
                }
                Ok(())
            }));
        }
        handles
            .into_iter()
            .filter_map(|h| h.join().expect("path worker panicked").err())
            .next()
    });
    match first_error {
        Some(e) => Err(e),
        None => Ok(cond),
    }
}

/// Decimal digits of accuracy expected lost when solving against a matrix
/// of the given condition number: floor(log10 cond). `None` marks the
/// infinite loss of a singular matrix.
pub fn digits_lost(cond: f64) -> Option<i32> {
    if cond.is_infinite() {
        return None;
    }
    debug_assert!(cond >= 1.0, "condition numbers are at least 1, got {cond}");
    Some(cond.log10().floor() as i32)
}

/// Central second difference of the path in ln lambda, interior points only.
///
/// Entry i belongs to grid index i + 1 and equals
/// (cond[i+2] - 2 cond[i+1] + cond[i]) / tau^2; entries whose stencil
/// touches an infinite condition number are `None`.
pub fn acceleration(path: &ConditionPath) -> Vec<Option<f64>> {
    assert_eq!(
        path.norm,
        CondNorm::Spectral,
        "acceleration is defined for the spectral path"
    );
    let cond = &path.cond;
    let tau_sq = path.grid.tau() * path.grid.tau();
    (1..cond.len() - 1)
        .map(|s| {
            let (a, b, c) = (cond[s - 1], cond[s], cond[s + 1]);
            (a.is_finite() && b.is_finite() && c.is_finite())
                .then(|| (c - 2.0 * b + a) / tau_sq)
        })
        .collect()
}

/// Default flatness run length: max(3, steps / 100).
pub fn knee_window_default(steps: usize) -> usize {
    (steps / 100).max(3)
}

/// First grid index from which `window` consecutive relative drops of the
/// path all stay at or below `rel_tol`.
///
/// Infinite entries never count as flat. Returns `None` when no such run
/// exists in the grid.
pub fn find_knee(path: &ConditionPath, rel_tol: f64, window: usize) -> Option<KneePoint> {
    assert!(
        rel_tol > 0.0 && rel_tol < 1.0,
        "relative tolerance must lie in (0, 1)"
    );
    assert!(window >= 1, "window must be at least 1");
    assert_eq!(
        path.norm,
        CondNorm::Spectral,
        "the flatness heuristic reads the spectral path"
    );
    let cond = &path.cond;
    if cond.len() < window + 1 {
        return None;
    }
    'candidate: for k in 0..cond.len() - window {
        for s in k..k + window {
            let (a, b) = (cond[s], cond[s + 1]);
            if !a.is_finite() || !b.is_finite() || (a - b) / a > rel_tol {
                continue 'candidate;
            }
        }
        return Some(KneePoint {
            lambda: path.grid.values()[k],
            index: k,
        });
    }
    None
}

/// Equicorrelation matrix (1 - rho) I + rho J (unit diagonal, constant
/// off-diagonal rho), positive definite on rho in (-1/(p-1), 1).
pub fn equicorrelation_matrix(p: usize, rho: f64) -> Result<SymMatrix> {
    check_equicorr_domain(p, rho)?;
    let mut m = SymMatrix::identity(p);
    for j in 0..p {
        for k in 0..j {
            m.set(j, k, rho);
        }
    }
    Ok(m)
}

/// Closed-form spectral condition number of the equicorrelation matrix.
///
/// Its spectrum has two points, 1 + (p-1) rho and 1 - rho; the condition
/// number is their ratio, larger over smaller. For rho >= 0 this reduces to
/// the familiar 1 + p rho / (1 - rho).
pub fn equicorr_condition(p: usize, rho: f64) -> Result<f64> {
    check_equicorr_domain(p, rho)?;
    let bulk = 1.0 + (p - 1) as f64 * rho;
    let rest = 1.0 - rho;
    Ok(bulk.max(rest) / bulk.min(rest))
}

fn check_equicorr_domain(p: usize, rho: f64) -> Result<()> {
    if p < 2 {
        return Err(Error::InvalidInput(format!(
            "equicorrelation needs p >= 2, got {p}"
        )));
    }
    let lo = -1.0 / (p - 1) as f64;
    if !rho.is_finite() || rho <= lo || rho >= 1.0 {
        return Err(Error::InvalidInput(format!(
            "equicorrelation parameter {rho} outside ({lo}, 1)"
        )));
    }
    Ok(())
}

/// Eigenvalues of a covariance contaminated by c-scaled identity noise:
/// d_j of (1 - mix) S + c mix I is (1 - mix) d_j + c mix.
///
/// `d` must be sorted descending; the output then is too.
pub fn contaminated_eigenvalues(d: &[f64], c: f64, mix: f64) -> Vec<f64> {
    assert!(c.is_finite() && c > 0.0, "contamination scale must be positive");
    assert!(
        (0.0..=1.0).contains(&mix),
        "mixing proportion must lie in [0, 1]"
    );
    debug_assert!(
        d.windows(2).all(|w| w[0] >= w[1]),
        "eigenvalues must be sorted descending"
    );
    d.iter().map(|&dj| (1.0 - mix) * dj + c * mix).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::ridge_alt;
    use crate::testutil::{assert_close, assert_rel_close, random_psd, random_singular_psd};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(entries: &[f64]) -> SymMatrix {
        SymMatrix::diagonal(entries)
    }

    fn fake_path(cond: Vec<f64>, grid: PenaltyGrid) -> ConditionPath {
        ConditionPath {
            grid,
            norm: CondNorm::Spectral,
            cond,
            digits_lost: None,
            acceleration: None,
            knee: None,
        }
    }

    #[test]
    fn grid_pins_endpoints_and_spaces_uniformly() {
        let g = PenaltyGrid::new(1e-4, 100.0, 57).unwrap();
        assert_eq!(g.values()[0], 1e-4);
        assert_eq!(*g.values().last().unwrap(), 100.0);
        assert_eq!(g.steps(), 57);
        let expected_tau = (100.0f64.ln() - 1e-4f64.ln()) / 56.0;
        assert_close(g.tau(), expected_tau, 1e-15);
        for w in g.values().windows(2) {
            assert_close(w[1].ln() - w[0].ln(), g.tau(), 1e-12);
        }
    }

    #[test]
    fn grid_rejects_bad_parameters() {
        assert!(PenaltyGrid::new(0.0, 1.0, 10).is_err());
        assert!(PenaltyGrid::new(-1.0, 1.0, 10).is_err());
        assert!(PenaltyGrid::new(1.0, 1.0, 10).is_err());
        assert!(PenaltyGrid::new(2.0, 1.0, 10).is_err());
        assert!(PenaltyGrid::new(0.1, 1.0, 2).is_err());
        assert!(PenaltyGrid::new(0.1, f64::INFINITY, 10).is_err());
        assert!(PenaltyGrid::new(0.1, 1.0, 3).is_ok());
    }

    #[test]
    fn spectral_condition_basics() {
        assert_close(spectral_condition(&diag(&[3.0, 1.0])).unwrap(), 3.0, 1e-12);
        assert!(spectral_condition(&diag(&[3.0, 0.0]))
            .unwrap()
            .is_infinite());
        assert!(matches!(
            spectral_condition(&SymMatrix::zeros(2)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn spectral_condition_matches_equicorr_closed_form() {
        let m = equicorrelation_matrix(10, 0.5).unwrap();
        let direct = spectral_condition(&m).unwrap();
        assert_rel_close(direct, 11.0, 1e-10);
        assert_close(equicorr_condition(10, 0.5).unwrap(), 11.0, 1e-12);
    }

    #[test]
    fn one_norm_condition_by_hand() {
        let i2 = SymMatrix::identity(2);
        assert_close(one_norm_condition(&i2, &i2), 1.0, 0.0);
        // diag(3,1): column sums 3 and 1; inverse has column sums 1/3 and 1.
        assert_close(
            one_norm_condition(&diag(&[3.0, 1.0]), &diag(&[1.0 / 3.0, 1.0])),
            3.0,
            1e-15,
        );
        // [[2,1],[1,2]] has inverse (1/3)[[2,-1],[-1,2]]: column sums 3 and 1.
        let a = SymMatrix::from_dense(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let inv =
            SymMatrix::from_dense(2, &[2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 2.0 / 3.0]).unwrap();
        assert_close(one_norm_condition(&a, &inv), 3.0, 1e-15);
    }

    #[test]
    fn arch2_path_has_closed_form() {
        let s = diag(&[3.0, 0.0]);
        let grid = PenaltyGrid::new((-4.0f64).exp(), 4.0f64.exp(), 33).unwrap();
        let path =
            condition_path(&s, EstimatorKind::ArchII, &TargetSpec::Null, &grid, CondNorm::Spectral)
                .unwrap();
        for (&l, &c) in grid.values().iter().zip(&path.cond) {
            assert_rel_close(c, (3.0 + l) / l, 1e-12);
        }
    }

    #[test]
    fn alt_path_endpoints_match_reference_ratios() {
        let s = diag(&[3.0, 0.0]);
        let grid = PenaltyGrid::new(1e-10, 1e4, 15).unwrap();
        let path = condition_path(
            &s,
            EstimatorKind::Alt,
            &TargetSpec::ScalarUnit(2.0),
            &grid,
            CondNorm::Spectral,
        )
        .unwrap();
        assert_rel_close(path.cond[0], 300_003.0, 1e-4);
        assert!((path.cond[14] - 1.00015).abs() < 1e-4);
    }

    #[test]
    fn arch1_path_reaches_target_condition() {
        // With t = I the path ends at C(T) = 1 exactly when lambda_max = 1.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let s = random_psd(&mut rng, 6);
        let grid = PenaltyGrid::new(1e-3, 1.0, 21).unwrap();
        let path = condition_path(
            &s,
            EstimatorKind::ArchI,
            &TargetSpec::ScalarUnit(1.0),
            &grid,
            CondNorm::Spectral,
        )
        .unwrap();
        assert_close(*path.cond.last().unwrap(), 1.0, 1e-12);
        for &c in &path.cond {
            assert!(c >= 1.0);
        }
    }

    #[test]
    fn fast_and_slow_spectral_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let grid = PenaltyGrid::new(1e-6, 1e3, 40).unwrap();
        for _ in 0..10 {
            let p = rng.gen_range(2..=10);
            let s = if rng.gen_bool(0.5) {
                random_psd(&mut rng, p)
            } else {
                random_singular_psd(&mut rng, p)
            };
            let phi = rng.gen_range(0.2..3.0);
            // Custom forces the per-point decomposition even though the
            // matrix is the same scalar target the fast path would use.
            let fast = condition_path(
                &s,
                EstimatorKind::Alt,
                &TargetSpec::ScalarUnit(phi),
                &grid,
                CondNorm::Spectral,
            )
            .unwrap();
            let slow = condition_path(
                &s,
                EstimatorKind::Alt,
                &TargetSpec::Custom(SymMatrix::scaled_identity(p, phi)),
                &grid,
                CondNorm::Spectral,
            )
            .unwrap();
            for (a, b) in fast.cond.iter().zip(&slow.cond) {
                if a.is_infinite() || b.is_infinite() {
                    assert_eq!(a, b);
                } else {
                    assert_rel_close(*a, *b, 1e-9);
                }
            }
        }
    }

    #[test]
    fn one_norm_path_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let s = random_psd(&mut rng, 5);
        let grid = PenaltyGrid::new(0.01, 10.0, 9).unwrap();
        let path = condition_path(
            &s,
            EstimatorKind::Alt,
            &TargetSpec::ScalarUnit(1.0),
            &grid,
            CondNorm::One,
        )
        .unwrap();
        let t = SymMatrix::identity(5);
        for (&l, &c) in grid.values().iter().zip(&path.cond) {
            let est = ridge_alt(&s, &t, l).unwrap();
            let inv = crate::estimators::precision_of(&est).unwrap();
            assert_rel_close(c, one_norm_condition(&est, &inv), 1e-9);
        }
        // The Custom route computes the same numbers per-point.
        let slow = condition_path(
            &s,
            EstimatorKind::Alt,
            &TargetSpec::Custom(t),
            &grid,
            CondNorm::One,
        )
        .unwrap();
        for (a, b) in path.cond.iter().zip(&slow.cond) {
            assert_rel_close(*a, *b, 1e-9);
        }
    }

    #[test]
    fn threaded_path_equals_sequential() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        let s = random_psd(&mut rng, 6);
        let t = random_psd(&mut rng, 6).add_scaled_identity(1.0);
        let spec = TargetSpec::Custom(t);
        for (kind, lambda_max) in [(EstimatorKind::ArchI, 1.0), (EstimatorKind::Alt, 10.0)] {
            let grid = PenaltyGrid::new(1e-3, lambda_max, 17).unwrap();
            let seq = condition_path(&s, kind, &spec, &grid, CondNorm::Spectral).unwrap();
            let par =
                condition_path_with_threads(&s, kind, &spec, &grid, CondNorm::Spectral, 3)
                    .unwrap();
            assert_eq!(seq.cond, par.cond);
        }
    }

    #[test]
    fn path_rejects_out_of_domain_grid() {
        let s = diag(&[2.0, 1.0]);
        let grid = PenaltyGrid::new(0.1, 2.0, 5).unwrap();
        assert!(matches!(
            condition_path(
                &s,
                EstimatorKind::ArchI,
                &TargetSpec::ScalarUnit(1.0),
                &grid,
                CondNorm::Spectral
            ),
            Err(Error::PenaltyOutOfDomain { .. })
        ));
    }

    #[test]
    fn digit_loss_thresholds() {
        assert_eq!(digits_lost(184.95), Some(2));
        assert_eq!(digits_lost(9456.0), Some(3));
        assert_eq!(digits_lost(1.0), Some(0));
        assert_eq!(digits_lost(f64::INFINITY), None);
    }

    #[test]
    fn acceleration_of_constant_path_is_zero() {
        let grid = PenaltyGrid::new(0.1, 10.0, 11).unwrap();
        let path = fake_path(vec![5.0; 11], grid);
        for a in acceleration(&path) {
            assert_close(a.unwrap(), 0.0, 1e-12);
        }
    }

    #[test]
    fn acceleration_is_exact_for_quadratics_in_ln_lambda() {
        let grid = PenaltyGrid::new(0.05, 20.0, 25).unwrap();
        let cond: Vec<f64> = grid.values().iter().map(|l| l.ln().powi(2)).collect();
        let path = fake_path(cond, grid);
        for a in acceleration(&path) {
            assert_close(a.unwrap(), 2.0, 1e-8);
        }
    }

    #[test]
    fn acceleration_tracks_cubic_second_derivative() {
        let grid = PenaltyGrid::new(0.05, 20.0, 25).unwrap();
        let cond: Vec<f64> = grid.values().iter().map(|l| l.ln().powi(3)).collect();
        let tau_sq = grid.tau() * grid.tau();
        let values = grid.values().to_vec();
        let path = fake_path(cond, grid);
        for (i, a) in acceleration(&path).into_iter().enumerate() {
            let expected = 6.0 * values[i + 1].ln();
            // The truncation term carries the fourth derivative, which is
            // zero for a cubic; only rounding noise remains.
            assert!((a.unwrap() - expected).abs() <= tau_sq.max(1e-9));
        }
    }

    #[test]
    fn acceleration_skips_infinite_stencils() {
        let grid = PenaltyGrid::new(0.1, 10.0, 5).unwrap();
        let path = fake_path(vec![f64::INFINITY, 4.0, 3.0, 2.0, 1.0], grid);
        let acc = acceleration(&path);
        assert_eq!(acc.len(), 3);
        assert!(acc[0].is_none());
        assert!(acc[1].is_some());
        assert!(acc[2].is_some());
    }

    #[test]
    fn knee_of_flat_path_is_first_index() {
        let grid = PenaltyGrid::new(0.1, 10.0, 20).unwrap();
        let path = fake_path(vec![2.0; 20], grid);
        let knee = find_knee(&path, 0.01, 5).unwrap();
        assert_eq!(knee.index, 0);
        assert_eq!(knee.lambda, 0.1);
    }

    #[test]
    fn knee_matches_exhaustive_scan() {
        let s = diag(&[3.0, 0.0]);
        let grid = PenaltyGrid::new(1e-4, 1e4, 200).unwrap();
        let path =
            condition_path(&s, EstimatorKind::ArchII, &TargetSpec::Null, &grid, CondNorm::Spectral)
                .unwrap();
        let (rel_tol, window) = (0.01, 5);
        let knee = find_knee(&path, rel_tol, window).unwrap();
        // Independent brute-force scan over every candidate start index.
        let mut oracle = None;
        for k in 0..path.cond.len() - window {
            let flat = (k..k + window).all(|s| {
                let (a, b) = (path.cond[s], path.cond[s + 1]);
                a.is_finite() && b.is_finite() && (a - b) / a <= rel_tol
            });
            if flat {
                oracle = Some(k);
                break;
            }
        }
        assert_eq!(knee.index, oracle.unwrap());
        assert!(knee.index > 0, "a steep start should push the knee inward");
    }

    #[test]
    fn knee_absent_on_steep_path() {
        let grid = PenaltyGrid::new(0.1, 10.0, 10).unwrap();
        // Halving at every step never flattens.
        let cond: Vec<f64> = (0..10).map(|s| 2f64.powi(-(s as i32)) * 1e6).collect();
        let path = fake_path(cond, grid);
        assert!(find_knee(&path, 0.01, 3).is_none());
        // A window longer than the path cannot be satisfied either.
        let flat = fake_path(vec![1.0; 10], PenaltyGrid::new(0.1, 10.0, 10).unwrap());
        assert!(find_knee(&flat, 0.01, 10).is_none());
        assert!(find_knee(&flat, 0.01, 9).is_some());
    }

    #[test]
    fn knee_ignores_infinite_prefix() {
        let grid = PenaltyGrid::new(0.1, 10.0, 6).unwrap();
        let path = fake_path(
            vec![f64::INFINITY, f64::INFINITY, 2.0, 2.0, 2.0, 2.0],
            grid,
        );
        assert_eq!(find_knee(&path, 0.01, 3).unwrap().index, 2);
    }

    #[test]
    fn knee_window_default_scales_with_grid() {
        assert_eq!(knee_window_default(50), 3);
        assert_eq!(knee_window_default(300), 3);
        assert_eq!(knee_window_default(1000), 10);
    }

    #[test]
    fn equicorrelation_spectrum_and_condition() {
        assert_close(equicorr_condition(4, 0.0).unwrap(), 1.0, 0.0);
        assert_close(equicorr_condition(10, 0.5).unwrap(), 11.0, 1e-12);
        // Negative correlation flips which eigenvalue is extreme: the
        // closed form stays the ratio of largest to smallest.
        let m = equicorrelation_matrix(5, -0.1).unwrap();
        let d = decompose(&m).unwrap();
        assert_close(d.eigenvalues()[0], 1.1, 1e-10);
        assert_close(*d.eigenvalues().last().unwrap(), 0.6, 1e-10);
        assert_rel_close(
            equicorr_condition(5, -0.1).unwrap(),
            spectral_condition(&m).unwrap(),
            1e-10,
        );
        // For rho >= 0 the textbook form 1 + p rho / (1 - rho) applies.
        let (p, rho) = (7, 0.3);
        assert_rel_close(
            equicorr_condition(p, rho).unwrap(),
            1.0 + p as f64 * rho / (1.0 - rho),
            1e-12,
        );
    }

    #[test]
    fn equicorrelation_domain_enforced() {
        assert!(equicorr_condition(1, 0.5).is_err());
        assert!(equicorr_condition(5, 1.0).is_err());
        assert!(equicorr_condition(5, -0.25).is_err());
        assert!(equicorr_condition(5, -0.24).is_ok());
        assert!(equicorrelation_matrix(5, 1.5).is_err());
    }

    #[test]
    fn contamination_law() {
        let d = [3.0, 0.0];
        assert_eq!(contaminated_eigenvalues(&d, 2.0, 0.0), vec![3.0, 0.0]);
        assert_eq!(contaminated_eigenvalues(&d, 2.0, 1.0), vec![2.0, 2.0]);
        assert_eq!(contaminated_eigenvalues(&d, 2.0, 0.5), vec![2.5, 1.0]);
        let out = contaminated_eigenvalues(&[5.0, 2.0, 1.0, 0.5], 3.0, 0.25);
        assert!(out.windows(2).all(|w| w[0] >= w[1]));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn grid_spacing_is_uniform(
                ln_min in -20.0f64..5.0,
                width in 0.5f64..25.0,
                steps in 3usize..200,
            ) {
                let g = PenaltyGrid::new(ln_min.exp(), (ln_min + width).exp(), steps).unwrap();
                prop_assert_eq!(g.values().len(), steps);
                for w in g.values().windows(2) {
                    prop_assert!((w[1].ln() - w[0].ln() - g.tau()).abs() <= 1e-12);
                }
            }

            #[test]
            fn equivariant_paths_decrease_toward_target(seed in 0u64..500) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = rng.gen_range(2..=8);
                let s = if seed % 3 == 0 {
                    random_singular_psd(&mut rng, p)
                } else {
                    random_psd(&mut rng, p)
                };
                let grid = PenaltyGrid::new(1e-4, 1e3, 30).unwrap();
                let configs: Vec<(EstimatorKind, TargetSpec, PenaltyGrid)> = vec![
                    (EstimatorKind::ArchII, TargetSpec::Null, grid.clone()),
                    (EstimatorKind::Alt, TargetSpec::ScalarUnit(1.0), grid),
                    (
                        EstimatorKind::ArchI,
                        TargetSpec::ScalarUnit(1.0),
                        PenaltyGrid::new(1e-4, 1.0, 30).unwrap(),
                    ),
                ];
                for (kind, spec, grid) in configs {
                    let path =
                        condition_path(&s, kind, &spec, &grid, CondNorm::Spectral).unwrap();
                    for w in path.cond.windows(2) {
                        prop_assert!(
                            w[1] <= w[0] * (1.0 + 1e-12) || w[0].is_infinite(),
                            "path increased from {} to {} under {:?}",
                            w[0],
                            w[1],
                            kind
                        );
                    }
                    for &c in &path.cond {
                        prop_assert!(c >= 1.0 - 1e-12);
                    }
                }
            }

            #[test]
            fn scaling_leaves_spectral_condition_alone(
                seed in 0u64..500,
                scale in 1e-6f64..1e6,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = rng.gen_range(2..=8);
                let s = random_psd(&mut rng, p);
                let scaled = SymMatrix::linear_combination(scale, &s, 0.0, &s).unwrap();
                let a = spectral_condition(&s).unwrap();
                let b = spectral_condition(&scaled).unwrap();
                prop_assert!((a - b).abs() <= 1e-9 * a);
            }

            #[test]
            fn covariance_and_precision_share_condition(seed in 0u64..200) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = rng.gen_range(2..=8);
                let a = random_psd(&mut rng, p).add_scaled_identity(0.05);
                let inv = crate::estimators::precision_of(&a).unwrap();
                let ca = spectral_condition(&a).unwrap();
                let ci = spectral_condition(&inv).unwrap();
                prop_assert!((ca - ci).abs() <= 1e-9 * ca);
            }
        }
    }
}
