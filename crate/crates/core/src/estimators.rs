//! Ridge-type covariance estimators and their precision counterparts.
//!
//! Three families are provided: a convex combination of the sample covariance
//! with a positive definite target, the classic add-a-ridge form s + lambda*I,
//! and an alternative estimator derived from a penalized likelihood whose
//! closed form runs through a matrix square root. Whenever the target is a
//! scalar multiple of the identity the estimators act on eigenvalues alone
//! and leave eigenvectors untouched; `scalar_phi` detects that case and the
//! per-eigenvalue maps here are what the fast condition-number path reuses.

use crate::error::{Error, Result};
use crate::spectra::{decompose, reconstruct, SymMatrix};

/// Shrinkage target selector, materialized by [`target_matrix`].
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// Zero matrix. Legal only with the alternative estimator.
    Null,
    /// phi * I with phi > 0.
    ScalarUnit(f64),
    /// [p / trace(s)] * I: the reciprocal of the average eigenvalue.
    DiagAverageEV,
    /// Diagonal matrix of reciprocal variances, diag(1 / s_jj).
    DiagReciprocalVariance,
    /// Arbitrary symmetric target of matching dimension.
    Custom(SymMatrix),
}

/// The three estimator families and their penalty domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    /// (1 - lambda) s + lambda t with lambda in (0, 1]; t must be p.d.
    ArchI,
    /// s + lambda I with lambda in (0, inf).
    ArchII,
    /// [lambda I + (s - lambda t)^2 / 4]^{1/2} + (s - lambda t) / 2 with
    /// lambda in (0, inf); t must be p.s.d.
    Alt,
}

impl EstimatorKind {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::ArchI => "archetypal ridge I",
            EstimatorKind::ArchII => "archetypal ridge II",
            EstimatorKind::Alt => "alternative ridge",
        }
    }

    /// Human-readable penalty domain, used in error messages.
    pub fn domain(self) -> &'static str {
        match self {
            EstimatorKind::ArchI => "(0, 1]",
            EstimatorKind::ArchII | EstimatorKind::Alt => "(0, inf)",
        }
    }

    pub fn lambda_in_domain(self, lambda: f64) -> bool {
        lambda.is_finite()
            && lambda > 0.0
            && match self {
                EstimatorKind::ArchI => lambda <= 1.0,
                EstimatorKind::ArchII | EstimatorKind::Alt => true,
            }
    }

    pub(crate) fn check_lambda(self, lambda: f64) -> Result<()> {
        if self.lambda_in_domain(lambda) {
            Ok(())
        } else {
            Err(Error::PenaltyOutOfDomain {
                lambda,
                estimator: self.label(),
                domain: self.domain(),
            })
        }
    }
}

/// Materializes the shrinkage target for the given sample matrix.
///
/// Definiteness is not checked here; [`validate_target`] does that once the
/// estimator family (and hence the requirement) is known.
pub fn target_matrix(spec: &TargetSpec, s: &SymMatrix) -> Result<SymMatrix> {
    let p = s.dim();
    match spec {
        TargetSpec::Null => Ok(SymMatrix::zeros(p)),
        TargetSpec::ScalarUnit(phi) => {
            if !phi.is_finite() || *phi <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "scalar target multiplier must be positive, got {phi}"
                )));
            }
            Ok(SymMatrix::scaled_identity(p, *phi))
        }
        TargetSpec::DiagAverageEV => {
            // trace(s) equals the eigenvalue sum, so p / trace is the
            // reciprocal average eigenvalue without a decomposition.
            let trace = s.trace();
            if !(trace > 0.0) {
                return Err(Error::SingularTarget(format!(
                    "average eigenvalue {} is not positive",
                    trace / p as f64
                )));
            }
            Ok(SymMatrix::scaled_identity(p, p as f64 / trace))
        }
        TargetSpec::DiagReciprocalVariance => {
            let mut t = SymMatrix::zeros(p);
            for j in 0..p {
                let v = s.get(j, j);
                if v <= 0.0 {
                    return Err(Error::SingularTarget(format!(
                        "diagonal entry {} is {v}, reciprocal variance undefined",
                        j + 1
                    )));
                }
                t.set(j, j, 1.0 / v);
            }
            Ok(t)
        }
        TargetSpec::Custom(t) => {
            if t.dim() != p {
                return Err(Error::InvalidInput(format!(
                    "target dimension {} does not match data dimension {p}",
                    t.dim()
                )));
            }
            Ok(t.clone())
        }
    }
}

/// Returns phi when the materialized target would be phi * I.
///
/// Scalar targets commute with everything, so the estimate shares the sample
/// eigenvectors and a single decomposition serves every penalty value. The
/// reciprocal-variance target collapses to a scalar one exactly when the
/// diagonal is constant (a correlation matrix, for instance).
pub fn scalar_phi(spec: &TargetSpec, s: &SymMatrix) -> Option<f64> {
    match spec {
        TargetSpec::Null => Some(0.0),
        TargetSpec::ScalarUnit(phi) => (phi.is_finite() && *phi > 0.0).then_some(*phi),
        TargetSpec::DiagAverageEV => {
            let phi = s.dim() as f64 / s.trace();
            (phi.is_finite() && phi > 0.0).then_some(phi)
        }
        TargetSpec::DiagReciprocalVariance => {
            let v0 = s.get(0, 0);
            if v0 > 0.0 && (1..s.dim()).all(|j| s.get(j, j) == v0) {
                Some(1.0 / v0)
            } else {
                None
            }
        }
        TargetSpec::Custom(_) => None,
    }
}

/// True when the estimate keeps the eigenvectors of `s`.
pub fn rotation_equivariant(kind: EstimatorKind, spec: &TargetSpec, s: &SymMatrix) -> bool {
    matches!(kind, EstimatorKind::ArchII) || scalar_phi(spec, s).is_some()
}

/// Checks the definiteness requirement the estimator places on its target:
/// positive definite for ArchI, positive semi-definite for Alt.
pub fn validate_target(kind: EstimatorKind, t: &SymMatrix) -> Result<()> {
    let floor = match kind {
        EstimatorKind::ArchII => return Ok(()),
        EstimatorKind::ArchI => 0.0,
        EstimatorKind::Alt => -1e-10,
    };
    let min = min_eigenvalue(t)?;
    let ok = match kind {
        EstimatorKind::ArchI => min > floor,
        _ => min >= floor,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::TargetNotPD)
    }
}

fn min_eigenvalue(t: &SymMatrix) -> Result<f64> {
    // Diagonal targets (every built-in one) read off their spectrum directly.
    if is_diagonal(t) {
        Ok((0..t.dim()).map(|j| t.get(j, j)).fold(f64::INFINITY, f64::min))
    } else {
        Ok(*decompose(t)?.eigenvalues().last().expect("dim >= 1"))
    }
}

fn is_diagonal(t: &SymMatrix) -> bool {
    for j in 0..t.dim() {
        for k in 0..j {
            if t.get(j, k) != 0.0 {
                return false;
            }
        }
    }
    true
}

/// Convex combination (1 - lambda) s + lambda t for lambda in (0, 1].
pub fn ridge_arch1(s: &SymMatrix, t: &SymMatrix, lambda: f64) -> Result<SymMatrix> {
    EstimatorKind::ArchI.check_lambda(lambda)?;
    SymMatrix::linear_combination(1.0 - lambda, s, lambda, t)
}

/// Ridge shift s + lambda I for lambda in (0, inf).
pub fn ridge_arch2(s: &SymMatrix, lambda: f64) -> Result<SymMatrix> {
    EstimatorKind::ArchII.check_lambda(lambda)?;
    Ok(s.add_scaled_identity(lambda))
}

/// Alternative estimator [lambda I + (s - lambda t)^2 / 4]^{1/2}
/// + (s - lambda t) / 2 for lambda in (0, inf).
pub fn ridge_alt(s: &SymMatrix, t: &SymMatrix, lambda: f64) -> Result<SymMatrix> {
    EstimatorKind::Alt.check_lambda(lambda)?;
    let m = SymMatrix::linear_combination(1.0, s, -lambda, t)?;
    // Every term is a function of m = s - lambda t alone, so the whole
    // expression is the scalar map x -> sqrt(lambda + x^2/4) + x/2 pushed
    // through the spectrum of m. This never forms the inner matrix, whose
    // explicit square root is where p.s.d. round-off trouble would live.
    let d = decompose(&m)?;
    reconstruct(&d, |x| alt_scalar(x, lambda))
}

/// Stable evaluation of sqrt(lambda + x^2/4) + x/2 for lambda > 0.
///
/// For x < 0 the two terms nearly cancel; multiplying by the conjugate gives
/// lambda / (sqrt(lambda + x^2/4) + |x|/2), which keeps full relative
/// accuracy all the way into the small-eigenvalue limit lambda / |x|.
fn alt_scalar(x: f64, lambda: f64) -> f64 {
    let root = (lambda + 0.25 * x * x).sqrt();
    if x >= 0.0 {
        root + 0.5 * x
    } else {
        lambda / (root - 0.5 * x)
    }
}

/// Per-eigenvalue map of the alternative estimator under the scalar target
/// phi * I: d maps to sqrt(lambda + (d - lambda phi)^2 / 4) + (d - lambda phi) / 2.
///
/// Strictly positive, increasing in d, and tending to 1/phi as lambda grows.
pub fn ridge_alt_eigmap(d: f64, phi: f64, lambda: f64) -> f64 {
    assert!(
        lambda.is_finite() && lambda > 0.0,
        "penalty must be positive and finite"
    );
    assert!(
        phi.is_finite() && phi >= 0.0,
        "scalar target multiplier must be non-negative and finite"
    );
    alt_scalar(d - lambda * phi, lambda)
}

/// Per-eigenvalue map of a rotation-equivariant estimator configuration.
///
/// `phi` is the scalar target multiplier; ArchII ignores it.
#[derive(Debug, Clone, Copy)]
pub struct ScalarMap {
    pub kind: EstimatorKind,
    pub phi: f64,
}

impl ScalarMap {
    /// Eigenvalue of the estimate given eigenvalue `d` of the sample matrix.
    pub fn apply(&self, d: f64, lambda: f64) -> f64 {
        match self.kind {
            EstimatorKind::ArchI => (1.0 - lambda) * d + lambda * self.phi,
            EstimatorKind::ArchII => d + lambda,
            EstimatorKind::Alt => ridge_alt_eigmap(d, self.phi, lambda),
        }
    }
}

/// Materializes the target, validates it, and runs the chosen estimator.
pub fn estimate(
    kind: EstimatorKind,
    s: &SymMatrix,
    target: &TargetSpec,
    lambda: f64,
) -> Result<SymMatrix> {
    match kind {
        EstimatorKind::ArchII => ridge_arch2(s, lambda),
        EstimatorKind::ArchI | EstimatorKind::Alt => {
            let t = target_matrix(target, s)?;
            validate_target(kind, &t)?;
            match kind {
                EstimatorKind::ArchI => ridge_arch1(s, &t, lambda),
                _ => ridge_alt(s, &t, lambda),
            }
        }
    }
}

/// Inverse of a positive definite estimate via its spectral decomposition.
pub fn precision_of(estimate: &SymMatrix) -> Result<SymMatrix> {
    let d = decompose(estimate)?;
    let evs = d.eigenvalues();
    let d1 = evs[0];
    let dp = *evs.last().expect("dim >= 1");
    if dp <= 1e-14 * d1 {
        return Err(Error::NearSingular {
            ratio: if d1 > 0.0 { dp / d1 } else { 0.0 },
        });
    }
    reconstruct(&d, |x| 1.0 / x)
}
