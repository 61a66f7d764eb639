//! Subcommand implementations and the small helpers they share.

pub mod bench;
pub mod cnplot;
pub mod estimate;
pub mod select;

use serde_json::{Map, Value};

use ridgecond::condpath::{
    acceleration, digits_lost, find_knee, knee_window_default, CondNorm, ConditionPath,
    PenaltyGrid,
};
use ridgecond::estimators::EstimatorKind;
use ridgecond::{Error, Result};

use crate::args::KneeOpts;

/// The flag spelling of an estimator kind, for manifests.
pub(crate) fn kind_flag(kind: EstimatorKind) -> &'static str {
    match kind {
        EstimatorKind::ArchI => "arch1",
        EstimatorKind::ArchII => "arch2",
        EstimatorKind::Alt => "alt",
    }
}

/// Validates the knee flags and resolves the window default.
pub(crate) fn resolve_knee_opts(opts: &KneeOpts, steps: usize) -> Result<usize> {
    if !(opts.knee_tol > 0.0 && opts.knee_tol < 1.0) {
        return Err(Error::InvalidInput(format!(
            "--knee-tol must lie in (0, 1), got {}",
            opts.knee_tol
        )));
    }
    let window = opts
        .knee_window
        .unwrap_or_else(|| knee_window_default(steps));
    if window == 0 {
        return Err(Error::InvalidInput(
            "--knee-window must be at least 1".into(),
        ));
    }
    Ok(window)
}

/// Fills the reading aids on a freshly computed path. The curvature aid and
/// the knee are defined for the spectral norm only.
pub(crate) fn decorate_path(path: &mut ConditionPath, knee_tol: f64, window: usize) {
    path.digits_lost = Some(path.cond.iter().copied().map(digits_lost).collect());
    if path.norm == CondNorm::Spectral {
        path.acceleration = Some(acceleration(path));
        path.knee = find_knee(path, knee_tol, window);
    }
}

/// Vertical marks must sit inside the plotted penalty range.
pub(crate) fn check_marks(marks: &[f64], grid: &PenaltyGrid) -> Result<()> {
    for &mark in marks {
        if !(mark >= grid.lambda_min() && mark <= grid.lambda_max()) {
            return Err(Error::InvalidInput(format!(
                "--mark {mark} lies outside the penalty grid [{}, {}]",
                grid.lambda_min(),
                grid.lambda_max()
            )));
        }
    }
    Ok(())
}

pub(crate) fn check_y_clip(y_clip: Option<f64>) -> Result<()> {
    if let Some(clip) = y_clip {
        if !(clip > 0.0 && clip.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "--y-clip must be positive and finite, got {clip}"
            )));
        }
    }
    Ok(())
}

/// Unwraps the object form of a `json!` literal.
pub(crate) fn params_object(value: Value) -> Map<String, Value> {
    match value {
        Value::Object(map) => map,
        _ => unreachable!("params literals are objects"),
    }
}
