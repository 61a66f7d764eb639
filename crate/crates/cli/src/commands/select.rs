//! Penalty selection: knee of the condition path proposes the lower bound,
//! cross-validated likelihood picks the penalty inside the well-conditioned
//! interval. Writes selection.json, path.csv, plot.svg, manifest.json.

use serde_json::json;

use ridgecond::condpath::{condition_path_with_threads, CondNorm, PenaltyGrid};
use ridgecond::estimators::estimate;
use ridgecond::ingest::{cov_ml, to_correlation};
use ridgecond::selection::{select_penalty, CVConfig, Folds};
use ridgecond::{Error, Result};

use crate::args::SelectArgs;
use crate::commands::{
    check_marks, check_y_clip, decorate_path, kind_flag, params_object, resolve_knee_opts,
};
use crate::input::{load_dataset, parse_target, resolve_threads, write_path_csv};
use crate::manifest::write_manifest;
use crate::svg::{render, PlotSpec, VLine, KNEE_COLOR, MARK_COLOR};

pub fn run(args: &SelectArgs) -> Result<()> {
    let threads = resolve_threads(args.output.threads)?;
    check_y_clip(args.plot.y_clip)?;
    let window = resolve_knee_opts(&args.knee, args.grid.steps)?;

    let data = load_dataset(&args.input.input, args.input.header, args.input.delimiter)?;
    let mut matrix = cov_ml(&data);
    if args.input.cor {
        matrix = to_correlation(&matrix)?;
    }
    let target = parse_target(&args.model.target, args.input.delimiter)?;
    let grid = PenaltyGrid::new(args.grid.lmin, args.grid.lmax, args.grid.steps)?;
    check_marks(&args.plot.mark, &grid)?;

    let mut path = condition_path_with_threads(
        &matrix,
        args.model.kind,
        &target,
        &grid,
        CondNorm::Spectral,
        threads,
    )?;
    decorate_path(&mut path, args.knee.knee_tol, window);

    let lambda_lo = match (args.lmin_override, path.knee) {
        (Some(lambda), _) => lambda,
        (None, Some(knee)) => knee.lambda,
        (None, None) => {
            return Err(Error::InvalidInput(
                "the condition path never flattens on this grid, so there is no knee to \
                 bound the search; widen --lmin/--lmax or supply --lmin-override"
                    .into(),
            ))
        }
    };

    let cfg = CVConfig {
        folds: match args.folds {
            Some(k) => Folds::K(k),
            None => Folds::LeaveOneOut,
        },
        lambda_lo,
        lambda_hi: grid.lambda_max(),
        estimator: args.model.kind,
        target: target.clone(),
        use_correlation: args.input.cor,
        tol: args.tol,
        max_iter: args.max_iter,
        shuffle_seed: args.seed,
    };
    let result = select_penalty(&data, &cfg)?;

    // Condition numbers at the two proposed penalties, on the same matrix
    // the path was traced over.
    let cond_at = |lambda: f64| -> Result<f64> {
        ridgecond::condpath::spectral_condition(&estimate(
            args.model.kind,
            &matrix,
            &target,
            lambda,
        )?)
    };
    let cond_at_knee = match path.knee {
        Some(knee) => Some(path.cond[knee.index]),
        None => None,
    };
    let cond_at_opt = cond_at(result.lambda_opt)?;

    std::fs::create_dir_all(&args.output.out)?;
    write_path_csv(&args.output.out.join("path.csv"), &path)?;

    let selection = json!({
        "knee_lambda": path.knee.map(|k| k.lambda),
        "lambda_lo": lambda_lo,
        "lambda_opt": result.lambda_opt,
        "cond_at_knee": cond_at_knee,
        "cond_at_opt": cond_at_opt,
        "score_opt": result.score_opt,
        "evaluations": result.evaluations,
    });
    std::fs::write(
        args.output.out.join("selection.json"),
        serde_json::to_string_pretty(&selection).expect("valid json") + "\n",
    )?;

    let mut vlines = Vec::new();
    if let Some(knee) = path.knee {
        vlines.push(VLine {
            lambda: knee.lambda,
            color: KNEE_COLOR,
        });
    }
    vlines.push(VLine {
        lambda: result.lambda_opt,
        color: MARK_COLOR,
    });
    vlines.extend(args.plot.mark.iter().map(|&lambda| VLine {
        lambda,
        color: MARK_COLOR,
    }));
    let spec = PlotSpec {
        title: &args.plot.title,
        width: args.plot.width,
        height: args.plot.height,
        y_clip: args.plot.y_clip,
        aids: args.plot.aids,
    };
    std::fs::write(args.output.out.join("plot.svg"), render(&path, &spec, &vlines))?;

    let params = params_object(json!({
        "cor": args.input.cor,
        "delimiter": args.input.delimiter.to_string(),
        "header": format!("{:?}", args.input.header).to_lowercase(),
        "type": kind_flag(args.model.kind),
        "target": args.model.target,
        "lmin": args.grid.lmin,
        "lmax": args.grid.lmax,
        "steps": args.grid.steps,
        "knee_tol": args.knee.knee_tol,
        "knee_window": window,
        "folds": args.folds,
        "lmin_override": args.lmin_override,
        "tol": args.tol,
        "max_iter": args.max_iter,
        "seed": args.seed,
        "aids": args.plot.aids,
        "mark": args.plot.mark,
        "title": args.plot.title,
        "width": args.plot.width,
        "height": args.plot.height,
        "y_clip": args.plot.y_clip,
        "threads": threads,
        "out": args.output.out.display().to_string(),
    }));
    write_manifest(
        &args.output.out,
        Some(&args.input.input),
        params,
        &["selection.json", "path.csv", "plot.svg"],
    )
}
