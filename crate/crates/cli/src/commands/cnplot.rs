//! The condition number plot: path.csv, plot.svg, manifest.json.

use serde_json::json;

use ridgecond::condpath::{condition_path_with_threads, CondNorm, PenaltyGrid};
use ridgecond::Result;

use crate::args::CnplotArgs;
use crate::commands::{
    check_marks, check_y_clip, decorate_path, kind_flag, params_object, resolve_knee_opts,
};
use crate::input::{load_input, parse_target, resolve_threads, write_path_csv};
use crate::manifest::write_manifest;
use crate::svg::{render, PlotSpec, VLine, KNEE_COLOR, MARK_COLOR};

pub fn run(args: &CnplotArgs) -> Result<()> {
    let threads = resolve_threads(args.output.threads)?;
    check_y_clip(args.plot.y_clip)?;
    let window = resolve_knee_opts(&args.knee, args.grid.steps)?;

    let loaded = load_input(
        &args.input.input,
        args.input.as_matrix,
        args.input.cor,
        args.input.header,
        args.input.delimiter,
    )?;
    let target = parse_target(&args.model.target, args.input.delimiter)?;
    let grid = PenaltyGrid::new(args.grid.lmin, args.grid.lmax, args.grid.steps)?;
    check_marks(&args.plot.mark, &grid)?;
    let norm: CondNorm = args.norm.into();

    let mut path = condition_path_with_threads(
        &loaded.matrix,
        args.model.kind,
        &target,
        &grid,
        norm,
        threads,
    )?;
    decorate_path(&mut path, args.knee.knee_tol, window);

    std::fs::create_dir_all(&args.output.out)?;
    write_path_csv(&args.output.out.join("path.csv"), &path)?;

    let mut vlines = Vec::new();
    if let Some(knee) = path.knee {
        vlines.push(VLine {
            lambda: knee.lambda,
            color: KNEE_COLOR,
        });
    }
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
        "as_matrix": args.input.as_matrix,
        "cor": args.input.cor,
        "delimiter": args.input.delimiter.to_string(),
        "header": format!("{:?}", args.input.header).to_lowercase(),
        "type": kind_flag(args.model.kind),
        "target": args.model.target,
        "lmin": args.grid.lmin,
        "lmax": args.grid.lmax,
        "steps": args.grid.steps,
        "norm": match norm { CondNorm::Spectral => "2", CondNorm::One => "1" },
        "knee_tol": args.knee.knee_tol,
        "knee_window": window,
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
        &["path.csv", "plot.svg"],
    )
}
