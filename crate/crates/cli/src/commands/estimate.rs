//! One-shot estimation: the ridge estimate and its precision matrix as
//! full symmetric CSV matrices with variable names.

use serde_json::json;

use ridgecond::estimators::{estimate, precision_of};
use ridgecond::Result;

use crate::args::EstimateArgs;
use crate::commands::{kind_flag, params_object};
use crate::input::{load_input, parse_target, write_matrix_csv};
use crate::manifest::write_manifest;

pub fn run(args: &EstimateArgs) -> Result<()> {
    let loaded = load_input(
        &args.input.input,
        args.input.as_matrix,
        args.input.cor,
        args.input.header,
        args.input.delimiter,
    )?;
    let target = parse_target(&args.model.target, args.input.delimiter)?;
    let est = estimate(args.model.kind, &loaded.matrix, &target, args.lambda)?;
    let prec = precision_of(&est)?;

    std::fs::create_dir_all(&args.output.out)?;
    write_matrix_csv(&args.output.out.join("estimate.csv"), &loaded.names, &est)?;
    write_matrix_csv(&args.output.out.join("precision.csv"), &loaded.names, &prec)?;

    let params = params_object(json!({
        "as_matrix": args.input.as_matrix,
        "cor": args.input.cor,
        "delimiter": args.input.delimiter.to_string(),
        "header": format!("{:?}", args.input.header).to_lowercase(),
        "type": kind_flag(args.model.kind),
        "target": args.model.target,
        "lambda": args.lambda,
        "out": args.output.out.display().to_string(),
    }));
    write_manifest(
        &args.output.out,
        Some(&args.input.input),
        params,
        &["estimate.csv", "precision.csv"],
    )
}
