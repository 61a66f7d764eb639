//! Path-computation timing over grids of dimension and step count.
//!
//! The interesting contrast is equivariance: with a scalar target the whole
//! path costs about one decomposition regardless of the step count, while a
//! general target pays one decomposition per grid point, so time scales
//! with S. Inputs are synthetic Gram matrices from a fixed seed.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use ridgecond::condpath::{condition_path_with_threads, CondNorm, PenaltyGrid};
use ridgecond::estimators::{EstimatorKind, TargetSpec};
use ridgecond::spectra::SymMatrix;
use ridgecond::{Error, Result};

use crate::args::{BenchArgs, BenchMode};
use crate::commands::params_object;
use crate::input::fmt_f64;
use crate::manifest::write_manifest;

/// Full-rank synthetic covariance: Gram matrix of a p x 2p normal factor.
fn synthetic_cov(seed: u64, p: usize) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p as u64) << 16);
    let cols = 2 * p;
    let g: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..cols).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let mut a = SymMatrix::zeros(p);
    for i in 0..p {
        for j in 0..=i {
            let dot: f64 = g[i].iter().zip(&g[j]).map(|(x, y)| x * y).sum();
            a.set(i, j, dot / cols as f64);
        }
    }
    a
}

/// Non-scalar diagonal target: forces the general per-grid-point path while
/// staying positive definite for any dimension.
fn spread_diagonal(p: usize) -> SymMatrix {
    let entries: Vec<f64> = (0..p).map(|j| 0.5 + 1.5 * j as f64 / p as f64).collect();
    SymMatrix::diagonal(&entries)
}

fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).expect("timings are finite"));
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        0.5 * (samples[n / 2 - 1] + samples[n / 2])
    }
}

pub fn run(args: &BenchArgs) -> Result<()> {
    if args.reps == 0 {
        return Err(Error::InvalidInput("--reps must be at least 1".into()));
    }
    if args.p_grid.is_empty() || args.s_grid.is_empty() {
        return Err(Error::InvalidInput(
            "--p-grid and --s-grid must be non-empty".into(),
        ));
    }
    if let Some(&p) = args.p_grid.iter().find(|&&p| p < 2) {
        return Err(Error::InvalidInput(format!(
            "--p-grid entries must be at least 2, got {p}"
        )));
    }
    let threads = crate::input::resolve_threads(args.output.threads)?;

    // estimator column: 1 = arch1, 2 = arch2, 3 = alt (numeric so the file
    // loads back through the numeric CSV reader).
    let mut text = String::from("estimator,equivariant,p,steps,median_seconds,reps\n");
    for &p in &args.p_grid {
        let cov = synthetic_cov(args.seed, p);
        let mut configs: Vec<(bool, TargetSpec)> = Vec::new();
        if args.mode != BenchMode::Noneq {
            configs.push((true, TargetSpec::ScalarUnit(1.0)));
        }
        if args.mode != BenchMode::Eq {
            configs.push((false, TargetSpec::Custom(spread_diagonal(p))));
        }
        for (equivariant, target) in &configs {
            for &steps in &args.s_grid {
                let grid = PenaltyGrid::new(1e-3, 1e3, steps)?;
                let mut times = Vec::with_capacity(args.reps);
                for _ in 0..args.reps {
                    let start = Instant::now();
                    condition_path_with_threads(
                        &cov,
                        EstimatorKind::Alt,
                        target,
                        &grid,
                        CondNorm::Spectral,
                        threads,
                    )?;
                    times.push(start.elapsed().as_secs_f64());
                }
                text.push_str(&format!(
                    "3,{},{},{},{},{}\n",
                    u8::from(*equivariant),
                    p,
                    steps,
                    fmt_f64(median(&mut times)),
                    args.reps
                ));
            }
        }
    }

    std::fs::create_dir_all(&args.output.out)?;
    std::fs::write(args.output.out.join("bench.csv"), text)?;

    let params = params_object(json!({
        "p_grid": args.p_grid,
        "s_grid": args.s_grid,
        "reps": args.reps,
        "mode": format!("{:?}", args.mode).to_lowercase(),
        "seed": args.seed,
        "threads": threads,
        "out": args.output.out.display().to_string(),
    }));
    write_manifest(&args.output.out, None, params, &["bench.csv"])
}
