use anyhow::Result;
use serde::Serialize;

use scoamp::coupling::BaseMatrix;
use scoamp::se::{run_se, Init, SeKind, SeOptions, SeRun, SeSystem};

use super::lib_err;
use crate::config::{ExperimentConfig, SeKindSpec, SeSpec};
use crate::output::{num, Report, Table};

#[derive(Debug, Serialize)]
struct FixedPoint {
    kind: SeKindSpec,
    converged: bool,
    iterations: usize,
    mean: f64,
    max: f64,
    #[serde(rename = "final")]
    last: Vec<f64>,
}

impl FixedPoint {
    fn new(kind: SeKindSpec, run: &SeRun) -> Self {
        FixedPoint { kind, converged: run.converged, iterations: run.iterations(), mean: run.mean, max: run.max, last: run.last().to_vec() }
    }
}

#[derive(Debug, Serialize)]
struct Uncoupled {
    standard: f64,
    artificial: f64,
    artificial_init: f64,
}

#[derive(Debug, Serialize)]
struct Summary {
    #[serde(flatten)]
    run: FixedPoint,
    #[serde(skip_serializing_if = "Option::is_none")]
    compare: Option<Comparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    uncoupled: Option<Uncoupled>,
}

#[derive(Debug, Serialize)]
struct Comparison {
    #[serde(flatten)]
    run: FixedPoint,
    max_abs_diff: f64,
}

fn kind(se: &SeSpec, k: SeKindSpec) -> SeKind {
    match k {
        SeKindSpec::Bayes => SeKind::Bayes,
        SeKindSpec::Oamp => SeKind::Oamp(se.filter.build()),
        SeKindSpec::Lm => SeKind::Lm,
        SeKindSpec::Approx => SeKind::Approx,
    }
}

/// Value of a run at iteration `t` (from 1); a converged run holds its
/// fixed point afterwards.
fn at(run: &SeRun, t: usize, l: usize) -> Option<f64> {
    match run.v_post.get(t - 1) {
        Some(v) => Some(v[l]),
        None if run.converged => Some(run.last()[l]),
        None => None,
    }
}

/// Per-section trajectory of the posterior variance, optionally next to a
/// second recursion and the uncoupled fixed points.
pub fn se(cfg: &ExperimentConfig) -> Result<Report> {
    let system = cfg.system()?;
    system.validate()?;
    let spec = cfg.se.clone().unwrap_or_default();
    spec.validate()?;
    let prior = system.prior()?;
    let sigma2 = system.sigma2()?;
    let law = system.spectrum()?;
    let base = BaseMatrix::uniform(system.sections, system.width).map_err(lib_err)?;
    let sys = SeSystem::new(base, &law, prior, sigma2).map_err(lib_err)?;
    let init = spec.artificial.map(Init::Artificial).unwrap_or(Init::Standard);
    let opts = |k| SeOptions { kind: kind(&spec, k), iterations: spec.iterations, tol: spec.tol, init };

    let main = run_se(&sys, opts(spec.kind)).map_err(lib_err)?;
    let other = spec.compare.map(|k| run_se(&sys, opts(k))).transpose().map_err(lib_err)?;

    let mut header = vec!["iter", "section", "v_post"];
    if other.is_some() {
        header.extend(["v_post_compare", "diff"]);
    }
    let mut table = Table::new(&header);
    let len = main.iterations().max(other.as_ref().map_or(0, |o| o.iterations()));
    let iters: Vec<usize> =
        if spec.snapshots.is_empty() { (1..=len).collect() } else { spec.snapshots.iter().copied().filter(|&t| t <= len).collect() };
    let cell = |v: Option<f64>| v.map(num).unwrap_or_default();
    let mut max_abs_diff = 0.0f64;
    for &t in &iters {
        for l in 0..system.sections {
            let a = at(&main, t, l);
            let mut row = vec![t.to_string(), l.to_string(), cell(a)];
            if let Some(o) = &other {
                let b = at(o, t, l);
                let d = a.zip(b).map(|(a, b)| a - b);
                if let Some(d) = d {
                    max_abs_diff = max_abs_diff.max(d.abs());
                }
                row.extend([cell(b), cell(d)]);
            }
            table.push(row);
        }
    }

    let uncoupled = if spec.uncoupled_reference {
        let single = SeSystem::new(BaseMatrix::uniform(1, 0).map_err(lib_err)?, &law, prior, sigma2).map_err(lib_err)?;
        let artificial_init = spec.artificial.unwrap_or(1e-6);
        let run = |init| run_se(&single, SeOptions { kind: SeKind::Bayes, iterations: spec.iterations, tol: spec.tol, init });
        Some(Uncoupled {
            standard: run(Init::Standard).map_err(lib_err)?.last()[0],
            artificial: run(Init::Artificial(artificial_init)).map_err(lib_err)?.last()[0],
            artificial_init,
        })
    } else {
        None
    };

    let summary = Summary {
        run: FixedPoint::new(spec.kind, &main),
        compare: other.as_ref().zip(spec.compare).map(|(o, k)| Comparison { run: FixedPoint::new(k, o), max_abs_diff }),
        uncoupled,
    };
    Report::new(table, &summary)
}
