use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use scoamp::potential::{Minimizer, Potential, PotentialCurve};

use super::lib_err;
use crate::config::{missing, ExperimentConfig, PotentialSpec};
use crate::output::{num, Report, Table};

#[derive(Debug, Serialize)]
struct Stationary {
    e: f64,
    s: f64,
    f: f64,
    residual: f64,
}

impl From<&Minimizer> for Stationary {
    fn from(m: &Minimizer) -> Self {
        Stationary { e: m.e, s: m.s, f: m.f, residual: m.residual }
    }
}

#[derive(Debug, Serialize)]
struct CurveSummary {
    delta: f64,
    sigma2: f64,
    minimizers: Vec<Stationary>,
    unique: bool,
    /// Two minima within the tie tolerance; both are listed.
    degenerate: bool,
    e_opt: Option<f64>,
    e_smallest: Option<f64>,
}

fn curve(spec: &PotentialSpec, delta: f64) -> Result<PotentialCurve> {
    let r = spec.spectrum.r_law(delta, spec.law).map_err(lib_err)?;
    let p = Potential::new(spec.prior.build()?, r, spec.sigma2()?).map_err(lib_err)?;
    p.curve(spec.grid).map_err(lib_err)
}

/// `(E, F)` curves of the potential and their local minimizers.
pub fn potential(cfg: &ExperimentConfig) -> Result<Report> {
    let spec = cfg.potential.as_ref().ok_or_else(|| missing("potential"))?;
    spec.validate()?;
    let deltas = spec.deltas()?;
    let curves = deltas.par_iter().map(|&d| curve(spec, d)).collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(&["delta", "E", "F"]);
    let mut out = Vec::new();
    for c in &curves {
        for (e, f) in c.e_grid.iter().zip(&c.f_values) {
            table.push(vec![num(c.delta), num(*e), num(*f)]);
        }
        out.push(CurveSummary {
            delta: c.delta,
            sigma2: c.sigma2,
            minimizers: c.minimizers.iter().map(Stationary::from).collect(),
            unique: c.is_unique(),
            degenerate: c.degenerate,
            e_opt: c.global().map(|m| m.e),
            e_smallest: c.smallest().map(|m| m.e),
        });
    }
    if out.len() == 1 {
        Report::new(table, &out[0])
    } else {
        Report::new(table, &out)
    }
}
