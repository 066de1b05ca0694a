use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use scoamp::potential::{bp_threshold, coupled_threshold, opt_threshold, CoupledOptions, ScanOptions, Threshold};

use super::lib_err;
use crate::config::{missing, ExperimentConfig, LawSpec, SpectrumSpec, ThresholdSpec};
use crate::output::{num, Report, Table};

#[derive(Debug, Serialize)]
struct Row {
    ensemble: &'static str,
    kappa: f64,
    #[serde(rename = "L")]
    sections: usize,
    #[serde(rename = "W")]
    width: usize,
    #[serde(rename = "delta_BP")]
    delta_bp: f64,
    delta_opt: f64,
    #[serde(rename = "delta_SC")]
    delta_sc: f64,
    rate_adjusted: f64,
    /// Set when a scan never failed down to the bracket floor, so the value
    /// is an upper bound.
    bp_at_floor: bool,
    opt_at_floor: bool,
    sc_at_floor: bool,
    bp_non_monotone: bool,
}

fn uncoupled(spec: &ThresholdSpec, fam: &SpectrumSpec) -> Result<(Threshold, Threshold)> {
    let prior = spec.prior.build()?;
    let sigma2 = spec.sigma2()?;
    let opts = ScanOptions { lo: spec.lo(), hi: spec.hi, step: spec.step, tol: spec.tol };
    let family = |d| fam.r_law(d, LawSpec::Exact);
    let bp = bp_threshold(prior, family, sigma2, opts).map_err(lib_err)?;
    let opt = opt_threshold(prior, family, sigma2, opts).map_err(lib_err)?;
    Ok((bp, opt))
}

fn row(spec: &ThresholdSpec, fam: &SpectrumSpec, width: usize, bp: &Threshold, opt: &Threshold) -> Result<Row> {
    let ens = fam.ensemble()?;
    let opts = CoupledOptions {
        sections: spec.sections,
        width,
        iterations: spec.iterations,
        lo: spec.lo(),
        hi: spec.hi,
        step: spec.step,
        tol: spec.tol,
        ..Default::default()
    };
    let sc = coupled_threshold(spec.prior.build()?, |d| ens.spectrum(d), spec.sigma2()?, opts).map_err(lib_err)?;
    Ok(Row {
        ensemble: fam.label(),
        kappa: fam.kappa(),
        sections: spec.sections,
        width,
        delta_bp: bp.delta,
        delta_opt: opt.delta,
        delta_sc: sc.delta_sc,
        rate_adjusted: sc.rate_adjusted,
        bp_at_floor: bp.at_floor,
        opt_at_floor: opt.at_floor,
        sc_at_floor: sc.at_floor,
        bp_non_monotone: bp.non_monotone,
    })
}

/// Belief-propagation, optimal and coupled thresholds for every ensemble
/// and coupling width. `rate_adjusted` is `(1 + W/L) δ_SC`, which for `W = 0`
/// is the uncoupled threshold itself.
pub fn threshold(cfg: &ExperimentConfig) -> Result<Report> {
    let spec = cfg.threshold.as_ref().ok_or_else(|| missing("threshold"))?;
    spec.validate()?;
    let base = spec.ensembles.par_iter().map(|f| uncoupled(spec, f)).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..spec.ensembles.len()).flat_map(|e| spec.widths.iter().map(move |&w| (e, w))).collect();
    let rows = jobs.par_iter().map(|&(e, w)| row(spec, &spec.ensembles[e], w, &base[e].0, &base[e].1)).collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(&["ensemble", "kappa", "W", "delta_BP", "delta_opt", "delta_SC", "rate_adjusted"]);
    for r in &rows {
        table.push(vec![
            r.ensemble.into(),
            num(r.kappa),
            r.width.to_string(),
            num(r.delta_bp),
            num(r.delta_opt),
            num(r.delta_sc),
            num(r.rate_adjusted),
        ]);
    }
    if rows.len() == 1 {
        Report::new(table, &rows[0])
    } else {
        Report::new(table, &rows)
    }
}
