use anyhow::Result;
use rayon::prelude::*;
use serde::Serialize;

use scoamp::amp::{run_amp, AmpOptions};
use scoamp::coupling::{BaseMatrix, CoupledSystem, SystemConfig};
use scoamp::lmoamp::{run_lmoamp, EquivalenceReport};
use scoamp::oamp::{run_oamp, OampOptions, Trajectory};

use super::lib_err;
use crate::config::{Algo, ExperimentConfig, SimulateSpec, SystemSpec};
use crate::output::{num, trial_seed, Report, Table};

struct TrialOut {
    traj: Trajectory,
    diverged: Option<usize>,
    equivalence: Option<EquivalenceReport>,
}

#[derive(Debug, Serialize)]
struct PointSummary {
    #[serde(rename = "W")]
    width: usize,
    #[serde(rename = "M")]
    m: usize,
    delta: f64,
    /// `(1 + W/L) δ`.
    rate: f64,
    zeta: f64,
    largest_mse_mean: f64,
    largest_mse_std: f64,
    /// Trials stopped by a numerical failure.
    failures: usize,
    /// Trials flagged as divergent (AMP only).
    diverged: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    equivalence: Option<Equivalence>,
}

/// Worst LM-OAMP versus OAMP deviation over the trials of a point.
#[derive(Debug, Serialize)]
struct Equivalence {
    max_mean_dev: f64,
    max_var_dev: f64,
    posdef_ok: bool,
}

#[derive(Debug, Serialize)]
struct Summary {
    algo: Algo,
    #[serde(rename = "T")]
    iterations: usize,
    trials: usize,
    points: Vec<PointSummary>,
}

fn run_trial(system: &SystemSpec, sim: &SimulateSpec, zeta: f64, seed: u64) -> Result<TrialOut> {
    let prior = system.prior()?;
    let config = SystemConfig {
        base: BaseMatrix::uniform(system.sections, system.width).map_err(lib_err)?,
        n: system.n,
        m: system.m,
        ensemble: system.ensemble()?,
        construction: system.construction(),
        prior,
        sigma2: system.sigma2()?,
        seed,
    };
    let sys = CoupledSystem::build(config).map_err(lib_err)?;
    Ok(match sim.algo {
        Algo::Oamp => {
            let opts = OampOptions { filter: sim.filter.build(), iterations: sim.iterations, zeta, early_stop: sim.early_stop };
            TrialOut { traj: run_oamp(&sys, &prior, opts), diverged: None, equivalence: None }
        }
        Algo::LmOamp => {
            let run = run_lmoamp(&sys, &prior, sim.iterations).map_err(lib_err)?;
            TrialOut { traj: run.lm, diverged: None, equivalence: Some(run.report) }
        }
        Algo::Amp => {
            let opts = AmpOptions { iterations: sim.iterations, zeta, early_stop: sim.early_stop };
            let run = run_amp(&sys, &prior, opts).map_err(lib_err)?;
            TrialOut { traj: run.traj, diverged: run.diverged, equivalence: None }
        }
    })
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Monte-Carlo runs over every sweep point. Rows hold the per-section MSE
/// of every trial and iteration, followed by one `largest` row per point
/// with the trial mean of the largest section MSE at the last iteration.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Report> {
    let system = cfg.system()?;
    system.validate()?;
    let sim = cfg.simulate.clone().unwrap_or_default();
    sim.validate(system)?;
    let points = sim.points().iter().map(|p| p.resolve(system, &sim)).collect::<Result<Vec<_>, _>>()?;

    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|p| (0..sim.trials).map(move |t| (p, t))).collect();
    let outs = jobs
        .par_iter()
        .map(|&(p, t)| run_trial(&points[p].0, &sim, points[p].1, trial_seed(cfg.seed(), p, t)))
        .collect::<Result<Vec<_>>>()?;

    let mut table = Table::new(&["W", "M", "trial", "iter", "section", "mse"]);
    let mut summaries = Vec::new();
    for (p, (s, zeta)) in points.iter().enumerate() {
        let runs = &outs[p * sim.trials..(p + 1) * sim.trials];
        for (trial, run) in runs.iter().enumerate() {
            for (t, mse) in run.traj.mse.iter().enumerate() {
                for (l, e) in mse.iter().enumerate() {
                    table.push(vec![s.width.to_string(), s.m.to_string(), trial.to_string(), (t + 1).to_string(), l.to_string(), num(*e)]);
                }
            }
        }
        let largest: Vec<f64> = runs.iter().map(|r| r.traj.final_largest()).collect();
        let (mean, std) = mean_std(&largest);
        table.push(vec![s.width.to_string(), s.m.to_string(), "all".into(), sim.iterations.to_string(), "largest".into(), num(mean)]);
        let equivalence = (sim.algo == Algo::LmOamp).then(|| {
            let reps = runs.iter().filter_map(|r| r.equivalence.as_ref());
            reps.fold(Equivalence { max_mean_dev: 0.0, max_var_dev: 0.0, posdef_ok: true }, |a, r| Equivalence {
                max_mean_dev: a.max_mean_dev.max(r.max_mean_dev),
                max_var_dev: a.max_var_dev.max(r.max_var_dev),
                posdef_ok: a.posdef_ok && r.posdef_ok,
            })
        });
        summaries.push(PointSummary {
            width: s.width,
            m: s.m,
            delta: s.delta(),
            rate: (1.0 + s.width as f64 / s.sections as f64) * s.delta(),
            zeta: *zeta,
            largest_mse_mean: mean,
            largest_mse_std: std,
            failures: runs.iter().filter(|r| r.traj.failure.is_some()).count(),
            diverged: runs.iter().filter(|r| r.diverged.is_some()).count(),
            equivalence,
        });
    }
    let summary = Summary { algo: sim.algo, iterations: sim.iterations, trials: sim.trials, points: summaries };
    Report::new(table, &summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_statistics() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
