//! Long-memory OAMP: module B fuses the extrinsic messages of every past
//! iteration through per-row covariance matrices.
//!
//! Only the LMMSE filter and the Bayes denoiser are supported. Under that
//! pairing the covariance messages keep the structure `V[τ'][τ] = v_max(τ',τ)`
//! and the algorithm reduces to OAMP; [`run_lmoamp`] measures how closely.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::coupling::{initial_variance, lift, CoupledSystem};
use crate::denoiser::Prior;
use crate::oamp::{self, filter_gains, filter_transpose, Filter, OampState, Trajectory, GUARD};
use crate::{Error, Result};

/// Longest supported history.
pub const MAX_ITERATIONS: usize = 64;

/// Relative eigenvalue cutoff for the pseudo-inverse fallback.
const PINV_CUTOFF: f64 = 1e-12;

/// Negative eigenvalues beyond this fraction of the smallest variance are
/// reported as a loss of positive definiteness.
const INDEFINITE_TOL: f64 = 1e-2;

/// Messages and histories of LM-OAMP.
#[derive(Debug, Clone)]
pub struct LmState {
    /// Current `x_BA,t` per row section.
    pub x_ba: Vec<Vec<f64>>,
    /// `V_BA,t[ℓ]`, indexed by message number `0..=t`.
    pub v_ba: Vec<DMatrix<f64>>,
    /// `x_AB,τ[ℓ]` for `τ = 0..=t`.
    pub x_ab_history: Vec<Vec<Vec<f64>>>,
    /// `V_AB,t[ℓ]`.
    pub v_ab: Vec<DMatrix<f64>>,
    /// Filter gains and `η_A,τ[ℓ]` for every past iteration.
    gains: Vec<Vec<Vec<f64>>>,
    pub eta_a: Vec<Vec<f64>>,
    /// `η_B,τ[ℓ]` of every past module-B step.
    pub eta_b: Vec<Vec<f64>>,
    /// Weights `η_B,τ,t[ℓ]` of the latest Onsager correction.
    pub eta_b_weights: Vec<Vec<f64>>,
    pub x_suf: Vec<Vec<f64>>,
    pub v_suf: Vec<f64>,
    pub x_post: Vec<f64>,
    pub v_post: Vec<f64>,
    pub iter: usize,
    /// Covariance solves that needed the pseudo-inverse.
    pub fallbacks: usize,
}

impl LmState {
    pub fn initial(sys: &CoupledSystem) -> Result<Self> {
        let base = sys.base();
        let rows = base.rows();
        let n = sys.n();
        let mut v_ba = Vec::with_capacity(rows);
        for ell in 0..rows {
            v_ba.push(DMatrix::from_element(1, 1, initial_variance(base, ell, n)?));
        }
        Ok(LmState {
            x_ba: sys.sections.iter().map(|s| vec![0.0; s.nc]).collect(),
            v_ba,
            x_ab_history: vec![Vec::new(); rows],
            v_ab: vec![DMatrix::zeros(0, 0); rows],
            gains: vec![Vec::new(); rows],
            eta_a: vec![Vec::new(); rows],
            eta_b: vec![Vec::new(); rows],
            eta_b_weights: vec![Vec::new(); rows],
            x_suf: vec![vec![0.0; n]; base.sections()],
            v_suf: vec![0.0; base.sections()],
            x_post: vec![0.0; base.sections() * n],
            v_post: vec![1.0; base.sections()],
            iter: 0,
            fallbacks: 0,
        })
    }
}

/// Module A with LMMSE filtering. Appends `x_AB,t` and row `t` of `V_AB`.
pub fn lm_module_a_step(sys: &CoupledSystem, state: &mut LmState) -> Result<()> {
    let t = state.iter;
    if t >= MAX_ITERATIONS {
        return Err(Error::Config(alloc::format!("history capped at {MAX_ITERATIONS} iterations")));
    }
    let sigma2 = sys.config.sigma2;
    for (ell, sec) in sys.sections.iter().enumerate() {
        let s = sec.singular_values();
        let ncf = sec.nc as f64;
        let width = sec.window_size() as f64;
        let v = state.v_ba[ell][(t, t)];
        let phi = filter_gains(Filter::Lmmse, s, v, sigma2);
        let eta = 1.0 - phi.iter().zip(s).map(|(p, sm)| p * sm).sum::<f64>() / ncf;
        let gap = 1.0 - eta;
        if !(gap >= GUARD) {
            return Err(Error::SingularFilter { ell, gap });
        }
        let x_ba = &state.x_ba[ell];
        let ax = sec.apply(x_ba);
        let r: Vec<f64> = sys.y[ell].iter().zip(&ax).map(|(y, a)| y - a).collect();
        let corr = filter_transpose(sec, &phi, &r);
        let denom = width.sqrt() * gap;
        state.x_ab_history[ell].push(x_ba.iter().zip(&corr).map(|(xb, c)| (xb + c - eta * xb) / denom).collect());
        state.gains[ell].push(phi);
        state.eta_a[ell].push(eta);

        let gains = &state.gains[ell];
        let etas = &state.eta_a[ell];
        let mut grown = DMatrix::zeros(t + 1, t + 1);
        if t > 0 {
            grown.view_mut((0, 0), (t, t)).copy_from(&state.v_ab[ell]);
        }
        for tp in 0..=t {
            let (pt, pp) = (&gains[t], &gains[tp]);
            let mut tr_ff = 0.0;
            let mut tr_res = ncf - s.len() as f64;
            for ((a, b), sm) in pt.iter().zip(pp).zip(s) {
                tr_ff += a * b;
                tr_res += (1.0 - a * sm) * (1.0 - b * sm);
            }
            let v_cross = state.v_ba[ell][(tp, t)];
            let post = (sigma2 * tr_ff + v_cross * tr_res) / ncf;
            let c = (post - etas[tp] * etas[t] * v_cross) / (width * (1.0 - etas[tp]) * (1.0 - etas[t]));
            grown[(tp, t)] = c;
            grown[(t, tp)] = c;
        }
        state.v_ab[ell] = grown;
    }
    Ok(())
}

/// Solves `V c = 1` for a covariance message. Returns the solution and
/// whether the pseudo-inverse was needed.
pub fn solve_ones(v: &DMatrix<f64>, ell: usize) -> Result<(DVector<f64>, bool)> {
    let ones = DVector::from_element(v.nrows(), 1.0);
    let top_diag = v.diagonal().max();
    let low_diag = v.diagonal().min();
    if let Some(ch) = v.clone().cholesky() {
        let pivot = ch.l_dirty().diagonal().iter().map(|d| d * d).fold(f64::INFINITY, f64::min);
        if pivot > PINV_CUTOFF * top_diag {
            return Ok((ch.solve(&ones), false));
        }
    }
    // After convergence consecutive variance estimates coincide or even
    // creep upwards, which leaves V singular or slightly indefinite. The
    // clipped minimum-norm solution spreads the weight over the
    // coinciding messages.
    let eig = SymmetricEigen::new(v.clone());
    let top = eig.eigenvalues.max();
    let low = eig.eigenvalues.min();
    if !(top > 0.0 && low_diag > 0.0) || low < -INDEFINITE_TOL * low_diag {
        return Err(Error::NotPosDef { ell });
    }
    let proj = eig.eigenvectors.tr_mul(&ones);
    let mut c = DVector::zeros(v.nrows());
    for (k, lam) in eig.eigenvalues.iter().enumerate() {
        if *lam > PINV_CUTOFF * top {
            c += eig.eigenvectors.column(k) * (proj[k] / lam);
        }
    }
    Ok((c, true))
}

/// All-history sufficient statistic. `weights[ℓ] = V_AB[ℓ]⁻¹ 1`.
pub fn lm_sufficient_statistic(
    sys: &CoupledSystem,
    history: &[Vec<Vec<f64>>],
    weights: &[DVector<f64>],
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let base = sys.base();
    let n = sys.n();
    let mut xs = Vec::with_capacity(base.sections());
    let mut vs = Vec::with_capacity(base.sections());
    for l in 0..base.sections() {
        let mut prec = 0.0;
        let mut acc = vec![0.0; n];
        for (ell, _) in base.branches(l) {
            let g = base.gamma(ell, l);
            let k = base.block_index(ell, l)?;
            prec += g * g * weights[ell].sum();
            for (tau, msg) in history[ell].iter().enumerate() {
                let c = g * weights[ell][tau];
                for (a, b) in acc.iter_mut().zip(&msg[k * n..(k + 1) * n]) {
                    *a += c * b;
                }
            }
        }
        let v = 1.0 / prec;
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::NotPosDef { ell: l });
        }
        for a in acc.iter_mut() {
            *a *= v;
        }
        xs.push(acc);
        vs.push(v);
    }
    Ok((xs, vs))
}

/// Module B with the Bayes denoiser. Appends row `t+1` of `V_BA`.
pub fn lm_module_b_step(sys: &CoupledSystem, state: &mut LmState, prior: &Prior) -> Result<()> {
    let base = sys.base();
    let n = sys.n();
    let t = state.iter;
    let mut weights = Vec::with_capacity(base.rows());
    for (ell, v) in state.v_ab.iter().enumerate() {
        let (c, fell_back) = solve_ones(v, ell)?;
        state.fallbacks += fell_back as usize;
        weights.push(c);
    }
    let (x_suf, v_suf) = lm_sufficient_statistic(sys, &state.x_ab_history, &weights)?;
    let mut x_post = Vec::with_capacity(base.sections() * n);
    let mut v_post = Vec::with_capacity(base.sections());
    let mut mean_deriv = Vec::with_capacity(base.sections());
    for l in 0..base.sections() {
        let ch = prior.channel(v_suf[l])?;
        let mut var = 0.0;
        let mut der = 0.0;
        for &u in &x_suf[l] {
            let p = ch.posterior(u);
            x_post.push(p.mean);
            var += p.var;
            der += ch.derivative(u);
        }
        v_post.push(var / n as f64);
        mean_deriv.push(der / n as f64);
    }
    for ell in 0..base.rows() {
        let width = base.window_size(ell)? as f64;
        let ones_c = weights[ell].sum();
        let mut eta = 0.0;
        // With the Bayes denoiser the cross covariances of the posterior
        // errors all equal the latest posterior variance: the newest
        // sufficient statistic carries every older one.
        let mut post_sum = 0.0;
        for l in base.columns(ell)? {
            let g2 = base.gamma(ell, l).powi(2);
            eta += g2 * ones_c * v_suf[l] * mean_deriv[l];
            post_sum += g2 * v_post[l];
        }
        let gap = 1.0 - eta / width;
        if !(gap.abs() >= GUARD) {
            return Err(Error::SingularOnsager { ell, gap });
        }
        let w: Vec<f64> = weights[ell].iter().map(|c| eta * c / ones_c).collect();
        let mut acc = lift(base, ell, n, &x_post)?;
        let root = width.sqrt();
        for (wt, msg) in w.iter().zip(&state.x_ab_history[ell]) {
            for (a, m) in acc.iter_mut().zip(msg) {
                *a -= wt * m / root;
            }
        }
        for a in acc.iter_mut() {
            *a /= gap;
        }
        state.x_ba[ell] = acc;
        state.eta_b[ell].push(eta);
        state.eta_b_weights[ell] = w;

        let etas = &state.eta_b[ell];
        let mut grown = DMatrix::zeros(t + 2, t + 2);
        grown.view_mut((0, 0), (t + 1, t + 1)).copy_from(&state.v_ba[ell]);
        let v0 = post_sum / gap;
        grown[(0, t + 1)] = v0;
        grown[(t + 1, 0)] = v0;
        for tp in 0..=t {
            let gp = 1.0 - etas[tp] / width;
            let c = (post_sum - etas[tp] * eta / (width * ones_c)) / (gp * gap);
            grown[(tp + 1, t + 1)] = c;
            grown[(t + 1, tp + 1)] = c;
        }
        state.v_ba[ell] = grown;
    }
    state.x_suf = x_suf;
    state.v_suf = v_suf;
    state.x_post = x_post;
    state.v_post = v_post;
    state.iter += 1;
    if !state.x_post.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite { what: "x_post", iter: state.iter });
    }
    Ok(())
}

/// Largest deviations between LM-OAMP and OAMP messages over a run.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EquivalenceReport {
    /// Relative ℓ₂ deviation of the mean messages.
    pub max_mean_dev: f64,
    /// Absolute deviation of the variance messages.
    pub max_var_dev: f64,
    /// Largest relative spread `|V[τ][t] - V[t][t]| / V[t][t]` of `V_AB`.
    pub max_cov_spread: f64,
    /// False if any covariance solve fell back to the pseudo-inverse.
    pub posdef_ok: bool,
    pub fallbacks: usize,
}

/// A paired LM-OAMP and OAMP run on one system.
#[derive(Debug, Clone, PartialEq)]
pub struct LmRun {
    pub lm: Trajectory,
    pub oamp: Trajectory,
    pub report: EquivalenceReport,
}

fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        num.sqrt()
    }
}

/// Runs LM-OAMP and OAMP side by side for `iterations` iterations.
pub fn run_lmoamp(sys: &CoupledSystem, prior: &Prior, iterations: usize) -> Result<LmRun> {
    let mut lm = LmState::initial(sys)?;
    let mut om = OampState::initial(sys)?;
    let mut report = EquivalenceReport { posdef_ok: true, ..Default::default() };
    let mut lm_traj = Trajectory { mse: Vec::new(), v_post: Vec::new(), failure: None, estimate: Vec::new() };
    let mut om_traj = lm_traj.clone();
    for t in 0..iterations {
        lm_module_a_step(sys, &mut lm)?;
        oamp::module_a_step(sys, &mut om, Filter::Lmmse)?;
        for ell in 0..sys.base().rows() {
            let v = &lm.v_ab[ell];
            report.max_mean_dev = report.max_mean_dev.max(rel_dev(&lm.x_ab_history[ell][t], &om.x_ab[ell]));
            report.max_var_dev = report.max_var_dev.max((v[(t, t)] - om.v_ab[ell]).abs());
            for tau in 0..t {
                report.max_cov_spread = report.max_cov_spread.max((v[(tau, t)] / v[(t, t)] - 1.0).abs());
            }
        }
        lm_module_b_step(sys, &mut lm, prior)?;
        oamp::module_b_step(sys, &mut om, prior)?;
        for ell in 0..sys.base().rows() {
            report.max_mean_dev = report.max_mean_dev.max(rel_dev(&lm.x_ba[ell], &om.x_ba[ell]));
            report.max_var_dev = report.max_var_dev.max((lm.v_ba[ell][(t + 1, t + 1)] - om.v_ba[ell]).abs());
        }
        for (traj, post, v) in [(&mut lm_traj, &lm.x_post, &lm.v_post), (&mut om_traj, &om.x_post, &om.v_post)] {
            traj.mse.push(sys.section_mse(post));
            traj.v_post.push(v.clone());
        }
    }
    report.fallbacks = lm.fallbacks;
    report.posdef_ok = lm.fallbacks == 0;
    lm_traj.estimate = lm.x_post;
    om_traj.estimate = om.x_post;
    Ok(LmRun { lm: lm_traj, oamp: om_traj, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::{BaseMatrix, Construction, Ensemble, SystemConfig};

    fn system(l: usize, w: usize, n: usize, m: usize, seed: u64) -> CoupledSystem {
        CoupledSystem::build(SystemConfig {
            base: BaseMatrix::uniform(l, w).unwrap(),
            n,
            m,
            ensemble: Ensemble::RowOrthogonal,
            construction: Construction::Auto,
            prior: bg(),
            sigma2: 1e-3,
            seed,
        })
        .unwrap()
    }

    fn bg() -> Prior {
        Prior::bernoulli_gaussian(0.1).unwrap()
    }

    #[test]
    fn two_by_two_sufficient_variance() {
        let v = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let (c, fell_back) = solve_ones(&v, 0).unwrap();
        assert!(!fell_back);
        assert!((c.sum() - 2.0 / 3.0).abs() < 1e-15);
        assert!((1.0 / c.sum() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn structured_covariance_selects_latest() {
        let vs = [0.9, 0.5, 0.2, 0.1];
        let v = DMatrix::from_fn(4, 4, |i, j| vs[i.max(j)]);
        let (c, _) = solve_ones(&v, 0).unwrap();
        for (k, ck) in c.iter().enumerate() {
            let want = if k == 3 { 10.0 } else { 0.0 };
            assert!((ck - want).abs() < 1e-12, "{c}");
        }
    }

    #[test]
    fn singular_structure_uses_pseudo_inverse() {
        let vs = [0.9, 0.2, 0.2];
        let v = DMatrix::from_fn(3, 3, |i, j| vs[i.max(j)]);
        let (c, fell_back) = solve_ones(&v, 0).unwrap();
        assert!(fell_back);
        assert!(((&v * &c).add_scalar(-1.0)).amax() < 1e-12);
        assert!((c.sum() - 5.0).abs() < 1e-12);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(solve_ones(&bad, 4), Err(Error::NotPosDef { ell: 4 })));
    }

    #[test]
    fn first_iteration_equals_oamp() {
        let sys = system(4, 1, 256, 128, 1);
        let mut lm = LmState::initial(&sys).unwrap();
        let mut om = OampState::initial(&sys).unwrap();
        lm_module_a_step(&sys, &mut lm).unwrap();
        oamp::module_a_step(&sys, &mut om, Filter::Lmmse).unwrap();
        for ell in 0..sys.base().rows() {
            assert_eq!(lm.x_ab_history[ell][0], om.x_ab[ell]);
            assert!((lm.v_ab[ell][(0, 0)] / om.v_ab[ell] - 1.0).abs() < 1e-12);
        }
        lm_module_b_step(&sys, &mut lm, &bg()).unwrap();
        oamp::module_b_step(&sys, &mut om, &bg()).unwrap();
        for l in 0..4 {
            assert!((lm.v_suf[l] / om.v_suf[l] - 1.0).abs() < 1e-12);
        }
        for ell in 0..sys.base().rows() {
            assert!(rel_dev(&lm.x_ba[ell], &om.x_ba[ell]) < 1e-12);
            assert!((lm.v_ba[ell][(1, 1)] - om.v_ba[ell]).abs() < 1e-12);
            // Posterior mean is uncorrelated with its error.
            assert!((lm.v_ba[ell][(0, 1)] / lm.v_ba[ell][(1, 1)] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn onsager_weights_sum_to_total() {
        let sys = system(4, 1, 256, 128, 2);
        let mut lm = LmState::initial(&sys).unwrap();
        for _ in 0..4 {
            lm_module_a_step(&sys, &mut lm).unwrap();
            lm_module_b_step(&sys, &mut lm, &bg()).unwrap();
            for ell in 0..sys.base().rows() {
                let s: f64 = lm.eta_b_weights[ell].iter().sum();
                let total = *lm.eta_b[ell].last().unwrap();
                assert!((s - total).abs() < 1e-12 * total.abs().max(1.0));
            }
        }
    }

    #[test]
    fn exact_equivalence_before_convergence() {
        let sys = system(6, 1, 512, 256, 3);
        let run = run_lmoamp(&sys, &bg(), 6).unwrap();
        assert!(run.report.posdef_ok, "{:?}", run.report);
        assert!(run.report.max_cov_spread < 1e-10, "{:?}", run.report);
        assert!(run.report.max_mean_dev < 1e-8, "{:?}", run.report);
        assert!(run.report.max_var_dev < 1e-12, "{:?}", run.report);
        for (a, b) in run.lm.mse.iter().zip(&run.oamp.mse) {
            for (p, q) in a.iter().zip(b) {
                assert!((p / q - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn equivalence_survives_convergence() {
        let n = 512;
        let sys = system(6, 1, n, 256, 3);
        let run = run_lmoamp(&sys, &bg(), 25).unwrap();
        let band = 2.0 / (n as f64).sqrt();
        assert!(run.report.max_cov_spread < band, "{:?}", run.report);
        assert!(run.report.max_mean_dev < band, "{:?}", run.report);
        for (p, q) in run.lm.mse.last().unwrap().iter().zip(run.oamp.mse.last().unwrap()) {
            assert!((p / q - 1.0).abs() < band);
        }
    }

    #[test]
    fn posterior_variance_nonincreasing() {
        let n = 512;
        let sys = system(6, 1, n, 256, 4);
        let run = run_lmoamp(&sys, &bg(), 15).unwrap();
        // Exact only in the large-system limit.
        let slack = 1.0 / (n as f64).sqrt();
        for w in run.lm.v_post.windows(2) {
            for (a, b) in w[0].iter().zip(&w[1]) {
                assert!(*b <= a * (1.0 + slack), "{a} -> {b}");
            }
        }
    }

    #[test]
    fn history_is_capped() {
        let sys = system(1, 0, 64, 32, 5);
        let mut lm = LmState::initial(&sys).unwrap();
        lm.iter = MAX_ITERATIONS;
        assert!(matches!(lm_module_a_step(&sys, &mut lm), Err(Error::Config(_))));
    }
}
