//! Finite-size orthogonal AMP on a coupled system.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::coupling::{lift, BaseMatrix, CoupledSystem, RowSection};
use crate::denoiser::ScalarDenoiser;
use crate::{Error, Result};

/// Denominator guard for both Onsager corrections.
pub const GUARD: f64 = 1e-14;

/// Linear filter used in module A.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Filter {
    #[default]
    Lmmse,
    /// `F = A`.
    MatchedFilter,
    /// `F = A (AAᵀ)⁻¹`.
    ZeroForcing,
}

/// Per-singular-value filter gains `φ_m`, so that `F = U diag(φ) V_Mᵀ`.
pub fn filter_gains(filter: Filter, s: &[f64], v: f64, sigma2: f64) -> Vec<f64> {
    s.iter()
        .map(|&sm| match filter {
            Filter::Lmmse => v * sm / (sigma2 + v * sm * sm),
            Filter::MatchedFilter => sm,
            Filter::ZeroForcing => {
                if sm > 0.0 {
                    1.0 / sm
                } else {
                    0.0
                }
            }
        })
        .collect()
}

/// Trace functionals of a filter with gains `phi` on a section with
/// singular values `s`: returns `(η_A, v_post)`.
pub fn filter_traces(phi: &[f64], s: &[f64], nc: usize, v: f64, sigma2: f64) -> (f64, f64) {
    let ncf = nc as f64;
    let m = s.len() as f64;
    let mut tr_ff = 0.0;
    let mut tr_fa = 0.0;
    let mut tr_res = ncf - m;
    for (p, sm) in phi.iter().zip(s) {
        tr_ff += p * p;
        tr_fa += p * sm;
        tr_res += (1.0 - p * sm) * (1.0 - p * sm);
    }
    let eta = (ncf - tr_fa) / ncf;
    let v_post = (sigma2 * tr_ff + v * tr_res) / ncf;
    (eta, v_post)
}

/// `Fᵀ r = Aᵀ U diag(φ/s) Uᵀ r`.
pub fn filter_transpose(sec: &RowSection, phi: &[f64], r: &[f64]) -> Vec<f64> {
    let mut c = sec.left_t(r);
    for ((ci, p), sm) in c.iter_mut().zip(phi).zip(sec.singular_values()) {
        *ci *= if *sm > 0.0 { p / sm } else { 0.0 };
    }
    sec.apply_transpose(&sec.left(&c))
}

/// Messages of OAMP after a completed half-iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct OampState {
    pub x_ba: Vec<Vec<f64>>,
    pub v_ba: Vec<f64>,
    pub x_ab: Vec<Vec<f64>>,
    pub v_ab: Vec<f64>,
    pub eta_a: Vec<f64>,
    pub x_suf: Vec<Vec<f64>>,
    pub v_suf: Vec<f64>,
    /// Full-length posterior estimate `x_B^post`.
    pub x_post: Vec<f64>,
    pub v_post: Vec<f64>,
    pub eta_b: Vec<f64>,
    pub iter: usize,
}

impl OampState {
    /// `x_BA = 0` and the initial variances of every row section.
    pub fn initial(sys: &CoupledSystem) -> Result<Self> {
        let base = sys.base();
        let rows = base.rows();
        let n = sys.n();
        let mut v_ba = Vec::with_capacity(rows);
        for ell in 0..rows {
            v_ba.push(crate::coupling::initial_variance(base, ell, n)?);
        }
        Ok(OampState {
            x_ba: sys.sections.iter().map(|s| vec![0.0; s.nc]).collect(),
            v_ba,
            x_ab: sys.sections.iter().map(|s| vec![0.0; s.nc]).collect(),
            v_ab: vec![0.0; rows],
            eta_a: vec![0.0; rows],
            x_suf: vec![vec![0.0; n]; base.sections()],
            v_suf: vec![0.0; base.sections()],
            x_post: vec![0.0; base.sections() * n],
            v_post: vec![1.0; base.sections()],
            eta_b: vec![0.0; rows],
            iter: 0,
        })
    }
}

/// Module A: posterior through the filter, then the extrinsic message.
pub fn module_a_step(sys: &CoupledSystem, state: &mut OampState, filter: Filter) -> Result<()> {
    let sigma2 = sys.config.sigma2;
    for (ell, sec) in sys.sections.iter().enumerate() {
        let v = state.v_ba[ell];
        let x_ba = &state.x_ba[ell];
        let phi = filter_gains(filter, sec.singular_values(), v, sigma2);
        let (eta, v_post) = filter_traces(&phi, sec.singular_values(), sec.nc, v, sigma2);
        let gap = 1.0 - eta;
        if !(gap >= GUARD) {
            return Err(Error::SingularFilter { ell, gap });
        }
        let ax = sec.apply(x_ba);
        let r: Vec<f64> = sys.y[ell].iter().zip(&ax).map(|(y, a)| y - a).collect();
        let corr = filter_transpose(sec, &phi, &r);
        let width = sec.window_size() as f64;
        let denom = width.sqrt() * gap;
        // x_post = x_BA + Fᵀ r, then remove η x_BA.
        state.x_ab[ell] = x_ba.iter().zip(&corr).map(|(xb, c)| (xb + c - eta * xb) / denom).collect();
        state.v_ab[ell] = match filter {
            Filter::Lmmse => eta * v / (width * gap),
            _ => (v_post - eta * eta * v) / (width * gap * gap),
        };
        state.eta_a[ell] = eta;
    }
    check_finite(&state.v_ab, "v_AB", state.iter)?;
    Ok(())
}

/// Precision-weighted fusion of the branches carrying each column section:
/// returns `(x_suf, v_suf)` per column section.
pub fn sufficient_statistic(base: &BaseMatrix, n: usize, x_ab: &[Vec<f64>], v_ab: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut xs = Vec::with_capacity(base.sections());
    let mut vs = Vec::with_capacity(base.sections());
    for l in 0..base.sections() {
        let mut prec = 0.0;
        let mut acc = vec![0.0; n];
        for (ell, _) in base.branches(l) {
            let g = base.gamma(ell, l);
            let k = base.block_index(ell, l)?;
            prec += g * g / v_ab[ell];
            for (a, b) in acc.iter_mut().zip(&x_ab[ell][k * n..(k + 1) * n]) {
                *a += g * b / v_ab[ell];
            }
        }
        let v = 1.0 / prec;
        for a in acc.iter_mut() {
            *a *= v;
        }
        xs.push(acc);
        vs.push(v);
    }
    Ok((xs, vs))
}

/// Module B: sufficient statistic, denoising, and the extrinsic message
/// back to module A. Stores the undamped `x_BA`, `v_BA`.
pub fn module_b_step<D: ScalarDenoiser + ?Sized>(sys: &CoupledSystem, state: &mut OampState, denoiser: &D) -> Result<()> {
    let base = sys.base();
    let n = sys.n();
    let (x_suf, v_suf) = sufficient_statistic(base, n, &state.x_ab, &state.v_ab)?;
    let mut x_post = Vec::with_capacity(base.sections() * n);
    let mut v_post = Vec::with_capacity(base.sections());
    let mut mean_deriv = Vec::with_capacity(base.sections());
    for l in 0..base.sections() {
        let v = v_suf[l];
        let u = &x_suf[l];
        x_post.extend(u.iter().map(|&ui| denoiser.eval(ui, v)));
        mean_deriv.push(u.iter().map(|&ui| denoiser.derivative(ui, v)).sum::<f64>() / n as f64);
        v_post.push(denoiser.error_estimate(u, v));
    }
    let bayes = denoiser.is_bayes();
    for ell in 0..base.rows() {
        let width = base.window_size(ell)? as f64;
        let v_ab = state.v_ab[ell];
        let cols = base.columns(ell)?;
        let mut eta = 0.0;
        let mut post_sum = 0.0;
        for l in cols {
            let g2 = base.gamma(ell, l).powi(2);
            eta += g2 * v_suf[l] * mean_deriv[l] / v_ab;
            post_sum += g2 * v_post[l];
        }
        let gap = 1.0 - eta / width;
        if !(gap.abs() >= GUARD) {
            return Err(Error::SingularOnsager { ell, gap });
        }
        let lifted = lift(base, ell, n, &x_post)?;
        let scale = eta / width.sqrt();
        state.x_ba[ell] = lifted.iter().zip(&state.x_ab[ell]).map(|(p, a)| (p - scale * a) / gap).collect();
        state.v_ba[ell] = if bayes {
            let eta_post: f64 = base.columns(ell)?.map(|l| base.gamma(ell, l).powi(2) * v_post[l] / v_ab).sum();
            eta_post * v_ab / gap
        } else {
            (post_sum - eta * eta * v_ab / width) / (gap * gap)
        };
        state.eta_b[ell] = eta;
    }
    state.x_suf = x_suf;
    state.v_suf = v_suf;
    state.x_post = x_post;
    state.v_post = v_post;
    state.iter += 1;
    check_finite(&state.v_ba, "v_BA", state.iter)?;
    check_finite(&state.x_post, "x_post", state.iter)?;
    Ok(())
}

fn check_finite(v: &[f64], what: &'static str, iter: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what, iter })
    }
}

/// Settings of an OAMP run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OampOptions {
    pub filter: Filter,
    pub iterations: usize,
    /// Damping factor; `1` means undamped.
    pub zeta: f64,
    /// Stop once `max_ℓ |Δv_BA|` falls below this.
    pub early_stop: Option<f64>,
}

impl Default for OampOptions {
    fn default() -> Self {
        OampOptions { filter: Filter::Lmmse, iterations: 200, zeta: 1.0, early_stop: None }
    }
}

/// Per-iteration record of a finite-size run. Entry `t-1` describes
/// `x_B^post` after `t` iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Empirical per-section MSE.
    pub mse: Vec<Vec<f64>>,
    /// Per-section variance estimate `v_B^post`.
    pub v_post: Vec<Vec<f64>>,
    /// Iteration and error if the run aborted.
    pub failure: Option<(usize, Error)>,
    pub estimate: Vec<f64>,
}

impl Trajectory {
    pub fn iterations(&self) -> usize {
        self.mse.len()
    }

    /// Largest per-section MSE after the last completed iteration.
    pub fn final_largest(&self) -> f64 {
        self.mse.last().map(|m| m.iter().cloned().fold(0.0, f64::max)).unwrap_or(f64::NAN)
    }

    /// Largest per-section MSE after every iteration.
    pub fn largest(&self) -> Vec<f64> {
        self.mse.iter().map(|m| m.iter().cloned().fold(0.0, f64::max)).collect()
    }
}

/// Runs OAMP from the standard initialization. Damping
/// `x_BA ← ζ new + (1-ζ) old` applies to the messages of iteration 2 on.
pub fn run_oamp<D: ScalarDenoiser + ?Sized>(sys: &CoupledSystem, denoiser: &D, opts: OampOptions) -> Trajectory {
    let mut traj = Trajectory { mse: Vec::new(), v_post: Vec::new(), failure: None, estimate: Vec::new() };
    let mut state = match OampState::initial(sys) {
        Ok(s) => s,
        Err(e) => {
            traj.failure = Some((0, e));
            return traj;
        }
    };
    for t in 0..opts.iterations {
        let old_x = if t > 0 && opts.zeta != 1.0 { Some(state.x_ba.clone()) } else { None };
        let old_v = state.v_ba.clone();
        let step = module_a_step(sys, &mut state, opts.filter).and_then(|_| module_b_step(sys, &mut state, denoiser));
        if let Err(e) = step {
            traj.failure = Some((t, e));
            break;
        }
        if let Some(old_x) = old_x {
            let z = opts.zeta;
            for (new, old) in state.x_ba.iter_mut().zip(&old_x) {
                for (a, b) in new.iter_mut().zip(old) {
                    *a = z * *a + (1.0 - z) * b;
                }
            }
            for (a, b) in state.v_ba.iter_mut().zip(&old_v) {
                *a = z * *a + (1.0 - z) * b;
            }
        }
        traj.mse.push(sys.section_mse(&state.x_post));
        traj.v_post.push(state.v_post.clone());
        if let Some(tol) = opts.early_stop {
            let change = state.v_ba.iter().zip(&old_v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            if change < tol {
                break;
            }
        }
    }
    traj.estimate = state.x_post;
    traj
}
