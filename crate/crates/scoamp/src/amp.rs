//! Damped spatially coupled AMP for i.i.d. Gaussian row sections, kept as
//! a comparison baseline.
//!
//! The iteration is the usual block-variance form (Krzakala et al.,
//! Donoho–Javanmard–Montanari). Block `(ℓ, l)` of the coupled matrix has
//! i.i.d. entries of variance `γ²/M`. With `τ_s = 1/(σ² + V)`:
//!
//! ```text
//! V[ℓ]  = (N/M) Σ_l γ² v[l]
//! p[ℓ]  = Σ_l B[ℓ,l] x̂[l] − V[ℓ] s_prev[ℓ]
//! s[ℓ]  = (y[ℓ] − p[ℓ]) / (σ² + V[ℓ])
//! τ[l]  = 1 / Σ_ℓ γ² / (σ² + V[ℓ])
//! r[l]  = x̂[l] + τ[l] Σ_ℓ B[ℓ,l]ᵀ s[ℓ]
//! x̂[l] = f(r[l]; τ[l]),  v[l] = τ[l] ⟨f′⟩
//! ```
//!
//! Damping acts on `r` and `τ` just before denoising.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::coupling::{BaseMatrix, CoupledSystem, Ensemble, GammaProjector};
use crate::denoiser::{Prior, ScalarDenoiser};
use crate::oamp::Trajectory;
use crate::se::{se_step_approx, ApproxState};
use crate::spectra::RLaw;
use crate::{Error, Result};

/// Largest section MSE, relative to the unit prior variance, before a run
/// is declared divergent.
pub const DIVERGENCE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmpOptions {
    pub iterations: usize,
    pub zeta: f64,
    /// Stop once `max_l |Δτ[l]| / τ[l]` falls below this.
    pub early_stop: Option<f64>,
}

impl Default for AmpOptions {
    fn default() -> Self {
        AmpOptions { iterations: 200, zeta: 1.0, early_stop: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    /// Current estimate, `L·N` entries.
    pub x_hat: Vec<f64>,
    /// `v[l]` per column section.
    pub v: Vec<f64>,
    /// Scaled residual per row section.
    pub s: Vec<Vec<f64>>,
    /// `V[ℓ]` per row section.
    pub v_row: Vec<f64>,
    /// Denoiser input and its variance per column section.
    pub r: Vec<f64>,
    pub tau: Vec<f64>,
    pub iter: usize,
}

impl AmpState {
    pub fn initial(sys: &CoupledSystem) -> Self {
        let base = sys.base();
        let n = sys.n();
        AmpState {
            x_hat: vec![0.0; base.sections() * n],
            v: vec![1.0; base.sections()],
            s: vec![vec![0.0; sys.config.m]; base.rows()],
            v_row: vec![0.0; base.rows()],
            r: vec![0.0; base.sections() * n],
            tau: vec![0.0; base.sections()],
            iter: 0,
        }
    }
}

fn check_finite(v: &[f64], what: &'static str, iter: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { what, iter })
    }
}

/// Residuals `s`, row variances `V`, denoiser inputs `r` and their noise
/// levels `τ`.
type Residual = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, Vec<f64>);

/// Residual half of one iteration: row variances, Onsager-corrected
/// residuals, and the undamped denoiser inputs.
fn residual_step(sys: &CoupledSystem, st: &AmpState) -> Result<Residual> {
    let base = sys.base();
    let n = sys.n();
    let sigma2 = sys.config.sigma2;
    let ratio = n as f64 / sys.config.m as f64;
    let mut v_row = Vec::with_capacity(base.rows());
    let mut s = Vec::with_capacity(base.rows());
    let mut back = vec![0.0; base.sections() * n];
    for (ell, sec) in sys.sections.iter().enumerate() {
        let vr = ratio * base.columns(ell)?.map(|l| base.gamma(ell, l).powi(2) * st.v[l]).sum::<f64>();
        let scale = (base.window_size(ell)? as f64).sqrt();
        let proj = GammaProjector::new(base, ell, n)?;
        let mut lifted = proj.apply(&st.x_hat);
        lifted.iter_mut().for_each(|x| *x *= scale);
        let p = sec.apply(&lifted);
        let denom = sigma2 + vr;
        let sl: Vec<f64> = sys.y[ell].iter().zip(&p).zip(&st.s[ell]).map(|((y, p), old)| (y - (p - vr * old)) / denom).collect();
        let mut u = sec.apply_transpose(&sl);
        u.iter_mut().for_each(|x| *x *= scale);
        for (b, a) in back.iter_mut().zip(proj.adjoint(&u)) {
            *b += a;
        }
        v_row.push(vr);
        s.push(sl);
    }
    let mut tau = Vec::with_capacity(base.sections());
    for l in 0..base.sections() {
        let prec: f64 = base.branches(l).map(|(ell, _)| base.gamma(ell, l).powi(2) / (sigma2 + v_row[ell])).sum();
        tau.push(1.0 / prec);
    }
    let r: Vec<f64> = (0..base.sections() * n).map(|i| st.x_hat[i] + tau[i / n] * back[i]).collect();
    Ok((s, v_row, r, tau))
}

/// One AMP iteration with damping factor `zeta` on `r` and `τ`. The first
/// iteration is never damped.
pub fn amp_step<D: ScalarDenoiser + ?Sized>(sys: &CoupledSystem, st: &mut AmpState, denoiser: &D, zeta: f64) -> Result<()> {
    let n = sys.n();
    let (s, v_row, mut r, mut tau) = residual_step(sys, st)?;
    if st.iter > 0 {
        for (a, b) in r.iter_mut().zip(&st.r) {
            *a = zeta * *a + (1.0 - zeta) * b;
        }
        for (a, b) in tau.iter_mut().zip(&st.tau) {
            *a = zeta * *a + (1.0 - zeta) * b;
        }
    }
    check_finite(&r, "AMP denoiser input", st.iter)?;
    check_finite(&tau, "AMP denoiser variance", st.iter)?;
    let mut x_hat = Vec::with_capacity(r.len());
    let mut v = Vec::with_capacity(tau.len());
    for (l, &t) in tau.iter().enumerate() {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("nonpositive AMP variance {t} in section {l}")));
        }
        let block = &r[l * n..(l + 1) * n];
        let mut dsum = 0.0;
        for &u in block {
            x_hat.push(denoiser.eval(u, t));
            dsum += denoiser.derivative(u, t);
        }
        v.push(t * dsum / n as f64);
    }
    st.x_hat = x_hat;
    st.v = v;
    st.s = s;
    st.v_row = v_row;
    st.r = r;
    st.tau = tau;
    st.iter += 1;
    Ok(())
}

/// An AMP run and the iteration at which it diverged, if it did.
#[derive(Debug, Clone)]
pub struct AmpRun {
    pub traj: Trajectory,
    pub diverged: Option<usize>,
}

/// Runs damped AMP. Only i.i.d. Gaussian row sections are accepted.
pub fn run_amp<D: ScalarDenoiser + ?Sized>(sys: &CoupledSystem, denoiser: &D, opts: AmpOptions) -> Result<AmpRun> {
    if sys.config.ensemble != Ensemble::IidGaussian {
        return Err(Error::Config("the AMP baseline needs i.i.d. Gaussian row sections".into()));
    }
    let mut st = AmpState::initial(sys);
    let mut traj = Trajectory { mse: Vec::new(), v_post: Vec::new(), failure: None, estimate: Vec::new() };
    let mut diverged = None;
    for t in 0..opts.iterations {
        let old_tau = st.tau.clone();
        if let Err(e) = amp_step(sys, &mut st, denoiser, opts.zeta) {
            traj.failure = Some((t, e));
            break;
        }
        let mse = sys.section_mse(&st.x_hat);
        let worst = mse.iter().cloned().fold(0.0, f64::max);
        traj.mse.push(mse);
        traj.v_post.push(st.v.clone());
        if !(worst <= DIVERGENCE) {
            diverged = Some(t + 1);
            break;
        }
        if let (Some(tol), true) = (opts.early_stop, t > 0) {
            let change = st.tau.iter().zip(&old_tau).map(|(a, b)| ((a - b) / a).abs()).fold(0.0, f64::max);
            if change < tol {
                break;
            }
        }
    }
    traj.estimate = st.x_hat;
    Ok(AmpRun { traj, diverged })
}

/// State evolution of AMP: per-section MSE after each of `iterations`
/// steps. It is the approximate recursion with `R(z) = δ/(δ − z)` started
/// from unit variance.
pub fn amp_se(base: &BaseMatrix, prior: &Prior, delta: f64, sigma2: f64, iterations: usize) -> Result<Vec<Vec<f64>>> {
    let r = RLaw::Rational { delta };
    let mut st = ApproxState { e: vec![0.0; base.rows()], s: vec![0.0; base.sections()], iter: 0 };
    let mut out = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        se_step_approx(base, prior, &r, sigma2, &mut st)?;
        out.push(st.mmse(prior));
    }
    Ok(out)
}
