//! State evolution for OAMP, Bayes-optimal OAMP and LM-OAMP on coupled
//! systems, the `(E, s)` change of variables, and the approximate
//! recursions used by the potential analysis.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::coupling::{initial_variance, BaseMatrix};
use crate::denoiser::{Prior, ScalarDenoiser};
use crate::lmoamp::solve_ones;
use crate::oamp::{Filter, GUARD};
use crate::quad;
use crate::spectra::{RLaw, Spectrum};
use crate::{Error, Result};

/// Default fixed-point tolerance.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Default iteration cap.
pub const DEFAULT_ITERATIONS: usize = 1000;

/// Deterministic description of a coupled system in the large-system limit.
#[derive(Debug, Clone, PartialEq)]
pub struct SeSystem {
    pub base: BaseMatrix,
    /// Law of `G[ℓ] = |W[ℓ]| A[ℓ]ᵀA[ℓ]` per row section.
    pub spectra: Vec<Spectrum>,
    pub prior: Prior,
    pub sigma2: f64,
    /// Uncoupled law the sections were derived from, if known.
    pub law: Option<Spectrum>,
}

impl SeSystem {
    /// Row sections drawn from the ensemble with uncoupled law `spectrum`.
    pub fn new(base: BaseMatrix, spectrum: &Spectrum, prior: Prior, sigma2: f64) -> Result<Self> {
        let spectra = (0..base.rows()).map(|ell| spectrum.section(base.window_size(ell)?)).collect::<Result<Vec<_>>>()?;
        let mut sys = Self::with_spectra(base, spectra, prior, sigma2)?;
        sys.law = Some(spectrum.clone());
        Ok(sys)
    }

    pub fn with_spectra(base: BaseMatrix, spectra: Vec<Spectrum>, prior: Prior, sigma2: f64) -> Result<Self> {
        if spectra.len() != base.rows() {
            return Err(Error::Dim(alloc::format!("{} spectra for {} row sections", spectra.len(), base.rows())));
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::Domain(alloc::format!("noise variance must be positive, got {sigma2}")));
        }
        Ok(SeSystem { base, spectra, prior, sigma2, law: None })
    }

    fn width(&self, ell: usize) -> f64 {
        self.base.window_size(ell).map(|w| w as f64).unwrap_or(1.0)
    }

    /// `g[ℓ](z) = R_G[ℓ](-z / (|W[ℓ]|σ²)) / σ²`.
    pub fn g_section(&self, ell: usize, z: f64) -> Result<f64> {
        Ok(self.spectra[ell].r_transform(-z / (self.width(ell) * self.sigma2))? / self.sigma2)
    }
}

/// Initial condition of the module-B to module-A variances.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Init {
    /// Prior energy of each lifted row section.
    #[default]
    Standard,
    /// The same small variance in every row section.
    Artificial(f64),
}

/// Variances of the memoryless recursions. After a step, `eta_a`, `v_ab`
/// and `v_suf` belong to iteration `t`, while `v_post` and `v_ba` belong to
/// `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeState {
    pub v_ba: Vec<f64>,
    pub v_ab: Vec<f64>,
    pub eta_a: Vec<f64>,
    pub v_suf: Vec<f64>,
    pub v_post: Vec<f64>,
    pub eta_b: Vec<f64>,
    /// `E_t[ℓ]` matching the current `v_ba`.
    pub e: Vec<f64>,
    /// Diagnostic `ν_t[ℓ] = η_A,t v_BA,t / E_t` of the last step.
    pub nu: Vec<f64>,
    pub iter: usize,
}

impl SeState {
    pub fn initial(sys: &SeSystem, init: Init) -> Result<Self> {
        let rows = sys.base.rows();
        let cols = sys.base.sections();
        let mut v_ba = Vec::with_capacity(rows);
        for ell in 0..rows {
            v_ba.push(match init {
                Init::Standard => initial_variance(&sys.base, ell, 1)?,
                Init::Artificial(v) if v > 0.0 => v,
                Init::Artificial(v) => return Err(Error::Domain(alloc::format!("initial variance must be positive, got {v}"))),
            });
        }
        Ok(SeState {
            e: v_ba.clone(),
            v_ba,
            v_ab: vec![0.0; rows],
            eta_a: vec![0.0; rows],
            v_suf: vec![0.0; cols],
            v_post: vec![1.0; cols],
            eta_b: vec![0.0; rows],
            nu: vec![0.0; rows],
            iter: 0,
        })
    }

    pub fn mean_post(&self) -> f64 {
        self.v_post.iter().sum::<f64>() / self.v_post.len() as f64
    }

    pub fn max_post(&self) -> f64 {
        self.v_post.iter().cloned().fold(0.0, f64::max)
    }
}

fn harmonic(base: &BaseMatrix, v_ab: &[f64]) -> Vec<f64> {
    (0..base.sections()).map(|l| 1.0 / base.branches(l).map(|(ell, _)| base.gamma(ell, l).powi(2) / v_ab[ell]).sum::<f64>()).collect()
}

fn check_positive(v: &[f64], what: &'static str, iter: usize) -> Result<()> {
    if v.iter().all(|x| x.is_finite() && *x > 0.0) {
        Ok(())
    } else {
        Err(Error::NonFinite { what, iter })
    }
}

fn lmmse_eta(sys: &SeSystem, ell: usize, v_ba: f64) -> Result<f64> {
    let eta = sys.spectra[ell].eta_transform(v_ba / (sys.width(ell) * sys.sigma2));
    if 1.0 - eta < 1e-15 {
        return Err(Error::Domain(alloc::format!("LMMSE degenerate in row section {ell}: eta = {eta}")));
    }
    Ok(eta)
}

/// One step of Bayes-optimal OAMP with the LMMSE filter.
pub fn se_step_bayes(sys: &SeSystem, st: &mut SeState) -> Result<()> {
    let base = &sys.base;
    for ell in 0..base.rows() {
        let w = sys.width(ell);
        let eta = lmmse_eta(sys, ell, st.v_ba[ell])?;
        st.eta_a[ell] = eta;
        st.v_ab[ell] = eta * st.v_ba[ell] / (w * (1.0 - eta));
        st.nu[ell] = eta * st.v_ba[ell] / st.e[ell];
    }
    check_positive(&st.v_ab, "v_AB", st.iter)?;
    st.v_suf = harmonic(base, &st.v_ab);
    st.v_post = st.v_suf.iter().map(|v| sys.prior.mmse(1.0 / v)).collect();
    for ell in 0..base.rows() {
        let w = sys.width(ell);
        let e: f64 = base.columns(ell)?.map(|l| base.gamma(ell, l).powi(2) * st.v_post[l]).sum();
        let eta = e / st.v_ab[ell];
        let gap = 1.0 - eta / w;
        if !(gap >= GUARD) {
            return Err(Error::SingularOnsager { ell, gap });
        }
        st.eta_b[ell] = eta;
        st.e[ell] = e;
        st.v_ba[ell] = e / gap;
    }
    st.iter += 1;
    check_positive(&st.v_ba, "v_BA", st.iter)
}

/// Large-system traces `(η_A, v_A^post)` of a filter on row section `ell`.
pub fn filter_traces_se(sys: &SeSystem, ell: usize, filter: Filter, v: f64) -> Result<(f64, f64)> {
    let w = sys.width(ell);
    let spec = &sys.spectra[ell];
    let s2 = sys.sigma2;
    match filter {
        Filter::Lmmse => {
            let eta = lmmse_eta(sys, ell, v)?;
            Ok((eta, eta * v))
        }
        Filter::MatchedFilter => {
            // Eigenvalues of AᵀA are λ_G / |W|.
            let m1 = spec.integrate(|g| g / w);
            let res = spec.integrate(|g| (1.0 - g / w).powi(2));
            Ok((1.0 - m1, s2 * m1 + v * res))
        }
        Filter::ZeroForcing => {
            let inv = spec.integrate(|g| if g > 0.0 { w / g } else { 0.0 });
            let null = spec.integrate(|g| if g > 0.0 { 0.0 } else { 1.0 });
            if !inv.is_finite() {
                return Err(Error::Domain(alloc::format!("zero-forcing trace diverges in row section {ell}")));
            }
            Ok((null, s2 * inv + v * null))
        }
    }
}

/// One step of OAMP with an arbitrary filter and denoiser.
pub fn se_step_general<D: ScalarDenoiser + ?Sized>(sys: &SeSystem, st: &mut SeState, filter: Filter, denoiser: &D) -> Result<()> {
    let base = &sys.base;
    for ell in 0..base.rows() {
        let w = sys.width(ell);
        let v = st.v_ba[ell];
        let (eta, post) = filter_traces_se(sys, ell, filter, v)?;
        let gap = 1.0 - eta;
        if !(gap >= GUARD) {
            return Err(Error::SingularFilter { ell, gap });
        }
        st.eta_a[ell] = eta;
        st.v_ab[ell] = match filter {
            Filter::Lmmse => eta * v / (w * gap),
            _ => (post - eta * eta * v) / (w * gap * gap),
        };
        st.nu[ell] = eta * v / st.e[ell];
    }
    check_positive(&st.v_ab, "v_AB", st.iter)?;
    st.v_suf = harmonic(base, &st.v_ab);
    let mut deriv = Vec::with_capacity(base.sections());
    let mut post = Vec::with_capacity(base.sections());
    for &v in &st.v_suf {
        let ch = sys.prior.channel(v)?;
        post.push(ch.expect(|u, p| {
            let f = denoiser.eval(u, v);
            p.var + (p.mean - f) * (p.mean - f)
        }));
        deriv.push(ch.expect(|u, _| denoiser.derivative(u, v)));
    }
    st.v_post = post;
    for ell in 0..base.rows() {
        let w = sys.width(ell);
        let v_ab = st.v_ab[ell];
        let mut eta = 0.0;
        let mut e = 0.0;
        for l in base.columns(ell)? {
            let g2 = base.gamma(ell, l).powi(2);
            eta += g2 * st.v_suf[l] * deriv[l] / v_ab;
            e += g2 * st.v_post[l];
        }
        let gap = 1.0 - eta / w;
        if !(gap.abs() >= GUARD) {
            return Err(Error::SingularOnsager { ell, gap });
        }
        st.eta_b[ell] = eta;
        st.e[ell] = e;
        st.v_ba[ell] = (e - eta * eta * v_ab / w) / (gap * gap);
    }
    st.iter += 1;
    check_positive(&st.v_ba, "v_BA", st.iter)
}

/// Covariance recursions of LM-OAMP with the LMMSE filter.
#[derive(Debug, Clone, PartialEq)]
pub struct LmSeState {
    /// `V̄_BA[ℓ]`, message indices `0..=t`.
    pub v_ba: Vec<DMatrix<f64>>,
    /// `V̄_AB[ℓ]`, indices `0..=t` after module A of iteration `t`.
    pub v_ab: Vec<DMatrix<f64>>,
    pub eta_a: Vec<Vec<f64>>,
    pub eta_b: Vec<Vec<f64>>,
    /// `v̄^suf_{t,t}[l]` for every past `t`.
    pub v_suf: Vec<Vec<f64>>,
    /// `v̄^post_{B,t',t}[l]` for `1 ≤ t', t ≤ iter`, stored at `(t'-1, t-1)`.
    pub v_post: Vec<DMatrix<f64>>,
    pub iter: usize,
    /// Covariance solves that fell back to the pseudo-inverse.
    pub fallbacks: usize,
}

impl LmSeState {
    pub fn initial(sys: &SeSystem, init: Init) -> Result<Self> {
        let st = SeState::initial(sys, init)?;
        let rows = sys.base.rows();
        let cols = sys.base.sections();
        Ok(LmSeState {
            v_ba: st.v_ba.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
            v_ab: vec![DMatrix::zeros(0, 0); rows],
            eta_a: vec![Vec::new(); rows],
            eta_b: vec![Vec::new(); rows],
            v_suf: vec![Vec::new(); cols],
            v_post: vec![DMatrix::zeros(0, 0); cols],
            iter: 0,
            fallbacks: 0,
        })
    }

    /// Diagonal `v̄^post_{B,t,t}[l]` of the latest iteration.
    pub fn v_post_diag(&self) -> Vec<f64> {
        let t = self.iter;
        self.v_post.iter().map(|m| if t > 0 { m[(t - 1, t - 1)] } else { 1.0 }).collect()
    }
}

fn grow(m: &DMatrix<f64>, size: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(size, size);
    let k = m.nrows().min(size);
    out.view_mut((0, 0), (k, k)).copy_from(&m.view((0, 0), (k, k)));
    out
}

/// `(E[φ_a φ_b] σ², E[(1-φ_a s)(1-φ_b s)])` over the section law for two
/// LMMSE filters with input variances `va`, `vb`.
fn lmmse_cross(sys: &SeSystem, ell: usize, va: f64, vb: f64) -> (f64, f64) {
    let w = sys.width(ell);
    let s2 = sys.sigma2;
    let spec = &sys.spectra[ell];
    let (a, b) = (va / (w * s2), vb / (w * s2));
    // Partial fractions in η lose accuracy as a → b; integrate there.
    let (mixed, res) = if (a - b).abs() > 1e-2 * a.max(b) {
        let (ea, eb) = (spec.eta_transform(a), spec.eta_transform(b));
        ((eb - ea) / (a - b), (a * ea - b * eb) / (a - b))
    } else {
        (spec.integrate(|g| g / ((1.0 + a * g) * (1.0 + b * g))), spec.integrate(|g| 1.0 / ((1.0 + a * g) * (1.0 + b * g))))
    };
    // E[φ_a φ_b] = va vb / (|W| σ⁴) · E[λ / ((1 + aλ)(1 + bλ))].
    (va * vb / (w * s2) * mixed, res)
}

/// One step of the LM-OAMP covariance recursions with the LMMSE filter.
pub fn se_step_lm<D: ScalarDenoiser + ?Sized>(sys: &SeSystem, st: &mut LmSeState, denoiser: &D) -> Result<()> {
    let base = &sys.base;
    let t = st.iter;
    for ell in 0..base.rows() {
        let w = sys.width(ell);
        let vt = st.v_ba[ell][(t, t)];
        let eta = lmmse_eta(sys, ell, vt)?;
        st.eta_a[ell].push(eta);
        let etas = &st.eta_a[ell];
        let mut m = grow(&st.v_ab[ell], t + 1);
        for tp in 0..=t {
            let cross = st.v_ba[ell][(tp, t)];
            let post = if tp == t {
                eta * vt
            } else {
                let (ff, res) = lmmse_cross(sys, ell, st.v_ba[ell][(tp, tp)], vt);
                ff + cross * res
            };
            let c = (post - etas[tp] * eta * cross) / (w * (1.0 - etas[tp]) * (1.0 - eta));
            m[(tp, t)] = c;
            m[(t, tp)] = c;
        }
        st.v_ab[ell] = m;
    }

    let mut ones_c = Vec::with_capacity(base.rows());
    for (ell, m) in st.v_ab.iter().enumerate() {
        let (c, fell_back) = solve_ones(m, ell)?;
        st.fallbacks += fell_back as usize;
        ones_c.push(c.sum());
    }
    let (gh_x, gh_w) = quad::gauss_hermite_rule();
    let mut deriv = Vec::with_capacity(base.sections());
    let mut post0 = Vec::with_capacity(base.sections());
    for l in 0..base.sections() {
        let prec: f64 = base.branches(l).map(|(ell, _)| base.gamma(ell, l).powi(2) * ones_c[ell]).sum();
        let vt = 1.0 / prec;
        if !(vt > 0.0 && vt.is_finite()) {
            return Err(Error::NotPosDef { ell: l });
        }
        st.v_suf[l].push(vt);
        let ch = sys.prior.channel(vt)?;
        let mut m = grow(&st.v_post[l], t + 1);
        // z_{t'} = z_t + d with d independent of (x, z_t), Var d = v_{t'} - v_t.
        for tp in 0..=t {
            let vp = st.v_suf[l][tp];
            let spread = vp - vt;
            let val = ch.expect(|u, p| {
                let f = denoiser.eval(u, vt);
                let h = if tp == t || spread <= 0.0 {
                    denoiser.eval(u, vp)
                } else {
                    let sd = spread.sqrt();
                    gh_x.iter().zip(gh_w).map(|(x, wt)| wt * denoiser.eval(u + sd * x, vp)).sum()
                };
                p.var + (p.mean - f) * (p.mean - h)
            });
            m[(tp, t)] = val;
            m[(t, tp)] = val;
        }
        st.v_post[l] = m;
        post0.push(ch.expect(|u, p| p.var + p.mean * p.mean - p.mean * denoiser.eval(u, vt)));
        deriv.push(ch.expect(|u, _| denoiser.derivative(u, vt)));
    }

    for ell in 0..base.rows() {
        let w = sys.width(ell);
        let cols = base.columns(ell)?;
        let mut eta = 0.0;
        for l in cols.clone() {
            eta += base.gamma(ell, l).powi(2) * ones_c[ell] * st.v_suf[l][t] * deriv[l];
        }
        let gap = 1.0 - eta / w;
        if !(gap.abs() >= GUARD) {
            return Err(Error::SingularOnsager { ell, gap });
        }
        st.eta_b[ell].push(eta);
        let etas = &st.eta_b[ell];
        let mut m = grow(&st.v_ba[ell], t + 2);
        let zero_row: f64 = cols.clone().map(|l| base.gamma(ell, l).powi(2) * post0[l]).sum::<f64>() / gap;
        m[(0, t + 1)] = zero_row;
        m[(t + 1, 0)] = zero_row;
        for tp in 0..=t {
            let sum: f64 = cols.clone().map(|l| base.gamma(ell, l).powi(2) * st.v_post[l][(tp, t)]).sum();
            let gp = 1.0 - etas[tp] / w;
            let c = (sum - etas[tp] * eta / (w * ones_c[ell])) / (gp * gap);
            m[(tp + 1, t + 1)] = c;
            m[(t + 1, tp + 1)] = c;
        }
        st.v_ba[ell] = m;
    }
    st.iter += 1;
    Ok(())
}

/// The `(E, s)` change of variables of a Bayes-optimal SE state.
#[derive(Debug, Clone, PartialEq)]
pub struct EsState {
    /// `E_{t+1}[ℓ]`, bounded by the prior energy.
    pub e: Vec<f64>,
    /// `s_t[l] = 1 / v̄^suf_t[l]`.
    pub s: Vec<f64>,
    pub nu: Vec<f64>,
    /// Largest relative residual of `1/v̄_AB = g[ℓ](η_A v̄_BA)`.
    pub identity_residual: f64,
}

/// Maps a state produced by [`se_step_bayes`] to `(E, s)`. `v_ba_in` are
/// the variances that entered module A of that step.
pub fn se_to_es(sys: &SeSystem, st: &SeState, v_ba_in: &[f64]) -> Result<EsState> {
    let mut resid: f64 = 0.0;
    for ell in 0..sys.base.rows() {
        let g = sys.g_section(ell, st.eta_a[ell] * v_ba_in[ell])?;
        resid = resid.max((g * st.v_ab[ell] - 1.0).abs());
    }
    Ok(EsState { e: st.e.clone(), s: st.v_suf.iter().map(|v| 1.0 / v).collect(), nu: st.nu.clone(), identity_residual: resid })
}

/// `(Ẽ, s̃)` of the approximate recursions.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxState {
    pub e: Vec<f64>,
    pub s: Vec<f64>,
    pub iter: usize,
}

impl ApproxState {
    /// Starts from `s̃_0 = s_0`, the first SINR of the exact recursions.
    pub fn initial(sys: &SeSystem, init: Init) -> Result<Self> {
        let mut st = SeState::initial(sys, init)?;
        se_step_bayes(sys, &mut st)?;
        Ok(ApproxState { e: vec![0.0; sys.base.rows()], s: st.v_suf.iter().map(|v| 1.0 / v).collect(), iter: 0 })
    }

    /// `MMSE(s̃_t[l])` per column section.
    pub fn mmse(&self, prior: &Prior) -> Vec<f64> {
        self.s.iter().map(|&s| prior.mmse(s)).collect()
    }
}

/// `Ẽ_{t+1}[ℓ] = Σ γ² MMSE(s̃_t)`, then `s̃_{t+1}[l] = Σ γ² g(Ẽ_{t+1})` with
/// `g(z) = R(-z/σ²)/σ²`.
pub fn se_step_approx(base: &BaseMatrix, prior: &Prior, r: &RLaw, sigma2: f64, st: &mut ApproxState) -> Result<()> {
    let mmse: Vec<f64> = st.s.iter().map(|&s| prior.mmse(s)).collect();
    for ell in 0..base.rows() {
        st.e[ell] = base.columns(ell)?.map(|l| base.gamma(ell, l).powi(2) * mmse[l]).sum();
    }
    let mut g = Vec::with_capacity(base.rows());
    for &e in &st.e {
        g.push(r.eval(-e / sigma2)? / sigma2);
    }
    for l in 0..base.sections() {
        st.s[l] = base.branches(l).map(|(ell, _)| base.gamma(ell, l).powi(2) * g[ell]).sum();
    }
    st.iter += 1;
    Ok(())
}

/// Which recursion [`run_se`] iterates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SeKind {
    /// Bayes-optimal OAMP with the LMMSE filter.
    #[default]
    Bayes,
    /// OAMP with the given filter and the Bayes denoiser evaluated through
    /// the generic path.
    Oamp(Filter),
    /// Diagonal of the LM-OAMP covariance recursions.
    Lm,
    /// Approximate recursions with the coupled-limit R-transform.
    Approx,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeOptions {
    pub kind: SeKind,
    pub iterations: usize,
    /// Stop once `max_l |Δv̄^post_B[l]|` falls below this.
    pub tol: f64,
    pub init: Init,
}

impl Default for SeOptions {
    fn default() -> Self {
        SeOptions { kind: SeKind::Bayes, iterations: DEFAULT_ITERATIONS, tol: DEFAULT_TOL, init: Init::Standard }
    }
}

/// Per-iteration `v̄^post_B` and the fixed-point report.
#[derive(Debug, Clone, PartialEq)]
pub struct SeRun {
    /// Entry `t-1` holds `v̄^post_{B,t}[l]` for every column section.
    pub v_post: Vec<Vec<f64>>,
    pub converged: bool,
    pub mean: f64,
    pub max: f64,
}

impl SeRun {
    pub fn iterations(&self) -> usize {
        self.v_post.len()
    }

    pub fn last(&self) -> &[f64] {
        self.v_post.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Iterates the chosen recursion until the posterior variances settle or
/// the iteration cap is reached. The LM recursion is capped at the
/// LM-OAMP history limit.
pub fn run_se(sys: &SeSystem, opts: SeOptions) -> Result<SeRun> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    let push = |v: Vec<f64>, out: &mut Vec<Vec<f64>>| -> bool {
        let done = out.last().map(|p| p.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) < opts.tol).unwrap_or(false);
        out.push(v);
        done
    };
    match opts.kind {
        SeKind::Bayes | SeKind::Oamp(_) => {
            let mut st = SeState::initial(sys, opts.init)?;
            for _ in 0..opts.iterations {
                match opts.kind {
                    SeKind::Oamp(f) => se_step_general(sys, &mut st, f, &sys.prior)?,
                    _ => se_step_bayes(sys, &mut st)?,
                }
                if push(st.v_post.clone(), &mut out) {
                    converged = true;
                    break;
                }
            }
        }
        SeKind::Lm => {
            let mut st = LmSeState::initial(sys, opts.init)?;
            for _ in 0..opts.iterations.min(crate::lmoamp::MAX_ITERATIONS) {
                se_step_lm(sys, &mut st, &sys.prior)?;
                if push(st.v_post_diag(), &mut out) {
                    converged = true;
                    break;
                }
            }
        }
        SeKind::Approx => {
            let r = match &sys.law {
                Some(s) => RLaw::coupled_limit(s)?,
                None => return Err(Error::Config("approximate recursions need the uncoupled ensemble law".into())),
            };
            let mut st = ApproxState::initial(sys, opts.init)?;
            for _ in 0..opts.iterations {
                se_step_approx(&sys.base, &sys.prior, &r, sys.sigma2, &mut st)?;
                if push(st.mmse(&sys.prior), &mut out) {
                    converged = true;
                    break;
                }
            }
        }
    }
    let last = out.last().cloned().unwrap_or_default();
    let mean = if last.is_empty() { f64::NAN } else { last.iter().sum::<f64>() / last.len() as f64 };
    let max = last.iter().cloned().fold(0.0, f64::max);
    Ok(SeRun { v_post: out, converged, mean, max })
}
