//! Replica-symmetric potential, the potential function of the approximate
//! coupled recursions, and the BP, optimality and spatial-coupling
//! thresholds derived from them.
//!
//! With `g(E) = R(-E/σ²)/σ²` the potential is
//! `F(E) = int_0^{g(E)} MMSE + int_0^E g − E g(E)`, and
//! `F'(E) = g'(E) [MMSE(g(E)) − E]`. Since `g` is nonincreasing, the local
//! minima of `F` are the points where `MMSE(g(E)) − E` changes sign from
//! positive to negative.

use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::coupling::BaseMatrix;
use crate::denoiser::{MutualInfoTable, Prior};
use crate::quad;
use crate::se::{run_se, Init, SeKind, SeOptions, SeSystem};
use crate::spectra::{RLaw, Spectrum};
use crate::{Error, Result};

/// Points of the grid on which minimizers are located.
pub const SEARCH_POINTS: usize = 2048;
/// Two minima whose potentials differ by less than this are a tie.
pub const TIE_TOL: f64 = 1e-6;
/// Smallest `E` on the search grid.
const E_FLOOR: f64 = 1e-12;

/// `f_RS(E, s) = I(s) + ½ int_0^{E/σ²} R(-z) dz − sE/2`, with `I` integrated
/// directly.
pub fn rs_potential(prior: &Prior, r: &RLaw, sigma2: f64, e: f64, s: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::Domain(format!("E must lie in [0, 1], got {e}")));
    }
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("s must be nonnegative, got {s}")));
    }
    Ok(prior.mutual_info(s) + 0.5 * r.integral(e / sigma2)? - 0.5 * s * e)
}

fn check_sigma2(sigma2: f64) -> Result<()> {
    if !(sigma2 > 0.0) || !sigma2.is_finite() {
        return Err(Error::Domain(format!("noise variance must be positive and finite, got {sigma2}")));
    }
    Ok(())
}

/// A refined local minimizer of `F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Minimizer {
    pub e: f64,
    /// `s = g(E)`.
    pub s: f64,
    pub f: f64,
    /// `|MMSE(g(E)) − E|`.
    pub residual: f64,
}

/// `F` sampled on a grid plus its local minimizers.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialCurve {
    pub e_grid: Vec<f64>,
    pub f_values: Vec<f64>,
    /// Sorted by increasing `E`.
    pub minimizers: Vec<Minimizer>,
    pub delta: f64,
    pub sigma2: f64,
    /// Two minimizers tie within [`TIE_TOL`].
    pub degenerate: bool,
}

impl PotentialCurve {
    pub fn is_unique(&self) -> bool {
        self.minimizers.len() == 1
    }

    /// The minimizer with the smallest potential.
    pub fn global(&self) -> Option<&Minimizer> {
        global(&self.minimizers)
    }

    pub fn smallest(&self) -> Option<&Minimizer> {
        self.minimizers.first()
    }

    /// The smallest minimizer beats every other one by more than the tie
    /// tolerance.
    pub fn smallest_is_global(&self) -> bool {
        smallest_is_global(&self.minimizers)
    }
}

fn global(m: &[Minimizer]) -> Option<&Minimizer> {
    m.iter().min_by(|a, b| a.f.total_cmp(&b.f))
}

fn smallest_is_global(m: &[Minimizer]) -> bool {
    match m.split_first() {
        Some((first, rest)) => rest.iter().all(|o| first.f < o.f - TIE_TOL),
        None => false,
    }
}

fn degenerate(m: &[Minimizer]) -> bool {
    m.iter().enumerate().any(|(i, a)| m[i + 1..].iter().any(|b| (a.f - b.f).abs() < TIE_TOL))
}

/// Potential for one prior, R function and noise level. The mutual
/// information is read from a shared table.
#[derive(Debug, Clone)]
pub struct Potential {
    table: Arc<MutualInfoTable>,
    r: RLaw,
    sigma2: f64,
}

impl Potential {
    pub fn new(prior: Prior, r: RLaw, sigma2: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        let s_max = r.eval(0.0)? / sigma2;
        Ok(Potential { table: Arc::new(MutualInfoTable::new(prior, s_max)), r, sigma2 })
    }

    /// Reuses a table, e.g. across a scan over `δ`.
    pub fn with_table(table: Arc<MutualInfoTable>, r: RLaw, sigma2: f64) -> Result<Self> {
        check_sigma2(sigma2)?;
        Ok(Potential { table, r, sigma2 })
    }

    pub fn prior(&self) -> Prior {
        self.table.prior()
    }

    pub fn r_law(&self) -> &RLaw {
        &self.r
    }

    pub fn delta(&self) -> f64 {
        self.r.delta()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// `g(E) = R(-E/σ²)/σ²`.
    pub fn g(&self, e: f64) -> Result<f64> {
        Ok(self.r.eval(-e / self.sigma2)? / self.sigma2)
    }

    /// `F(E)`.
    pub fn value(&self, e: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::Domain(format!("E must lie in [0, 1], got {e}")));
        }
        let g = self.g(e)?;
        Ok(2.0 * self.table.eval(g) + self.r.integral(e / self.sigma2)? - e * g)
    }

    /// `MMSE(g(E)) − E`, which has the sign of `−F'(E)`.
    pub fn stationarity(&self, e: f64) -> Result<f64> {
        Ok(self.prior().mmse(self.g(e)?) - e)
    }

    /// `(F, MMSE(g) − E)` along an increasing grid, accumulating the
    /// integral of `g` panel by panel.
    fn profile(&self, grid: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let prior = self.prior();
        let mut f = Vec::with_capacity(grid.len());
        let mut h = Vec::with_capacity(grid.len());
        let mut j = 0.0;
        let mut prev = 0.0;
        for &e in grid {
            j += self.r_integral_between(prev / self.sigma2, e / self.sigma2)?;
            prev = e;
            let g = self.g(e)?;
            f.push(2.0 * self.table.eval(g) + j - e * g);
            h.push(prior.mmse(g) - e);
        }
        Ok((f, h))
    }

    fn r_integral_between(&self, a: f64, b: f64) -> Result<f64> {
        if b <= a {
            return Ok(0.0);
        }
        if a == 0.0 || matches!(self.r, RLaw::Rational { .. }) {
            return Ok(self.r.integral(b)? - self.r.integral(a)?);
        }
        let mut err = None;
        let v = quad::gauss_legendre(
            |t| match self.r.eval(-t) {
                Ok(x) => x,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            a,
            b,
        );
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }

    /// Local minimizers on the standard search grid, refined by bisection
    /// on the stationarity condition.
    pub fn minimizers(&self) -> Result<Vec<Minimizer>> {
        let grid = energy_grid(SEARCH_POINTS);
        let prior = self.prior();
        let mut h = Vec::with_capacity(grid.len());
        for &e in &grid {
            h.push(prior.mmse(self.g(e)?) - e);
        }
        self.refine(&grid, &h)
    }

    fn refine(&self, grid: &[f64], h: &[f64]) -> Result<Vec<Minimizer>> {
        let mut out = Vec::new();
        for k in 1..grid.len() {
            if !(h[k - 1] > 0.0 && h[k] <= 0.0) {
                continue;
            }
            let (mut lo, mut hi) = (grid[k - 1], grid[k]);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if self.stationarity(mid)? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let (hl, hh) = (self.stationarity(lo)?, self.stationarity(hi)?);
            let e = if hl.abs() <= hh.abs() { lo } else { hi };
            let s = self.g(e)?;
            out.push(Minimizer { e, s, f: self.value(e)?, residual: hl.abs().min(hh.abs()) });
        }
        Ok(out)
    }

    /// `F` on a `grid_n`-point grid in `(0, 1]` together with the
    /// minimizers.
    pub fn curve(&self, grid_n: usize) -> Result<PotentialCurve> {
        if grid_n < 32 {
            return Err(Error::Config(format!("potential grid needs at least 32 points, got {grid_n}")));
        }
        let e_grid = energy_grid(grid_n);
        let (f_values, h) = self.profile(&e_grid)?;
        let minimizers = if grid_n >= SEARCH_POINTS { self.refine(&e_grid, &h)? } else { self.minimizers()? };
        Ok(PotentialCurve { degenerate: degenerate(&minimizers), e_grid, f_values, minimizers, delta: self.delta(), sigma2: self.sigma2 })
    }
}

/// Half log-spaced points on `[1e-12, 1e-2)`, half uniform on `[1e-2, 1]`.
pub fn energy_grid(n: usize) -> Vec<f64> {
    let n_log = n / 2;
    let n_lin = n - n_log;
    let mut g = Vec::with_capacity(n);
    let (a, b) = (E_FLOOR.log10(), -2.0);
    for k in 0..n_log {
        g.push(10f64.powf(a + (b - a) * k as f64 / n_log as f64));
    }
    for k in 0..n_lin {
        let t = if n_lin == 1 { 1.0 } else { k as f64 / (n_lin - 1) as f64 };
        g.push(1e-2 + (1.0 - 1e-2) * t);
    }
    g
}

pub fn potential_curve(prior: Prior, r: RLaw, sigma2: f64, grid_n: usize) -> Result<PotentialCurve> {
    Potential::new(prior, r, sigma2)?.curve(grid_n)
}

/// Bracket and resolution of a scan over `δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
    pub tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { lo: 0.01, hi: 1.0, step: 0.01, tol: 1e-4 }
    }
}

/// Infimum of the `δ` above which a property holds on the whole scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub delta: f64,
    /// The failures on the scan do not form one contiguous block. A
    /// property that holds below the block as well, like uniqueness of a
    /// poor minimizer at small `δ`, is not flagged.
    pub non_monotone: bool,
    /// The property held on the whole scan.
    pub at_floor: bool,
}

fn scan_threshold<P: FnMut(f64) -> Result<bool>>(mut pred: P, opts: ScanOptions) -> Result<Threshold> {
    if !(opts.lo > 0.0 && opts.lo < opts.hi && opts.step > 0.0 && opts.tol > 0.0) {
        return Err(Error::Config(format!("bad scan bracket [{}, {}] step {} tol {}", opts.lo, opts.hi, opts.step, opts.tol)));
    }
    let mut deltas = Vec::new();
    let mut k = 0;
    loop {
        let d = opts.lo + k as f64 * opts.step;
        if d >= opts.hi - 1e-12 {
            deltas.push(opts.hi);
            break;
        }
        deltas.push(d);
        k += 1;
    }
    let mut holds = Vec::with_capacity(deltas.len());
    for &d in &deltas {
        holds.push(pred(d)?);
    }
    let Some(last_fail) = holds.iter().rposition(|&h| !h) else {
        return Ok(Threshold { delta: opts.lo, non_monotone: false, at_floor: true });
    };
    if last_fail + 1 == deltas.len() {
        return Err(Error::Config(format!("degenerate bracket [{}, {}]: the property fails at the top", opts.lo, opts.hi)));
    }
    let first_fail = holds.iter().position(|&h| !h).unwrap_or(last_fail);
    let non_monotone = holds[first_fail..last_fail].iter().any(|&h| h);
    let (mut lo, mut hi) = (deltas[last_fail], deltas[last_fail + 1]);
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Threshold { delta: hi, non_monotone, at_floor: false })
}

fn shared_table<F: Fn(f64) -> Result<RLaw>>(prior: Prior, family: &F, sigma2: f64, opts: &ScanOptions) -> Result<Arc<MutualInfoTable>> {
    check_sigma2(sigma2)?;
    let r0 = family(opts.hi)?.eval(0.0)?;
    Ok(Arc::new(MutualInfoTable::new(prior, r0 / sigma2)))
}

/// Infimum of `δ` above which the potential has a unique minimizer.
pub fn bp_threshold<F: Fn(f64) -> Result<RLaw>>(prior: Prior, family: F, sigma2: f64, opts: ScanOptions) -> Result<Threshold> {
    let table = shared_table(prior, &family, sigma2, &opts)?;
    scan_threshold(|d| Ok(Potential::with_table(table.clone(), family(d)?, sigma2)?.minimizers()?.len() == 1), opts)
}

/// Infimum of `δ` above which the smallest local minimizer is the global
/// one. Ties count as failures.
pub fn opt_threshold<F: Fn(f64) -> Result<RLaw>>(prior: Prior, family: F, sigma2: f64, opts: ScanOptions) -> Result<Threshold> {
    let table = shared_table(prior, &family, sigma2, &opts)?;
    scan_threshold(|d| Ok(smallest_is_global(&Potential::with_table(table.clone(), family(d)?, sigma2)?.minimizers()?)), opts)
}

/// Settings for [`coupled_threshold`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledOptions {
    pub sections: usize,
    pub width: usize,
    pub iterations: usize,
    pub lo: f64,
    pub hi: f64,
    /// Step of the downward scan from `hi`.
    pub step: f64,
    pub tol: f64,
    /// Allowed distance to the reference on every section.
    pub match_tol: f64,
    /// Artificial initial variance of the reference recursion.
    pub artificial: f64,
}

impl Default for CoupledOptions {
    fn default() -> Self {
        CoupledOptions {
            sections: 50,
            width: 1,
            iterations: 1000,
            lo: 0.1,
            hi: 1.0,
            step: 0.01,
            tol: 1e-4,
            match_tol: 1e-6,
            artificial: 1e-6,
        }
    }
}

/// One evaluation of the coupled-threshold predicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub delta: f64,
    pub success: bool,
    /// Both recursions met their stopping tolerance.
    pub converged: bool,
    /// Largest section value reached from the artificial initialization.
    pub target: f64,
    /// Largest section distance between the two runs.
    pub worst: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledThreshold {
    pub delta_sc: f64,
    /// `(1 + W/L) δ_SC`, the threshold charged for the rate loss.
    pub rate_adjusted: f64,
    /// The predicate held on the whole scan down to `lo`.
    pub at_floor: bool,
    pub probes: Vec<Probe>,
}

/// Runs the coupled Bayes recursion at one `δ` from the standard and from
/// the artificial initialization. The latter lands on the smallest fixed
/// point, which is the Bayes-optimal one. Without coupling this is the
/// uncoupled comparison; with coupling the reference keeps the same row
/// section laws and boundaries as the run it is compared with.
pub fn coupled_probe(prior: Prior, spectrum: &Spectrum, sigma2: f64, opts: &CoupledOptions) -> Result<Probe> {
    let se = |init| SeOptions { kind: SeKind::Bayes, iterations: opts.iterations, tol: 1e-12, init };
    // Without coupling every section runs the same scalar recursion.
    let base = if opts.width == 0 { BaseMatrix::uniform(1, 0)? } else { BaseMatrix::uniform(opts.sections, opts.width)? };
    let sys = SeSystem::new(base, spectrum, prior, sigma2)?;
    let reference = run_se(&sys, se(Init::Artificial(opts.artificial)))?;
    let coupled = run_se(&sys, se(Init::Standard))?;
    let worst = coupled.last().iter().zip(reference.last()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(Probe {
        delta: spectrum.delta(),
        success: worst <= opts.match_tol,
        converged: reference.converged && coupled.converged,
        target: reference.max,
        worst,
    })
}

/// Infimum of the `δ` above which coupled Bayes SE from the standard
/// initialization reaches the Bayes-optimal fixed point on all sections. Scans down from `hi`
/// to the first failure, then bisects. Below the waterfall only the poor
/// fixed point exists and the predicate holds again, so a plain bisection
/// on `[lo, hi]` would be ill-posed.
pub fn coupled_threshold<F: Fn(f64) -> Result<Spectrum>>(
    prior: Prior,
    family: F,
    sigma2: f64,
    opts: CoupledOptions,
) -> Result<CoupledThreshold> {
    if !(opts.lo > 0.0 && opts.lo < opts.hi && opts.tol > 0.0 && opts.step > 0.0) {
        return Err(Error::Config(format!("bad bracket [{}, {}] step {} tol {}", opts.lo, opts.hi, opts.step, opts.tol)));
    }
    let mut probes = Vec::new();
    let mut probe = |d: f64| -> Result<bool> {
        let p = coupled_probe(prior, &family(d)?, sigma2, &opts)?;
        probes.push(p);
        Ok(p.success)
    };
    if !probe(opts.hi)? {
        return Err(Error::Config(format!("degenerate bracket [{}, {}]: the predicate fails at the top", opts.lo, opts.hi)));
    }
    let mut hi = opts.hi;
    let mut lo = None;
    let mut k = 1;
    while lo.is_none() {
        let d = (opts.hi - k as f64 * opts.step).max(opts.lo);
        if probe(d)? {
            hi = d;
            if d <= opts.lo {
                break;
            }
        } else {
            lo = Some(d);
        }
        k += 1;
    }
    let at_floor = lo.is_none();
    if let Some(mut lo) = lo {
        while hi - lo > opts.tol {
            let mid = 0.5 * (lo + hi);
            if probe(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    let rate_adjusted = (1.0 + opts.width as f64 / opts.sections as f64) * hi;
    Ok(CoupledThreshold { delta_sc: hi, rate_adjusted, at_floor, probes })
}

/// Global minimizer of the potential at one noise level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalityPoint {
    pub sigma2: f64,
    pub e_opt: f64,
    pub s_opt: f64,
    pub unique: bool,
    pub degenerate: bool,
}

/// Tracks the global minimizer across noise levels at fixed `δ`.
pub fn optimality_gap(prior: Prior, r: &RLaw, sigma2_list: &[f64]) -> Result<Vec<OptimalityPoint>> {
    let Some(&smallest) = sigma2_list.iter().min_by(|a, b| a.total_cmp(b)) else {
        return Ok(Vec::new());
    };
    check_sigma2(smallest)?;
    let table = Arc::new(MutualInfoTable::new(prior, r.eval(0.0)? / smallest));
    let mut out = Vec::with_capacity(sigma2_list.len());
    for &sigma2 in sigma2_list {
        let m = Potential::with_table(table.clone(), r.clone(), sigma2)?.minimizers()?;
        let g = *global(&m).ok_or_else(|| Error::Domain(format!("no minimizer found at sigma2 = {sigma2}")))?;
        out.push(OptimalityPoint { sigma2, e_opt: g.e, s_opt: g.s, unique: m.len() == 1, degenerate: degenerate(&m) });
    }
    Ok(out)
}
