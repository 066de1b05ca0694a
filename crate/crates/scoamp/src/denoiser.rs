//! Scalar priors, Bayes-optimal denoisers, MMSE and mutual information.

use alloc::format;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::quad;
use crate::{Error, Result};

/// Tail cutoff of the standardized channel output.
const TAIL: f64 = 10.0;

/// Signal prior with unit second moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Prior {
    /// Zero with probability `1 - rho`, otherwise `N(0, 1/rho)`.
    BernoulliGaussian {
        rho: f64,
    },
    Gaussian,
}

/// Posterior mean and variance of `x` given one channel output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub var: f64,
}

impl Prior {
    pub fn bernoulli_gaussian(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Domain(format!("rho must lie in (0, 1], got {rho}")));
        }
        Ok(Prior::BernoulliGaussian { rho })
    }

    /// Rényi information dimension.
    pub fn info_dimension(&self) -> f64 {
        match *self {
            Prior::BernoulliGaussian { rho } => rho,
            Prior::Gaussian => 1.0,
        }
    }

    fn slab_rho(&self) -> Option<f64> {
        match *self {
            Prior::BernoulliGaussian { rho } if rho < 1.0 => Some(rho),
            _ => None,
        }
    }

    /// Precomputes the posterior map for the channel `u = x + N(0, v)`.
    pub fn channel(&self, v: f64) -> Result<Channel> {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("noise variance must be positive and finite, got {v}")));
        }
        Ok(Channel::new(*self, v))
    }

    /// Posterior mean `E[x | u]` under `u = x + N(0, v)`.
    pub fn denoise(&self, u: f64, v: f64) -> Result<f64> {
        Ok(self.channel(v)?.posterior(u).mean)
    }

    /// Derivative of [`Prior::denoise`] with respect to `u`.
    pub fn denoise_derivative(&self, u: f64, v: f64) -> Result<f64> {
        Ok(self.channel(v)?.derivative(u))
    }

    /// Posterior variance `Var(x | u)`.
    pub fn posterior_variance(&self, u: f64, v: f64) -> Result<f64> {
        Ok(self.channel(v)?.posterior(u).var)
    }

    /// MMSE of the scalar channel `sqrt(s) x + N(0, 1)`.
    pub fn mmse(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 1.0;
        }
        if !s.is_finite() {
            return 0.0;
        }
        let v = 1.0 / s;
        if self.slab_rho().is_none() {
            return v / (1.0 + v);
        }
        Channel::new(*self, v).expect_even(|_, p| p.var)
    }

    /// MMSE by 61-point Gauss–Hermite over each mixture component.
    pub fn mmse_gauss_hermite(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 1.0;
        }
        let ch = Channel::new(*self, 1.0 / s);
        ch.components().iter().map(|&(w, sd)| w * quad::gauss_hermite(|t| ch.posterior(sd * t).var)).sum()
    }

    /// Mutual information `I(s) = 1/2 * int_0^s mmse`, in nats.
    pub fn mutual_info(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        0.5 * integrate_mmse(self, 0.0, s)
    }

    /// Draws one sample from the prior.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Prior::Gaussian => rng.sample(StandardNormal),
            Prior::BernoulliGaussian { rho } => {
                let on = rng.random::<f64>() < rho;
                let z: f64 = rng.sample(StandardNormal);
                if on {
                    z / rho.sqrt()
                } else {
                    0.0
                }
            }
        }
    }
}

/// `int_a^b mmse(s) ds`, panels split geometrically above 1.
fn integrate_mmse(prior: &Prior, a: f64, b: f64) -> f64 {
    let mut breaks = Vec::new();
    breaks.push(a);
    let mut x = if a < 1e-3 { 1e-3 } else { a * 1.25 };
    while x < b {
        breaks.push(x);
        x *= 1.25;
    }
    breaks.push(b);
    quad::composite(|s| prior.mmse(s), &breaks)
}

/// The channel `u = x + N(0, v)` for a fixed prior and noise level.
#[derive(Debug, Clone, Copy)]
pub struct Channel {
    prior: Prior,
    v: f64,
    slab: Option<Slab>,
}

#[derive(Debug, Clone, Copy)]
struct Slab {
    rho: f64,
    /// Slab variance `1/rho`.
    a: f64,
    log_odds0: f64,
    /// `d^2 L / du^2` of the log-odds in `u^2 / 2`.
    curv: f64,
    gain: f64,
    cvar: f64,
}

impl Channel {
    fn new(prior: Prior, v: f64) -> Self {
        let slab = prior.slab_rho().map(|rho| {
            let a = 1.0 / rho;
            Slab {
                rho,
                a,
                log_odds0: (rho / (1.0 - rho)).ln() - 0.5 * (a / v).ln_1p(),
                curv: a / (v * (a + v)),
                gain: a / (a + v),
                cvar: a * v / (a + v),
            }
        });
        Channel { prior, v, slab }
    }

    pub fn noise_var(&self) -> f64 {
        self.v
    }

    pub fn prior(&self) -> Prior {
        self.prior
    }

    /// Posterior nonzero probability and its complement.
    fn activity(s: &Slab, u: f64) -> (f64, f64) {
        let l = s.log_odds0 + 0.5 * s.curv * u * u;
        if l >= 0.0 {
            let e = (-l).exp();
            (1.0 / (1.0 + e), e / (1.0 + e))
        } else {
            let e = l.exp();
            (e / (1.0 + e), 1.0 / (1.0 + e))
        }
    }

    pub fn posterior(&self, u: f64) -> Posterior {
        match &self.slab {
            None => Posterior { mean: u / (1.0 + self.v), var: self.v / (1.0 + self.v) },
            Some(s) => {
                let (pi, off) = Self::activity(s, u);
                let m = s.gain * u;
                Posterior { mean: pi * m, var: pi * off * m * m + pi * s.cvar }
            }
        }
    }

    /// Analytic derivative of the posterior mean.
    pub fn derivative(&self, u: f64) -> f64 {
        match &self.slab {
            None => 1.0 / (1.0 + self.v),
            Some(s) => {
                let (pi, off) = Self::activity(s, u);
                let m = s.gain * u;
                pi * off * s.curv * u * m + pi * s.gain
            }
        }
    }

    /// Mixture components of the output law as (weight, standard deviation).
    fn components(&self) -> Vec<(f64, f64)> {
        match &self.slab {
            None => alloc::vec![(1.0, (1.0 + self.v).sqrt())],
            Some(s) => alloc::vec![(1.0 - s.rho, self.v.sqrt()), (s.rho, (s.a + self.v).sqrt())],
        }
    }

    /// Location and width of the activity transition in `u`, if any.
    fn transition(&self) -> Option<(f64, f64)> {
        let s = self.slab.as_ref()?;
        if s.log_odds0 >= 0.0 {
            return None;
        }
        let u = (-2.0 * s.log_odds0 / s.curv).sqrt();
        Some((u, 1.0 / (s.curv * u)))
    }

    fn breaks(&self, sd: f64, symmetric: bool) -> Vec<f64> {
        let mut b: Vec<f64> = (0..=TAIL as usize).map(|k| k as f64).collect();
        if let Some((u, w)) = self.transition() {
            let t = u / sd;
            let wt = (w / sd).min(1.0);
            for k in [0.0, 1.0, 3.0, 9.0, 27.0] {
                for p in [t - k * wt, t + k * wt] {
                    if p > 0.0 && p < TAIL {
                        b.push(p);
                    }
                }
            }
        }
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.dedup();
        if symmetric {
            let neg: Vec<f64> = b.iter().rev().filter(|&&x| x > 0.0).map(|x| -x).collect();
            let mut full = neg;
            full.extend(b);
            full
        } else {
            b
        }
    }

    /// `E[h(u, posterior(u))]` over the output law, for `h` even in `u`.
    pub fn expect_even<H: FnMut(f64, Posterior) -> f64>(&self, mut h: H) -> f64 {
        let mut acc = 0.0;
        for (w, sd) in self.components() {
            let breaks = self.breaks(sd, false);
            let norm = 2.0 * w / (2.0 * core::f64::consts::PI).sqrt();
            acc += norm
                * quad::composite(
                    |t| {
                        let u = sd * t;
                        (-0.5 * t * t).exp() * h(u, self.posterior(u))
                    },
                    &breaks,
                );
        }
        acc
    }

    /// `E[h(u, posterior(u))]` over the output law.
    pub fn expect<H: FnMut(f64, Posterior) -> f64>(&self, mut h: H) -> f64 {
        let mut acc = 0.0;
        for (w, sd) in self.components() {
            let breaks = self.breaks(sd, true);
            let norm = w / (2.0 * core::f64::consts::PI).sqrt();
            acc += norm
                * quad::composite(
                    |t| {
                        let u = sd * t;
                        (-0.5 * t * t).exp() * h(u, self.posterior(u))
                    },
                    &breaks,
                );
        }
        acc
    }

    /// `E[h(x, u)]` under the joint law, using the per-component Gaussian
    /// posterior so that the integral stays one-dimensional.
    pub fn expect_joint<H: FnMut(f64, f64, f64) -> f64>(&self, mut h_moments: H) -> f64 {
        // h_moments(u, m, c) must return E[h(x, u) | u, component] for x ~ N(m, c).
        let mut acc = 0.0;
        let comps = self.components();
        for (idx, (w, sd)) in comps.into_iter().enumerate() {
            let breaks = self.breaks(sd, true);
            let norm = w / (2.0 * core::f64::consts::PI).sqrt();
            let (gain, cvar) = match (&self.slab, idx) {
                (Some(_), 0) => (0.0, 0.0),
                (Some(s), _) => (s.gain, s.cvar),
                (None, _) => (1.0 / (1.0 + self.v), self.v / (1.0 + self.v)),
            };
            acc += norm
                * quad::composite(
                    |t| {
                        let u = sd * t;
                        (-0.5 * t * t).exp() * h_moments(u, gain * u, cvar)
                    },
                    &breaks,
                );
        }
        acc
    }
}

/// A separable denoiser used by module B.
pub trait ScalarDenoiser: Sync {
    fn eval(&self, u: f64, v: f64) -> f64;
    fn derivative(&self, u: f64, v: f64) -> f64;

    /// Consistent estimate of the mean squared error over a section of
    /// inputs. Defaults to Stein's unbiased risk estimate.
    fn error_estimate(&self, u: &[f64], v: f64) -> f64 {
        let n = u.len() as f64;
        u.iter()
            .map(|&x| {
                let f = self.eval(x, v);
                (f - x) * (f - x) + 2.0 * v * self.derivative(x, v) - v
            })
            .sum::<f64>()
            / n
    }

    /// True for the posterior-mean denoiser of the signal prior.
    fn is_bayes(&self) -> bool {
        false
    }
}

impl ScalarDenoiser for Prior {
    fn eval(&self, u: f64, v: f64) -> f64 {
        Channel::new(*self, v).posterior(u).mean
    }

    fn derivative(&self, u: f64, v: f64) -> f64 {
        Channel::new(*self, v).derivative(u)
    }

    fn error_estimate(&self, u: &[f64], v: f64) -> f64 {
        let ch = Channel::new(*self, v);
        u.iter().map(|&x| ch.posterior(x).var).sum::<f64>() / u.len() as f64
    }

    fn is_bayes(&self) -> bool {
        true
    }
}

/// The all-zero denoiser.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDenoiser;

impl ScalarDenoiser for ZeroDenoiser {
    fn eval(&self, _u: f64, _v: f64) -> f64 {
        0.0
    }

    fn derivative(&self, _u: f64, _v: f64) -> f64 {
        0.0
    }
}

/// Mutual information `I(s)` tabulated for fast repeated evaluation, with
/// cubic Hermite interpolation using `I'(s) = mmse(s) / 2`.
#[derive(Debug, Clone)]
pub struct MutualInfoTable {
    prior: Prior,
    s: Vec<f64>,
    value: Vec<f64>,
    slope: Vec<f64>,
}

impl MutualInfoTable {
    pub fn new(prior: Prior, s_max: f64) -> Self {
        let mut s = Vec::new();
        for k in 0..16 {
            s.push(1e-4 * k as f64 / 16.0);
        }
        let ratio = 10f64.powf(1.0 / 64.0);
        let mut x = 1e-4;
        while x < s_max * ratio {
            s.push(x);
            x *= ratio;
        }
        let mut value = Vec::with_capacity(s.len());
        let mut slope = Vec::with_capacity(s.len());
        let mut acc = 0.0;
        for (k, &sk) in s.iter().enumerate() {
            if k > 0 {
                acc += 0.5 * quad::gauss_legendre(|t| prior.mmse(t), s[k - 1], sk);
            }
            value.push(acc);
            slope.push(0.5 * prior.mmse(sk));
        }
        MutualInfoTable { prior, s, value, slope }
    }

    pub fn prior(&self) -> Prior {
        self.prior
    }

    pub fn s_max(&self) -> f64 {
        *self.s.last().unwrap()
    }

    pub fn eval(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        let last = self.s.len() - 1;
        if s >= self.s[last] {
            return self.value[last] + 0.5 * integrate_mmse(&self.prior, self.s[last], s);
        }
        let k = self.s.partition_point(|&x| x <= s) - 1;
        let (x0, x1) = (self.s[k], self.s[k + 1]);
        let h = x1 - x0;
        let t = (s - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.value[k] + h10 * h * self.slope[k] + h01 * self.value[k + 1] + h11 * h * self.slope[k + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bg() -> Prior {
        Prior::bernoulli_gaussian(0.1).unwrap()
    }

    /// Posterior mean by brute-force integration over the prior.
    fn posterior_mean_oracle(rho: f64, u: f64, v: f64) -> f64 {
        let a = 1.0 / rho;
        let lik = |x: f64| (-(u - x) * (u - x) / (2.0 * v)).exp();
        let slab = |x: f64| (-(x * x) / (2.0 * a)).exp() / (2.0 * core::f64::consts::PI * a).sqrt();
        let lo = u - 20.0 * v.sqrt();
        let hi = u + 20.0 * v.sqrt();
        let num = rho * quad::adaptive(|x| x * slab(x) * lik(x), lo, hi, 1e-15);
        let den = rho * quad::adaptive(|x| slab(x) * lik(x), lo, hi, 1e-15) + (1.0 - rho) * lik(0.0);
        num / den
    }

    #[test]
    fn gaussian_prior_closed_forms() {
        let p = Prior::Gaussian;
        assert!((p.denoise(1.3, 0.5).unwrap() - 1.3 / 1.5).abs() < 1e-15);
        assert!((p.denoise_derivative(-4.0, 0.5).unwrap() - 1.0 / 1.5).abs() < 1e-15);
        assert!((p.posterior_variance(2.0, 0.25).unwrap() - 0.2).abs() < 1e-15);
        assert!((p.mmse(3.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn odd_symmetry_at_zero() {
        assert_eq!(bg().denoise(0.0, 0.3).unwrap(), 0.0);
        let a = bg().denoise(0.8, 0.3).unwrap();
        let b = bg().denoise(-0.8, 0.3).unwrap();
        assert_eq!(a, -b);
    }

    #[test]
    fn bg_denoiser_matches_quadrature_posterior() {
        let f = bg().denoise(1.0, 0.5).unwrap();
        let oracle = posterior_mean_oracle(0.1, 1.0, 0.5);
        assert!((f - oracle).abs() < 1e-10, "{f} vs {oracle}");
    }

    #[test]
    fn derivative_matches_central_difference() {
        let (u, v, h) = (0.7, 0.3, 1e-6);
        let d = bg().denoise_derivative(u, v).unwrap();
        let fd = (bg().denoise(u + h, v).unwrap() - bg().denoise(u - h, v).unwrap()) / (2.0 * h);
        assert!(((d - fd) / d).abs() < 1e-6);
    }

    #[test]
    fn posterior_variance_is_v_times_derivative() {
        for &(u, v) in &[(0.1, 0.01), (1.0, 0.5), (-3.0, 2.0), (40.0, 1e-3)] {
            let var = bg().posterior_variance(u, v).unwrap();
            let d = bg().denoise_derivative(u, v).unwrap();
            assert!((var - v * d).abs() <= 1e-10 * var.max(1e-300));
        }
    }

    #[test]
    fn rho_one_is_gaussian() {
        let p = Prior::bernoulli_gaussian(1.0).unwrap();
        for &(u, v) in &[(0.3, 0.1), (-2.0, 3.0)] {
            assert!((p.denoise(u, v).unwrap() - Prior::Gaussian.denoise(u, v).unwrap()).abs() < 1e-12);
        }
        for &s in &[0.0, 0.5, 7.0, 1e4] {
            assert!((p.mmse(s) - Prior::Gaussian.mmse(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_nonpositive_variance() {
        assert!(bg().denoise(1.0, 0.0).is_err());
        assert!(bg().denoise_derivative(1.0, -1.0).is_err());
        assert!(Prior::Gaussian.posterior_variance(1.0, 0.0).is_err());
    }

    #[test]
    fn huge_inputs_do_not_overflow() {
        let f = bg().denoise(1e6, 1e-8).unwrap();
        assert!(f.is_finite() && (f - 1e6).abs() < 1.0);
        assert!(bg().denoise_derivative(-1e6, 1e-8).unwrap().is_finite());
    }

    #[test]
    fn mmse_endpoints_and_bounds() {
        assert_eq!(bg().mmse(0.0), 1.0);
        for &s in &[1.0, 10.0, 100.0] {
            let m = bg().mmse(s);
            assert!(m <= 1.0f64.min(1.0 / s), "s={s} mmse={m}");
        }
    }

    #[test]
    fn mmse_close_to_gauss_hermite_at_moderate_snr() {
        // The fixed rule under-resolves the activity transition, so only
        // rough agreement is expected.
        for &(s, tol) in &[(0.1, 1e-6), (1.0, 1e-2), (3.0, 1e-1)] {
            let a = bg().mmse(s);
            let b = bg().mmse_gauss_hermite(s);
            assert!(((a - b) / a).abs() < tol, "s={s}: {a} vs {b}");
        }
    }

    #[test]
    fn mmse_reference_values() {
        // Independent adaptive integration of E[Var(x|u)], rho = 0.1.
        let reference = [(0.1, 0.855423006017514), (1.0, 0.20672436421374218), (3.0, 0.06600446980939777), (10.0, 0.017233733702971724)];
        for (s, m) in reference {
            assert!((bg().mmse(s) - m).abs() < 1e-12, "s={s}");
        }
    }

    #[test]
    fn mmse_matches_adaptive_reference_at_high_snr() {
        // Reference: adaptive integration of Var(x|u) against the output density.
        for &s in &[1e3, 1e5, 1e7] {
            let v = 1.0 / s;
            let ch = bg().channel(v).unwrap();
            let rho: f64 = 0.1;
            let a = 1.0 / rho;
            let dens = |u: f64| {
                let g = |var: f64| (-(u * u) / (2.0 * var)).exp() / (2.0 * core::f64::consts::PI * var).sqrt();
                (1.0 - rho) * g(v) + rho * g(a + v)
            };
            let mut reference = 0.0;
            let mut lo = 0.0;
            let mut hi = 1e-6;
            while lo < 60.0 {
                reference += 2.0 * quad::adaptive(|u| dens(u) * ch.posterior(u).var, lo, hi, 1e-18);
                lo = hi;
                hi *= 2.0;
            }
            let m = bg().mmse(s);
            assert!(((m - reference) / reference).abs() < 1e-8, "s={s}: {m} vs {reference}");
        }
    }

    #[test]
    fn mmse_equals_one_minus_mean_square_estimate() {
        for &s in &[0.5, 20.0, 1e4] {
            let ch = bg().channel(1.0 / s).unwrap();
            let second = ch.expect_even(|_, p| p.mean * p.mean);
            assert!((bg().mmse(s) - (1.0 - second)).abs() < 1e-10);
        }
    }

    #[test]
    fn mmse_strictly_decreasing() {
        let mut prev = f64::INFINITY;
        for k in 0..200 {
            let s = 10f64.powf(-3.0 + 9.0 * k as f64 / 199.0);
            let m = bg().mmse(s);
            assert!(m < prev);
            prev = m;
        }
    }

    #[test]
    fn gaussian_mutual_information() {
        let i = Prior::Gaussian.mutual_info(3.0);
        let exact = 0.5 * 4f64.ln();
        assert!(((i - exact) / exact).abs() < 1e-6);
        assert_eq!(Prior::Gaussian.mutual_info(0.0), 0.0);
    }

    #[test]
    fn mutual_information_derivative_is_half_mmse() {
        let (s, h) = (2.5, 1e-4);
        let fd = (bg().mutual_info(s + h) - bg().mutual_info(s - h)) / (2.0 * h);
        assert!((fd - 0.5 * bg().mmse(s)).abs() < 1e-5);
    }

    #[test]
    fn mutual_information_monotone_on_grid() {
        let mut prev = 0.0;
        for k in 1..=50 {
            let i = bg().mutual_info(2.0 * k as f64);
            assert!(i >= prev);
            prev = i;
        }
    }

    #[test]
    fn table_interpolation_error_is_small() {
        let table = MutualInfoTable::new(bg(), 1e6);
        for &s in &[3e-5, 0.0123, 0.77, 5.3, 123.4, 4.2e4, 9.9e5, 2e6] {
            let direct = bg().mutual_info(s);
            assert!((table.eval(s) - direct).abs() < 1e-7, "s={s}");
        }
    }

    #[test]
    fn posterior_variance_average_is_consistent_with_mmse() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = 4.0;
        let v = 1.0 / s;
        let ch = bg().channel(v).unwrap();
        let n = 1_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let x = bg().sample(&mut rng);
            let z: f64 = rng.sample(StandardNormal);
            acc += ch.posterior(x + v.sqrt() * z).var;
        }
        let mc = acc / n as f64;
        assert!(((mc - bg().mmse(s)) / bg().mmse(s)).abs() < 5e-3);
    }

    #[test]
    fn bayes_estimate_is_orthogonal_to_its_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = 0.2;
        let ch = bg().channel(v).unwrap();
        let n = 200_000;
        let (mut acc, mut acc2) = (0.0, 0.0);
        for _ in 0..n {
            let x = bg().sample(&mut rng);
            let z: f64 = rng.sample(StandardNormal);
            let f = ch.posterior(x + v.sqrt() * z).mean;
            let t = (x - f) * f;
            acc += t;
            acc2 += t * t;
        }
        let mean = acc / n as f64;
        let sd = ((acc2 / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(mean.abs() < 3.0 * sd);
    }

    #[test]
    fn sure_estimate_of_zero_denoiser_is_signal_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v = 0.5;
        let u: Vec<f64> = (0..100_000)
            .map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                bg().sample(&mut rng) + v.sqrt() * z
            })
            .collect();
        let e = ZeroDenoiser.error_estimate(&u, v);
        assert!((e - 1.0).abs() < 0.05);
    }
}
