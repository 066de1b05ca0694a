//! Asymptotic eigenvalue laws of `AᵀA` and their η- and R-transforms.
//!
//! All laws are unit mean. `delta` is the rank ratio `M/N`, so a law puts
//! mass `1 - delta` at zero.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::quad;
use crate::{Error, Result};

/// Accepted deviation of an empirical eigenvalue mean from one.
pub const EMPIRICAL_MEAN_TOL: f64 = 1e-2;

const BISECTION_TOL: f64 = 1e-12;
const INTEGRATION_TOL: f64 = 1e-12;

/// Eigenvalue law of `AᵀA`.
#[derive(Debug, Clone, PartialEq)]
pub enum Spectrum {
    /// Entries of `A` i.i.d. `N(0, 1/M)`: Marchenko–Pastur law.
    IidGaussian { delta: f64 },
    /// Orthogonal rows: a single atom at `1/delta` with mass `delta`.
    RowOrthogonal { delta: f64 },
    /// Singular values in geometric progression with condition number
    /// `kappa`; in the limit the nonzero eigenvalues are log-uniform.
    Geometric { delta: f64, kappa: f64 },
    /// Listed eigenvalues, padded with zeros up to `ambient_dim`.
    Empirical { eigenvalues: Vec<f64>, ambient_dim: usize },
}

/// One evaluation of a transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformPoint {
    pub argument: f64,
    pub value: f64,
}

/// Residuals of the small-argument identities `R(0) = μ₁` and
/// `R'(0) = μ₂ - μ₁²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub r0: f64,
    pub mu1: f64,
    pub r_prime0: f64,
    pub variance: f64,
    pub r0_residual: f64,
    pub r_prime_residual: f64,
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("delta must lie in (0, 1], got {delta}")))
    }
}

impl Spectrum {
    pub fn iid_gaussian(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Spectrum::IidGaussian { delta })
    }

    pub fn row_orthogonal(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(Spectrum::RowOrthogonal { delta })
    }

    pub fn geometric(delta: f64, kappa: f64) -> Result<Self> {
        check_delta(delta)?;
        if !(kappa >= 1.0) || !kappa.is_finite() {
            return Err(Error::Domain(format!("kappa must be finite and at least 1, got {kappa}")));
        }
        Ok(Spectrum::Geometric { delta, kappa })
    }

    /// Empirical law; the eigenvalue mean must be within
    /// [`EMPIRICAL_MEAN_TOL`] of one.
    pub fn empirical(eigenvalues: Vec<f64>, ambient_dim: usize) -> Result<Self> {
        if eigenvalues.len() > ambient_dim || ambient_dim == 0 {
            return Err(Error::Dim(format!("{} eigenvalues in ambient dimension {ambient_dim}", eigenvalues.len())));
        }
        if eigenvalues.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
            return Err(Error::Domain("eigenvalues must be finite and nonnegative".into()));
        }
        let mean = eigenvalues.iter().sum::<f64>() / ambient_dim as f64;
        if (mean - 1.0).abs() > EMPIRICAL_MEAN_TOL {
            return Err(Error::Domain(format!("eigenvalue mean {mean} is not one")));
        }
        Ok(Spectrum::Empirical { eigenvalues, ambient_dim })
    }

    /// Empirical law rescaled to unit mean.
    pub fn empirical_normalized(mut eigenvalues: Vec<f64>, ambient_dim: usize) -> Result<Self> {
        let mean = eigenvalues.iter().sum::<f64>() / ambient_dim.max(1) as f64;
        if !(mean > 0.0) {
            return Err(Error::Domain("eigenvalues sum to zero".into()));
        }
        for l in eigenvalues.iter_mut() {
            *l /= mean;
        }
        Self::empirical(eigenvalues, ambient_dim)
    }

    /// Fraction of nonzero eigenvalues.
    pub fn delta(&self) -> f64 {
        match self {
            Spectrum::IidGaussian { delta } | Spectrum::RowOrthogonal { delta } | Spectrum::Geometric { delta, .. } => *delta,
            Spectrum::Empirical { eigenvalues, ambient_dim } => {
                eigenvalues.iter().filter(|&&l| l > 0.0).count() as f64 / *ambient_dim as f64
            }
        }
    }

    /// Law of `|W| AᵀA` for a row section spanning `width` column sections
    /// whose rescaled block `sqrt(|W|) A` is drawn from `self`'s ensemble.
    pub fn section(&self, width: usize) -> Result<Spectrum> {
        if width == 0 {
            return Err(Error::Dim("section width must be positive".into()));
        }
        let w = width as f64;
        match *self {
            Spectrum::IidGaussian { delta } => Ok(Spectrum::IidGaussian { delta: delta / w }),
            Spectrum::RowOrthogonal { delta } => Ok(Spectrum::RowOrthogonal { delta: delta / w }),
            Spectrum::Geometric { delta, kappa } => Ok(Spectrum::Geometric { delta: delta / w, kappa }),
            Spectrum::Empirical { .. } if width == 1 => Ok(self.clone()),
            Spectrum::Empirical { .. } => Err(Error::Config("empirical laws have no section law".into())),
        }
    }

    /// `(C, a)` with `C = 2 ln(kappa) / delta` and `a = kappa² - 1`, or
    /// `None` when the law collapses to a single atom.
    fn geometric_params(&self) -> Option<(f64, f64)> {
        match *self {
            Spectrum::Geometric { delta, kappa } if kappa > 1.0 => Some((2.0 * kappa.ln() / delta, kappa * kappa - 1.0)),
            _ => None,
        }
    }

    /// Largest eigenvalue of the limiting law (empirical: largest listed).
    pub fn lambda_max(&self) -> f64 {
        match self {
            Spectrum::IidGaussian { delta } => (1.0 + delta.sqrt()).powi(2) / delta,
            Spectrum::RowOrthogonal { delta } => 1.0 / delta,
            Spectrum::Geometric { delta, kappa } => match self.geometric_params() {
                Some((c, a)) => c * kappa * kappa / a,
                None => 1.0 / delta,
            },
            Spectrum::Empirical { eigenvalues, .. } => eigenvalues.iter().cloned().fold(0.0, f64::max),
        }
    }

    /// `1 - η(z)`, computed without cancellation for small `z`.
    pub fn one_minus_eta(&self, z: f64) -> f64 {
        debug_assert!(z >= 0.0);
        if z == 0.0 {
            return 0.0;
        }
        if z.is_infinite() {
            return self.delta();
        }
        match self {
            Spectrum::IidGaussian { delta } => {
                let d = *delta;
                // eta = 2d / (b + sqrt(b² + 4zd)), b = d - z(1 - d)
                let b = d - z * (1.0 - d);
                let root = (b * b + 4.0 * z * d).sqrt();
                let root_minus_d = z * (4.0 * d - (1.0 - d) * (b + d)) / (root + d);
                let num = -z * (1.0 - d) + root_minus_d;
                num / (b + root)
            }
            Spectrum::RowOrthogonal { delta } => delta * z / (delta + z),
            Spectrum::Geometric { delta, .. } => match self.geometric_params() {
                Some((c, a)) => (a * c * z / (a + c * z)).ln_1p() / c,
                None => delta * z / (delta + z),
            },
            Spectrum::Empirical { eigenvalues, ambient_dim } => {
                eigenvalues.iter().map(|&l| l * z / (1.0 + l * z)).sum::<f64>() / *ambient_dim as f64
            }
        }
    }

    /// η-transform `E[1 / (1 + λ z)]` for `z ≥ 0`.
    pub fn eta_transform(&self, z: f64) -> f64 {
        1.0 - self.one_minus_eta(z)
    }

    /// `-lim_{w→∞} w η(w)`; `-∞` for rank-deficient laws.
    pub fn z_min(&self) -> f64 {
        match self {
            Spectrum::IidGaussian { .. } => f64::NEG_INFINITY,
            Spectrum::RowOrthogonal { delta } => {
                if *delta < 1.0 {
                    f64::NEG_INFINITY
                } else {
                    -1.0
                }
            }
            Spectrum::Geometric { delta, kappa } => {
                if *delta < 1.0 {
                    return f64::NEG_INFINITY;
                }
                match self.geometric_params() {
                    Some((c, a)) => -a * (1.0 - 1.0 / (kappa * kappa)) / (c * c),
                    None => -1.0,
                }
            }
            Spectrum::Empirical { eigenvalues, ambient_dim } => {
                if eigenvalues.len() < *ambient_dim || eigenvalues.contains(&0.0) {
                    f64::NEG_INFINITY
                } else {
                    -eigenvalues.iter().map(|&l| 1.0 / l).sum::<f64>() / *ambient_dim as f64
                }
            }
        }
    }

    /// R-transform at `z ≤ 0`.
    pub fn r_transform(&self, z: f64) -> Result<f64> {
        if !(z <= 0.0) {
            return Err(Error::Domain(format!("R-transform argument must be nonpositive, got {z}")));
        }
        if z <= self.z_min() {
            return Err(Error::Domain(format!("R-transform argument {z} at or below z_min {}", self.z_min())));
        }
        if z == 0.0 {
            return Ok(self.moments(1)[0]);
        }
        let x = -z;
        match self {
            Spectrum::IidGaussian { delta } => Ok(delta / (delta + x)),
            Spectrum::RowOrthogonal { delta } => Ok(row_orthogonal_r(*delta, x)),
            Spectrum::Geometric { delta, .. } if self.geometric_params().is_none() => Ok(row_orthogonal_r(*delta, x)),
            _ => {
                let w = self.invert_w_eta(x)?;
                Ok(self.one_minus_eta(w) / x)
            }
        }
    }

    /// Solves `w η(w) = x` for `w` by bisection.
    fn invert_w_eta(&self, x: f64) -> Result<f64> {
        let g = |w: f64| w - w * self.one_minus_eta(w);
        let mut lo = 0.0;
        let mut hi = x.max(1e-300);
        while g(hi) < x {
            lo = hi;
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Domain(format!("cannot invert w eta(w) = {x}")));
            }
        }
        while hi - lo > BISECTION_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if g(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Moments `μ₁..μ_{k_max}`.
    pub fn moments(&self, k_max: usize) -> Vec<f64> {
        (1..=k_max).map(|k| self.moment(k)).collect()
    }

    fn moment(&self, k: usize) -> f64 {
        let kf = k as f64;
        match self {
            Spectrum::IidGaussian { delta } => {
                // Narayana polynomial of the Marchenko–Pastur law.
                let d = *delta;
                let mut m = 0.0;
                for j in 0..k {
                    m += d.powi(j as i32) / (j as f64 + 1.0) * binomial(k, j) * binomial(k - 1, j);
                }
                d.powf(1.0 - kf) * m
            }
            Spectrum::RowOrthogonal { delta } => delta.powf(1.0 - kf),
            Spectrum::Geometric { delta, kappa } => match self.geometric_params() {
                Some((c, _)) => (c / (1.0 - kappa.powi(-2))).powf(kf) * (1.0 - kappa.powf(-2.0 * kf)) / (c * kf),
                None => delta.powf(1.0 - kf),
            },
            Spectrum::Empirical { eigenvalues, ambient_dim } => {
                eigenvalues.iter().map(|&l| l.powi(k as i32)).sum::<f64>() / *ambient_dim as f64
            }
        }
    }

    /// `E[f(λ)]` under the law.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        let zero_mass = 1.0 - self.delta();
        let atom0 = if zero_mass > 0.0 { zero_mass * f(0.0) } else { 0.0 };
        match self {
            Spectrum::IidGaussian { delta } => {
                let d = *delta;
                // x = (1 + d) + 2 sqrt(d) cos(θ), written in half angles so
                // the lower edge has no cancellation when d = 1.
                let sd = d.sqrt();
                let gap = (1.0 - sd) * (1.0 - sd);
                let mut density = |theta: f64| {
                    let (sh, ch) = (0.5 * theta).sin_cos();
                    let x = gap + 4.0 * sd * ch * ch;
                    if x <= 0.0 {
                        return 0.0;
                    }
                    f(x / d) * 16.0 * sh * sh * ch * ch / (2.0 * PI * x)
                };
                // Pre-split so that a lucky agreement on one coarse panel
                // cannot end the refinement early.
                let panels = 16;
                let h = PI / panels as f64;
                let bulk: f64 = (0..panels)
                    .map(|k| quad::adaptive(&mut density, k as f64 * h, (k + 1) as f64 * h, INTEGRATION_TOL / panels as f64))
                    .sum();
                atom0 + d * bulk
            }
            Spectrum::RowOrthogonal { delta } => atom0 + delta * f(1.0 / delta),
            Spectrum::Geometric { delta, kappa } => {
                if self.geometric_params().is_none() {
                    return atom0 + delta * f(1.0 / delta);
                }
                let top = self.lambda_max();
                let two_ln_k = 2.0 * kappa.ln();
                let panels = 16;
                let h = 1.0 / panels as f64;
                let mut g = |u: f64| f(top * (-two_ln_k * u).exp());
                let body: f64 =
                    (0..panels).map(|k| quad::adaptive(&mut g, k as f64 * h, (k + 1) as f64 * h, INTEGRATION_TOL / panels as f64)).sum();
                atom0 + delta * body
            }
            Spectrum::Empirical { eigenvalues, ambient_dim } => {
                let n = *ambient_dim as f64;
                let padded = (*ambient_dim - eigenvalues.len()) as f64;
                let zeros = if padded > 0.0 { padded * f(0.0) } else { 0.0 };
                (zeros + eigenvalues.iter().map(|&l| f(l)).sum::<f64>()) / n
            }
        }
    }

    /// Evaluates η on a grid of nonnegative arguments.
    pub fn eta_points(&self, grid: &[f64]) -> Vec<TransformPoint> {
        grid.iter().map(|&z| TransformPoint { argument: z, value: self.eta_transform(z) }).collect()
    }

    /// Evaluates R on a grid of nonpositive arguments.
    pub fn r_points(&self, grid: &[f64]) -> Result<Vec<TransformPoint>> {
        grid.iter().map(|&z| Ok(TransformPoint { argument: z, value: self.r_transform(z)? })).collect()
    }

    /// Checks `R(0) = μ₁` and `R'(0) = μ₂ - μ₁²`. The derivative is taken
    /// with a one-sided five-point stencil because R is only defined on
    /// `z ≤ 0`.
    pub fn identities_check(&self) -> Result<IdentityReport> {
        let mu = self.moments(2);
        let r0 = self.r_transform(0.0)?;
        let h = 1e-3 / mu[1].max(1.0);
        let mut f = [0.0; 5];
        for (k, fk) in f.iter_mut().enumerate() {
            *fk = self.r_transform(-(k as f64) * h)?;
        }
        let r_prime0 = (25.0 * f[0] - 48.0 * f[1] + 36.0 * f[2] - 16.0 * f[3] + 3.0 * f[4]) / (12.0 * h);
        let variance = mu[1] - mu[0] * mu[0];
        Ok(IdentityReport {
            r0,
            mu1: mu[0],
            r_prime0,
            variance,
            r0_residual: (r0 - mu[0]).abs(),
            r_prime_residual: (r_prime0 - variance).abs(),
        })
    }
}

/// R(-x) of the single-atom law.
fn row_orthogonal_r(delta: f64, x: f64) -> f64 {
    // w solves (1 - d) w² + (d - x) w - x d = 0.
    let a = 1.0 - delta;
    let b = delta - x;
    let w = if a == 0.0 {
        x * delta / b
    } else if b >= 0.0 {
        2.0 * x * delta / (b + (b * b + 4.0 * a * x * delta).sqrt())
    } else {
        (-b + (b * b + 4.0 * a * x * delta).sqrt()) / (2.0 * a)
    };
    delta * w / ((delta + w) * x)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut c = 1.0;
    for j in 0..k {
        c = c * (n - j) as f64 / (j + 1) as f64;
    }
    c
}

/// The R function driving the approximate state evolution and potential.
#[derive(Debug, Clone, PartialEq)]
pub enum RLaw {
    /// `R(z) = delta / (delta - z)`.
    Rational { delta: f64 },
    /// Coupled limit of the geometric ensemble,
    /// `R(z) = int_1^{κ²} dy / (κ² - 1 - C z y)`.
    GeometricLimit { delta: f64, kappa: f64 },
    /// The R-transform of a given law.
    Exact(Spectrum),
}

impl RLaw {
    /// Limit of `R_{G[ℓ]}(z / |W|)` as the coupling width grows, for a row
    /// section ensemble described by `spec`.
    pub fn coupled_limit(spec: &Spectrum) -> Result<RLaw> {
        match *spec {
            Spectrum::IidGaussian { delta } | Spectrum::RowOrthogonal { delta } => Ok(RLaw::Rational { delta }),
            Spectrum::Geometric { delta, kappa } => {
                if kappa > 1.0 {
                    Ok(RLaw::GeometricLimit { delta, kappa })
                } else {
                    Ok(RLaw::Rational { delta })
                }
            }
            Spectrum::Empirical { .. } => Err(Error::Config("empirical laws have no coupled limit".into())),
        }
    }

    pub fn delta(&self) -> f64 {
        match self {
            RLaw::Rational { delta } | RLaw::GeometricLimit { delta, .. } => *delta,
            RLaw::Exact(s) => s.delta(),
        }
    }

    /// `R(z)` for `z ≤ 0`.
    pub fn eval(&self, z: f64) -> Result<f64> {
        if !(z <= 0.0) {
            return Err(Error::Domain(format!("R argument must be nonpositive, got {z}")));
        }
        match self {
            RLaw::Rational { delta } => Ok(delta / (delta - z)),
            RLaw::GeometricLimit { delta, kappa } => {
                if z == 0.0 {
                    return Ok(1.0);
                }
                let x = -z;
                let c = 2.0 * kappa.ln() / delta;
                let a = kappa * kappa - 1.0;
                Ok((a * c * x / (a + c * x)).ln_1p() / (c * x))
            }
            RLaw::Exact(s) => s.r_transform(z),
        }
    }

    /// `int_0^x R(-t) dt` for `x ≥ 0`.
    pub fn integral(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("integral bound must be nonnegative, got {x}")));
        }
        if x == 0.0 {
            return Ok(0.0);
        }
        if let RLaw::Rational { delta } = self {
            return Ok(delta * (x / delta).ln_1p());
        }
        let mut breaks = Vec::new();
        breaks.push(0.0);
        let mut b = x.min(1e-3);
        while b < x {
            breaks.push(b);
            b *= 2.0;
        }
        breaks.push(x);
        let mut err = None;
        let v = quad::composite(
            |t| match self.eval(-t) {
                Ok(r) => r,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            &breaks,
        );
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}
