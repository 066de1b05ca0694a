//! Spatially coupled measurement systems.
//!
//! Row section `ℓ ∈ 0..L+W` observes `y[ℓ] = A[ℓ] x⃗[ℓ] + n[ℓ]` where
//! `x⃗[ℓ] = sqrt(|W[ℓ]|) Γ[ℓ] x` stacks the in-band column sections in
//! ascending order of the column index.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::denoiser::Prior;
use crate::spectra::Spectrum;
use crate::{Error, Result};

/// Band-structured `(L+W) × L` coupling weights.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMatrix {
    sections: usize,
    width: usize,
    gamma: Vec<f64>,
}

impl BaseMatrix {
    /// All in-band weights equal to `1/sqrt(W+1)`.
    pub fn uniform(sections: usize, width: usize) -> Result<Self> {
        if sections == 0 || width >= sections {
            return Err(Error::Dim(format!("need 0 <= W < L, got L={sections}, W={width}")));
        }
        let rows = sections + width;
        let g = 1.0 / ((width + 1) as f64).sqrt();
        let mut gamma = vec![0.0; rows * sections];
        for l in 0..sections {
            for w in 0..=width {
                gamma[(l + w) * sections + l] = g;
            }
        }
        Ok(BaseMatrix { sections, width, gamma })
    }

    /// User-supplied weights, `rows[ℓ][l]`. In-band weights must be
    /// positive, out-of-band zero, and the power normalization must hold.
    pub fn from_rows(sections: usize, width: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if sections == 0 || width >= sections {
            return Err(Error::Dim(format!("need 0 <= W < L, got L={sections}, W={width}")));
        }
        if rows.len() != sections + width || rows.iter().any(|r| r.len() != sections) {
            return Err(Error::Dim(format!("weights must be {}x{sections}", sections + width)));
        }
        let mut gamma = Vec::with_capacity(rows.len() * sections);
        let mut power = 0.0;
        for (ell, row) in rows.iter().enumerate() {
            for (l, &g) in row.iter().enumerate() {
                let in_band = ell >= l && ell - l <= width;
                if in_band && !(g > 0.0) {
                    return Err(Error::Config(format!("weight [{ell}][{l}] must be positive")));
                }
                if !in_band && g != 0.0 {
                    return Err(Error::Config(format!("weight [{ell}][{l}] lies outside the band")));
                }
                power += g * g;
                gamma.push(g);
            }
        }
        if (power / sections as f64 - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("power normalization gives {}", power / sections as f64)));
        }
        Ok(BaseMatrix { sections, width, gamma })
    }

    /// Number of column sections `L`.
    pub fn sections(&self) -> usize {
        self.sections
    }

    /// Coupling width `W`.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of row sections `L + W`.
    pub fn rows(&self) -> usize {
        self.sections + self.width
    }

    /// `γ[ℓ][l]`, zero outside `ℒ_W × ℒ_0`.
    pub fn gamma(&self, ell: usize, l: usize) -> f64 {
        if ell < self.rows() && l < self.sections {
            self.gamma[ell * self.sections + l]
        } else {
            0.0
        }
    }

    /// `(w_min, w_max)` of row section `ell`.
    pub fn window(&self, ell: usize) -> Result<(usize, usize)> {
        if ell >= self.rows() {
            return Err(Error::Index { index: ell, len: self.rows() });
        }
        let w_min = ell.saturating_sub(self.sections - 1);
        let w_max = self.width.min(ell);
        Ok((w_min, w_max))
    }

    /// `|W[ℓ]|`.
    pub fn window_size(&self, ell: usize) -> Result<usize> {
        let (lo, hi) = self.window(ell)?;
        Ok(hi - lo + 1)
    }

    /// Column sections seen by row `ell`, ascending.
    pub fn columns(&self, ell: usize) -> Result<core::ops::RangeInclusive<usize>> {
        let (lo, hi) = self.window(ell)?;
        Ok(ell - hi..=ell - lo)
    }

    /// Row sections that see column section `l`, as `(ℓ, w)` pairs with
    /// `ℓ = l + w`.
    pub fn branches(&self, l: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..=self.width).map(move |w| (l + w, w))
    }

    /// Position of column section `l` inside `x⃗[ℓ]`, in units of `N`.
    pub fn block_index(&self, ell: usize, l: usize) -> Result<usize> {
        let cols = self.columns(ell)?;
        if !cols.contains(&l) {
            return Err(Error::Index { index: l, len: self.sections });
        }
        Ok(l - cols.start())
    }
}

/// Initial variance `|W[ℓ]| N_c⁻¹ Σ_w N γ²[ℓ][ℓ-w]` of the module-A input.
pub fn initial_variance(base: &BaseMatrix, ell: usize, n: usize) -> Result<f64> {
    let width = base.window_size(ell)? as f64;
    let nc = width * n as f64;
    let sum: f64 = base.columns(ell)?.map(|l| n as f64 * base.gamma(ell, l).powi(2)).sum();
    Ok(width * sum / nc)
}

/// Sparse action of `Γ[ℓ]` on the full signal.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaProjector {
    n: usize,
    total: usize,
    /// `(column section, weight)` for each block of `Γ[ℓ] x`, in order.
    entries: Vec<(usize, f64)>,
}

impl GammaProjector {
    pub fn new(base: &BaseMatrix, ell: usize, n: usize) -> Result<Self> {
        let entries = base.columns(ell)?.map(|l| (l, base.gamma(ell, l))).collect();
        Ok(GammaProjector { n, total: base.sections() * n, entries })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    /// `Γ[ℓ] x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.total);
        let n = self.n;
        let mut out = Vec::with_capacity(self.entries.len() * n);
        for &(l, g) in &self.entries {
            out.extend(x[l * n..(l + 1) * n].iter().map(|v| g * v));
        }
        out
    }

    /// `Γ[ℓ]ᵀ u`.
    pub fn adjoint(&self, u: &[f64]) -> Vec<f64> {
        debug_assert_eq!(u.len(), self.entries.len() * self.n);
        let n = self.n;
        let mut out = vec![0.0; self.total];
        for (k, &(l, g)) in self.entries.iter().enumerate() {
            for (o, v) in out[l * n..(l + 1) * n].iter_mut().zip(&u[k * n..(k + 1) * n]) {
                *o += g * v;
            }
        }
        out
    }
}

/// Random matrix ensemble of the rescaled row sections `sqrt(|W[ℓ]|) A[ℓ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ensemble {
    /// i.i.d. `N(0, 1/M)` entries.
    IidGaussian,
    /// Orthogonal rows with singular value `sqrt(|W[ℓ]| / δ)`.
    RowOrthogonal,
    /// Geometric singular values with condition number `kappa`.
    Geometric { kappa: f64 },
}

impl Ensemble {
    /// Asymptotic law of `AᵀA` for an uncoupled matrix with ratio `delta`.
    pub fn spectrum(&self, delta: f64) -> Result<Spectrum> {
        match *self {
            Ensemble::IidGaussian => Spectrum::iid_gaussian(delta),
            Ensemble::RowOrthogonal => Spectrum::row_orthogonal(delta),
            Ensemble::Geometric { kappa } => Spectrum::geometric(delta, kappa),
        }
    }
}

/// How orthogonally invariant sections are realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Construction {
    /// Hadamard when `|W[ℓ]| N` is a power of two, Haar otherwise.
    #[default]
    Auto,
    /// Always Hadamard; other sizes are rejected.
    Hadamard,
    /// Haar-distributed right factor from a Gaussian QR.
    Haar,
}

#[derive(Debug, Clone)]
enum Operator {
    /// `A` stored densely with left factor `U` from `AAᵀ = U S² Uᵀ`.
    Dense { a: DMatrix<f64>, u: DMatrix<f64> },
    /// `A = diag(s) P H D / sqrt(n)`: row selection `P`, Walsh–Hadamard `H`,
    /// column signs `D`.
    Hadamard { rows: Vec<usize>, signs: Vec<f64> },
    /// `A = diag(s) Qᵀ` with orthonormal `Q ∈ R^{Nc×M}`.
    Haar { q: DMatrix<f64> },
}

/// One row section with its cached singular value decomposition.
#[derive(Debug, Clone)]
pub struct RowSection {
    pub ell: usize,
    pub w_min: usize,
    pub w_max: usize,
    pub m: usize,
    pub nc: usize,
    s: Vec<f64>,
    op: Operator,
}

impl RowSection {
    /// `|W[ℓ]|`.
    pub fn window_size(&self) -> usize {
        self.w_max - self.w_min + 1
    }

    /// Singular values of `A[ℓ]` (length `M`).
    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    /// `A[ℓ] x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nc);
        match &self.op {
            Operator::Dense { a, .. } => (a * DVector::from_column_slice(x)).as_slice().to_vec(),
            Operator::Hadamard { rows, signs } => {
                let mut buf: Vec<f64> = x.iter().zip(signs).map(|(v, d)| v * d).collect();
                fwht(&mut buf);
                let norm = 1.0 / (self.nc as f64).sqrt();
                rows.iter().zip(&self.s).map(|(&r, s)| s * norm * buf[r]).collect()
            }
            Operator::Haar { q } => {
                let z = q.tr_mul(&DVector::from_column_slice(x));
                z.iter().zip(&self.s).map(|(v, s)| v * s).collect()
            }
        }
    }

    /// `A[ℓ]ᵀ r`.
    pub fn apply_transpose(&self, r: &[f64]) -> Vec<f64> {
        assert_eq!(r.len(), self.m);
        match &self.op {
            Operator::Dense { a, .. } => a.tr_mul(&DVector::from_column_slice(r)).as_slice().to_vec(),
            Operator::Hadamard { rows, signs } => {
                let mut buf = vec![0.0; self.nc];
                for ((&row, s), v) in rows.iter().zip(&self.s).zip(r) {
                    buf[row] = s * v;
                }
                fwht(&mut buf);
                let norm = 1.0 / (self.nc as f64).sqrt();
                buf.iter().zip(signs).map(|(v, d)| v * d * norm).collect()
            }
            Operator::Haar { q } => {
                let scaled: Vec<f64> = r.iter().zip(&self.s).map(|(v, s)| v * s).collect();
                (q * DVector::from_vec(scaled)).as_slice().to_vec()
            }
        }
    }

    /// `Uᵀ r`.
    pub fn left_t(&self, r: &[f64]) -> Vec<f64> {
        match &self.op {
            Operator::Dense { u, .. } => u.tr_mul(&DVector::from_column_slice(r)).as_slice().to_vec(),
            _ => r.to_vec(),
        }
    }

    /// `U c`.
    pub fn left(&self, c: &[f64]) -> Vec<f64> {
        match &self.op {
            Operator::Dense { u, .. } => (u * DVector::from_column_slice(c)).as_slice().to_vec(),
            _ => c.to_vec(),
        }
    }

    /// Left singular vectors as a dense matrix.
    pub fn left_factor(&self) -> DMatrix<f64> {
        match &self.op {
            Operator::Dense { u, .. } => u.clone(),
            _ => DMatrix::identity(self.m, self.m),
        }
    }

    /// The `M` right singular vectors paired with nonzero singular values,
    /// as rows. The remaining `Nc - M` columns of `V` are never needed and
    /// are not stored.
    pub fn right_factor_rows(&self) -> DMatrix<f64> {
        let a = self.dense();
        let u = self.left_factor();
        let mut vt = u.transpose() * a;
        for (i, s) in self.s.iter().enumerate() {
            let inv = if *s > 0.0 { 1.0 / s } else { 0.0 };
            vt.row_mut(i).scale_mut(inv);
        }
        vt
    }

    /// `A[ℓ]` assembled densely. Intended for tests and small systems.
    pub fn dense(&self) -> DMatrix<f64> {
        match &self.op {
            Operator::Dense { a, .. } => a.clone(),
            _ => {
                let mut out = DMatrix::zeros(self.m, self.nc);
                let mut e = vec![0.0; self.nc];
                for j in 0..self.nc {
                    e[j] = 1.0;
                    let col = self.apply(&e);
                    out.column_mut(j).copy_from_slice(&col);
                    e[j] = 0.0;
                }
                out
            }
        }
    }
}

/// In-place unnormalized fast Walsh–Hadamard transform.
pub fn fwht(buf: &mut [f64]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    let mut h = 1;
    while h < n {
        for block in buf.chunks_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h *= 2;
    }
}

/// Parameters of a coupled system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub base: BaseMatrix,
    /// Column-section length `N`.
    pub n: usize,
    /// Row-section length `M`.
    pub m: usize,
    pub ensemble: Ensemble,
    pub construction: Construction,
    pub prior: Prior,
    pub sigma2: f64,
    pub seed: u64,
}

impl SystemConfig {
    /// `δ = M / N`.
    pub fn delta(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// Asymptotic law of `|W[ℓ]| A[ℓ]ᵀ A[ℓ]` for each row section.
    pub fn section_spectra(&self) -> Result<Vec<Spectrum>> {
        let base = self.ensemble.spectrum(self.delta())?;
        (0..self.base.rows()).map(|ell| base.section(self.base.window_size(ell)?)).collect()
    }
}

/// A sampled spatially coupled system.
#[derive(Debug, Clone)]
pub struct CoupledSystem {
    pub config: SystemConfig,
    pub sections: Vec<RowSection>,
    /// Ground truth, `L·N` entries.
    pub x: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub noise: Vec<Vec<f64>>,
}

impl CoupledSystem {
    /// Samples the signal, every row section, then the noise, all from one
    /// seeded stream.
    pub fn build(config: SystemConfig) -> Result<Self> {
        let SystemConfig { ref base, n, m, ensemble, construction, prior, sigma2, seed } = config;
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::Domain(format!("noise variance must be positive, got {sigma2}")));
        }
        if n == 0 || m == 0 || m > n {
            return Err(Error::Dim(format!("need 0 < M <= N, got M={m}, N={n}")));
        }
        if let Ensemble::Geometric { kappa } = ensemble {
            if !(kappa >= 1.0) || !kappa.is_finite() {
                return Err(Error::Config(format!("kappa must be finite and at least 1, got {kappa}")));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..base.sections() * n).map(|_| prior.sample(&mut rng)).collect();
        let mut sections = Vec::with_capacity(base.rows());
        for ell in 0..base.rows() {
            sections.push(sample_section(base, ell, n, m, ensemble, construction, &mut rng)?);
        }
        let sd = sigma2.sqrt();
        let noise: Vec<Vec<f64>> = (0..base.rows()).map(|_| (0..m).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()).collect();
        let mut y = Vec::with_capacity(base.rows());
        for (ell, sec) in sections.iter().enumerate() {
            let lifted = lift(base, ell, n, &x)?;
            let mut yl = sec.apply(&lifted);
            for (v, e) in yl.iter_mut().zip(&noise[ell]) {
                *v += e;
            }
            y.push(yl);
        }
        Ok(CoupledSystem { config, sections, x, y, noise })
    }

    pub fn base(&self) -> &BaseMatrix {
        &self.config.base
    }

    pub fn n(&self) -> usize {
        self.config.n
    }

    /// `x⃗[ℓ] = sqrt(|W[ℓ]|) Γ[ℓ] x`.
    pub fn lifted_signal(&self, ell: usize) -> Result<Vec<f64>> {
        lift(self.base(), ell, self.n(), &self.x)
    }

    /// Column section `l` of a full-length vector.
    pub fn section_of<'a>(&self, v: &'a [f64], l: usize) -> &'a [f64] {
        let n = self.n();
        &v[l * n..(l + 1) * n]
    }

    /// Per-section MSE `(1/N) ||x[l] - est[l]||²`.
    pub fn section_mse(&self, est: &[f64]) -> Vec<f64> {
        let n = self.n();
        (0..self.base().sections())
            .map(|l| {
                let a = &self.x[l * n..(l + 1) * n];
                let b = &est[l * n..(l + 1) * n];
                a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / n as f64
            })
            .collect()
    }
}

/// `sqrt(|W[ℓ]|) Γ[ℓ] v` for a full-length vector `v`.
pub fn lift(base: &BaseMatrix, ell: usize, n: usize, v: &[f64]) -> Result<Vec<f64>> {
    let scale = (base.window_size(ell)? as f64).sqrt();
    let mut out = GammaProjector::new(base, ell, n)?.apply(v);
    for o in out.iter_mut() {
        *o *= scale;
    }
    Ok(out)
}

fn sample_section(
    base: &BaseMatrix,
    ell: usize,
    n: usize,
    m: usize,
    ensemble: Ensemble,
    construction: Construction,
    rng: &mut ChaCha8Rng,
) -> Result<RowSection> {
    let (w_min, w_max) = base.window(ell)?;
    let width = w_max - w_min + 1;
    let nc = width * n;
    let scale = 1.0 / (width as f64).sqrt();
    let mk = |s: Vec<f64>, op: Operator| RowSection { ell, w_min, w_max, m, nc, s, op };

    let rescaled_sv: Vec<f64> = match ensemble {
        Ensemble::IidGaussian => {
            let sd = scale / (m as f64).sqrt();
            let a = DMatrix::from_fn(m, nc, |_, _| sd * rng.sample::<f64, _>(StandardNormal));
            let gram = &a * a.transpose();
            let eig = SymmetricEigen::new(gram);
            let s = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
            return Ok(mk(s, Operator::Dense { a, u: eig.eigenvectors }));
        }
        Ensemble::RowOrthogonal => vec![(width as f64 * n as f64 / m as f64).sqrt(); m],
        Ensemble::Geometric { kappa } => geometric_singular_values(m, nc, kappa),
    };
    let s: Vec<f64> = rescaled_sv.iter().map(|v| v * scale).collect();
    let hadamard = match construction {
        Construction::Auto => nc.is_power_of_two(),
        Construction::Hadamard => {
            if !nc.is_power_of_two() {
                return Err(Error::Dim(format!("Hadamard size |W|N = {nc} is not a power of two (row section {ell})")));
            }
            true
        }
        Construction::Haar => false,
    };
    if hadamard {
        // Partial Fisher–Yates for M distinct rows.
        let mut perm: Vec<usize> = (0..nc).collect();
        for i in 0..m {
            let j = rng.random_range(i..nc);
            perm.swap(i, j);
        }
        perm.truncate(m);
        let signs = (0..nc).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        Ok(mk(s, Operator::Hadamard { rows: perm, signs }))
    } else {
        let g = DMatrix::from_fn(nc, m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let qr = g.qr();
        let (mut q, r) = (qr.q(), qr.r());
        for j in 0..m {
            if r[(j, j)] < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        Ok(mk(s, Operator::Haar { q }))
    }
}

/// Singular values `σ_m = σ₀ κ^{-m/(M-1)}` of a rescaled section with
/// `Σ σ_m² = Nc`.
pub fn geometric_singular_values(m: usize, nc: usize, kappa: f64) -> Vec<f64> {
    if m == 1 || kappa == 1.0 {
        return vec![(nc as f64 / m as f64).sqrt(); m];
    }
    let ratio = kappa.powf(-1.0 / (m as f64 - 1.0));
    let r2 = ratio * ratio;
    let s0_sq = nc as f64 * (1.0 - r2) / (1.0 - r2.powi(m as i32));
    let s0 = s0_sq.sqrt();
    (0..m).map(|k| s0 * ratio.powi(k as i32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(l: usize, w: usize, n: usize, m: usize, ensemble: Ensemble, construction: Construction) -> SystemConfig {
        SystemConfig {
            base: BaseMatrix::uniform(l, w).unwrap(),
            n,
            m,
            ensemble,
            construction,
            prior: Prior::bernoulli_gaussian(0.1).unwrap(),
            sigma2: 1e-3,
            seed: 11,
        }
    }

    #[test]
    fn uniform_base_shapes() {
        let b = BaseMatrix::uniform(3, 0).unwrap();
        for ell in 0..3 {
            for l in 0..3 {
                assert_eq!(b.gamma(ell, l), if ell == l { 1.0 } else { 0.0 });
            }
        }
        let b = BaseMatrix::uniform(2, 1).unwrap();
        assert_eq!(b.rows(), 3);
        let g = 1.0 / 2f64.sqrt();
        assert_eq!(b.gamma(0, 0), g);
        assert_eq!(b.gamma(1, 0), g);
        assert_eq!(b.gamma(1, 1), g);
        assert_eq!(b.gamma(2, 1), g);
        assert_eq!(b.gamma(0, 1), 0.0);
        assert!(BaseMatrix::uniform(2, 2).is_err());
        let b = BaseMatrix::uniform(7, 3).unwrap();
        for l in 0..7 {
            let col: f64 = (0..b.rows()).map(|ell| b.gamma(ell, l).powi(2)).sum();
            assert!((col - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn from_rows_validates() {
        let g = 1.0 / 2f64.sqrt();
        let ok = [vec![g, 0.0], vec![g, g], vec![0.0, g]];
        assert!(BaseMatrix::from_rows(2, 1, &ok).is_ok());
        let off_band = [vec![g, 0.1], vec![g, g], vec![0.0, g]];
        assert!(BaseMatrix::from_rows(2, 1, &off_band).is_err());
        let bad_power = [vec![1.0, 0.0], vec![g, g], vec![0.0, g]];
        assert!(BaseMatrix::from_rows(2, 1, &bad_power).is_err());
    }

    #[test]
    fn windows() {
        let b = BaseMatrix::uniform(5, 2).unwrap();
        assert_eq!(b.window(0).unwrap(), (0, 0));
        assert_eq!(b.window(1).unwrap(), (0, 1));
        assert_eq!(b.window(3).unwrap(), (0, 2));
        assert_eq!(b.window(5).unwrap(), (1, 2));
        assert_eq!(b.window(6).unwrap(), (2, 2));
        assert_eq!(b.columns(5).unwrap(), 3..=4);
        assert!(b.window(7).is_err());
        assert_eq!(b.block_index(3, 1).unwrap(), 0);
        assert_eq!(b.block_index(3, 3).unwrap(), 2);
    }

    #[test]
    fn initial_variances() {
        let b = BaseMatrix::uniform(6, 2).unwrap();
        assert!((initial_variance(&b, 3, 16).unwrap() - 1.0).abs() < 1e-15);
        // W[0] = {0}: one branch carrying γ² = 1/3.
        assert!((initial_variance(&b, 0, 16).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let b0 = BaseMatrix::uniform(4, 0).unwrap();
        for ell in 0..4 {
            assert_eq!(initial_variance(&b0, ell, 8).unwrap(), 1.0);
        }
    }

    #[test]
    fn gamma_projector_adjoint() {
        let b = BaseMatrix::uniform(5, 2).unwrap();
        let n = 7;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for ell in 0..b.rows() {
            let p = GammaProjector::new(&b, ell, n).unwrap();
            let x: Vec<f64> = (0..5 * n).map(|_| rng.sample(StandardNormal)).collect();
            let u: Vec<f64> = (0..p.entries().len() * n).map(|_| rng.sample(StandardNormal)).collect();
            let lhs: f64 = p.apply(&x).iter().zip(&u).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(p.adjoint(&u)).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12);
        }
        let id = GammaProjector::new(&BaseMatrix::uniform(3, 0).unwrap(), 1, 4).unwrap();
        let x: Vec<f64> = (0..12).map(|i| i as f64).collect();
        assert_eq!(id.apply(&x), x[4..8].to_vec());
        assert!(GammaProjector::new(&b, 7, n).is_err());
    }

    #[test]
    fn extraction_identity() {
        let sys = CoupledSystem::build(config(5, 2, 16, 8, Ensemble::IidGaussian, Construction::Auto)).unwrap();
        let b = sys.base();
        for l in 0..5 {
            for (ell, _w) in b.branches(l) {
                let lifted = sys.lifted_signal(ell).unwrap();
                let k = b.block_index(ell, l).unwrap();
                let root = (b.window_size(ell).unwrap() as f64).sqrt();
                for i in 0..16 {
                    let lhs = lifted[k * 16 + i] / root;
                    assert!((lhs - b.gamma(ell, l) * sys.x[l * 16 + i]).abs() < 1e-12);
                }
            }
        }
    }

    fn check_factors(sys: &CoupledSystem) {
        for sec in &sys.sections {
            let a = sec.dense();
            let u = sec.left_factor();
            let vt = sec.right_factor_rows();
            let eye = DMatrix::<f64>::identity(sec.m, sec.m);
            assert!((u.transpose() * &u - &eye).amax() < 1e-10);
            assert!((&vt * vt.transpose() - &eye).amax() < 1e-10);
            let s = DMatrix::from_diagonal(&DVector::from_column_slice(sec.singular_values()));
            assert!((&u * s * &vt - &a).amax() < 1e-10);
            let x: Vec<f64> = (0..sec.nc).map(|i| (i as f64 * 0.37).sin()).collect();
            let r: Vec<f64> = (0..sec.m).map(|i| (i as f64 * 0.71).cos()).collect();
            let ax = &a * DVector::from_column_slice(&x);
            let atr = a.tr_mul(&DVector::from_column_slice(&r));
            for (p, q) in sec.apply(&x).iter().zip(ax.iter()) {
                assert!((p - q).abs() < 1e-10);
            }
            for (p, q) in sec.apply_transpose(&r).iter().zip(atr.iter()) {
                assert!((p - q).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn factors_reproduce_sections() {
        check_factors(&CoupledSystem::build(config(3, 1, 16, 6, Ensemble::IidGaussian, Construction::Auto)).unwrap());
        check_factors(&CoupledSystem::build(config(3, 1, 16, 6, Ensemble::RowOrthogonal, Construction::Hadamard)).unwrap());
        check_factors(&CoupledSystem::build(config(3, 2, 8, 6, Ensemble::Geometric { kappa: 10.0 }, Construction::Auto)).unwrap());
        check_factors(&CoupledSystem::build(config(3, 1, 12, 6, Ensemble::Geometric { kappa: 5.0 }, Construction::Haar)).unwrap());
    }

    #[test]
    fn hadamard_size_is_checked() {
        let r = CoupledSystem::build(config(4, 2, 16, 8, Ensemble::RowOrthogonal, Construction::Hadamard));
        assert!(matches!(r, Err(Error::Dim(_))));
        assert!(CoupledSystem::build(config(4, 2, 16, 8, Ensemble::RowOrthogonal, Construction::Auto)).is_ok());
    }

    #[test]
    fn measurements_are_consistent_and_reproducible() {
        let cfg = config(4, 1, 32, 10, Ensemble::RowOrthogonal, Construction::Auto);
        let a = CoupledSystem::build(cfg.clone()).unwrap();
        let b = CoupledSystem::build(cfg).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.x, b.x);
        for (ell, sec) in a.sections.iter().enumerate() {
            let ax = sec.apply(&a.lifted_signal(ell).unwrap());
            for ((y, p), e) in a.y[ell].iter().zip(&ax).zip(&a.noise[ell]) {
                assert_eq!(*y, p + e);
            }
        }
    }

    #[test]
    fn uncoupled_reduces_to_plain_model() {
        let sys = CoupledSystem::build(config(1, 0, 32, 12, Ensemble::IidGaussian, Construction::Auto)).unwrap();
        assert_eq!(sys.sections.len(), 1);
        assert_eq!(sys.lifted_signal(0).unwrap(), sys.x);
    }

    #[test]
    fn geometric_values() {
        let (m, nc, kappa) = (50, 200, 10.0);
        let s = geometric_singular_values(m, nc, kappa);
        let total: f64 = s.iter().map(|v| v * v).sum();
        assert!((total - nc as f64).abs() < 1e-9);
        assert!((s[0] / s[m - 1] - kappa).abs() < 1e-10);
        for k in 1..m {
            assert!((s[k] / s[k - 1] - kappa.powf(-1.0 / 49.0)).abs() < 1e-13);
        }
        let r = 10f64.powf(-2.0 / 49.0);
        let s0_sq = 200.0 * (1.0 - r) / (1.0 - 10f64.powf(-100.0 / 49.0));
        assert!((s[0] * s[0] - s0_sq).abs() < 1e-9);
    }

    #[test]
    fn section_moments_match_spectrum() {
        // Nc = 4096 in the bulk sections.
        for (ensemble, construction) in [
            (Ensemble::RowOrthogonal, Construction::Hadamard),
            (Ensemble::Geometric { kappa: 10.0 }, Construction::Hadamard),
            (Ensemble::IidGaussian, Construction::Auto),
        ] {
            let cfg = config(2, 1, 2048, 1024, ensemble, construction);
            let sys = CoupledSystem::build(cfg.clone()).unwrap();
            let spectra = cfg.section_spectra().unwrap();
            let ell = 1;
            let sec = &sys.sections[ell];
            let width = sec.window_size() as f64;
            let nc = sec.nc as f64;
            let mu1 = sec.singular_values().iter().map(|s| width * s * s).sum::<f64>() / nc;
            let mu2 = sec.singular_values().iter().map(|s| (width * s * s).powi(2)).sum::<f64>() / nc;
            let want = spectra[ell].moments(2);
            assert!((mu1 / want[0] - 1.0).abs() < 0.03, "{ensemble:?}: {mu1}");
            assert!((mu2 / want[1] - 1.0).abs() < 0.03, "{ensemble:?}: {mu2} vs {}", want[1]);
        }
    }

    #[test]
    fn fwht_is_self_inverse_up_to_scale() {
        let mut v: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let orig = v.clone();
        fwht(&mut v);
        fwht(&mut v);
        for (a, b) in v.iter().zip(&orig) {
            assert!((a / 16.0 - b).abs() < 1e-12);
        }
    }
}
