//! Fixed and adaptive quadrature rules.

mod tables;

use tables::{GH61_NODES, GH61_WEIGHTS, GL16_NODES, GL16_WEIGHTS};

const MAX_DEPTH: u32 = 48;

/// 16-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in GL16_NODES.iter().zip(GL16_WEIGHTS.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Sum of 16-point Gauss–Legendre panels between consecutive breakpoints.
pub fn composite<F: FnMut(f64) -> f64>(mut f: F, breaks: &[f64]) -> f64 {
    breaks.windows(2).map(|p| gauss_legendre(&mut f, p[0], p[1])).sum()
}

/// Adaptive bisection on 16-point Gauss–Legendre panels until the
/// two-halves estimate agrees with the whole-panel estimate to `tol`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64) -> f64 {
    let whole = gauss_legendre(&mut f, a, b);
    // Below this the two estimates differ only by rounding.
    let floor = 64.0 * f64::EPSILON * whole.abs();
    refine(&mut f, a, b, whole, tol.max(floor), floor, 0)
}

fn refine<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, whole: f64, tol: f64, floor: f64, depth: u32) -> f64 {
    let mid = 0.5 * (a + b);
    let left = gauss_legendre(&mut *f, a, mid);
    let right = gauss_legendre(&mut *f, mid, b);
    let halves = left + right;
    if (halves - whole).abs() <= tol || depth >= MAX_DEPTH {
        return halves;
    }
    let tol = (0.5 * tol).max(floor);
    refine(f, a, mid, left, tol, floor, depth + 1) + refine(f, mid, b, right, tol, floor, depth + 1)
}

/// E[f(Z)] for Z ~ N(0, 1) by 61-point Gauss–Hermite.
pub fn gauss_hermite<F: FnMut(f64) -> f64>(mut f: F) -> f64 {
    GH61_NODES.iter().zip(GH61_WEIGHTS.iter()).map(|(x, w)| w * f(*x)).sum()
}

/// Gauss–Hermite nodes and weights (weights sum to one).
pub fn gauss_hermite_rule() -> (&'static [f64], &'static [f64]) {
    (&GH61_NODES, &GH61_WEIGHTS)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let v = gauss_legendre(|x| x.powi(30) + 3.0 * x * x, -1.0, 2.0);
        let exact = (2f64.powi(31) + 1.0) / 31.0 + (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn hermite_moments() {
        assert!((gauss_hermite(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((gauss_hermite(|x| x * x) - 1.0).abs() < 1e-13);
        assert!((gauss_hermite(|x| x.powi(4)) - 3.0).abs() < 1e-12);
        assert!((gauss_hermite(|x| x.powi(6)) - 15.0).abs() < 1e-11);
    }

    #[test]
    fn adaptive_handles_a_sharp_peak() {
        let eps: f64 = 1e-4;
        let v = adaptive(|x| eps / (x * x + eps * eps), -1.0, 1.0, 1e-12);
        let exact = 2.0 * (1.0 / eps).atan();
        assert!((v - exact).abs() < 1e-9);
    }

    #[test]
    fn composite_matches_single_panel_for_smooth() {
        let a = composite(|x| x.exp(), &[0.0, 0.5, 1.0, 2.0]);
        assert!((a - (2f64.exp() - 1.0)).abs() < 1e-13);
    }
}
