//! Small quadrature toolkit: Gauss–Legendre rules and adaptive Simpson.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let n = order as f64;
        for i in 0..order.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(order, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(order, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[order - 1 - i] = x;
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrates `f` over [lo, hi].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let dp = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

/// Adaptive Simpson quadrature on a finite interval.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mid = 0.5 * (lo + hi);
    let (fa, fm, fb) = (f(lo), f(mid), f(hi));
    let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, lo, hi, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson over `[lo, hi]` split at the given interior breakpoints.
pub fn piecewise_simpson<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    tol: f64,
) -> f64 {
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut left = lo;
    for c in cuts.into_iter().chain(std::iter::once(hi)) {
        total += adaptive_simpson(f, left, c, tol);
        left = c;
    }
    total
}

/// Adaptive Simpson on `[lo, ∞)` via the substitution `y = lo + s / (1 - s)`.
pub fn simpson_to_infinity<F: Fn(f64) -> f64>(f: &F, lo: f64, tol: f64) -> f64 {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let one_minus = 1.0 - s;
        f(lo + s / one_minus) / (one_minus * one_minus)
    };
    adaptive_simpson(&g, 0.0, 1.0, tol)
}

/// `∫_lo^∞ f` for `lo > 0` by Gauss–Legendre on geometrically growing cells
/// `[lo·2^k, lo·2^(k+1)]`; suited to algebraically decaying integrands.
pub fn geometric_tail_integral<F: Fn(f64) -> f64>(f: &F, lo: f64) -> f64 {
    assert!(lo > 0.0, "geometric tail integral needs a positive lower limit");
    let gl = GaussLegendre::new(16);
    let mut total = 0.0;
    let mut a = lo;
    for k in 0..1000 {
        let b = 2.0 * a;
        let piece = gl.integrate(a, b, f);
        total += piece;
        if k > 8 && piece.abs() <= 1e-18 * total.abs().max(1e-300) {
            break;
        }
        a = b;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_polynomials() {
        let gl = GaussLegendre::new(6);
        // degree 11 is integrated exactly by a 6-point rule
        let v = gl.integrate(-1.0, 2.0, |x| x.powi(11) - 3.0 * x.powi(4) + 1.0);
        let exact = (2f64.powi(12) - 1.0) / 12.0 - 3.0 * (32.0 + 1.0) / 5.0 + 3.0;
        assert!((v - exact).abs() < 1e-10, "{v} vs {exact}");
        let s: f64 = gl.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_handles_smooth_and_infinite_ranges() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, PI, 1e-12);
        assert!((v - 2.0).abs() < 1e-10);
        let t = simpson_to_infinity(&|x: f64| (-x).exp(), 0.0, 1e-12);
        assert!((t - 1.0).abs() < 1e-9);
        // ∫_1^∞ x^{-1.5} = 2
        let p = geometric_tail_integral(&|x: f64| x.powf(-1.5), 1.0);
        assert!((p - 2.0).abs() < 1e-12, "{p}");
    }

    #[test]
    fn breakpoints_resolve_jumps() {
        let step = |x: f64| if x < 0.3 { 1.0 } else { 0.0 };
        let v = piecewise_simpson(&step, 0.0, 1.0, &[0.3], 1e-12);
        assert!((v - 0.3).abs() < 1e-12);
    }
}
