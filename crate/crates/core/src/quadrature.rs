//! Gauss–Legendre rules and a bisecting adaptive integrator.

use std::sync::OnceLock;

/// Nodes per panel used throughout the crate.
pub const PANEL_NODES: usize = 16;

/// Nodes and weights of an `n`-point rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Roots of `P_n` by Newton's method from the Tricomi initial guess.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a quadrature rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for k in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[k] = -x;
            weights[k] = w;
            nodes[n - 1 - k] = x;
            weights[n - 1 - k] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Maps the rule onto `[a, b]`, calling `visit(x, w)` for every node.
    #[inline]
    pub fn for_each_on(&self, a: f64, b: f64, mut visit: impl FnMut(f64, f64)) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            visit(mid + half * t, half * w);
        }
    }

    pub fn integrate(&self, f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_on(a, b, |x, w| acc += w * f(x));
        acc
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// The shared 16-point rule.
pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(PANEL_NODES))
}

const MAX_DEPTH: u32 = 40;

/// Adaptive integration of a scalar function on `[a, b]` to absolute
/// tolerance `tol`, bisecting panels until a 16-point estimate agrees with
/// the sum over its two halves.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let rule = gl16();
    let whole = rule.integrate(f, a, b);
    adapt_scalar(rule, f, a, b, whole, tol, 0)
}

fn adapt_scalar(
    rule: &GaussLegendre,
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let mid = 0.5 * (a + b);
    let left = rule.integrate(f, a, mid);
    let right = rule.integrate(f, mid, b);
    let halves = left + right;
    if (halves - whole).abs() <= tol || depth >= MAX_DEPTH {
        return halves;
    }
    adapt_scalar(rule, f, a, mid, left, 0.5 * tol, depth + 1)
        + adapt_scalar(rule, f, mid, b, right, 0.5 * tol, depth + 1)
}

/// Vector-valued adaptive integration: `f(x, w, acc)` must add `w·F(x)` into
/// `acc` for an integrand `F: ℝ → ℝ^len`. The result is added to `out`.
pub fn integrate_vec(
    f: &mut impl FnMut(f64, f64, &mut [f64]),
    a: f64,
    b: f64,
    tol: f64,
    out: &mut [f64],
) {
    if a == b {
        return;
    }
    let rule = gl16();
    let mut whole = vec![0.0; out.len()];
    rule.for_each_on(a, b, |x, w| f(x, w, &mut whole));
    adapt_vec(rule, f, a, b, whole, tol, 0, out);
}

#[allow(clippy::too_many_arguments)]
fn adapt_vec(
    rule: &GaussLegendre,
    f: &mut impl FnMut(f64, f64, &mut [f64]),
    a: f64,
    b: f64,
    whole: Vec<f64>,
    tol: f64,
    depth: u32,
    out: &mut [f64],
) {
    let mid = 0.5 * (a + b);
    let mut left = vec![0.0; out.len()];
    let mut right = vec![0.0; out.len()];
    rule.for_each_on(a, mid, |x, w| f(x, w, &mut left));
    rule.for_each_on(mid, b, |x, w| f(x, w, &mut right));
    let err = whole
        .iter()
        .zip(left.iter().zip(&right))
        .map(|(w, (l, r))| (l + r - w).abs())
        .fold(0.0, f64::max);
    if err <= tol || depth >= MAX_DEPTH {
        for (o, (l, r)) in out.iter_mut().zip(left.iter().zip(&right)) {
            *o += l + r;
        }
        return;
    }
    adapt_vec(rule, f, a, mid, left, 0.5 * tol, depth + 1, out);
    adapt_vec(rule, f, mid, b, right, 0.5 * tol, depth + 1, out);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 16, 40] {
            let r = GaussLegendre::new(n);
            let s: f64 = r.weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n}: {s}");
        }
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_31() {
        let r = gl16();
        for k in 0..32 {
            let got = r.integrate(&|x: f64| x.powi(k), 0.0, 1.0);
            let want = 1.0 / (k as f64 + 1.0);
            assert!((got - want).abs() < 1e-14, "k={k}: {got} vs {want}");
        }
    }

    #[test]
    fn adaptive_handles_kinks() {
        let got = integrate(&|x: f64| (x - 0.3).abs().sqrt(), 0.0, 1.0, 1e-12);
        let want = (2.0 / 3.0) * (0.3f64.powf(1.5) + 0.7f64.powf(1.5));
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn vector_integration_matches_scalar() {
        let mut out = vec![0.0; 3];
        integrate_vec(
            &mut |x, w, acc: &mut [f64]| {
                acc[0] += w * x.sin();
                acc[1] += w * (-x * x).exp();
                acc[2] += w * (x - 0.5).abs();
            },
            0.0,
            2.0,
            1e-12,
            &mut out,
        );
        assert!((out[0] - (1.0 - 2f64.cos())).abs() < 1e-12);
        let gauss = integrate(&|x: f64| (-x * x).exp(), 0.0, 2.0, 1e-13);
        assert!((out[1] - gauss).abs() < 1e-12);
        assert!((out[2] - (0.125 + 1.125)).abs() < 1e-10);
    }
}
