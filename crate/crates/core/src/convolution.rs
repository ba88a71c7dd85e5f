//! Convolved beta basis `(g∗β_{mi})(y) = ∫₀¹ g(y−x) β_{mi}(x) dx` and the
//! observation-by-component matrix behind every likelihood evaluation.
//!
//! Dirac and uniform errors have closed forms. Generalized normal errors use
//! composite 16-point Gauss–Legendre panels no wider than
//! `min(4/(m+1), α)`, restricted to the window where the kernel carries
//! mass and split at `x = y`. For integer `γ` the kernel is analytic on each
//! side of the split and the composite rule is used as is; other shapes get
//! adaptive bisection on every panel.

use rayon::prelude::*;

use crate::bernstein::{basis_eval_unchecked, BinomialRow, SimplexWeights};
use crate::error::{DeconvError, Result};
use crate::error_models::{gn_exponent, gn_log_norm, ErrorModel};
use crate::quadrature::{gl16, integrate_vec};

/// Entries below this are stored as exact zeros.
const SUBNORMAL_FLOOR: f64 = 1e-300;
/// Absolute accuracy target for a matrix entry.
const ENTRY_TOL: f64 = 1e-10;

/// Cached `(g∗β_{mi})(y_j)` for one dataset and one degree.
#[derive(Debug, Clone)]
pub struct ConvMatrix {
    degree: usize,
    observations: Vec<f64>,
    values: Vec<f64>,
    error: ErrorModel,
}

impl ConvMatrix {
    /// Builds the `n × (m+1)` matrix. Observations are on the `[0, 1]` scale
    /// and `error` is the correspondingly rescaled error law.
    pub fn build(error: &ErrorModel, degree: usize, ys: &[f64]) -> Result<Self> {
        if ys.is_empty() {
            return Err(DeconvError::TooFewObservations { need: 1, got: 0 });
        }
        let width = degree + 1;
        let engine = RowEngine::new(error, degree);
        let mut values = vec![0.0; ys.len() * width];
        values
            .par_chunks_mut(width)
            .zip(ys.par_iter())
            .for_each(|(row, &y)| engine.fill(y, row));

        for (j, row) in values.chunks(width).enumerate() {
            if row.iter().all(|&v| v == 0.0) {
                return Err(DeconvError::ZeroRow {
                    index: j,
                    value: ys[j],
                });
            }
        }
        Ok(Self {
            degree,
            observations: ys.to_vec(),
            values,
            error: *error,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn n(&self) -> usize {
        self.observations.len()
    }

    pub fn observations(&self) -> &[f64] {
        &self.observations
    }

    pub fn error(&self) -> &ErrorModel {
        &self.error
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let w = self.degree + 1;
        &self.values[j * w..(j + 1) * w]
    }

    pub fn rows(&self) -> std::slice::Chunks<'_, f64> {
        self.values.chunks(self.degree + 1)
    }
}

/// A single convolved basis value.
pub fn conv_basis(error: &ErrorModel, m: usize, i: usize, y: f64) -> Result<f64> {
    if i > m {
        return Err(DeconvError::IndexOutOfRange {
            index: i,
            degree: m,
        });
    }
    if let ErrorModel::Dirac = error {
        return Ok(dirac_entry(m, i, y));
    }
    let mut row = vec![0.0; m + 1];
    RowEngine::new(error, m).fill(y, &mut row);
    Ok(row[i])
}

/// `ψ_m(y; p) = Σ p_i (g∗β_{mi})(y)` from one matrix row.
pub fn psi_eval(row: &[f64], weights: &SimplexWeights) -> Result<f64> {
    let p = weights.as_slice();
    if row.len() != p.len() {
        return Err(DeconvError::DegreeMismatch {
            expected: row.len().saturating_sub(1),
            got: weights.degree(),
        });
    }
    Ok(row.iter().zip(p).fold(0.0, |acc, (r, w)| acc + r * w))
}

/// Inner product with independent partial sums so the loop vectorizes.
#[inline(always)]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    const LANES: usize = 8;
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [0.0; LANES];
    let mut ca = a.chunks_exact(LANES);
    let mut cb = b.chunks_exact(LANES);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..LANES {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    let half = [acc[0] + acc[4], acc[1] + acc[5], acc[2] + acc[6], acc[3] + acc[7]];
    (half[0] + half[2]) + (half[1] + half[3]) + tail
}

fn dirac_entry(m: usize, i: usize, y: f64) -> f64 {
    if (0.0..=1.0).contains(&y) {
        basis_eval_unchecked(m, i, y)
    } else {
        0.0
    }
}

enum RowEngine {
    Dirac {
        m: usize,
    },
    Uniform {
        halfwidth: f64,
        upper: BinomialRow,
        m: usize,
    },
    Quadrature {
        kernel: GnKernel,
        basis: BinomialRow,
        m: usize,
    },
}

impl RowEngine {
    fn new(error: &ErrorModel, m: usize) -> Self {
        match *error {
            ErrorModel::Dirac => RowEngine::Dirac { m },
            ErrorModel::Uniform { halfwidth } => RowEngine::Uniform {
                halfwidth,
                upper: BinomialRow::new(m + 1),
                m,
            },
            ErrorModel::GeneralizedNormal { alpha, gamma } => RowEngine::Quadrature {
                kernel: GnKernel::new(alpha, gamma, error.reach()),
                basis: BinomialRow::new(m),
                m,
            },
        }
    }

    fn fill(&self, y: f64, out: &mut [f64]) {
        match self {
            RowEngine::Dirac { m } => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = dirac_entry(*m, i, y);
                }
            }
            RowEngine::Uniform {
                halfwidth,
                upper,
                m,
            } => uniform_row(*m, *halfwidth, upper, y, out),
            RowEngine::Quadrature { kernel, basis, m } => {
                quadrature_row(*m, kernel, basis, y, out)
            }
        }
        for v in out.iter_mut() {
            if *v < SUBNORMAL_FLOOR {
                *v = 0.0;
            }
        }
    }
}

/// `[I_{hi}(i+1, m−i+1) − I_{lo}(i+1, m−i+1)] / (2a)` with `lo`, `hi` the
/// window `y ∓ a` clamped to `[0, 1]`. `I_x(i+1, m−i+1)` is the binomial
/// upper tail `Σ_{k>i} b_{m+1,k}(x)`.
fn uniform_row(m: usize, halfwidth: f64, upper: &BinomialRow, y: f64, out: &mut [f64]) {
    let lo = (y - halfwidth).clamp(0.0, 1.0);
    let hi = (y + halfwidth).clamp(0.0, 1.0);
    out.fill(0.0);
    if hi <= lo {
        return;
    }
    let mut b_lo = vec![0.0; m + 2];
    let mut b_hi = vec![0.0; m + 2];
    upper.fill(lo, &mut b_lo);
    upper.fill(hi, &mut b_hi);
    let mut tail = 0.0;
    for i in (0..=m).rev() {
        tail += b_hi[i + 1] - b_lo[i + 1];
        out[i] = tail.max(0.0) / (2.0 * halfwidth);
    }
}

struct GnKernel {
    alpha: f64,
    gamma: f64,
    log_norm: f64,
    reach: f64,
    smooth_sides: bool,
}

impl GnKernel {
    fn new(alpha: f64, gamma: f64, reach: f64) -> Self {
        Self {
            alpha,
            gamma,
            log_norm: gn_log_norm(alpha, gamma),
            reach,
            smooth_sides: gamma.fract() == 0.0,
        }
    }

    #[inline]
    fn eval(&self, d: f64) -> f64 {
        (self.log_norm - gn_exponent(d.abs() / self.alpha, self.gamma)).exp()
    }
}

fn quadrature_row(m: usize, kernel: &GnKernel, basis: &BinomialRow, y: f64, out: &mut [f64]) {
    out.fill(0.0);
    let lo = (y - kernel.reach).max(0.0);
    let hi = (y + kernel.reach).min(1.0);
    if hi <= lo {
        return;
    }
    let h = (4.0 / (m as f64 + 1.0)).min(kernel.alpha);
    let mut segments = [(lo, hi), (0.0, 0.0)];
    if y > lo && y < hi {
        segments = [(lo, y), (y, hi)];
    }

    let rule = gl16();
    let mut integrand = |x: f64, w: f64, acc: &mut [f64]| {
        let kw = w * kernel.eval(y - x);
        if kw > 0.0 {
            basis.accumulate(x, kw, acc);
        }
    };
    let mut panels = 0usize;
    for &(a, b) in &segments {
        if b > a {
            panels += ((b - a) / h).ceil() as usize;
        }
    }
    let panel_tol = ENTRY_TOL / (m as f64 + 1.0) / panels.max(1) as f64;

    for &(a, b) in &segments {
        if b <= a {
            continue;
        }
        let count = ((b - a) / h).ceil().max(1.0) as usize;
        let step = (b - a) / count as f64;
        for p in 0..count {
            let pa = a + p as f64 * step;
            let pb = if p + 1 == count { b } else { pa + step };
            if kernel.smooth_sides {
                rule.for_each_on(pa, pb, |x, w| integrand(x, w, out));
            } else {
                integrate_vec(&mut integrand, pa, pb, panel_tol, out);
            }
        }
    }
    let scale = m as f64 + 1.0;
    for v in out.iter_mut() {
        *v *= scale;
    }
}

impl BinomialRow {
    /// Adds `weight · C(m,k) x^k (1−x)^{m−k}` into `acc[k]` for every `k`.
    #[inline]
    pub(crate) fn accumulate(&self, x: f64, weight: f64, acc: &mut [f64]) {
        let m = self.degree();
        if x <= 0.0 {
            acc[0] += weight;
            return;
        }
        if x >= 1.0 {
            acc[m] += weight;
            return;
        }
        let mode = (((m + 1) as f64 * x).floor() as usize).min(m);
        let peak = weight * self.mode_value(mode, x);
        acc[mode] += peak;
        let odds = x / (1.0 - x);
        let mut b = peak;
        for k in mode..m {
            b *= (m - k) as f64 / (k + 1) as f64 * odds;
            if b < SUBNORMAL_FLOOR {
                break;
            }
            acc[k + 1] += b;
        }
        let inv_odds = (1.0 - x) / x;
        b = peak;
        for k in (1..=mode).rev() {
            b *= k as f64 / (m - k + 1) as f64 * inv_odds;
            if b < SUBNORMAL_FLOOR {
                break;
            }
            acc[k - 1] += b;
        }
    }
}
