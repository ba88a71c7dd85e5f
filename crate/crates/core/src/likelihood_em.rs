//! Bernstein log-likelihood and the EM iteration for a fixed degree.
//!
//! For mixture weights `p` the update is
//! `p_l ← (1/n) Σ_j p_l (g∗β_{ml})(y_j) / ψ_m(y_j; p)`,
//! which never leaves the simplex and never decreases the likelihood.

use serde::{Deserialize, Serialize};

use crate::bernstein::SimplexWeights;
use crate::convolution::{dot, ConvMatrix};
use crate::error::{DeconvError, Result};

/// Weights below this are zeroed after convergence.
const SPARSITY_CUTOFF: f64 = 1e-15;
/// Accepted bound `n·(max_l ∂ℓ/∂p_l / n − 1)` on the distance to the maximum.
const OPTIMALITY_GAP: f64 = 1e-5;
const MAX_VERTEX_ROUNDS: usize = 50;
/// Weights decaying below this are set to zero during iteration; products
/// with them would otherwise drift into slow subnormal arithmetic.
const UNDERFLOW_FLOOR: f64 = 1e-100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Relative stopping tolerance on the log-likelihood gain per iteration.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmResult {
    pub weights: SimplexWeights,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub loglik_trace: Vec<f64>,
}

fn check_degree(matrix: &ConvMatrix, w: &SimplexWeights) -> Result<()> {
    if matrix.degree() != w.degree() {
        return Err(DeconvError::DegreeMismatch {
            expected: matrix.degree(),
            got: w.degree(),
        });
    }
    Ok(())
}

/// `ℓ(p) = Σ_j log ψ_m(y_j; p)`; `-∞` when the mixture vanishes at some
/// observation.
pub fn loglik(matrix: &ConvMatrix, w: &SimplexWeights) -> Result<f64> {
    check_degree(matrix, w)?;
    let p = w.as_slice();
    let mut ll = 0.0;
    for row in matrix.rows() {
        let psi = dot(row, p);
        if psi <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ll += psi.ln();
    }
    Ok(ll)
}

/// Fills `grad` with `(1/n) Σ_j M_{jl} / ψ_j`, the normalized gradient of
/// `ℓ` at `p`, and returns `ℓ(p)`. The EM update is `p_l · grad_l`.
fn em_pass(matrix: &ConvMatrix, p: &[f64], grad: &mut [f64]) -> Result<f64> {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        // SAFETY: AVX2 support was just checked.
        return unsafe { em_pass_avx2(matrix, p, grad) };
    }
    em_pass_portable(matrix, p, grad)
}

// Wider vectors only; no FMA, so results match the portable path bit for bit.
#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn em_pass_avx2(matrix: &ConvMatrix, p: &[f64], grad: &mut [f64]) -> Result<f64> {
    em_pass_portable(matrix, p, grad)
}

#[inline(always)]
fn em_pass_portable(matrix: &ConvMatrix, p: &[f64], grad: &mut [f64]) -> Result<f64> {
    grad.fill(0.0);
    let mut ll = 0.0;
    for (j, row) in matrix.rows().enumerate() {
        let psi = dot(row, p);
        if psi <= 0.0 || !psi.is_finite() {
            return Err(DeconvError::ZeroDenominator { index: j });
        }
        ll += psi.ln();
        let r = 1.0 / psi;
        for (acc, &v) in grad.iter_mut().zip(row) {
            *acc += v * r;
        }
    }
    let inv_n = 1.0 / matrix.n() as f64;
    for acc in grad.iter_mut() {
        *acc *= inv_n;
    }
    Ok(ll)
}

/// Step length `λ` maximizing `ℓ((1−λ)p + λ e_l)` over `[0, 1)`.
///
/// The objective is concave in `λ`, so bisection on the sign of its
/// derivative finds the maximizer.
fn vertex_step_length(matrix: &ConvMatrix, p: &[f64], l: usize) -> f64 {
    let (psi, delta): (Vec<f64>, Vec<f64>) = matrix
        .rows()
        .map(|row| {
            let psi = dot(row, p);
            (psi, row[l] - psi)
        })
        .unzip();
    let slope = |lambda: f64| {
        let mut s = 0.0;
        for (&a, &d) in psi.iter().zip(&delta) {
            let den = a + lambda * d;
            if den <= 0.0 {
                return f64::NEG_INFINITY;
            }
            s += d / den;
        }
        s
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

pub fn em_step(matrix: &ConvMatrix, w: &SimplexWeights) -> Result<SimplexWeights> {
    check_degree(matrix, w)?;
    let p = w.as_slice();
    let mut grad = vec![0.0; p.len()];
    em_pass(matrix, p, &mut grad)?;
    SimplexWeights::new(p.iter().zip(&grad).map(|(a, g)| a * g).collect())
}

/// Iterates EM from `init` until the gain `ℓ_{s+1} − ℓ_s` drops to
/// `tol·(1 + |ℓ_s|)` or `max_iter` updates have been made.
///
/// When the gain stalls while the gradient still bounds the distance to the
/// maximum above [`OPTIMALITY_GAP`], a line search towards the most
/// under-weighted basis vertex is taken and EM resumes. Every step, EM or
/// vertex, counts towards `max_iter` and never lowers the likelihood.
pub fn fit_fixed_degree(
    matrix: &ConvMatrix,
    init: &SimplexWeights,
    config: &EmConfig,
) -> Result<EmResult> {
    check_degree(matrix, init)?;
    if !(config.tol > 0.0) {
        return Err(DeconvError::InvalidParameter(format!(
            "EM tolerance must be positive (got {})",
            config.tol
        )));
    }
    if let Some((index, &value)) = init.as_slice().iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(DeconvError::NonPositiveInit { index, value });
    }

    let mut current = init.as_slice().to_vec();
    let mut grad = vec![0.0; current.len()];
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut vertex_rounds = 0;
    loop {
        let ll = em_pass(matrix, &current, &mut grad)?;
        let stalled = trace
            .last()
            .is_some_and(|&prev| ll - prev <= config.tol * (1.0 + prev.abs()));
        trace.push(ll);
        if iterations == config.max_iter {
            break;
        }
        if stalled {
            // EM crawls when a useful component starts near zero. If the
            // gradient shows such a component, jump towards its vertex.
            let (l, &g) = grad
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .expect("non-empty weights");
            let gap_bound = matrix.n() as f64 * (g - 1.0);
            if gap_bound <= OPTIMALITY_GAP || vertex_rounds == MAX_VERTEX_ROUNDS {
                converged = true;
                break;
            }
            vertex_rounds += 1;
            let lambda = vertex_step_length(matrix, &current, l);
            for v in current.iter_mut() {
                *v *= 1.0 - lambda;
            }
            current[l] += lambda;
        } else {
            for (v, g) in current.iter_mut().zip(&grad) {
                *v *= g;
                if *v < UNDERFLOW_FLOOR {
                    *v = 0.0;
                }
            }
        }
        iterations += 1;
    }

    let mut loglik = *trace.last().expect("at least one pass");
    if current.iter().any(|&v| v > 0.0 && v < SPARSITY_CUTOFF) {
        for v in current.iter_mut() {
            if *v < SPARSITY_CUTOFF {
                *v = 0.0;
            }
        }
        let sparse = SimplexWeights::new(current.clone())?;
        loglik = self::loglik(matrix, &sparse)?;
        *trace.last_mut().unwrap() = loglik;
    }
    Ok(EmResult {
        weights: SimplexWeights::new(current)?,
        loglik,
        iterations,
        converged,
        loglik_trace: trace,
    })
}
