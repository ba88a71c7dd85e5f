//! Beta basis densities on `[0, 1]` and their mixtures.
//!
//! `β_{mi}` is the beta(i+1, m−i+1) density,
//! `β_{mi}(x) = (m+1)·C(m,i)·x^i·(1−x)^{m−i}`, so a mixture with weights on
//! the simplex is a probability density of Bernstein-polynomial form.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{DeconvError, Result};

/// Sum tolerance inside which weights are silently renormalized.
const RENORMALIZE_WINDOW: f64 = 1e-9;

/// Mixture proportions on the m-simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum = Self::check(&weights)?;
        let weights = if sum == 1.0 {
            weights
        } else {
            weights.into_iter().map(|w| w / sum).collect()
        };
        Ok(Self(weights))
    }

    /// Validates and returns the sum, which may be off 1 by rounding.
    fn check(weights: &[f64]) -> Result<f64> {
        if weights.is_empty() {
            return Err(DeconvError::NotOnSimplex("no weights".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0)
        {
            return Err(DeconvError::NotOnSimplex(format!(
                "weight {i} is {w}"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > RENORMALIZE_WINDOW {
            return Err(DeconvError::NotOnSimplex(format!("weights sum to {sum}")));
        }
        Ok(sum)
    }

    /// Equal weights `1/(m+1)`: the uniform density on `[0, 1]`.
    pub fn uniform(degree: usize) -> Self {
        let w = 1.0 / (degree as f64 + 1.0);
        Self(vec![w; degree + 1])
    }

    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `f_m(x; p) = Σ p_i β_{mi}(x)`.
    pub fn mixture_eval(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        let m = self.degree();
        let mut row = vec![0.0; m + 1];
        BinomialRow::new(m).fill(x, &mut row);
        let s: f64 = self.0.iter().zip(&row).map(|(p, b)| p * b).sum();
        Ok((m as f64 + 1.0) * s)
    }

    /// `F_m(x; p) = Σ p_i I_x(i+1, m−i+1)`.
    ///
    /// Uses `I_x(i+1, m−i+1) = P(Bin(m+1, x) > i)`, so the CDF is a single
    /// binomial row of degree `m+1` dotted with the cumulative weights.
    pub fn mixture_cdf(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        if x == 1.0 {
            return Ok(1.0);
        }
        let m = self.degree();
        let mut row = vec![0.0; m + 2];
        BinomialRow::new(m + 1).fill(x, &mut row);
        let mut cumulative = 0.0;
        let mut acc = 0.0;
        for k in 1..=m + 1 {
            cumulative += self.0[k - 1];
            acc += row[k] * cumulative;
        }
        Ok(acc.clamp(0.0, 1.0))
    }

    /// Exact re-expression of the degree-`m` mixture at degree `m+1`:
    /// `q_k = {k p_{k−1} + (m+1−k) p_k} / (m+2)`.
    pub fn elevate(&self) -> SimplexWeights {
        let m = self.degree();
        let p = &self.0;
        let denom = m as f64 + 2.0;
        let q = (0..=m + 1)
            .map(|k| {
                let left = if k > 0 { k as f64 * p[k - 1] } else { 0.0 };
                let right = if k <= m {
                    (m + 1 - k) as f64 * p[k]
                } else {
                    0.0
                };
                (left + right) / denom
            })
            .collect();
        SimplexWeights::new(q).expect("degree elevation preserves the simplex")
    }

    /// Mixes with a vanishing fraction of the uniform density so that every
    /// coordinate is strictly positive.
    pub fn with_positive_floor(&self, eta: f64) -> SimplexWeights {
        if self.0.iter().all(|&w| w > 0.0) {
            return self.clone();
        }
        let u = eta / self.0.len() as f64;
        let q = self.0.iter().map(|w| (1.0 - eta) * w + u).collect();
        SimplexWeights::new(q).expect("convex combination stays on the simplex")
    }
}

impl<'de> Deserialize<'de> for SimplexWeights {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        // stored values are kept bit for bit; renormalizing would move them
        let raw = Vec::<f64>::deserialize(d)?;
        SimplexWeights::check(&raw).map_err(serde::de::Error::custom)?;
        Ok(SimplexWeights(raw))
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(DeconvError::OutsideUnitInterval(x))
    }
}

/// Largest degree evaluated with exact integer binomial coefficients.
const DIRECT_MAX_DEGREE: usize = 20;

fn choose_exact(m: usize, i: usize) -> f64 {
    let i = i.min(m - i);
    let mut c: u64 = 1;
    for k in 0..i {
        c = c * (m - k) as u64 / (k + 1) as u64;
    }
    c as f64
}

pub(crate) fn ln_choose(m: usize, i: usize) -> f64 {
    ln_gamma(m as f64 + 1.0) - ln_gamma(i as f64 + 1.0) - ln_gamma((m - i) as f64 + 1.0)
}

/// `β_{mi}(x)`, evaluated in log space.
pub fn basis_eval(m: usize, i: usize, x: f64) -> Result<f64> {
    if i > m {
        return Err(DeconvError::IndexOutOfRange {
            index: i,
            degree: m,
        });
    }
    check_unit(x)?;
    Ok(basis_eval_unchecked(m, i, x))
}

pub(crate) fn basis_eval_unchecked(m: usize, i: usize, x: f64) -> f64 {
    if m <= DIRECT_MAX_DEGREE {
        let k = i as i32;
        return (m as f64 + 1.0)
            * choose_exact(m, i)
            * x.powi(k)
            * (1.0 - x).powi(m as i32 - k);
    }
    let log_x_term = if i == 0 { 0.0 } else { i as f64 * x.ln() };
    let log_1mx_term = if i == m {
        0.0
    } else {
        (m - i) as f64 * (-x).ln_1p()
    };
    ((m as f64 + 1.0).ln() + ln_choose(m, i) + log_x_term + log_1mx_term).exp()
}

/// Binomial probabilities `C(m,k) x^k (1−x)^{m−k}` for all `k` at once.
///
/// The value at the mode comes from log space; the rest follow from the
/// ratio recurrence outward, stopping once they underflow.
#[derive(Debug, Clone)]
pub(crate) struct BinomialRow {
    m: usize,
    ln_choose: Vec<f64>,
    choose: Vec<f64>,
}

impl BinomialRow {
    pub(crate) fn new(m: usize) -> Self {
        let ln_fact: Vec<f64> = (0..=m).map(|k| ln_gamma(k as f64 + 1.0)).collect();
        let ln_choose = (0..=m)
            .map(|k| ln_fact[m] - ln_fact[k] - ln_fact[m - k])
            .collect();
        let choose = if m <= DIRECT_MAX_DEGREE {
            (0..=m).map(|k| choose_exact(m, k)).collect()
        } else {
            Vec::new()
        };
        Self {
            m,
            ln_choose,
            choose,
        }
    }

    pub(crate) fn degree(&self) -> usize {
        self.m
    }

    /// `C(m,k) x^k (1−x)^{m−k}` for `0 < x < 1`.
    #[inline]
    pub(crate) fn mode_value(&self, k: usize, x: f64) -> f64 {
        if !self.choose.is_empty() {
            return self.choose[k] * x.powi(k as i32) * (1.0 - x).powi((self.m - k) as i32);
        }
        (self.ln_choose[k] + k as f64 * x.ln() + (self.m - k) as f64 * (-x).ln_1p()).exp()
    }

    pub(crate) fn fill(&self, x: f64, out: &mut [f64]) {
        let m = self.m;
        debug_assert_eq!(out.len(), m + 1);
        out.fill(0.0);
        if x <= 0.0 {
            out[0] = 1.0;
            return;
        }
        if x >= 1.0 {
            out[m] = 1.0;
            return;
        }
        let mode = (((m + 1) as f64 * x).floor() as usize).min(m);
        let peak = self.mode_value(mode, x);
        out[mode] = peak;

        let odds = x / (1.0 - x);
        let mut b = peak;
        for k in mode..m {
            b *= (m - k) as f64 / (k + 1) as f64 * odds;
            if b == 0.0 {
                break;
            }
            out[k + 1] = b;
        }
        let inv_odds = (1.0 - x) / x;
        b = peak;
        for k in (1..=mode).rev() {
            b *= k as f64 / (m - k + 1) as f64 * inv_odds;
            if b == 0.0 {
                break;
            }
            out[k - 1] = b;
        }
    }
}
