//! Choosing the mixture degree.
//!
//! A sweep fits every degree `m₀, m₀+1, …, m₀+I`, warm-starting each fit
//! from the degree-elevated previous optimum so that the log-likelihoods
//! `ℓ₀ ≤ ℓ₁ ≤ … ≤ ℓ_I` are nested. Treating the increments as exponential
//! observations with one change in mean, the change point maximizes
//!
//! ```text
//! R(q) = I log{(ℓ_I−ℓ₀)/I} − q log{(ℓ_q−ℓ₀)/q} − (I−q) log{(ℓ_I−ℓ_q)/(I−q)}
//! ```
//!
//! and the selected degree is `m₀ + q̂`.

use std::fmt::Write as _;

use log::debug;
use serde::{Deserialize, Serialize};

use crate::bernstein::SimplexWeights;
use crate::convolution::ConvMatrix;
use crate::error::{DeconvError, Result};
use crate::error_models::ErrorModel;
use crate::likelihood_em::{fit_fixed_degree, EmConfig};

/// Lower bound applied to the deconvolved variance estimate.
pub const VARIANCE_FLOOR: f64 = 1e-4;
/// Largest tolerated log-likelihood loss between consecutive degrees.
pub const ASCENT_SLACK: f64 = 1e-7;
/// Argument guard for the logarithms in `R(q)`.
const LOG_GUARD: f64 = 1e-12;
/// Uniform fraction mixed into warm starts that contain exact zeros.
const WARM_START_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    /// `s² − σ₀²`, floored at [`VARIANCE_FLOOR`].
    pub variance: f64,
    /// Set when the floor was applied.
    pub variance_deficient: bool,
}

/// Method-of-moments estimates of `E(X)` and `Var(X)` from contaminated data.
pub fn estimate_moments(ys: &[f64], error: &ErrorModel) -> Result<Moments> {
    let n = ys.len();
    if n < 2 {
        return Err(DeconvError::TooFewObservations { need: 2, got: n });
    }
    let mean = ys.iter().sum::<f64>() / n as f64;
    let s2 = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let raw = s2 - error.variance();
    let variance_deficient = raw < VARIANCE_FLOOR;
    Ok(Moments {
        mean,
        variance: if variance_deficient { VARIANCE_FLOOR } else { raw },
        variance_deficient,
    })
}

/// `max{⌈μ(1−μ)/σ² − 3⌉, 1}` on the `[0, 1]` scale.
pub fn lower_bound_degree(mean: f64, variance: f64) -> Result<usize> {
    if !(mean > 0.0 && mean < 1.0) {
        return Err(DeconvError::MeanOutsideUnit(mean));
    }
    if !(variance > 0.0) {
        return Err(DeconvError::InvalidParameter(format!(
            "variance must be positive (got {variance})"
        )));
    }
    let raw = mean * (1.0 - mean) / variance - 3.0;
    // keep round-off in the division from bumping an integer up by one
    let bound = (raw - 1e-9).ceil().clamp(1.0, 1e6);
    Ok(bound as usize)
}

/// The change-point statistic `R(q)` for `1 ≤ q ≤ I−1`.
pub fn changepoint_stat(logliks: &[f64], q: usize) -> Result<f64> {
    let total = logliks.len();
    if total < 3 {
        return Err(DeconvError::TraceTooShort {
            need: 3,
            got: total,
        });
    }
    let i_max = total - 1;
    if q == 0 || q >= i_max {
        return Err(DeconvError::InvalidParameter(format!(
            "change point {q} outside 1..={}",
            i_max - 1
        )));
    }
    let l0 = logliks[0];
    let lq = logliks[q];
    let li = logliks[i_max];
    let term = |gain: f64, count: usize| {
        let k = count as f64;
        k * (gain.max(LOG_GUARD) / k).ln()
    };
    Ok(term(li - l0, i_max) - term(lq - l0, q) - term(li - lq, i_max - q))
}

/// Log-likelihoods of a consecutive run of degrees.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DegreeTrace {
    pub degrees: Vec<usize>,
    pub logliks: Vec<f64>,
    /// Fitted weights per degree; may be empty when only the likelihood
    /// profile is known.
    pub weights: Vec<SimplexWeights>,
}

impl DegreeTrace {
    pub fn new(degrees: Vec<usize>, logliks: Vec<f64>) -> Result<Self> {
        if degrees.len() != logliks.len() {
            return Err(DeconvError::InvalidParameter(
                "degrees and log-likelihoods differ in length".into(),
            ));
        }
        if degrees.windows(2).any(|p| p[1] != p[0] + 1) {
            return Err(DeconvError::InvalidParameter(
                "trace degrees must be consecutive".into(),
            ));
        }
        Ok(Self {
            degrees,
            logliks,
            weights: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn increments(&self) -> Vec<f64> {
        self.logliks.windows(2).map(|p| p[1] - p[0]).collect()
    }

    pub fn weights_at(&self, degree: usize) -> Option<&SimplexWeights> {
        let idx = degree.checked_sub(*self.degrees.first()?)?;
        self.weights.get(idx)
    }

    /// CSV with columns `m,loglik,increment,R`; `R` is blank where the
    /// statistic is undefined.
    pub fn to_csv(&self, selection: Option<&SelectionResult>) -> String {
        let mut out = String::from("m,loglik,increment,R\n");
        for (idx, (&m, &ll)) in self.degrees.iter().zip(&self.logliks).enumerate() {
            let inc = if idx == 0 {
                String::new()
            } else {
                (ll - self.logliks[idx - 1]).to_string()
            };
            let r = selection
                .and_then(|s| idx.checked_sub(1).and_then(|k| s.r_values.get(k)))
                .filter(|_| idx + 1 < self.degrees.len())
                .map(|r| r.to_string())
                .unwrap_or_default();
            let _ = writeln!(out, "{m},{ll},{inc},{r}");
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub q_hat: usize,
    pub m_hat: usize,
    pub r_values: Vec<f64>,
    /// Moment-based lower bound, when the pipeline computed one.
    pub m_b_hat: Option<usize>,
    /// No change-point evidence: every increment is zero or `R` is constant.
    #[serde(default)]
    pub flat_trace: bool,
}

/// `q̂ = argmax_{1≤q<I} R(q)`, smallest index on ties.
pub fn select_degree(trace: &DegreeTrace) -> Result<SelectionResult> {
    let total = trace.len();
    if total < 3 {
        return Err(DeconvError::TraceTooShort {
            need: 3,
            got: total,
        });
    }
    let mut clamped = Vec::with_capacity(total);
    clamped.push(0.0);
    for (k, u) in trace.increments().into_iter().enumerate() {
        if u < -ASCENT_SLACK {
            return Err(DeconvError::AscentViolated {
                from: trace.degrees[k],
                to: trace.degrees[k + 1],
                decrease: -u,
            });
        }
        let last = *clamped.last().unwrap();
        clamped.push(last + u.max(0.0));
    }

    let i_max = total - 1;
    let r_values = (1..i_max)
        .map(|q| changepoint_stat(&clamped, q))
        .collect::<Result<Vec<_>>>()?;

    let no_gain = clamped[i_max] <= 0.0;
    let (mut q_hat, mut best) = (1, r_values[0]);
    for (k, &r) in r_values.iter().enumerate() {
        if r > best {
            best = r;
            q_hat = k + 1;
        }
    }
    let lowest = r_values.iter().cloned().fold(f64::INFINITY, f64::min);
    let flat_trace = no_gain || best - lowest <= 1e-10 * (1.0 + best.abs());
    if flat_trace {
        q_hat = 1;
    }
    Ok(SelectionResult {
        q_hat,
        m_hat: trace.degrees[q_hat],
        r_values,
        m_b_hat: None,
        flat_trace,
    })
}

/// Fits every degree in `m_start..=m_end`, each warm-started from the
/// elevated fit of the previous degree (the first from uniform weights).
pub fn sweep(
    ys: &[f64],
    error: &ErrorModel,
    m_start: usize,
    m_end: usize,
    config: &EmConfig,
) -> Result<DegreeTrace> {
    if m_start > m_end {
        return Err(DeconvError::InvalidParameter(format!(
            "empty degree range {m_start}..={m_end}"
        )));
    }
    let mut trace = DegreeTrace::default();
    let mut previous: Option<SimplexWeights> = None;
    for m in m_start..=m_end {
        let matrix = ConvMatrix::build(error, m, ys).map_err(|e| e.at_degree(m))?;
        let init = match &previous {
            None => SimplexWeights::uniform(m),
            Some(p) => p.elevate().with_positive_floor(WARM_START_FLOOR),
        };
        let fit = fit_fixed_degree(&matrix, &init, config).map_err(|e| e.at_degree(m))?;
        debug!(
            "degree {m}: loglik {:.6} after {} iterations (converged: {})",
            fit.loglik, fit.iterations, fit.converged
        );
        trace.degrees.push(m);
        trace.logliks.push(fit.loglik);
        trace.weights.push(fit.weights.clone());
        previous = Some(fit.weights);
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood_em::loglik;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn moment_examples() {
        let m = estimate_moments(&[0.0, 1.0], &ErrorModel::Dirac).unwrap();
        assert_eq!((m.mean, m.variance, m.variance_deficient), (0.5, 0.5, false));

        // two points at distance c have s² = c²/2
        let uniform_var = |v: f64| ErrorModel::uniform((3.0 * v).sqrt()).unwrap();
        let ys = [0.0, 0.2f64.sqrt()];
        let m = estimate_moments(&ys, &uniform_var(0.04)).unwrap();
        assert!((m.variance - 0.06).abs() < 1e-12 && !m.variance_deficient);

        let ys = [0.0, 0.06f64.sqrt()];
        let m = estimate_moments(&ys, &uniform_var(0.04)).unwrap();
        assert_eq!(m.variance, VARIANCE_FLOOR);
        assert!(m.variance_deficient);

        assert!(estimate_moments(&[1.0], &ErrorModel::Dirac).is_err());
    }

    #[test]
    fn lower_bound_examples() {
        assert_eq!(lower_bound_degree(0.5, 1.0 / 12.0).unwrap(), 1);
        assert_eq!(lower_bound_degree(0.5, 0.05).unwrap(), 2);
        assert_eq!(lower_bound_degree(0.5, 0.01).unwrap(), 22);
        assert!(lower_bound_degree(1.2, 0.01).is_err());
        assert!(lower_bound_degree(0.0, 0.01).is_err());
        assert!(lower_bound_degree(0.5, 0.0).is_err());
    }

    /// `R(q)` written out term by term.
    fn r_oracle(l: &[f64], q: usize) -> f64 {
        let i = (l.len() - 1) as f64;
        let qf = q as f64;
        let last = l[l.len() - 1];
        i * ((last - l[0]) / i).ln()
            - qf * ((l[q] - l[0]) / qf).ln()
            - (i - qf) * ((last - l[q]) / (i - qf)).ln()
    }

    #[test]
    fn changepoint_examples() {
        let even = [0.0, 1.0, 2.0, 3.0];
        for q in [1, 2] {
            assert!(changepoint_stat(&even, q).unwrap().abs() < 1e-12);
        }
        let l = [0.0, 10.0, 11.0, 11.5];
        let r1 = changepoint_stat(&l, 1).unwrap();
        let r2 = changepoint_stat(&l, 2).unwrap();
        // 3·ln(11.5/3) − ln(10) − 2·ln(0.75) and 3·ln(11.5/3) − 2·ln(5.5) − ln(0.5)
        assert!((r1 - 2.303_983_292_012_799).abs() < 1e-9, "{r1}");
        assert!((r2 - 1.314_855_236_186_378).abs() < 1e-9, "{r2}");
        assert!((r1 - r_oracle(&l, 1)).abs() < 1e-12);
        assert!((r2 - r_oracle(&l, 2)).abs() < 1e-12);
        assert!(changepoint_stat(&l, 0).is_err());
        assert!(changepoint_stat(&l, 3).is_err());
        assert!(changepoint_stat(&[0.0, 1.0], 1).is_err());
    }

    #[test]
    fn selection_examples() {
        let trace = DegreeTrace::new(vec![5, 6, 7, 8], vec![0.0, 10.0, 11.0, 11.5]).unwrap();
        let s = select_degree(&trace).unwrap();
        assert_eq!((s.q_hat, s.m_hat, s.flat_trace), (1, 6, false));

        let even = DegreeTrace::new(vec![2, 3, 4, 5, 6], vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let s = select_degree(&even).unwrap();
        assert_eq!((s.q_hat, s.m_hat, s.flat_trace), (1, 3, true));

        let flat = DegreeTrace::new(vec![2, 3, 4, 5], vec![-3.0; 4]).unwrap();
        let s = select_degree(&flat).unwrap();
        assert_eq!((s.q_hat, s.flat_trace), (1, true));

        let short = DegreeTrace::new(vec![2, 3], vec![0.0, 1.0]).unwrap();
        assert!(select_degree(&short).is_err());
    }

    #[test]
    fn small_negative_increments_are_clamped() {
        let tiny = DegreeTrace::new(vec![1, 2, 3, 4], vec![0.0, 5.0, 5.0 - 5e-8, 5.5]).unwrap();
        assert!(select_degree(&tiny).is_ok());
        let bad = DegreeTrace::new(vec![1, 2, 3, 4], vec![0.0, 5.0, 4.9, 5.5]).unwrap();
        assert!(matches!(
            select_degree(&bad),
            Err(DeconvError::AscentViolated { from: 2, to: 3, .. })
        ));
    }

    #[test]
    fn trace_rejects_gaps() {
        assert!(DegreeTrace::new(vec![1, 3], vec![0.0, 1.0]).is_err());
        assert!(DegreeTrace::new(vec![1, 2], vec![0.0]).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let trace = DegreeTrace::new(vec![5, 6, 7, 8], vec![0.0, 10.0, 11.0, 11.5]).unwrap();
        let s = select_degree(&trace).unwrap();
        let csv = trace.to_csv(Some(&s));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "m,loglik,increment,R");
        assert_eq!(lines[1], "5,0,,");
        assert!(lines[2].starts_with("6,10,10,2.30398"));
        assert!(lines[3].starts_with("7,11,1,1.31485"));
        assert_eq!(lines[4], "8,11.5,0.5,");
    }

    fn nn4_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..4).map(|_| rng.random::<f64>()).sum::<f64>() / 4.0)
            .collect()
    }

    #[test]
    fn single_degree_sweep() {
        let ys = nn4_sample(30, 1);
        let t = sweep(&ys, &ErrorModel::Dirac, 3, 3, &EmConfig::default()).unwrap();
        assert_eq!(t.degrees, vec![3]);
        assert_eq!(t.logliks.len(), 1);
        assert!(sweep(&ys, &ErrorModel::Dirac, 4, 3, &EmConfig::default()).is_err());
    }

    #[test]
    fn dirac_sweep_is_nested() {
        let ys = nn4_sample(200, 2);
        let t = sweep(&ys, &ErrorModel::Dirac, 2, 20, &EmConfig::default()).unwrap();
        for u in t.increments() {
            assert!(u >= -ASCENT_SLACK, "increment {u}");
        }
        assert_eq!(t.weights_at(7).unwrap().degree(), 7);
    }

    #[test]
    fn warm_start_beats_cold_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let error = ErrorModel::normal(0.1).unwrap();
        let ys: Vec<f64> = nn4_sample(150, 3)
            .into_iter()
            .zip(error.sample(&mut rng, 150))
            .map(|(x, e)| x + e)
            .collect();
        let cfg = EmConfig::default();
        let t = sweep(&ys, &error, 3, 15, &cfg).unwrap();
        for (&m, &warm) in t.degrees.iter().zip(&t.logliks) {
            let mat = ConvMatrix::build(&error, m, &ys).unwrap();
            let cold = fit_fixed_degree(&mat, &SimplexWeights::uniform(m), &cfg).unwrap();
            assert!(warm >= cold.loglik - 1e-4, "m={m}: warm {warm} cold {}", cold.loglik);
            let w = t.weights_at(m).unwrap();
            assert!((loglik(&mat, w).unwrap() - warm).abs() < 1e-9);
        }
    }

    proptest! {
        #[test]
        fn r_is_shift_invariant(
            incs in prop::collection::vec(0.01f64..5.0, 3..30),
            shift in -1e3f64..1e3,
        ) {
            let mut l = vec![0.0];
            for u in &incs {
                let last = *l.last().unwrap();
                l.push(last + u);
            }
            let shifted: Vec<f64> = l.iter().map(|v| v + shift).collect();
            for q in 1..l.len() - 1 {
                let a = changepoint_stat(&l, q).unwrap();
                let b = changepoint_stat(&shifted, q).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()) + 1e-8, "{} vs {}", a, b);
            }
        }

        #[test]
        fn selection_is_deterministic(incs in prop::collection::vec(0.0f64..5.0, 2..30)) {
            let mut l = vec![0.0];
            for u in &incs {
                let last = *l.last().unwrap();
                l.push(last + u);
            }
            let trace = DegreeTrace::new((0..l.len()).collect(), l).unwrap();
            prop_assert_eq!(select_degree(&trace).unwrap(), select_degree(&trace).unwrap());
        }

        #[test]
        fn lower_bound_monotone_in_variance(mean in 0.01f64..0.99, a in 1e-4f64..0.3, b in 1e-4f64..0.3) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(lower_bound_degree(mean, hi).unwrap() <= lower_bound_degree(mean, lo).unwrap());
        }
    }
}
