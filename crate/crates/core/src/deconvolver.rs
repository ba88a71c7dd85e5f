//! The end-to-end fit: support choice, transform to `[0, 1]`, degree sweep
//! and selection, and evaluation of the back-transformed estimate.

use serde::{Deserialize, Serialize};

use crate::bernstein::SimplexWeights;
use crate::degree_selection::{
    estimate_moments, lower_bound_degree, select_degree, sweep, DegreeTrace, SelectionResult,
};
use crate::error::{DeconvError, Result};
use crate::error_models::ErrorModel;
use crate::likelihood_em::EmConfig;

/// Current model file version.
pub const MODEL_VERSION: u64 = 1;
/// Transformed observations exactly on 0 or 1 are moved inward by this much.
const EDGE_NUDGE: f64 = 1e-12;
/// Relative widening of the data range when the error is degenerate.
const DIRAC_PAD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    /// Explicit support `[a, b]`; takes precedence over `zeta`.
    pub support: Option<(f64, f64)>,
    /// Support extension in error standard deviations beyond the data range.
    pub zeta: f64,
    /// Inclusive degree range to sweep. Defaults to `m₀..=m₀+grid_width`
    /// with `m₀ = max(m̂_b, 2)`.
    pub degrees: Option<(usize, usize)>,
    pub grid_width: usize,
    pub em: EmConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            support: None,
            zeta: 3.0,
            degrees: None,
            grid_width: 50,
            em: EmConfig::default(),
        }
    }
}

/// `(min(y) − ζσ_ε, max(y) + ζσ_ε)`; for exact data the range is widened by
/// a relative `1e-9` so the extremes stay interior.
pub fn choose_support(ys: &[f64], error: &ErrorModel, zeta: f64) -> Result<(f64, f64)> {
    if ys.len() < 2 {
        return Err(DeconvError::TooFewObservations {
            need: 2,
            got: ys.len(),
        });
    }
    if !(zeta.is_finite() && zeta >= 0.0) {
        return Err(DeconvError::InvalidParameter(format!(
            "zeta must be finite and non-negative (got {zeta})"
        )));
    }
    let (lo, hi) = ys
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &y| {
            (lo.min(y), hi.max(y))
        });
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(DeconvError::InvalidParameter(
            "observations must be finite".into(),
        ));
    }
    if lo >= hi {
        return Err(DeconvError::DegenerateData);
    }
    if error.is_dirac() {
        let pad = DIRAC_PAD * (hi - lo);
        return Ok((lo - pad, hi + pad));
    }
    let spread = zeta * error.sd();
    Ok((lo - spread, hi + spread))
}

/// A fitted deconvolution estimate on its original scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelFile", into = "ModelFile")]
pub struct DeconvModel {
    support: (f64, f64),
    weights: SimplexWeights,
    error: ErrorModel,
    /// Log-likelihood of the transformed data at the selected degree.
    loglik: f64,
    selection: SelectionResult,
    trace: DegreeTrace,
    n: usize,
    options: FitOptions,
}

impl DeconvModel {
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    pub fn degree(&self) -> usize {
        self.weights.degree()
    }

    pub fn weights(&self) -> &SimplexWeights {
        &self.weights
    }

    pub fn error(&self) -> &ErrorModel {
        &self.error
    }

    /// Log-likelihood of the data mapped to `[0, 1]`; subtract `n·ln(b−a)`
    /// for the original scale.
    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    pub fn selection(&self) -> &SelectionResult {
        &self.selection
    }

    /// Degree sweep; per-degree weights are not retained.
    pub fn trace(&self) -> &DegreeTrace {
        &self.trace
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn options(&self) -> &FitOptions {
        &self.options
    }

    fn to_unit(&self, x: f64) -> f64 {
        let (a, b) = self.support;
        ((x - a) / (b - a)).clamp(0.0, 1.0)
    }

    /// `f̂(x) = f̂*((x−a)/(b−a)) / (b−a)`, zero outside the support.
    pub fn density_at(&self, x: f64) -> f64 {
        let (a, b) = self.support;
        if !(x >= a && x <= b) {
            return 0.0;
        }
        let t = self.to_unit(x);
        self.weights.mixture_eval(t).expect("t lies in [0, 1]") / (b - a)
    }

    pub fn cdf_at(&self, x: f64) -> f64 {
        let (a, b) = self.support;
        if x.is_nan() {
            return f64::NAN;
        }
        if x <= a {
            return 0.0;
        }
        if x >= b {
            return 1.0;
        }
        self.weights
            .mixture_cdf(self.to_unit(x))
            .expect("t lies in [0, 1]")
    }

    /// `(t_i, f̂(t_i), F̂(t_i))` at `t_i = a + i(b−a)/points`, `i = 0..=points`.
    pub fn grid(&self, points: usize) -> Vec<(f64, f64, f64)> {
        let (a, b) = self.support;
        let points = points.max(1);
        let step = (b - a) / points as f64;
        (0..=points)
            .map(|i| {
                let t = if i == points { b } else { a + i as f64 * step };
                (t, self.density_at(t), self.cdf_at(t))
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe = serde_json::from_str(text)?;
        if probe.version != MODEL_VERSION {
            return Err(DeconvError::ModelVersion {
                found: probe.version,
                expected: MODEL_VERSION,
            });
        }
        Ok(serde_json::from_str(text)?)
    }
}

/// Fits the deconvolution estimate of the density of `x` from `y = x + ε`.
pub fn fit(ys: &[f64], error: &ErrorModel, options: &FitOptions) -> Result<DeconvModel> {
    if ys.len() < 2 {
        return Err(DeconvError::TooFewObservations {
            need: 2,
            got: ys.len(),
        });
    }
    if let Some(bad) = ys.iter().find(|y| !y.is_finite()) {
        return Err(DeconvError::InvalidParameter(format!(
            "observations must be finite (got {bad})"
        )));
    }
    let (a, b) = match options.support {
        Some((a, b)) => {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(DeconvError::InvalidParameter(format!(
                    "support ({a}, {b}) must be finite with a < b"
                )));
            }
            (a, b)
        }
        None => choose_support(ys, error, options.zeta).map_err(|e| e.in_stage("support"))?,
    };
    let width = b - a;
    let unit: Vec<f64> = ys
        .iter()
        .map(|&y| {
            let t = (y - a) / width;
            if t == 0.0 {
                EDGE_NUDGE
            } else if t == 1.0 {
                1.0 - EDGE_NUDGE
            } else {
                t
            }
        })
        .collect();
    let unit_error = error.rescale(width)?;

    let m_b = estimate_moments(&unit, &unit_error)
        .and_then(|mom| lower_bound_degree(mom.mean, mom.variance))
        .map_err(|e| e.in_stage("lower bound"));
    // the bound is only required when it sets the grid
    let m_b_hat = match (m_b, options.degrees) {
        (Ok(v), _) => Some(v),
        (Err(_), Some(_)) => None,
        (Err(e), None) => return Err(e),
    };
    let (m_lo, m_hi) = match options.degrees {
        Some((lo, hi)) => {
            if lo > hi {
                return Err(DeconvError::InvalidParameter(format!(
                    "empty degree range {lo}..={hi}"
                )));
            }
            (lo, hi)
        }
        None => {
            let m0 = m_b_hat.unwrap_or(2).max(2);
            (m0, m0 + options.grid_width)
        }
    };

    let mut trace =
        sweep(&unit, &unit_error, m_lo, m_hi, &options.em).map_err(|e| e.in_stage("sweep"))?;
    let mut selection = if trace.len() >= 3 {
        select_degree(&trace).map_err(|e| e.in_stage("selection"))?
    } else {
        // too few degrees for a change point: keep the largest
        SelectionResult {
            q_hat: trace.len() - 1,
            m_hat: m_hi,
            r_values: Vec::new(),
            m_b_hat: None,
            flat_trace: false,
        }
    };
    selection.m_b_hat = m_b_hat;
    let index = selection.m_hat - m_lo;
    let weights = std::mem::take(&mut trace.weights).swap_remove(index);
    let loglik = trace.logliks[index];
    Ok(DeconvModel {
        support: (a, b),
        weights,
        error: *error,
        loglik,
        selection,
        trace,
        n: ys.len(),
        options: options.clone(),
    })
}

#[derive(Deserialize)]
struct VersionProbe {
    version: u64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TracePoint {
    m: usize,
    loglik: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u64,
    support: [f64; 2],
    degree: usize,
    weights: SimplexWeights,
    error: ErrorModel,
    loglik: f64,
    selection: SelectionResult,
    trace: Vec<TracePoint>,
    n: usize,
    options: FitOptions,
}

impl From<DeconvModel> for ModelFile {
    fn from(m: DeconvModel) -> Self {
        ModelFile {
            version: MODEL_VERSION,
            support: [m.support.0, m.support.1],
            degree: m.weights.degree(),
            weights: m.weights,
            error: m.error,
            loglik: m.loglik,
            selection: m.selection,
            trace: m
                .trace
                .degrees
                .iter()
                .zip(&m.trace.logliks)
                .map(|(&m, &loglik)| TracePoint { m, loglik })
                .collect(),
            n: m.n,
            options: m.options,
        }
    }
}

impl TryFrom<ModelFile> for DeconvModel {
    type Error = DeconvError;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.version != MODEL_VERSION {
            return Err(DeconvError::ModelVersion {
                found: f.version,
                expected: MODEL_VERSION,
            });
        }
        let [a, b] = f.support;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(DeconvError::InvalidParameter(format!(
                "support ({a}, {b}) must be finite with a < b"
            )));
        }
        if f.weights.degree() != f.degree {
            return Err(DeconvError::DegreeMismatch {
                expected: f.degree,
                got: f.weights.degree(),
            });
        }
        let (degrees, logliks) = f.trace.into_iter().map(|p| (p.m, p.loglik)).unzip();
        Ok(DeconvModel {
            support: (a, b),
            weights: f.weights,
            error: f.error,
            loglik: f.loglik,
            selection: f.selection,
            trace: DegreeTrace::new(degrees, logliks)?,
            n: f.n,
            options: f.options,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convolution::ConvMatrix;
    use crate::likelihood_em::fit_fixed_degree;
    use crate::quadrature::integrate;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn nn4_draws(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..4).map(|_| rng.random::<f64>()).sum::<f64>() / 4.0)
            .collect()
    }

    /// Density of the mean of four uniforms, from the Irwin–Hall formula.
    fn nn4_density(x: f64) -> f64 {
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        let s = 4.0 * x;
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        let mut acc = 0.0;
        for (k, c) in binom.iter().enumerate() {
            let d = s - k as f64;
            if d > 0.0 {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * c * d.powi(3);
            }
        }
        4.0 * acc / 6.0
    }

    fn normal_noise(xs: &[f64], sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = ErrorModel::normal(sd).unwrap().sample(&mut rng, xs.len());
        xs.iter().zip(noise).map(|(x, e)| x + e).collect()
    }

    fn opts(support: Option<(f64, f64)>, lo: usize, hi: usize) -> FitOptions {
        FitOptions {
            support,
            degrees: Some((lo, hi)),
            ..FitOptions::default()
        }
    }

    #[test]
    fn support_examples() {
        let ys = [0.0, 4.0, 10.0];
        let (a, b) = choose_support(&ys, &ErrorModel::Dirac, 3.0).unwrap();
        assert!(a < 0.0 && a > -1e-7 && b > 10.0 && b < 10.0 + 1e-7);
        let normal = ErrorModel::normal(1.0).unwrap();
        let (a, b) = choose_support(&ys, &normal, 3.0).unwrap();
        assert!((a + 3.0).abs() < 1e-12 && (b - 13.0).abs() < 1e-12);
        assert_eq!(choose_support(&ys, &normal, 0.0).unwrap(), (0.0, 10.0));
        assert!(matches!(
            choose_support(&[2.0, 2.0], &normal, 3.0),
            Err(DeconvError::DegenerateData)
        ));
        assert!(choose_support(&[2.0], &normal, 3.0).is_err());
        assert!(choose_support(&ys, &normal, -1.0).is_err());
    }

    fn model_with(support: (f64, f64), weights: Vec<f64>) -> DeconvModel {
        let weights = SimplexWeights::new(weights).unwrap();
        let m = weights.degree();
        DeconvModel {
            support,
            weights,
            error: ErrorModel::Dirac,
            loglik: 0.0,
            selection: SelectionResult {
                q_hat: 0,
                m_hat: m,
                r_values: vec![],
                m_b_hat: None,
                flat_trace: false,
            },
            trace: DegreeTrace::new(vec![m], vec![0.0]).unwrap(),
            n: 2,
            options: FitOptions::default(),
        }
    }

    #[test]
    fn density_and_cdf_examples() {
        let flat = model_with((0.0, 2.0), vec![1.0]);
        assert_eq!(flat.density_at(-0.1), 0.0);
        assert_eq!(flat.density_at(2.1), 0.0);
        assert_eq!(flat.density_at(1.0), 0.5);
        assert_eq!(flat.cdf_at(2.0), 1.0);
        assert_eq!(flat.cdf_at(-5.0), 0.0);

        let sym = model_with((-3.0, 5.0), vec![0.1, 0.25, 0.3, 0.25, 0.1]);
        assert!((sym.cdf_at(1.0) - 0.5).abs() < 1e-9);
        let h = 1e-5;
        for i in 1..40 {
            let x = -3.0 + 8.0 * i as f64 / 40.0;
            let slope = (sym.cdf_at(x + h) - sym.cdf_at(x - h)) / (2.0 * h);
            assert!((slope - sym.density_at(x)).abs() < 1e-4);
        }
        let grid = sym.grid(8);
        assert_eq!(grid.len(), 9);
        assert_eq!((grid[0].0, grid[8].0), (-3.0, 5.0));
        assert_eq!(grid[8].2, 1.0);
    }

    fn mass(model: &DeconvModel) -> f64 {
        let (a, b) = model.support();
        integrate(&|x| model.density_at(x), a, b, 1e-12)
    }

    #[test]
    fn fitted_models_are_normalized() {
        let xs = nn4_draws(150, 4);
        let ys = normal_noise(&xs, 0.05, 5);
        let model = fit(&ys, &ErrorModel::normal(0.05).unwrap(), &opts(None, 3, 12)).unwrap();
        assert!((mass(&model) - 1.0).abs() < 1e-6);
        // 512-panel midpoint rule as an independent check
        let (a, b) = model.support();
        let h = (b - a) / 512.0;
        let mid: f64 = (0..512)
            .map(|i| model.density_at(a + (i as f64 + 0.5) * h) * h)
            .sum();
        assert!((mid - 1.0).abs() < 1e-4);
    }

    #[test]
    fn beats_histogram_on_nn4() {
        let xs = nn4_draws(500, 11);
        let model = fit(&xs, &ErrorModel::Dirac, &opts(Some((0.0, 1.0)), 2, 30)).unwrap();
        let mut counts = [0usize; 10];
        for &x in &xs {
            counts[((x * 10.0) as usize).min(9)] += 1;
        }
        let hist = |x: f64| counts[((x * 10.0) as usize).min(9)] as f64 * 10.0 / 500.0;
        let ise = |f: &dyn Fn(f64) -> f64| {
            (0..2000)
                .map(|i| {
                    let x = (i as f64 + 0.5) / 2000.0;
                    (f(x) - nn4_density(x)).powi(2) / 2000.0
                })
                .sum::<f64>()
        };
        let bern = ise(&|x| model.density_at(x));
        let histo = ise(&hist);
        assert!(bern < histo, "bernstein {bern} histogram {histo}");
    }

    #[test]
    fn uniform_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let xs: Vec<f64> = (0..2000).map(|_| rng.random::<f64>()).collect();
        let options = FitOptions {
            support: Some((0.0, 1.0)),
            ..FitOptions::default()
        };
        let model = fit(&xs, &ErrorModel::Dirac, &options).unwrap();
        for x in [0.3, 0.5, 0.7] {
            assert!((model.density_at(x) - 1.0).abs() < 0.15, "{x}: {}", model.density_at(x));
        }
    }

    #[test]
    fn fit_is_deterministic() {
        let ys = normal_noise(&nn4_draws(80, 6), 0.1, 7);
        let error = ErrorModel::normal(0.1).unwrap();
        let first = fit(&ys, &error, &opts(None, 2, 10)).unwrap();
        let second = fit(&ys, &error, &opts(None, 2, 10)).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn dirac_pipeline_adds_nothing() {
        let xs = nn4_draws(120, 8);
        let model = fit(&xs, &ErrorModel::Dirac, &opts(Some((0.0, 1.0)), 2, 12)).unwrap();
        let cfg = EmConfig::default();
        let trace = sweep(&xs, &ErrorModel::Dirac, 2, 12, &cfg).unwrap();
        let sel = select_degree(&trace).unwrap();
        assert_eq!(model.degree(), sel.m_hat);
        assert_eq!(model.weights(), trace.weights_at(sel.m_hat).unwrap());
        assert_eq!(model.trace().logliks, trace.logliks);
    }

    #[test]
    fn tiny_normal_error_matches_dirac() {
        let xs = nn4_draws(100, 9);
        let support = Some((0.0, 1.0));
        let exact = fit(&xs, &ErrorModel::Dirac, &opts(support, 2, 12)).unwrap();
        let noisy = fit(&xs, &ErrorModel::normal(1e-9).unwrap(), &opts(support, 2, 12)).unwrap();
        assert_eq!(exact.degree(), noisy.degree());
        for (a, b) in exact.weights().as_slice().iter().zip(noisy.weights().as_slice()) {
            assert!((a - b).abs() < 1e-3);
        }
        for i in 0..=50 {
            let x = i as f64 / 50.0;
            assert!((exact.density_at(x) - noisy.density_at(x)).abs() < 1e-3);
        }
    }

    #[test]
    fn affine_equivariance() {
        let xs = nn4_draws(100, 12);
        let ys = normal_noise(&xs, 0.08, 13);
        let (c, d) = (2.5, -4.0);
        let moved: Vec<f64> = ys.iter().map(|y| c * y + d).collect();
        let first = fit(&ys, &ErrorModel::normal(0.08).unwrap(), &opts(Some((-0.3, 1.3)), 3, 15)).unwrap();
        let second = fit(
            &moved,
            &ErrorModel::normal(0.08 * c).unwrap(),
            &opts(Some((-0.3 * c + d, 1.3 * c + d)), 3, 15),
        )
        .unwrap();
        assert_eq!(first.degree(), second.degree());
        for i in 0..=100 {
            let x = -0.3 + 1.6 * i as f64 / 100.0;
            let lhs = second.density_at(c * x + d);
            let rhs = first.density_at(x) / c;
            assert!((lhs - rhs).abs() < 1e-8, "x={x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn edge_observations_are_nudged() {
        let xs = [0.0, 0.2, 0.5, 0.9, 1.0];
        let model = fit(&xs, &ErrorModel::Dirac, &opts(Some((0.0, 1.0)), 3, 3)).unwrap();
        assert!(model.loglik().is_finite());
        let mat = ConvMatrix::build(&ErrorModel::Dirac, 3, &[1e-12, 0.2, 0.5, 0.9, 1.0 - 1e-12]).unwrap();
        let direct = fit_fixed_degree(&mat, &SimplexWeights::uniform(3), &EmConfig::default()).unwrap();
        assert_eq!(model.weights(), &direct.weights);
    }

    #[test]
    fn short_grids_keep_the_largest_degree() {
        let xs = nn4_draws(60, 14);
        let model = fit(&xs, &ErrorModel::Dirac, &opts(Some((0.0, 1.0)), 5, 6)).unwrap();
        assert_eq!(model.degree(), 6);
        assert!(fit(&xs, &ErrorModel::Dirac, &opts(Some((0.0, 1.0)), 6, 5)).is_err());
    }

    #[test]
    fn errors_carry_stage() {
        let err = fit(&[1.0, 1.0, 1.0], &ErrorModel::Dirac, &FitOptions::default()).unwrap_err();
        assert!(matches!(err.root(), DeconvError::DegenerateData));
        assert!(err.to_string().contains("support"));
        assert!(fit(&[1.0], &ErrorModel::Dirac, &FitOptions::default()).is_err());
        assert!(fit(&[1.0, f64::NAN], &ErrorModel::Dirac, &FitOptions::default()).is_err());
        let bad_support = opts(Some((1.0, 0.0)), 2, 4);
        assert!(fit(&[0.2, 0.4], &ErrorModel::Dirac, &bad_support).is_err());
    }

    #[test]
    fn json_round_trip() {
        let ys = normal_noise(&nn4_draws(60, 15), 0.1, 16);
        let model = fit(&ys, &ErrorModel::normal(0.1).unwrap(), &opts(None, 2, 8)).unwrap();
        let text = model.to_json().unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["version"], 1);
        assert_eq!(value["degree"], model.degree());
        assert_eq!(value["trace"].as_array().unwrap().len(), 7);
        assert!(value["selection"]["m_hat"].is_u64());
        let back = DeconvModel::from_json(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.weights().as_slice(), model.weights().as_slice());

        let newer = text.replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(matches!(
            DeconvModel::from_json(&newer),
            Err(DeconvError::ModelVersion { found: 2, .. })
        ));
        let wrong_degree = text.replacen(
            &format!("\"degree\": {}", model.degree()),
            &format!("\"degree\": {}", model.degree() + 1),
            1,
        );
        assert!(DeconvModel::from_json(&wrong_degree).is_err());
    }
}
