//! Monte Carlo studies: truth families, comparator estimators and the
//! pointwise-MSE / MISE summaries.
//!
//! A study evaluates every estimator on the grid `t_i = a + iΔt`,
//! `i = 0..=N`, `Δt = (b−a)/N`. Across `R` runs,
//! `pMSE(t) = var_R{f̂(t)} + (mean_R{f̂(t)} − f(t))²` with divisor `R` in the
//! variance, and `MISE = Σ_{i=1}^{N} pMSE(t_i)·Δt`.
//!
//! Run `r` draws from `ChaCha8Rng` seeded with
//! `splitmix64(seed + (r+1)·0x9E3779B97F4A7C15)`: first the `n` clean values,
//! then the `n` errors.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::deconvolver::{fit, FitOptions};
use crate::error::{DeconvError, Result};
use crate::error_models::ErrorModel;

/// Grid intervals used by the published studies.
pub const DEFAULT_GRID_POINTS: usize = 512;
/// Largest `d` for which the Irwin–Hall alternating sum is trusted.
pub const MAX_NEARLY_NORMAL_D: usize = 30;
/// Fraction of failed runs above which a study is abandoned.
const MAX_FAILURE_FRACTION: f64 = 0.1;
const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Law of the clean observations `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum Truth {
    TruncatedNormal {
        mean: f64,
        sd: f64,
        lower: f64,
        upper: f64,
    },
    TruncatedNormalMixture {
        weights: Vec<f64>,
        means: Vec<f64>,
        sds: Vec<f64>,
        lower: f64,
        upper: f64,
    },
    /// Mean of `d` independent uniform(0, 1) draws.
    NearlyNormal { d: usize },
}

fn check_bounds(lower: f64, upper: f64) -> Result<()> {
    if !(lower.is_finite() && upper.is_finite() && lower < upper) {
        return Err(DeconvError::InvalidParameter(format!(
            "truncation interval ({lower}, {upper}) must be finite with lower < upper"
        )));
    }
    Ok(())
}

impl Truth {
    pub fn truncated_normal(mean: f64, sd: f64, lower: f64, upper: f64) -> Result<Self> {
        Self::truncated_mixture(vec![1.0], vec![mean], vec![sd], lower, upper).map(|_| {
            Truth::TruncatedNormal {
                mean,
                sd,
                lower,
                upper,
            }
        })
    }

    pub fn truncated_mixture(
        weights: Vec<f64>,
        means: Vec<f64>,
        sds: Vec<f64>,
        lower: f64,
        upper: f64,
    ) -> Result<Self> {
        check_bounds(lower, upper)?;
        if weights.is_empty() || weights.len() != means.len() || weights.len() != sds.len() {
            return Err(DeconvError::InvalidParameter(
                "mixture weights, means and sds must have equal nonzero length".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(DeconvError::NotOnSimplex(format!(
                "mixture weights {weights:?}"
            )));
        }
        if means.iter().any(|m| !m.is_finite()) || sds.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(DeconvError::InvalidParameter(
                "component means must be finite and sds positive".into(),
            ));
        }
        Ok(Truth::TruncatedNormalMixture {
            weights,
            means,
            sds,
            lower,
            upper,
        })
    }

    pub fn nearly_normal(d: usize) -> Result<Self> {
        if d == 0 || d > MAX_NEARLY_NORMAL_D {
            return Err(DeconvError::InvalidParameter(format!(
                "nearly-normal order must be in 1..={MAX_NEARLY_NORMAL_D} (got {d})"
            )));
        }
        Ok(Truth::NearlyNormal { d })
    }

    /// Interval carrying all the mass.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Truth::TruncatedNormal { lower, upper, .. }
            | Truth::TruncatedNormalMixture { lower, upper, .. } => (lower, upper),
            Truth::NearlyNormal { .. } => (0.0, 1.0),
        }
    }

    fn components(&self) -> Vec<(f64, f64, f64)> {
        match self {
            Truth::TruncatedNormal { mean, sd, .. } => vec![(1.0, *mean, *sd)],
            Truth::TruncatedNormalMixture {
                weights, means, sds, ..
            } => weights
                .iter()
                .zip(means)
                .zip(sds)
                .map(|((&w, &m), &s)| (w, m, s))
                .collect(),
            Truth::NearlyNormal { .. } => Vec::new(),
        }
    }

    fn truncation_mass(&self) -> f64 {
        let (a, b) = self.support();
        self.components()
            .iter()
            .map(|&(w, m, s)| w * (std_normal_cdf((b - m) / s) - std_normal_cdf((a - m) / s)))
            .sum()
    }

    pub fn density(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if !(x >= a && x <= b) {
            return 0.0;
        }
        match *self {
            Truth::NearlyNormal { d } => d as f64 * irwin_hall_density(d, d as f64 * x),
            _ => {
                let raw: f64 = self
                    .components()
                    .iter()
                    .map(|&(w, m, s)| w * std_normal_pdf((x - m) / s) / s)
                    .sum();
                raw / self.truncation_mass()
            }
        }
    }

    /// Variance of the truncated law.
    pub fn variance(&self) -> f64 {
        match *self {
            Truth::NearlyNormal { d } => 1.0 / (12.0 * d as f64),
            _ => {
                let (a, b) = self.support();
                let total = self.truncation_mass();
                let (mut m1, mut m2) = (0.0, 0.0);
                for (w, m, s) in self.components() {
                    let (za, zb) = ((a - m) / s, (b - m) / s);
                    let mass = std_normal_cdf(zb) - std_normal_cdf(za);
                    let (pa, pb) = (std_normal_pdf(za), std_normal_pdf(zb));
                    // truncated moments of one component, weighted by its mass
                    let e1 = m * mass + s * (pa - pb);
                    let e2 = (m * m + s * s) * mass + 2.0 * m * s * (pa - pb)
                        + s * s * (za * pa - zb * pb);
                    m1 += w * e1;
                    m2 += w * e2;
                }
                let mean = m1 / total;
                m2 / total - mean * mean
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        match *self {
            Truth::NearlyNormal { d } => (0..n)
                .map(|_| (0..d).map(|_| rng.random::<f64>()).sum::<f64>() / d as f64)
                .collect(),
            _ => {
                let (a, b) = self.support();
                let comps = self.components();
                (0..n)
                    .map(|_| loop {
                        let (_, m, s) = pick_component(&comps, rng);
                        let z: f64 = rng.sample(StandardNormal);
                        let x = m + s * z;
                        if x >= a && x <= b {
                            break x;
                        }
                    })
                    .collect()
            }
        }
    }
}

fn pick_component<R: Rng + ?Sized>(comps: &[(f64, f64, f64)], rng: &mut R) -> (f64, f64, f64) {
    if comps.len() == 1 {
        return comps[0];
    }
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for &c in comps {
        acc += c.0;
        if u < acc {
            return c;
        }
    }
    *comps.last().unwrap()
}

/// Density of the sum of `d` uniform(0, 1) variables.
pub fn irwin_hall_density(d: usize, s: f64) -> f64 {
    let df = d as f64;
    if !(s >= 0.0 && s <= df) {
        return 0.0;
    }
    if d == 1 {
        return 1.0;
    }
    // the sum is symmetric about d/2; the shorter alternating sum is steadier
    let s = if s > df / 2.0 { df - s } else { s };
    let mut sum = 0.0;
    let mut carry = 0.0;
    let mut binom = 1.0;
    for k in 0..=(s.floor() as usize).min(d) {
        if k > 0 {
            binom = binom * (df - k as f64 + 1.0) / k as f64;
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let term = sign * binom * (s - k as f64).powi(d as i32 - 1) - carry;
        let next = sum + term;
        carry = (next - sum) - term;
        sum = next;
    }
    let fact: f64 = (1..d).map(|k| k as f64).product();
    (sum / fact).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    Fixed(f64),
    /// `0.9·min(s, IQR/1.34)·n^{−1/5}`.
    Silverman,
}

/// Gaussian kernel density estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    xs: Vec<f64>,
    bandwidth: f64,
}

/// Linear-interpolation sample quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Kde {
    pub fn new(xs: &[f64], bandwidth: Bandwidth) -> Result<Self> {
        let n = xs.len();
        let h = match bandwidth {
            Bandwidth::Fixed(h) => {
                if xs.is_empty() {
                    return Err(DeconvError::TooFewObservations { need: 1, got: 0 });
                }
                h
            }
            Bandwidth::Silverman => {
                if n < 2 {
                    return Err(DeconvError::TooFewObservations { need: 2, got: n });
                }
                let mean = xs.iter().sum::<f64>() / n as f64;
                let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
                let mut sorted = xs.to_vec();
                sorted.sort_by(f64::total_cmp);
                let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
                let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
                if !(spread > 0.0) {
                    return Err(DeconvError::DegenerateData);
                }
                0.9 * spread * (n as f64).powf(-0.2)
            }
        };
        if !(h.is_finite() && h > 0.0) {
            return Err(DeconvError::InvalidParameter(format!(
                "bandwidth must be positive (got {h})"
            )));
        }
        Ok(Self {
            xs: xs.to_vec(),
            bandwidth: h,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        self.xs.iter().map(|&xi| std_normal_pdf((x - xi) / h)).sum::<f64>()
            / (self.xs.len() as f64 * h)
    }
}

/// `N(ȳ, known_var)`: the normal model with only the mean estimated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalFit {
    pub mean: f64,
    pub variance: f64,
}

impl NormalFit {
    pub fn density(&self, x: f64) -> f64 {
        let sd = self.variance.sqrt();
        std_normal_pdf((x - self.mean) / sd) / sd
    }
}

pub fn parametric_normal_deconv(ys: &[f64], known_var: f64) -> Result<NormalFit> {
    if ys.is_empty() {
        return Err(DeconvError::TooFewObservations { need: 1, got: 0 });
    }
    if !(known_var.is_finite() && known_var > 0.0) {
        return Err(DeconvError::InvalidParameter(format!(
            "known variance must be positive (got {known_var})"
        )));
    }
    Ok(NormalFit {
        mean: ys.iter().sum::<f64>() / ys.len() as f64,
        variance: known_var,
    })
}

/// Data of one Monte Carlo run.
#[derive(Debug, Clone, Copy)]
pub struct Replicate<'a> {
    pub run: usize,
    pub clean: &'a [f64],
    pub contaminated: &'a [f64],
}

/// A density estimator scored by [`run_study`].
pub trait Estimator: Sync {
    fn label(&self) -> &str;

    /// Estimated density at every grid point.
    fn estimate(&self, data: &Replicate<'_>, grid: &[f64]) -> Result<Vec<f64>>;
}

/// Bernstein deconvolution of the contaminated sample.
#[derive(Debug, Clone)]
pub struct BernsteinEstimator {
    pub error: ErrorModel,
    pub options: FitOptions,
}

impl Estimator for BernsteinEstimator {
    fn label(&self) -> &str {
        "bernstein"
    }

    fn estimate(&self, data: &Replicate<'_>, grid: &[f64]) -> Result<Vec<f64>> {
        let model = fit(data.contaminated, &self.error, &self.options)?;
        Ok(grid.iter().map(|&t| model.density_at(t)).collect())
    }
}

/// Kernel estimate from the clean sample, a benchmark no real study has.
#[derive(Debug, Clone)]
pub struct KdeClean {
    pub bandwidth: Bandwidth,
}

impl Estimator for KdeClean {
    fn label(&self) -> &str {
        "kde-clean"
    }

    fn estimate(&self, data: &Replicate<'_>, grid: &[f64]) -> Result<Vec<f64>> {
        let kde = Kde::new(data.clean, self.bandwidth)?;
        Ok(grid.iter().map(|&t| kde.density(t)).collect())
    }
}

/// Normal density with known variance and the contaminated sample mean.
#[derive(Debug, Clone)]
pub struct ParametricNormal {
    pub known_var: f64,
}

impl Estimator for ParametricNormal {
    fn label(&self) -> &str {
        "parametric-normal"
    }

    fn estimate(&self, data: &Replicate<'_>, grid: &[f64]) -> Result<Vec<f64>> {
        let fit = parametric_normal_deconv(data.contaminated, self.known_var)?;
        Ok(grid.iter().map(|&t| fit.density(t)).collect())
    }
}

/// The true density; scores zero.
#[derive(Debug, Clone)]
pub struct TruthOracle {
    pub truth: Truth,
}

impl Estimator for TruthOracle {
    fn label(&self) -> &str {
        "truth"
    }

    fn estimate(&self, _data: &Replicate<'_>, grid: &[f64]) -> Result<Vec<f64>> {
        Ok(grid.iter().map(|&t| self.truth.density(t)).collect())
    }
}

/// Density grids computed elsewhere, one per run, on the study grid.
#[derive(Debug, Clone)]
pub struct ExternalGrids {
    pub label: String,
    pub grids: Vec<Vec<f64>>,
}

impl Estimator for ExternalGrids {
    fn label(&self) -> &str {
        &self.label
    }

    fn estimate(&self, data: &Replicate<'_>, grid: &[f64]) -> Result<Vec<f64>> {
        let values = self.grids.get(data.run).ok_or_else(|| {
            DeconvError::InvalidParameter(format!("no external grid for run {}", data.run))
        })?;
        if values.len() != grid.len() {
            return Err(DeconvError::InvalidParameter(format!(
                "external grid has {} points, study grid {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(values.clone())
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: String,
    pub truth: Truth,
    pub error: ErrorModel,
    pub n: usize,
    pub runs: usize,
    pub seed: u64,
    /// Number of grid intervals `N`.
    pub grid_points: usize,
    /// Every run reuses the first run's draws.
    pub same_seed_every_run: bool,
}

impl ScenarioSpec {
    pub fn new(name: &str, truth: Truth, error: ErrorModel, n: usize, runs: usize, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            truth,
            error,
            n,
            runs,
            seed,
            grid_points: DEFAULT_GRID_POINTS,
            same_seed_every_run: false,
        }
    }

    /// `t_i = a + iΔt` for `i = 0..=N` over the truth's support.
    pub fn grid(&self) -> Vec<f64> {
        let (a, b) = self.truth.support();
        let step = (b - a) / self.grid_points as f64;
        (0..=self.grid_points)
            .map(|i| if i == self.grid_points { b } else { a + i as f64 * step })
            .collect()
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        sub_seed(self.seed, if self.same_seed_every_run { 0 } else { run })
    }

    /// Clean and contaminated samples of one run.
    pub fn draw(&self, run: usize) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.run_seed(run));
        let clean = self.truth.sample(&mut rng, self.n);
        let noise = self.error.sample(&mut rng, self.n);
        let contaminated = clean.iter().zip(noise).map(|(x, e)| x + e).collect();
        (clean, contaminated)
    }
}

/// SplitMix64 output function.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `run`: `splitmix64(seed + (run+1)·γ)`.
pub fn sub_seed(seed: u64, run: usize) -> u64 {
    mix64(seed.wrapping_add((run as u64 + 1).wrapping_mul(GOLDEN_GAMMA)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub label: String,
    pub pmse: Vec<f64>,
    pub mise: f64,
    /// Runs with a usable estimate.
    pub completed: usize,
    pub failures: usize,
}

impl RunMetrics {
    pub fn sqrt_mise_x100(&self) -> f64 {
        100.0 * self.mise.sqrt()
    }
}

/// Estimates of every run, kept so that summaries over any prefix of the
/// run sequence can be formed without refitting.
#[derive(Debug, Clone)]
pub struct RunSet {
    pub scenario: String,
    pub n: usize,
    pub sigma0: f64,
    pub grid: Vec<f64>,
    pub truth_on_grid: Vec<f64>,
    pub labels: Vec<String>,
    /// `estimates[r][k]` is estimator `k` in run `r`; failures hold the error text.
    pub estimates: Vec<Vec<std::result::Result<Vec<f64>, String>>>,
}

/// Draws and fits every run.
pub fn simulate_runs(spec: &ScenarioSpec, estimators: &[Box<dyn Estimator>]) -> Result<RunSet> {
    if spec.runs < 2 {
        return Err(DeconvError::InvalidParameter(format!(
            "a study needs at least 2 runs (got {})",
            spec.runs
        )));
    }
    if spec.grid_points == 0 {
        return Err(DeconvError::InvalidParameter("grid needs at least one interval".into()));
    }
    let grid = spec.grid();
    let estimates = (0..spec.runs)
        .into_par_iter()
        .map(|run| {
            let (clean, contaminated) = spec.draw(run);
            let data = Replicate {
                run,
                clean: &clean,
                contaminated: &contaminated,
            };
            estimators
                .iter()
                .map(|e| {
                    let out = e.estimate(&data, &grid).map_err(|err| err.to_string());
                    if let Err(msg) = &out {
                        log::debug!("run {run}: {} failed: {msg}", e.label());
                    }
                    out
                })
                .collect()
        })
        .collect();
    Ok(RunSet {
        scenario: spec.name.clone(),
        n: spec.n,
        sigma0: spec.error.sd(),
        truth_on_grid: grid.iter().map(|&t| spec.truth.density(t)).collect(),
        grid,
        labels: estimators.iter().map(|e| e.label().to_string()).collect(),
        estimates,
    })
}

impl RunSet {
    pub fn runs(&self) -> usize {
        self.estimates.len()
    }

    /// pMSE and MISE per estimator over the first `runs` runs.
    pub fn metrics(&self, runs: usize) -> Result<Vec<RunMetrics>> {
        if runs < 2 || runs > self.runs() {
            return Err(DeconvError::InvalidParameter(format!(
                "cannot summarize {runs} of {} runs",
                self.runs()
            )));
        }
        let step = self.grid[1] - self.grid[0];
        let points = self.grid.len();
        let mut out = Vec::with_capacity(self.labels.len());
        for (k, label) in self.labels.iter().enumerate() {
            let ok: Vec<&Vec<f64>> = self.estimates[..runs]
                .iter()
                .filter_map(|run| run[k].as_ref().ok())
                .collect();
            let failures = runs - ok.len();
            if failures as f64 > MAX_FAILURE_FRACTION * runs as f64 || ok.len() < 2 {
                return Err(DeconvError::StudyAborted {
                    estimator: label.clone(),
                    failures,
                    runs,
                });
            }
            let count = ok.len() as f64;
            let mut pmse = vec![0.0; points];
            for (i, slot) in pmse.iter_mut().enumerate() {
                let mean = ok.iter().map(|e| e[i]).sum::<f64>() / count;
                let var = ok.iter().map(|e| (e[i] - mean).powi(2)).sum::<f64>() / count;
                *slot = var + (mean - self.truth_on_grid[i]).powi(2);
            }
            let mise = pmse[1..].iter().sum::<f64>() * step;
            out.push(RunMetrics {
                label: label.clone(),
                pmse,
                mise,
                completed: ok.len(),
                failures,
            });
        }
        Ok(out)
    }
}

/// Runs the study and summarizes all runs.
pub fn run_study(spec: &ScenarioSpec, estimators: &[Box<dyn Estimator>]) -> Result<Vec<RunMetrics>> {
    simulate_runs(spec, estimators)?.metrics(spec.runs)
}

/// `scenario,estimator,n,sigma0,runs,mise,sqrt_mise_x100,failures`.
pub fn study_csv(scenario: &str, n: usize, sigma0: f64, runs: usize, metrics: &[RunMetrics]) -> String {
    let mut out = String::from("scenario,estimator,n,sigma0,runs,mise,sqrt_mise_x100,failures\n");
    for m in metrics {
        let _ = writeln!(
            out,
            "{scenario},{},{n},{sigma0},{runs},{},{},{}",
            m.label,
            m.mise,
            m.sqrt_mise_x100(),
            m.failures
        );
    }
    out
}

/// `t,pmse_<label>,…` with one row per grid point.
pub fn pmse_csv(grid: &[f64], metrics: &[RunMetrics]) -> String {
    let mut out = String::from("t");
    for m in metrics {
        let _ = write!(out, ",pmse_{}", m.label);
    }
    out.push('\n');
    for (i, t) in grid.iter().enumerate() {
        let _ = write!(out, "{t}");
        for m in metrics {
            let _ = write!(out, ",{}", m.pmse[i]);
        }
        out.push('\n');
    }
    out
}

/// A named truth with the settings of its published study.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub truth: Truth,
    pub degrees: (usize, usize),
    /// Variance handed to the parametric comparator, when one applies.
    pub known_var: Option<f64>,
}

pub fn presets() -> Vec<Preset> {
    let unimodal = Truth::truncated_normal(0.0, 1.0, -7.0, 7.0).expect("valid preset");
    let known = unimodal.variance();
    vec![
        Preset {
            name: "normal-unimodal",
            description: "N(0,1) truncated to [-7,7]; degrees 10..=100",
            truth: unimodal,
            degrees: (10, 100),
            known_var: Some(known),
        },
        Preset {
            name: "normal-mixture",
            description: "0.6 N(-2,1) + 0.4 N(2,0.8^2) truncated to [-7,7]; degrees 10..=100",
            truth: Truth::truncated_mixture(
                vec![0.6, 0.4],
                vec![-2.0, 2.0],
                vec![1.0, 0.8],
                -7.0,
                7.0,
            )
            .expect("valid preset"),
            degrees: (10, 100),
            known_var: None,
        },
        Preset {
            name: "nn4",
            description: "mean of 4 uniform(0,1) draws on [0,1]; degrees 2..=100",
            truth: Truth::nearly_normal(4).expect("valid preset"),
            degrees: (2, 100),
            known_var: Some(1.0 / 48.0),
        },
    ]
}

pub fn preset(name: &str) -> Option<Preset> {
    presets().into_iter().find(|p| p.name == name)
}

impl Preset {
    /// Bernstein deconvolution on the truth's support, the clean-data kernel
    /// estimate, and the parametric fit when the truth is a single normal.
    pub fn estimators(&self, error: ErrorModel, degrees: Option<(usize, usize)>) -> Vec<Box<dyn Estimator>> {
        let mut list: Vec<Box<dyn Estimator>> = vec![
            Box::new(BernsteinEstimator {
                error,
                options: FitOptions {
                    support: Some(self.truth.support()),
                    degrees: Some(degrees.unwrap_or(self.degrees)),
                    ..FitOptions::default()
                },
            }),
            Box::new(KdeClean {
                bandwidth: Bandwidth::Silverman,
            }),
        ];
        if let Some(known_var) = self.known_var {
            list.push(Box::new(ParametricNormal { known_var }));
        }
        list
    }
}
