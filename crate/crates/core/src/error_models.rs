//! Known measurement-error laws.
//!
//! All laws are centered at zero and symmetric. The generalized normal family
//! `g(x; α, γ) = γ / (2αΓ(1/γ)) · exp(-(|x|/α)^γ)` covers the normal (`γ = 2`)
//! and Laplace (`γ = 1`) cases; the uniform law is its `γ → ∞` limit and is
//! kept as a separate family because its convolution with a beta density has
//! a closed form. `Dirac` means "no measurement error".

use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{DeconvError, Result};

/// Law of the additive error ε.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ErrorModel {
    GeneralizedNormal { alpha: f64, gamma: f64 },
    Uniform { halfwidth: f64 },
    Dirac,
}

impl ErrorModel {
    pub fn generalized_normal(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) || !(gamma.is_finite() && gamma > 0.0) {
            return Err(DeconvError::InvalidParameter(format!(
                "generalized normal needs alpha > 0 and gamma > 0 (got alpha={alpha}, gamma={gamma})"
            )));
        }
        Ok(ErrorModel::GeneralizedNormal { alpha, gamma })
    }

    /// N(0, sd²), i.e. `(α, γ) = (√2·sd, 2)`.
    pub fn normal(sd: f64) -> Result<Self> {
        check_sd(sd)?;
        Self::generalized_normal(std::f64::consts::SQRT_2 * sd, 2.0)
    }

    /// Laplace law with standard deviation `sd`, i.e. `(α, γ) = (sd/√2, 1)`.
    pub fn laplace(sd: f64) -> Result<Self> {
        check_sd(sd)?;
        Self::generalized_normal(sd / std::f64::consts::SQRT_2, 1.0)
    }

    pub fn uniform(halfwidth: f64) -> Result<Self> {
        if !(halfwidth.is_finite() && halfwidth > 0.0) {
            return Err(DeconvError::InvalidParameter(format!(
                "uniform halfwidth must be positive (got {halfwidth})"
            )));
        }
        Ok(ErrorModel::Uniform { halfwidth })
    }

    pub fn is_dirac(&self) -> bool {
        matches!(self, ErrorModel::Dirac)
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        match *self {
            ErrorModel::GeneralizedNormal { alpha, gamma } => {
                Ok((gn_log_norm(alpha, gamma) - gn_exponent(x.abs() / alpha, gamma)).exp())
            }
            ErrorModel::Uniform { halfwidth } => Ok(if x.abs() <= halfwidth {
                0.5 / halfwidth
            } else {
                0.0
            }),
            ErrorModel::Dirac => Err(DeconvError::NoDensity),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            ErrorModel::GeneralizedNormal { alpha, gamma } => {
                let ratio = if gamma == 2.0 {
                    0.5
                } else if gamma == 1.0 {
                    2.0
                } else {
                    (ln_gamma(3.0 / gamma) - ln_gamma(1.0 / gamma)).exp()
                };
                alpha * alpha * ratio
            }
            ErrorModel::Uniform { halfwidth } => halfwidth * halfwidth / 3.0,
            ErrorModel::Dirac => 0.0,
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Law of `ε / c`.
    pub fn rescale(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c > 0.0) {
            return Err(DeconvError::InvalidParameter(format!(
                "rescale factor must be positive (got {c})"
            )));
        }
        Ok(match *self {
            ErrorModel::GeneralizedNormal { alpha, gamma } => ErrorModel::GeneralizedNormal {
                alpha: alpha / c,
                gamma,
            },
            ErrorModel::Uniform { halfwidth } => ErrorModel::Uniform {
                halfwidth: halfwidth / c,
            },
            ErrorModel::Dirac => ErrorModel::Dirac,
        })
    }

    /// Draws `n` i.i.d. errors.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        match *self {
            ErrorModel::Dirac => vec![0.0; n],
            ErrorModel::Uniform { halfwidth } => (0..n)
                .map(|_| rng.random_range(-halfwidth..=halfwidth))
                .collect(),
            ErrorModel::GeneralizedNormal { alpha, gamma } if gamma == 2.0 => {
                let sd = alpha / std::f64::consts::SQRT_2;
                (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        sd * z
                    })
                    .collect()
            }
            ErrorModel::GeneralizedNormal { alpha, gamma } if gamma == 1.0 => (0..n)
                .map(|_| {
                    let e: f64 = Exp1.sample(rng);
                    random_sign(rng) * alpha * e
                })
                .collect(),
            ErrorModel::GeneralizedNormal { alpha, gamma } => {
                // |ε/α|^γ ~ Gamma(1/γ, 1)
                let shape = Gamma::new(1.0 / gamma, 1.0).expect("gamma > 0 checked at construction");
                (0..n)
                    .map(|_| {
                        let g: f64 = shape.sample(rng);
                        random_sign(rng) * alpha * g.powf(1.0 / gamma)
                    })
                    .collect()
            }
        }
    }

    /// Half-width of the interval outside which the density carries
    /// less than `1e-17` of probability mass.
    pub fn reach(&self) -> f64 {
        match *self {
            ErrorModel::GeneralizedNormal { alpha, gamma } => alpha * gn_tail_cutoff(gamma),
            ErrorModel::Uniform { halfwidth } => halfwidth,
            ErrorModel::Dirac => 0.0,
        }
    }
}

fn check_sd(sd: f64) -> Result<()> {
    if sd.is_finite() && sd > 0.0 {
        Ok(())
    } else {
        Err(DeconvError::InvalidParameter(format!(
            "standard deviation must be positive (got {sd})"
        )))
    }
}

fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// `log(γ / (2αΓ(1/γ)))`
pub(crate) fn gn_log_norm(alpha: f64, gamma: f64) -> f64 {
    gamma.ln() - (2.0 * alpha).ln() - ln_gamma(1.0 / gamma)
}

/// `s^γ` with the common shapes special-cased.
#[inline]
pub(crate) fn gn_exponent(s: f64, gamma: f64) -> f64 {
    if gamma == 2.0 {
        s * s
    } else if gamma == 1.0 {
        s
    } else {
        s.powf(gamma)
    }
}

/// Smallest `K` (to within a few percent) with `P(|ε| > Kα) < 1e-17`.
/// `|ε/α|^γ` is Gamma(1/γ, 1), so the tail is the upper regularized gamma.
fn gn_tail_cutoff(gamma: f64) -> f64 {
    const TAIL: f64 = 1e-17;
    let shape = 1.0 / gamma;
    let mut t = 1.0;
    while gamma_ur(shape, t) > TAIL {
        t *= 1.05;
    }
    t.powf(1.0 / gamma)
}

/// JSON representation: exactly one parameterization per family.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawErrorSpec {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sd: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    halfwidth: Option<f64>,
}

impl TryFrom<RawErrorSpec> for ErrorModel {
    type Error = DeconvError;

    fn try_from(raw: RawErrorSpec) -> Result<Self> {
        let given = |name: &str| -> bool {
            match name {
                "alpha" => raw.alpha.is_some(),
                "gamma" => raw.gamma.is_some(),
                "sd" => raw.sd.is_some(),
                "halfwidth" => raw.halfwidth.is_some(),
                _ => false,
            }
        };
        let expect_only = |wanted: &[&str]| -> Result<()> {
            for name in ["alpha", "gamma", "sd", "halfwidth"] {
                let want = wanted.contains(&name);
                if want != given(name) {
                    return Err(DeconvError::InvalidParameter(format!(
                        "error family `{}` takes exactly {:?}",
                        raw.family, wanted
                    )));
                }
            }
            Ok(())
        };
        match raw.family.as_str() {
            "gnormal" => {
                expect_only(&["alpha", "gamma"])?;
                ErrorModel::generalized_normal(raw.alpha.unwrap(), raw.gamma.unwrap())
            }
            "normal" => {
                expect_only(&["sd"])?;
                ErrorModel::normal(raw.sd.unwrap())
            }
            "laplace" => {
                expect_only(&["sd"])?;
                ErrorModel::laplace(raw.sd.unwrap())
            }
            "uniform" => {
                expect_only(&["halfwidth"])?;
                ErrorModel::uniform(raw.halfwidth.unwrap())
            }
            "dirac" => {
                expect_only(&[])?;
                Ok(ErrorModel::Dirac)
            }
            other => Err(DeconvError::InvalidParameter(format!(
                "unknown error family `{other}`"
            ))),
        }
    }
}

impl From<&ErrorModel> for RawErrorSpec {
    fn from(model: &ErrorModel) -> Self {
        match *model {
            ErrorModel::GeneralizedNormal { alpha, gamma } => RawErrorSpec {
                family: "gnormal".into(),
                alpha: Some(alpha),
                gamma: Some(gamma),
                ..Default::default()
            },
            ErrorModel::Uniform { halfwidth } => RawErrorSpec {
                family: "uniform".into(),
                halfwidth: Some(halfwidth),
                ..Default::default()
            },
            ErrorModel::Dirac => RawErrorSpec {
                family: "dirac".into(),
                ..Default::default()
            },
        }
    }
}

impl Serialize for ErrorModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        RawErrorSpec::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ErrorModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawErrorSpec::deserialize(deserializer)?;
        ErrorModel::try_from(raw).map_err(D::Error::custom)
    }
}
