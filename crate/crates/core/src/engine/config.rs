use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const UNIT_TOL: f64 = 1e-10;

/// How the exploration bonus `β` is chosen. The value is resolved once at the
/// horizon and held fixed for the whole run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BetaSchedule {
    Constant {
        value: f64,
    },
    /// Self-normalized confidence radius `σ√(d·log(1+TL²/d) + 2·log(1/δ)) + 1`.
    Theory {
        delta: f64,
        #[serde(default = "default_feature_bound")]
        l: f64,
    },
    /// `c·d²·(σ√(d + log log T) + 1)`.
    Stability {
        c: f64,
    },
}

fn default_feature_bound() -> f64 {
    1.0
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::Stability { c: 1.0 }
    }
}

/// Sub-Gaussian noise families, all mean zero with variance `σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    #[default]
    Gaussian,
    Rademacher,
    Uniform,
}

impl NoiseKind {
    pub fn draw<R: Rng + ?Sized>(self, sigma: f64, rng: &mut R) -> f64 {
        match self {
            NoiseKind::Gaussian => sigma * rng.sample::<f64, _>(StandardNormal),
            NoiseKind::Rademacher => {
                if rng.random::<bool>() {
                    sigma
                } else {
                    -sigma
                }
            }
            NoiseKind::Uniform => {
                let half_width = sigma * 3.0_f64.sqrt();
                half_width * (2.0 * rng.random::<f64>() - 1.0)
            }
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "rademacher" => Ok(NoiseKind::Rademacher),
            "uniform" => Ok(NoiseKind::Uniform),
            other => Err(Error::InvalidConfig(format!(
                "unknown noise kind `{other}`"
            ))),
        }
    }
}

pub const DEFAULT_RIDGE: f64 = 1.0;
pub const DEFAULT_REFACTOR_PERIOD: usize = 1000;

/// Problem and schedule parameters for one LinUCB run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditConfig {
    pub d: usize,
    pub horizon: usize,
    pub sigma: f64,
    pub beta: BetaSchedule,
    pub ridge: f64,
    pub theta_star: Vec<f64>,
    pub noise: NoiseKind,
    pub base_seed: u64,
    /// Rank-one updates between full re-factorizations of `Λ_t`.
    pub refactor_period: usize,
    /// Overrides the random initial direction `θ̂_0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_hat_init: Option<Vec<f64>>,
}

impl BanditConfig {
    /// Defaults with `θ⋆ = e_1`.
    pub fn new(d: usize, horizon: usize, sigma: f64) -> Self {
        let mut theta_star = vec![0.0; d];
        if d > 0 {
            theta_star[0] = 1.0;
        }
        Self {
            d,
            horizon,
            sigma,
            beta: BetaSchedule::default(),
            ridge: DEFAULT_RIDGE,
            theta_star,
            noise: NoiseKind::default(),
            base_seed: 0,
            refactor_period: DEFAULT_REFACTOR_PERIOD,
            theta_hat_init: None,
        }
    }

    pub fn with_beta(mut self, beta: BetaSchedule) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_theta_star(mut self, theta_star: Vec<f64>) -> Self {
        self.theta_star = theta_star;
        self
    }

    pub fn with_noise(mut self, noise: NoiseKind) -> Self {
        self.noise = noise;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.d < 2 {
            return bad(format!("d must be at least 2, got {}", self.d));
        }
        if self.horizon < 1 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return bad(format!(
                "sigma must be finite and non-negative, got {}",
                self.sigma
            ));
        }
        if !(self.ridge.is_finite() && self.ridge > 0.0) {
            return bad(format!("ridge must be positive, got {}", self.ridge));
        }
        if self.refactor_period == 0 {
            return bad("refactor_period must be at least 1".into());
        }
        check_unit("theta_star", &self.theta_star, self.d)?;
        if let Some(init) = &self.theta_hat_init {
            check_unit("theta_hat_init", init, self.d)?;
        }
        match self.beta {
            BetaSchedule::Constant { value } if !(value.is_finite() && value >= 0.0) => {
                bad(format!("constant beta must be non-negative, got {value}"))
            }
            BetaSchedule::Theory { delta, l } if !(delta > 0.0 && delta < 1.0 && l > 0.0) => bad(
                format!("theory beta needs delta in (0,1) and l > 0, got {delta}, {l}"),
            ),
            BetaSchedule::Stability { c } if !(c.is_finite() && c > 0.0) => {
                bad(format!("stability beta needs c > 0, got {c}"))
            }
            BetaSchedule::Stability { .. } if self.horizon < 3 => {
                bad("stability beta needs horizon >= 3".into())
            }
            _ => Ok(()),
        }
    }

    /// `β` resolved at the configured horizon.
    pub fn beta_value(&self) -> Result<f64> {
        match self.beta {
            BetaSchedule::Constant { value } => Ok(value),
            BetaSchedule::Theory { delta, l } => {
                beta_theoretical(self.sigma, self.d, self.horizon, l, delta)
            }
            BetaSchedule::Stability { c } => beta_stability(self.sigma, self.d, self.horizon, c),
        }
    }
}

fn check_unit(name: &str, v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::InvalidConfig(format!(
            "{name} has length {}, expected {d}",
            v.len()
        )));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidConfig(format!(
            "{name} must be unit norm, got {norm}"
        )));
    }
    Ok(())
}

/// `σ√(d·log(1 + T·L²/d) + 2·log(1/δ)) + 1`.
pub fn beta_theoretical(sigma: f64, d: usize, horizon: usize, l: f64, delta: f64) -> Result<f64> {
    if !(sigma >= 0.0 && d >= 1 && horizon >= 1 && l > 0.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "beta_theoretical(sigma={sigma}, d={d}, T={horizon}, L={l}, delta={delta})"
        )));
    }
    let d = d as f64;
    let t = horizon as f64;
    let inner = d * (1.0 + t * l * l / d).ln() + 2.0 * (1.0 / delta).ln();
    Ok(sigma * inner.sqrt() + 1.0)
}

/// The stability threshold `d²·(σ√(d + log log T) + 1)`.
pub fn stability_threshold(sigma: f64, d: usize, horizon: f64) -> Result<f64> {
    if !(horizon >= 3.0) {
        return Err(Error::InvalidArgument(format!(
            "horizon must be >= 3, got {horizon}"
        )));
    }
    if !(sigma >= 0.0) || d < 1 {
        return Err(Error::InvalidArgument(format!("sigma={sigma}, d={d}")));
    }
    let d = d as f64;
    let inner = d + horizon.ln().ln();
    Ok(d * d * (sigma * inner.sqrt() + 1.0))
}

/// `c·d²·(σ√(d + log log T) + 1)`.
pub fn beta_stability(sigma: f64, d: usize, horizon: usize, c: f64) -> Result<f64> {
    beta_stability_at(sigma, d, horizon as f64, c)
}

/// [`beta_stability`] for a real-valued horizon.
pub fn beta_stability_at(sigma: f64, d: usize, horizon: f64, c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "c must be positive, got {c}"
        )));
    }
    Ok(c * stability_threshold(sigma, d, horizon)?)
}
