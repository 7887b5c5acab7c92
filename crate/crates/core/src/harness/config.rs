use serde::{Deserialize, Serialize};

use crate::diagnostics::{PhaseBands, SnapshotSchedule};
use crate::engine::{
    BanditConfig, BetaSchedule, NoiseKind, DEFAULT_REFACTOR_PERIOD, DEFAULT_RIDGE,
};
use crate::error::{Error, Result};

/// `θ⋆` within this distance of unit norm is normalized with a warning.
pub const THETA_NORMALIZE_TOL: f64 = 1e-6;
const THETA_EXACT_TOL: f64 = 1e-10;

pub const DEFAULT_D: usize = 2;
pub const DEFAULT_HORIZON: usize = 10_000;
pub const DEFAULT_SIGMA: f64 = 0.25;
pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_DELTA: f64 = 0.1;

/// Monte Carlo and recording options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnessOptions {
    pub trials: usize,
    /// Confidence sets are built at level `1 − delta`.
    pub delta: f64,
    /// Worker threads; `0` uses every available core.
    pub workers: usize,
    pub schedule: SnapshotSchedule,
    pub bands: PhaseBands,
    /// Record wall-clock time per trial in the summary.
    pub timing: bool,
}

impl Default for HarnessOptions {
    fn default() -> Self {
        Self {
            trials: DEFAULT_TRIALS,
            delta: DEFAULT_DELTA,
            workers: 0,
            schedule: SnapshotSchedule::default(),
            bands: PhaseBands::default(),
            timing: false,
        }
    }
}

impl HarnessOptions {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "delta must be in (0,1), got {}",
                self.delta
            )));
        }
        self.schedule.rounds(1)?;
        Ok(())
    }
}

/// `[run]` table of the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<SnapshotSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bands: Option<PhaseBands>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<bool>,
}

/// The config file as written; every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ridge: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_star: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_hat_init: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refactor_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<BetaSchedule>,
    #[serde(default)]
    pub run: RunSection,
}

/// A validated configuration plus any warnings raised while resolving it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedConfig {
    pub bandit: BanditConfig,
    pub options: HarnessOptions,
    pub warnings: Vec<String>,
}

impl FileConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Fills defaults, normalizes a nearly-unit `θ⋆`, and validates.
    pub fn resolve(&self) -> Result<ParsedConfig> {
        let mut warnings = Vec::new();
        let d = self.d.unwrap_or(DEFAULT_D);
        let mut bandit = BanditConfig::new(
            d,
            self.horizon.unwrap_or(DEFAULT_HORIZON),
            self.sigma.unwrap_or(DEFAULT_SIGMA),
        );
        bandit.ridge = self.ridge.unwrap_or(DEFAULT_RIDGE);
        bandit.noise = self.noise.unwrap_or_default();
        bandit.base_seed = self.seed.unwrap_or(0);
        bandit.refactor_period = self.refactor_period.unwrap_or(DEFAULT_REFACTOR_PERIOD);
        bandit.beta = self.beta.unwrap_or_default();
        if let Some(theta) = &self.theta_star {
            bandit.theta_star = normalize_unit("theta_star", theta, &mut warnings)?;
        }
        if let Some(theta) = &self.theta_hat_init {
            bandit.theta_hat_init = Some(normalize_unit("theta_hat_init", theta, &mut warnings)?);
        }
        bandit.validate()?;

        let defaults = HarnessOptions::default();
        let options = HarnessOptions {
            trials: self.run.trials.unwrap_or(defaults.trials),
            delta: self.run.delta.unwrap_or(defaults.delta),
            workers: self.run.workers.unwrap_or(defaults.workers),
            schedule: self.run.schedule.unwrap_or(defaults.schedule),
            bands: self.run.bands.unwrap_or(defaults.bands),
            timing: self.run.timing.unwrap_or(defaults.timing),
        };
        options.validate()?;
        Ok(ParsedConfig {
            bandit,
            options,
            warnings,
        })
    }

    /// A fully specified file describing `bandit` and `options`.
    pub fn from_resolved(bandit: &BanditConfig, options: &HarnessOptions) -> Self {
        Self {
            d: Some(bandit.d),
            horizon: Some(bandit.horizon),
            sigma: Some(bandit.sigma),
            ridge: Some(bandit.ridge),
            theta_star: Some(bandit.theta_star.clone()),
            theta_hat_init: bandit.theta_hat_init.clone(),
            noise: Some(bandit.noise),
            seed: Some(bandit.base_seed),
            refactor_period: Some(bandit.refactor_period),
            beta: Some(bandit.beta),
            run: RunSection {
                trials: Some(options.trials),
                delta: Some(options.delta),
                workers: Some(options.workers),
                schedule: Some(options.schedule),
                bands: Some(options.bands),
                timing: Some(options.timing),
            },
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn normalize_unit(name: &str, v: &[f64], warnings: &mut Vec<String>) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let gap = (norm - 1.0).abs();
    if !(gap <= THETA_NORMALIZE_TOL) {
        return Err(Error::InvalidConfig(format!(
            "{name} must be unit norm, got norm {norm}"
        )));
    }
    if gap <= THETA_EXACT_TOL {
        return Ok(v.to_vec());
    }
    warnings.push(format!("{name} had norm {norm}; normalized to unit length"));
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Parses and resolves a TOML config document.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    FileConfig::from_toml(text)?.resolve()
}

/// Serializes a resolved configuration back to TOML.
pub fn config_to_toml(bandit: &BanditConfig, options: &HarnessOptions) -> Result<String> {
    FileConfig::from_resolved(bandit, options).to_toml()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let p = parse_config("").unwrap();
        assert_eq!(p.bandit.d, DEFAULT_D);
        assert_eq!(p.bandit.horizon, DEFAULT_HORIZON);
        assert_eq!(p.bandit.theta_star, vec![1.0, 0.0]);
        assert_eq!(p.bandit.beta, BetaSchedule::Stability { c: 1.0 });
        assert_eq!(p.options, HarnessOptions::default());
        assert!(p.warnings.is_empty());
    }

    #[test]
    fn full_document() {
        let text = r#"
            d = 3
            horizon = 500
            sigma = 0.5
            theta_star = [0.0, 0.6, 0.8]
            noise = "rademacher"
            seed = 42

            [beta]
            mode = "theory"
            delta = 0.05

            [run]
            trials = 20
            workers = 2
            schedule = { kind = "stride", every = 10 }
        "#;
        let p = parse_config(text).unwrap();
        assert_eq!(p.bandit.d, 3);
        assert_eq!(p.bandit.noise, NoiseKind::Rademacher);
        assert_eq!(
            p.bandit.beta,
            BetaSchedule::Theory {
                delta: 0.05,
                l: 1.0
            }
        );
        assert_eq!(p.options.trials, 20);
        assert_eq!(p.options.schedule, SnapshotSchedule::Stride { every: 10 });
    }

    #[test]
    fn theta_star_normalization() {
        assert!(matches!(
            parse_config("theta_star = [2.0, 0.0]"),
            Err(Error::InvalidConfig(_))
        ));
        let p = parse_config("theta_star = [1.0000005, 0.0]").unwrap();
        assert_eq!(p.bandit.theta_star, vec![1.0, 0.0]);
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn schema_violations_are_rejected() {
        assert!(matches!(
            parse_config("dimension = 3"),
            Err(Error::Parse(_))
        ));
        assert!(matches!(parse_config("d = \"two\""), Err(Error::Parse(_))));
        assert!(parse_config("d = 1").is_err());
        assert!(parse_config("[run]\ndelta = 1.5").is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let text = r#"
            d = 4
            horizon = 1234
            sigma = 0.3
            theta_star = [0.5, 0.5, 0.5, 0.5]
            theta_hat_init = [0.0, 0.0, 0.6, 0.8]
            [beta]
            mode = "constant"
            value = 7.25
            [run]
            delta = 0.05
            bands = { c3 = 2.0, c4 = 0.5 }
        "#;
        let p = parse_config(text).unwrap();
        let back = parse_config(&config_to_toml(&p.bandit, &p.options).unwrap()).unwrap();
        assert_eq!(back, p);
    }
}
