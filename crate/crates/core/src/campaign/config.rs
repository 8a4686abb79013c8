use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Solve,
    VerifyEnergy,
    VerifyLipschitz,
    VerifyCorollaries,
    VerifyLemmas,
    VerifyCovering,
    VerifyHolder,
    Calibrate,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::Solve,
        Scenario::VerifyEnergy,
        Scenario::VerifyLipschitz,
        Scenario::VerifyCorollaries,
        Scenario::VerifyLemmas,
        Scenario::VerifyCovering,
        Scenario::VerifyHolder,
        Scenario::Calibrate,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Solve => "solve",
            Scenario::VerifyEnergy => "verify-energy",
            Scenario::VerifyLipschitz => "verify-lipschitz",
            Scenario::VerifyCorollaries => "verify-corollaries",
            Scenario::VerifyLemmas => "verify-lemmas",
            Scenario::VerifyCovering => "verify-covering",
            Scenario::VerifyHolder => "verify-holder",
            Scenario::Calibrate => "calibrate",
        }
    }

    /// Accepts the full name or, for verification scenarios, the part after `verify-`.
    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|sc| sc.name() == s || sc.name().strip_prefix("verify-") == Some(s))
            .ok_or_else(|| Error::Parse(format!("unknown scenario {s:?}")))
    }

    pub fn is_verification(&self) -> bool {
        self.name().starts_with("verify-")
    }
}

fn default_seed() -> u64 {
    1
}

fn default_dims() -> Vec<usize> {
    vec![1, 2]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_dims")]
    pub dims: Vec<usize>,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { dims: default_dims() }
    }
}

/// Exponents of the equation. Absent means the scenario's default set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxSection {
    #[serde(default)]
    pub p: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationSection {
    /// Integrability offset of the unified bound.
    pub eps: f64,
    pub sigma: f64,
}

impl Default for IterationSection {
    fn default() -> Self {
        Self { eps: 0.5, sigma: 0.5 }
    }
}

/// A parsed experiment file.
///
/// ```toml
/// scenario = "verify-lipschitz"
/// seed = 7
///
/// [flux]
/// p = [2.0, 3.0]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: Option<Scenario>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Frozen constants from `calibrate`; calibrated on the fly when absent.
    #[serde(default)]
    pub constants: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub flux: FluxSection,
    #[serde(default)]
    pub iteration: IterationSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: None,
            seed: default_seed(),
            out: None,
            constants: None,
            grid: GridSection::default(),
            flux: FluxSection::default(),
            iteration: IterationSection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Shape checks only; range checks on `p` belong to the scenarios.
    pub fn validate(&self) -> Result<()> {
        if self.grid.dims.is_empty() || self.grid.dims.iter().any(|d| !(1..=2).contains(d)) {
            return Err(Error::Parse(format!("grid.dims must list 1 and/or 2, got {:?}", self.grid.dims)));
        }
        if self.flux.p.iter().flatten().any(|p| !p.is_finite()) {
            return Err(Error::Parse("flux.p must be finite".into()));
        }
        Ok(())
    }

    /// Listed exponents, or `default` when the key is absent.
    pub fn ps_or(&self, default: &[f64]) -> Vec<f64> {
        self.flux.p.clone().unwrap_or_else(|| default.to_vec())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).unwrap_or_default();
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let cfg = ExperimentConfig::parse("scenario = \"verify-lipschitz\"\nseed = 9\n[flux]\np = [1.0]\n[grid]\ndims = [2]\n").unwrap();
        assert_eq!(cfg.scenario, Some(Scenario::VerifyLipschitz));
        assert_eq!((cfg.seed, cfg.flux.p.clone(), cfg.grid.dims.clone()), (9, Some(vec![1.0]), vec![2]));
        assert_eq!(cfg.iteration, IterationSection::default());
    }

    #[test]
    fn rejects_malformed_text() {
        for bad in ["scenario = ", "scenario = \"dance\"", "[grid]\ndims = [3]", "colour = 1", "[flux]\nq = 2"] {
            assert!(matches!(ExperimentConfig::parse(bad), Err(Error::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn short_scenario_names() {
        assert_eq!(Scenario::parse("lemmas").unwrap(), Scenario::VerifyLemmas);
        assert_eq!(Scenario::parse("verify-holder").unwrap(), Scenario::VerifyHolder);
        assert!(Scenario::parse("energy-ish").is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig { seed: 2, ..a.clone() };
        assert_eq!(a.digest(), ExperimentConfig::default().digest());
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest().len(), 64);
    }
}
