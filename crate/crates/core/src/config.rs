//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    VerifyClassical,
    VerifyQuantum,
    BarrierScan,
    TailCheck,
    StabilitySweep,
    MixingCompare,
    ModelInfo,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::VerifyClassical => "verify-classical",
            Subcommand::VerifyQuantum => "verify-quantum",
            Subcommand::BarrierScan => "barrier-scan",
            Subcommand::TailCheck => "tail-check",
            Subcommand::StabilitySweep => "stability-sweep",
            Subcommand::MixingCompare => "mixing-compare",
            Subcommand::ModelInfo => "model-info",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BarrierConfig {
    /// Radius of the Pauli ball V around the reference eigenstate.
    pub inner: usize,
    /// Boundary shell radius used by barrier scans and sweeps.
    pub boundary: usize,
}

impl Default for BarrierConfig {
    fn default() -> Self {
        BarrierConfig { inner: 1, boundary: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TailConfig {
    pub eps1: f64,
    /// `None`: `eps1 + 2 (w0 w1 + 1/2)/n + 4g`, the smallest value leaving one shell.
    pub eps2: Option<f64>,
    /// `None`: largest admissible width.
    pub delta_e: Option<f64>,
}

impl Default for TailConfig {
    fn default() -> Self {
        TailConfig { eps1: 0.125, eps2: None, delta_e: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixingConfig {
    pub epsilon: f64,
    pub t_cap: usize,
}

impl Default for MixingConfig {
    fn default() -> Self {
        MixingConfig { epsilon: 0.25, t_cap: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub theorem: f64,
    pub classical: f64,
    pub drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { theorem: 1e-8, classical: 1e-12, drift: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Registry names; sweeps take family names sized by `ns`.
    pub models: Vec<String>,
    /// Extra model read from a check file.
    pub check_file: Option<PathBuf>,
    pub betas: Vec<f64>,
    pub gs: Vec<f64>,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    pub barrier: BarrierConfig,
    /// Partition radius in local mode; defaults to the channels' locality.
    pub radius: Option<usize>,
    pub attempt_prob: f64,
    /// Holding probability of classical Glauber chains.
    pub laziness: f64,
    pub tail: TailConfig,
    pub mixing: MixingConfig,
    pub tolerances: Tolerances,
    pub jobs: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            models: Vec::new(),
            check_file: None,
            betas: vec![1.0],
            gs: vec![0.0],
            ns: Vec::new(),
            seeds: vec![0],
            barrier: BarrierConfig::default(),
            radius: None,
            attempt_prob: crate::sampler::DEFAULT_ATTEMPT_PROB,
            laziness: 0.5,
            tail: TailConfig::default(),
            mixing: MixingConfig::default(),
            tolerances: Tolerances::default(),
            jobs: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Schema checks that need no computation.
    pub fn validate(&self, cmd: Subcommand) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        if self.models.is_empty() && self.check_file.is_none() {
            return bad("no models given".into());
        }
        if let Some(b) = self.betas.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
            return bad(format!("beta must be finite and >= 0, got {b}"));
        }
        if let Some(g) = self.gs.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return bad(format!("g must be finite and >= 0, got {g}"));
        }
        if self.betas.is_empty() && cmd != Subcommand::ModelInfo && cmd != Subcommand::TailCheck {
            return bad("betas is empty".into());
        }
        if !(self.attempt_prob > 0.0 && self.attempt_prob <= 1.0) {
            return bad(format!("attempt_prob must lie in (0, 1], got {}", self.attempt_prob));
        }
        if !(0.0..1.0).contains(&self.laziness) {
            return bad(format!("laziness must lie in [0, 1), got {}", self.laziness));
        }
        if !(self.mixing.epsilon > 0.0 && self.mixing.epsilon < 2.0) {
            return bad(format!("mixing epsilon must lie in (0, 2), got {}", self.mixing.epsilon));
        }
        let t = &self.tolerances;
        if [t.theorem, t.classical, t.drift].iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return bad("tolerances must be finite and >= 0".into());
        }
        if self.jobs == Some(0) {
            return bad("jobs must be >= 1".into());
        }
        if cmd == Subcommand::StabilitySweep {
            if self.ns.is_empty() {
                return bad("stability-sweep needs ns".into());
            }
            if self.betas.iter().any(|b| *b == 0.0) {
                return bad("stability-sweep needs beta > 0".into());
            }
        }
        if cmd == Subcommand::TailCheck && self.tail.eps1.is_nan() {
            return bad("tail.eps1 is NaN".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_unknown_fields() {
        let c = ExperimentConfig::from_json(r#"{"models": ["ising_ring(4)"]}"#).unwrap();
        assert_eq!(c.betas, vec![1.0]);
        assert!(c.validate(Subcommand::VerifyQuantum).is_ok());
        assert!(matches!(ExperimentConfig::from_json(r#"{"modles": []}"#), Err(Error::ConfigInvalid(_))));
    }

    #[test]
    fn negative_beta_rejected() {
        let c = ExperimentConfig::from_json(r#"{"models": ["ising_ring(4)"], "betas": [-1.0]}"#).unwrap();
        assert!(matches!(c.validate(Subcommand::VerifyQuantum), Err(Error::ConfigInvalid(_))));
    }
}
