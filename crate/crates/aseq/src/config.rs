//! Run configuration: one TOML file with `[scenario]`, `[payoff]`,
//! `[learner]`, `[decider]` and `[tom]` sections. Every key is optional and
//! falls back to the library default.

use std::path::{Path, PathBuf};

use aseq_core::decision::{default_actions, DeciderConfig};
use aseq_core::payoff::{PayoffParams, WeightMode};
use aseq_core::qlearn::{BinEdges, LearnerParams};
use aseq_core::tom::{default_malice_network, BeliefNetwork, ObservationThresholds};
use aseq_core::training::EpisodeSampler;
use serde::{Deserialize, Serialize};

use crate::artifacts;
use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Distribution of training episodes.
    pub scenario: EpisodeSampler,
    pub payoff: PayoffParams,
    pub learner: LearnerParams,
    pub decider: DeciderSection,
    pub tom: TomSection,
}

/// Decider settings that are not payoff parameters or reward weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeciderSection {
    pub ego_actions: Vec<f64>,
    pub target_actions: Vec<f64>,
    pub weights: WeightMode,
    pub use_tom: bool,
    pub delta: f64,
    pub epsilon_mod: f64,
    pub q_weight: f64,
    pub thresholds: ObservationThresholds,
    pub bins: BinEdges,
}

impl Default for DeciderSection {
    fn default() -> Self {
        let d = DeciderConfig::default();
        DeciderSection {
            ego_actions: default_actions(),
            target_actions: default_actions(),
            weights: d.weights,
            use_tom: d.use_tom,
            delta: d.delta,
            epsilon_mod: d.epsilon_mod,
            q_weight: d.q_weight,
            thresholds: d.thresholds,
            bins: d.bins,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TomSection {
    /// Fitted network file; relative paths resolve against the config file.
    /// The built-in network is used when absent.
    pub network: Option<PathBuf>,
}

impl RunConfig {
    /// The decider assembled from the payoff, learner and decider sections.
    pub fn decider(&self) -> DeciderConfig {
        let d = &self.decider;
        DeciderConfig {
            ego_actions: d.ego_actions.clone(),
            target_actions: d.target_actions.clone(),
            payoff: self.payoff,
            weights: d.weights,
            use_tom: d.use_tom,
            w1: self.learner.w1,
            w2: self.learner.w2,
            delta: d.delta,
            epsilon_mod: d.epsilon_mod,
            thresholds: d.thresholds,
            bins: d.bins.clone(),
            q_weight: d.q_weight,
        }
    }

    /// Loads the configured network, or the built-in one.
    pub fn network(&self, base: &Path) -> AppResult<BeliefNetwork> {
        match &self.tom.network {
            Some(p) => artifacts::read_network(&base.join(p)),
            None => Ok(default_malice_network()),
        }
    }
}

/// Reads and validates a config file. Errors carry the line and column of
/// the offending key, or of its section header when no key can be singled
/// out.
pub fn load_config(path: &Path) -> AppResult<RunConfig> {
    let src = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    parse_config(&src, path)
}

pub fn parse_config(src: &str, path: &Path) -> AppResult<RunConfig> {
    let cfg: RunConfig = toml::from_str(src).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(src, s.start));
        AppError::Config {
            path: path.to_path_buf(),
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    validate(&cfg, src, path)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig, src: &str, path: &Path) -> AppResult<()> {
    let fail = |section: &str, err: aseq_core::Error| {
        let message = err.to_string();
        let (line, column) = locate(src, section, &message);
        AppError::Config {
            path: path.to_path_buf(),
            line,
            column,
            message,
        }
    };
    cfg.scenario.validate().map_err(|e| fail("scenario", e))?;
    cfg.payoff.validate().map_err(|e| fail("payoff", e))?;
    cfg.learner.validate().map_err(|e| fail("learner", e))?;
    cfg.decider().validate().map_err(|e| fail("decider", e))?;
    Ok(())
}

/// 1-based line and column of a byte offset.
pub fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Position of the first key of `section` that the message mentions, else
/// of the section header, else the start of the file.
fn locate(src: &str, section: &str, message: &str) -> (usize, usize) {
    let mut in_section = false;
    let mut header = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line.trim_matches(|c| c == '[' || c == ']').trim();
            in_section = name == section || name.starts_with(&format!("{section}."));
            if in_section && header.is_none() {
                header = Some((i + 1, 1));
            }
            continue;
        }
        if !in_section {
            continue;
        }
        if let Some((key, _)) = line.split_once('=') {
            let key = key.trim();
            let mentioned = message
                .split(|c: char| !(c.is_alphanumeric() || c == '_'))
                .any(|w| w == key);
            if mentioned {
                let column = raw.len() - raw.trim_start().len() + 1;
                return (i + 1, column);
            }
        }
    }
    header.unwrap_or((1, 1))
}
