//! Experiment configuration: a TOML file with `[env]`, `[agent]`,
//! `[schedule]`, and `[output]` sections, plus an optional `[sweep]`
//! section for cache-size comparisons.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{EnvConfig, RequestMode, SnmParams};
use crate::error::{Error, Result};
use crate::model::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    ValueIteration,
    Qlearning,
    Vfa,
    Mpcc,
}

impl AgentKind {
    pub fn name(self) -> &'static str {
        match self {
            AgentKind::ValueIteration => "value_iteration",
            AgentKind::Qlearning => "qlearning",
            AgentKind::Vfa => "vfa",
            AgentKind::Mpcc => "mpcc",
        }
    }
}

impl std::str::FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "value_iteration" => Ok(AgentKind::ValueIteration),
            "qlearning" => Ok(AgentKind::Qlearning),
            "vfa" => Ok(AgentKind::Vfa),
            "mpcc" => Ok(AgentKind::Mpcc),
            _ => Err(Error::Config(format!("unknown agent '{s}'"))),
        }
    }
}

/// How cached fragments are accounted when serving traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discipline {
    Mds,
    Uncoded,
}

impl Discipline {
    pub fn name(self) -> &'static str {
        match self {
            Discipline::Mds => "mds",
            Discipline::Uncoded => "uncoded",
        }
    }
}

impl std::str::FromStr for Discipline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mds" => Ok(Discipline::Mds),
            "uncoded" => Ok(Discipline::Uncoded),
            _ => Err(Error::Config(format!("unknown discipline '{s}'"))),
        }
    }
}

/// `[env]` section: system constants flattened together with the
/// environment knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvSection {
    #[serde(flatten)]
    pub params: SystemParams,
    #[serde(default)]
    pub skewness: Vec<f64>,
    #[serde(default)]
    pub profiles: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub transition_seed: u64,
    #[serde(default = "default_request_mode")]
    pub request_mode: RequestMode,
    #[serde(default)]
    pub snm: Option<SnmParams>,
    #[serde(default = "default_true")]
    pub white_box: bool,
    #[serde(default)]
    pub full_content_only: bool,
    #[serde(default)]
    pub candidate_transitions_only: bool,
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
}

fn default_true() -> bool {
    true
}

fn default_request_mode() -> RequestMode {
    RequestMode::ZipfMultinomial
}

fn default_cap() -> u64 {
    crate::actions::DEFAULT_ENUMERATION_CAP as u64
}

impl EnvSection {
    pub fn to_env_config(&self) -> EnvConfig {
        EnvConfig {
            params: self.params,
            skewness: self.skewness.clone(),
            profiles: self.profiles.clone(),
            transition_seed: self.transition_seed,
            request_mode: self.request_mode,
            snm: self.snm,
            white_box: self.white_box,
            full_content_only: self.full_content_only,
            candidate_transitions_only: self.candidate_transitions_only,
            enumeration_cap: self.enumeration_cap,
        }
    }
}

/// `[agent]` section.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentSection {
    pub kind: AgentKind,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Q-learning step size.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Replace the fixed step size with 1/visit-count decay.
    #[serde(default)]
    pub lambda_visit_decay: bool,
    #[serde(default = "default_omega1")]
    pub omega1: f64,
    #[serde(default = "default_omega2")]
    pub omega2: f64,
    /// VFA SGD step size.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Value-iteration stopping tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_discipline")]
    pub discipline: Discipline,
}

fn default_gamma() -> f64 {
    0.9
}
fn default_lambda() -> f64 {
    0.6
}
fn default_omega1() -> f64 {
    1.0
}
fn default_omega2() -> f64 {
    0.01
}
fn default_delta() -> f64 {
    0.01
}
fn default_tol() -> f64 {
    1e-9
}
fn default_discipline() -> Discipline {
    Discipline::Mds
}

/// `[schedule]` section: exploration then exploitation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schedule {
    pub horizon: u64,
    pub switch_slot: u64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub seeds: Vec<u64>,
}

fn default_epsilon() -> f64 {
    0.1
}

impl Schedule {
    /// Exploration rate at slot `t`: `epsilon` before the switch, 0 after.
    pub fn epsilon_at(&self, t: u64) -> f64 {
        if t < self.switch_slot {
            self.epsilon
        } else {
            0.0
        }
    }
}

/// `[output]` section.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// Emit one CSV row every `metrics_window` slots (the last slot is
    /// always emitted).
    #[serde(default = "default_window")]
    pub metrics_window: u64,
}

fn default_dir() -> String {
    "out".into()
}

fn default_window() -> u64 {
    1
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            metrics_window: default_window(),
        }
    }
}

/// `[sweep]` section: which schemes and cache sizes to compare.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSection {
    pub k_values: Vec<u32>,
    pub schemes: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub env: EnvSection,
    pub agent: AgentSection,
    pub schedule: Schedule,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

impl ExperimentConfig {
    pub fn parse_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.env.to_env_config().validate()?;
        if self.schedule.horizon <= self.schedule.switch_slot {
            return Err(Error::Config("horizon must exceed switch_slot".into()));
        }
        if self.schedule.seeds.is_empty() {
            return Err(Error::Config("at least one seed".into()));
        }
        if !(0.0..=1.0).contains(&self.schedule.epsilon) {
            return Err(Error::Config("epsilon must be in [0,1]".into()));
        }
        if self.output.metrics_window == 0 {
            return Err(Error::Config("metrics_window must be >= 1".into()));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.k_values.is_empty() || sweep.schemes.is_empty() {
                return Err(Error::Config("sweep needs k_values and schemes".into()));
            }
            for s in &sweep.schemes {
                Scheme::parse(s)?;
            }
        }
        Ok(())
    }
}

/// A named (agent, discipline, lattice) combination used in sweeps.
///
/// Grammar: `<agent>[:<discipline>]` plus the shorthands `rlnc`
/// (non-cooperative full-content Q-learning: d=1, levels in {0, L}) and
/// `rlucc` (Q-learning with uncoded random fragments).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scheme {
    pub name: String,
    pub agent: AgentKind,
    pub discipline: Discipline,
    /// Restrict the lattice to whole contents.
    pub full_content_only: bool,
    /// Serve each request from a single station.
    pub force_d1: bool,
}

impl Scheme {
    pub fn parse(name: &str) -> Result<Self> {
        let (agent, discipline, full_content_only, force_d1) = match name {
            "rlnc" => (AgentKind::Qlearning, Discipline::Mds, true, true),
            "rlucc" => (AgentKind::Qlearning, Discipline::Uncoded, false, false),
            _ => {
                let (agent, disc) = match name.split_once(':') {
                    Some((a, d)) => (a.parse()?, d.parse()?),
                    None => (name.parse()?, Discipline::Mds),
                };
                (agent, disc, false, false)
            }
        };
        Ok(Self {
            name: name.to_string(),
            agent,
            discipline,
            full_content_only,
            force_d1,
        })
    }

    /// Environment for this scheme at cache size `k`, derived from a base
    /// environment.
    pub fn env_config(&self, base: &EnvSection, k: u32) -> Result<EnvConfig> {
        let mut cfg = base.to_env_config();
        cfg.params.k = k;
        if self.force_d1 {
            cfg.params.d = 1;
        }
        if self.full_content_only {
            cfg.full_content_only = true;
        }
        cfg.params
            .validate()
            .map_err(|e| Error::Infeasible(format!("scheme {} at K={k}: {e}", self.name)))?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
        [env]
        p = 20
        c = 4
        k = 1
        d = 2
        l = 2
        b = 1.0
        m = 100
        skewness = [1.36, 2.3]
        transition_seed = 7
        request_mode = "zipf_multinomial"

        [agent]
        kind = "qlearning"

        [schedule]
        horizon = 1000
        switch_slot = 500
        seeds = [1, 2]
    "#;

    #[test]
    fn parses_and_defaults() {
        let cfg = ExperimentConfig::parse_toml(SAMPLE).unwrap();
        assert_eq!(cfg.env.params.c, 4);
        assert_eq!(cfg.agent.gamma, 0.9);
        assert_eq!(cfg.agent.lambda, 0.6);
        assert_eq!(cfg.agent.discipline, Discipline::Mds);
        assert_eq!(cfg.schedule.epsilon, 0.1);
        assert_eq!(cfg.output.dir, "out");
        assert!(cfg.env.white_box);
        assert_eq!(cfg.schedule.epsilon_at(499), 0.1);
        assert_eq!(cfg.schedule.epsilon_at(500), 0.0);
    }

    #[test]
    fn rejects_bad_schedules() {
        let bad = SAMPLE.replace("horizon = 1000", "horizon = 400");
        assert!(matches!(
            ExperimentConfig::parse_toml(&bad),
            Err(Error::Config(_))
        ));
        let bad = SAMPLE.replace("seeds = [1, 2]", "seeds = []");
        assert!(ExperimentConfig::parse_toml(&bad).is_err());
    }

    #[test]
    fn rejects_invalid_system_params() {
        let bad = SAMPLE.replace("d = 2", "d = 40"); // d > p
        assert!(ExperimentConfig::parse_toml(&bad).is_err());
    }

    #[test]
    fn scheme_grammar() {
        let s = Scheme::parse("qlearning:uncoded").unwrap();
        assert_eq!(s.agent, AgentKind::Qlearning);
        assert_eq!(s.discipline, Discipline::Uncoded);
        assert!(!s.force_d1);

        let s = Scheme::parse("rlnc").unwrap();
        assert!(s.force_d1 && s.full_content_only);

        let s = Scheme::parse("mpcc").unwrap();
        assert_eq!(s.discipline, Discipline::Mds);

        assert!(Scheme::parse("nosuch").is_err());
    }

    #[test]
    fn scheme_env_overrides() {
        let cfg = ExperimentConfig::parse_toml(SAMPLE).unwrap();
        let env = Scheme::parse("rlnc")
            .unwrap()
            .env_config(&cfg.env, 2)
            .unwrap();
        assert_eq!(env.params.d, 1);
        assert_eq!(env.params.k, 2);
        assert!(env.full_content_only);
    }

    #[test]
    fn roundtrips_through_toml() {
        let cfg = ExperimentConfig::parse_toml(SAMPLE).unwrap();
        let text = toml::to_string(&cfg).unwrap();
        let back = ExperimentConfig::parse_toml(&text).unwrap();
        assert_eq!(back.env.params, cfg.env.params);
        assert_eq!(back.schedule.seeds, cfg.schedule.seeds);
    }
}
