use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{GvfParams, ReprKind, ReprParams};
use crate::env::{IsiCondition, SimConfig};
use crate::error::{ConfigError, Error};
use crate::human::HumanModelConfig;

/// Which agent, if any, is paired with the participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentKind {
    None,
    Bc,
    Tct,
}

impl AgentKind {
    pub const ALL: [AgentKind; 3] = [Self::None, Self::Bc, Self::Tct];

    pub fn repr(self) -> Option<ReprKind> {
        match self {
            Self::None => None,
            Self::Bc => Some(ReprKind::BitCascade),
            Self::Tct => Some(ReprKind::TileCodedTrace),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Bc => "bc",
            Self::Tct => "tct",
        }
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AgentKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "none" | "n" => Ok(Self::None),
            "bc" | "bit_cascade" | "bitcascade" => Ok(Self::Bc),
            "tct" | "tile_coded_trace" | "tilecodedtrace" => Ok(Self::Tct),
            other => Err(ConfigError::invalid(format!("unknown agent kind `{other}`"))),
        }
    }
}

/// One cell of the condition grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub condition: IsiCondition,
    pub agent: AgentKind,
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.condition, self.agent)
    }
}

impl FromStr for Cell {
    type Err = ConfigError;

    /// Parses `COND:AGENT`, e.g. `fixed:tct`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (cond, agent) = s
            .split_once(':')
            .ok_or_else(|| ConfigError::invalid(format!("cell `{s}` is not COND:AGENT")))?;
        Ok(Self { condition: cond.parse()?, agent: agent.parse()? })
    }
}

/// Parses a comma separated list of cells.
pub fn parse_cells(s: &str) -> Result<Vec<Cell>, ConfigError> {
    s.split(',').filter(|c| !c.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub gvf: GvfParams,
    pub repr: ReprParams,
    pub conditions: Vec<IsiCondition>,
    pub agents: Vec<AgentKind>,
    pub human: HumanModelConfig,
    pub sessions: u32,
    pub trials_per_cell: u32,
    pub base_seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            gvf: GvfParams::default(),
            repr: ReprParams::default(),
            conditions: IsiCondition::ALL.to_vec(),
            agents: AgentKind::ALL.to_vec(),
            human: HumanModelConfig::default(),
            sessions: 10,
            trials_per_cell: 1,
            base_seed: 0,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_toml_str(&text)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes to TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.sim.validate()?;
        self.gvf.validate()?;
        self.repr.validate()?;
        self.human.validate()?;
        if self.sessions == 0 {
            return Err(ConfigError::invalid("sessions must be >= 1"));
        }
        if self.trials_per_cell == 0 {
            return Err(ConfigError::invalid("trials_per_cell must be >= 1"));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.conditions
            .iter()
            .flat_map(|&condition| self.agents.iter().map(move |&agent| Cell { condition, agent }))
            .collect()
    }

    /// Short digest of every field that affects trial outcomes.
    pub fn hash(&self) -> String {
        let material = serde_json::json!({
            "sim": self.sim,
            "gvf": self.gvf,
            "repr": self.repr,
            "human": self.human,
        });
        let digest = Sha256::digest(material.to_string().as_bytes());
        hex::encode(&digest[..8])
    }
}

/// Identity of one trial inside an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrialId {
    pub session: u32,
    pub trial: u32,
    pub condition: IsiCondition,
    pub agent: AgentKind,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable seed for a trial, independent of execution order.
pub fn trial_seed(base_seed: u64, id: &TrialId) -> u64 {
    let cond = id.condition as u64;
    let agent = id.agent as u64;
    [u64::from(id.session), u64::from(id.trial), cond, agent]
        .into_iter()
        .fold(splitmix64(base_seed), |acc, v| splitmix64(acc ^ splitmix64(v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_is_three_by_three() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.cells().len(), 9);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn toml_round_trip_and_partial_documents() {
        let cfg = ExperimentConfig::default();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);

        let partial = r#"
            sessions = 2
            base_seed = 9
            [human]
            kind = "internal_timer"
            [gvf]
            tau = 12.0
        "#;
        let cfg = ExperimentConfig::from_toml_str(partial).unwrap();
        assert_eq!(cfg.sessions, 2);
        assert_eq!(cfg.gvf.tau, 12.0);
        assert_eq!(cfg.gvf.alpha, 0.1);
        assert_eq!(cfg.sim.dt, 0.008);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(ExperimentConfig::from_toml_str("sesions = 3").is_err());
        assert!(ExperimentConfig::from_toml_str("sessions = 0").is_err());
        assert!(ExperimentConfig::from_toml_str("[sim]\ndt = -1.0").is_err());
    }

    #[test]
    fn cell_parsing() {
        let cells = parse_cells("fixed:tct, random:none,drifting:bc").unwrap();
        assert_eq!(cells.len(), 3);
        assert_eq!(cells[0], Cell { condition: IsiCondition::Fixed, agent: AgentKind::Tct });
        assert_eq!(cells[2].to_string(), "drifting:bc");
        assert!(parse_cells("fixed").is_err());
        assert!(parse_cells("fixed:robot").is_err());
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let mut seen = std::collections::HashSet::new();
        for session in 0..10 {
            for condition in IsiCondition::ALL {
                for agent in AgentKind::ALL {
                    let id = TrialId { session, trial: 0, condition, agent };
                    assert!(seen.insert(trial_seed(42, &id)));
                }
            }
        }
        let id = TrialId { session: 1, trial: 0, condition: IsiCondition::Fixed, agent: AgentKind::Tct };
        assert_eq!(trial_seed(42, &id), trial_seed(42, &id));
        assert_ne!(trial_seed(42, &id), trial_seed(43, &id));
    }

    #[test]
    fn hash_tracks_outcome_relevant_fields() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.sessions = 3;
        assert_eq!(a.hash(), b.hash());
        b.gvf.tau = 11.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
