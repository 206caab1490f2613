//! JSON checkpoints of trained learners.
//!
//! Replay buffers are not stored: a restored team is meant for evaluation or
//! for continued training with a fresh buffer.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::d3qn::{D3qnAgent, TrainConfig};
use super::dueling::{Dense, DuelingNet};
use super::tabular::{QTable, TabularAgent};
use super::{Agent, EpsilonSchedule, LearnerKind, Team};
use crate::environment::{Action, GridSpec};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerState {
    pub name: String,
    pub fan_in: usize,
    pub fan_out: usize,
    /// Row-major `fan_in × fan_out`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AgentState {
    Tabular { values: Vec<[f64; Action::COUNT]> },
    D3qn { online: Vec<LayerState>, target: Vec<LayerState> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config_hash: String,
    pub learner: LearnerKind,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub n_uavs: usize,
    pub epsilon: EpsilonSchedule,
    pub train: TrainConfig,
    pub agents: Vec<AgentState>,
}

fn layer_states(net: &DuelingNet) -> Vec<LayerState> {
    net.layer_names()
        .into_iter()
        .zip(net.layers())
        .map(|(name, d)| LayerState {
            name,
            fan_in: d.fan_in(),
            fan_out: d.fan_out(),
            weights: d.weights.iter().copied().collect(),
            bias: d.bias.to_vec(),
        })
        .collect()
}

fn dense_from(state: &LayerState) -> Result<Dense> {
    if state.bias.len() != state.fan_out {
        return Err(Error::Checkpoint(format!(
            "layer {} has {} biases for {} outputs",
            state.name,
            state.bias.len(),
            state.fan_out
        )));
    }
    let weights = Array2::from_shape_vec((state.fan_in, state.fan_out), state.weights.clone())
        .map_err(|e| Error::Checkpoint(format!("layer {}: {e}", state.name)))?;
    Ok(Dense {
        weights,
        bias: Array1::from(state.bias.clone()),
    })
}

fn network_from(layers: &[LayerState], input: usize) -> Result<DuelingNet> {
    let find = |name: &str| {
        layers
            .iter()
            .find(|l| l.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing layer {name}")))
    };
    let mut trunk = Vec::new();
    let mut fan_in = input;
    for k in 0.. {
        let Some(state) = layers.iter().find(|l| l.name == format!("trunk.{k}")) else {
            break;
        };
        if state.fan_in != fan_in {
            return Err(Error::Checkpoint(format!(
                "layer {} expects {} inputs, previous layer gives {fan_in}",
                state.name, state.fan_in
            )));
        }
        trunk.push(dense_from(state)?);
        fan_in = state.fan_out;
    }
    let value_hidden = dense_from(find("value.hidden")?)?;
    let value_out = dense_from(find("value.out")?)?;
    let advantage_hidden = dense_from(find("advantage.hidden")?)?;
    let advantage_out = dense_from(find("advantage.out")?)?;
    if value_hidden.fan_in() != fan_in || advantage_hidden.fan_in() != fan_in {
        return Err(Error::Checkpoint("head inputs do not match the trunk".into()));
    }
    if value_out.fan_in() != value_hidden.fan_out() || value_out.fan_out() != 1 {
        return Err(Error::Checkpoint("value head has the wrong shape".into()));
    }
    if advantage_out.fan_in() != advantage_hidden.fan_out() || advantage_out.fan_out() != Action::COUNT {
        return Err(Error::Checkpoint("advantage head has the wrong shape".into()));
    }
    Ok(DuelingNet {
        trunk,
        value_hidden,
        value_out,
        advantage_hidden,
        advantage_out,
    })
}

impl Checkpoint {
    pub fn capture(
        team: &Team,
        spec: &GridSpec,
        epsilon: EpsilonSchedule,
        train: &TrainConfig,
        config_hash: &str,
    ) -> Self {
        let agents = team
            .agents
            .iter()
            .map(|agent| match agent {
                Agent::Tabular(a) => AgentState::Tabular {
                    values: a.table.rows().to_vec(),
                },
                Agent::D3qn(a) => AgentState::D3qn {
                    online: layer_states(&a.online),
                    target: layer_states(&a.target),
                },
            })
            .collect();
        Self {
            format_version: FORMAT_VERSION,
            config_hash: config_hash.to_string(),
            learner: team.kind,
            grid_nx: spec.nx,
            grid_ny: spec.ny,
            n_uavs: team.agents.len(),
            epsilon,
            train: train.clone(),
            agents,
        }
    }

    /// Rebuild the team, checking every shape against the running
    /// configuration.
    pub fn restore(&self, kind: LearnerKind, spec: &GridSpec, n_uavs: usize) -> Result<Team> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        if self.learner != kind {
            return Err(Error::Checkpoint(format!(
                "checkpoint holds {:?} learners, configuration asks for {kind:?}",
                self.learner
            )));
        }
        if (self.grid_nx, self.grid_ny) != (spec.nx, spec.ny) {
            return Err(Error::Checkpoint(format!(
                "checkpoint grid is {}x{}, configuration grid is {}x{}",
                self.grid_nx, self.grid_ny, spec.nx, spec.ny
            )));
        }
        if self.n_uavs != n_uavs || self.agents.len() != n_uavs {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} agents, configuration has {n_uavs} UAVs",
                self.agents.len()
            )));
        }
        let agents = self
            .agents
            .iter()
            .map(|state| match (state, kind) {
                (AgentState::Tabular { values }, LearnerKind::Tabular) => {
                    if values.len() != spec.n_cells() {
                        return Err(Error::Checkpoint(format!(
                            "Q-table has {} states, grid has {}",
                            values.len(),
                            spec.n_cells()
                        )));
                    }
                    Ok(Agent::Tabular(TabularAgent {
                        table: QTable::from_rows(values.clone()),
                        mu: self.train.mu,
                        gamma: self.train.gamma,
                    }))
                }
                (AgentState::D3qn { online, target }, LearnerKind::D3qn) => {
                    let mut agent =
                        D3qnAgent::from_network(network_from(online, 3 * n_uavs)?, self.train.clone());
                    agent.target = network_from(target, 3 * n_uavs)?;
                    Ok(Agent::D3qn(agent))
                }
                _ => Err(Error::Checkpoint("agent kind does not match the learner".into())),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Team { kind, agents })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            trunk_widths: vec![6, 5],
            head_width: 4,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn d3qn_round_trip_preserves_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = GridSpec::default();
        let team = Team::new(LearnerKind::D3qn, 2, &spec, &small_cfg(), &mut rng);
        let ckpt = Checkpoint::capture(&team, &spec, EpsilonSchedule::default(), &small_cfg(), "abc");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckpt.json");
        ckpt.save(&path).unwrap();
        let restored = Checkpoint::load(&path).unwrap().restore(LearnerKind::D3qn, &spec, 2).unwrap();
        for (a, b) in team.agents.iter().zip(&restored.agents) {
            match (a, b) {
                (Agent::D3qn(a), Agent::D3qn(b)) => {
                    assert_eq!(a.online, b.online);
                    assert_eq!(a.target, b.target);
                }
                _ => panic!("wrong agent kind"),
            }
        }
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let spec = GridSpec::default();
        let team = Team::new(LearnerKind::Tabular, 2, &spec, &small_cfg(), &mut rng);
        let ckpt = Checkpoint::capture(&team, &spec, EpsilonSchedule::default(), &small_cfg(), "abc");
        assert!(matches!(
            ckpt.restore(LearnerKind::Tabular, &spec, 3),
            Err(Error::Checkpoint(_))
        ));
        assert!(matches!(
            ckpt.restore(LearnerKind::D3qn, &spec, 2),
            Err(Error::Checkpoint(_))
        ));
        let bigger = GridSpec { nx: 12, ..spec };
        assert!(matches!(
            ckpt.restore(LearnerKind::Tabular, &bigger, 2),
            Err(Error::Checkpoint(_))
        ));
    }
}
