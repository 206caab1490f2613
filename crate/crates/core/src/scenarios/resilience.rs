//! Failure injection during greedy evaluation of a trained team.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Team;
use crate::environment::{inject_failure, step, Action, Cell, EnvState, World};
use crate::error::Result;
use crate::stats::mean;
use crate::topology::NetworkSnapshot;

use super::config::{ExperimentConfig, RecoveryMode, VictimKind, VictimRule};
use super::training::{initial_state, rng_for, train, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResilienceRecord {
    pub config_hash: String,
    pub seed: u64,
    /// 1-based step at whose end the victim failed.
    pub failure_step: usize,
    pub victim: usize,
    pub recovery: RecoveryMode,
    /// Mean user rate after each evaluation step; entry `t - 1` is step `t`.
    pub mean_rates_bps: Vec<f64>,
    pub rewards: Vec<f64>,
    pub trajectory: Vec<Vec<Cell>>,
    /// Mean rate over the window just before the failure.
    pub pre_plateau_bps: f64,
    /// Mean rate over the last window of the run.
    pub post_plateau_bps: f64,
    /// Lowest mean rate from the failure step on.
    pub post_min_bps: f64,
}

impl ResilienceRecord {
    pub fn recovery_ratio(&self) -> f64 {
        self.post_plateau_bps / self.pre_plateau_bps
    }
}

pub fn choose_victim<R: Rng + ?Sized>(rule: VictimRule, snapshot: &NetworkSnapshot, state: &EnvState, rng: &mut R) -> usize {
    let alive: Vec<usize> = (0..state.n_uavs()).filter(|&i| state.alive[i]).collect();
    let chain = &snapshot.chain.order;
    match rule {
        VictimRule::Index(k) => k,
        VictimRule::Named(VictimKind::Serving) => chain.last().copied().unwrap_or(alive[0]),
        VictimRule::Named(VictimKind::Relay) => {
            if chain.len() >= 2 {
                chain[0]
            } else {
                chain.last().copied().unwrap_or(alive[0])
            }
        }
        VictimRule::Named(VictimKind::Random) => alive[rng.random_range(0..alive.len())],
    }
}

/// Actions of the survivors under a team trained for exactly that many UAVs.
fn reduced_actions<R: Rng + ?Sized>(team: &Team, state: &EnvState, world: &World, rng: &mut R) -> Vec<Action> {
    let survivors: Vec<usize> = (0..state.n_uavs()).filter(|&i| state.alive[i]).collect();
    let view = EnvState {
        cells: survivors.iter().map(|&i| state.cells[i]).collect(),
        alive: vec![true; survivors.len()],
    };
    let picked = team.act(&view, &world.grid, 0.0, rng);
    let mut actions = vec![Action::Hover; state.n_uavs()];
    for (k, &i) in survivors.iter().enumerate() {
        actions[i] = picked[k];
    }
    actions
}

/// Train the team (and, for [`RecoveryMode::Reduced`], a team one UAV
/// smaller on the same users), then evaluate greedily and kill one UAV at
/// the end of `failure_step`.
pub fn run_resilience(cfg: &ExperimentConfig) -> Result<ResilienceRecord> {
    cfg.validate()?;
    cfg.validate_failure()?;
    let mut full = train(cfg, |_| {})?;
    let reduced = match cfg.recovery {
        RecoveryMode::Reduced => {
            let smaller = ExperimentConfig {
                n_uavs: cfg.n_uavs - 1,
                initial_cells: None,
                ..cfg.clone()
            };
            Some(train(&smaller, |_| {})?.team)
        }
        _ => None,
    };
    let world = full.world.clone();
    let steps = cfg.eval_steps();
    let mut rng = rng_for(cfg.seed, Stream::Failure);
    let mut state = initial_state(cfg)?;
    let mut trajectory = vec![state.cells.clone()];
    let mut rates = Vec::with_capacity(steps);
    let mut rewards = Vec::with_capacity(steps);
    let mut victim = usize::MAX;

    for t in 1..=steps {
        let failed = t > cfg.failure_step;
        let actions = match (&reduced, failed) {
            (Some(team), true) => reduced_actions(team, &state, &world, &mut rng),
            _ => full.team.act(&state, &world.grid, 0.0, &mut rng),
        };
        let mut out = step(&state, &actions, &world, t)?;
        if failed && cfg.recovery == RecoveryMode::Finetune {
            full.team.learn(&state, &actions, out.reward, &out.next_state, &world.grid, &mut rng)?;
        }
        if t == cfg.failure_step {
            victim = choose_victim(cfg.failure_victim, &out.snapshot, &out.next_state, &mut rng);
            out.next_state = inject_failure(&out.next_state, victim);
            out.snapshot = world.evaluate(&out.next_state);
            out.reward = world.reward_of(&out.snapshot);
        }
        state = out.next_state;
        rates.push(out.snapshot.mean_rate_bps());
        rewards.push(out.reward);
        trajectory.push(state.cells.clone());
    }

    let w = cfg.plateau_window;
    let f = cfg.failure_step;
    let pre = &rates[f.saturating_sub(w + 1)..f - 1];
    let post = &rates[f - 1..];
    let tail = &rates[steps.saturating_sub(w).max(f - 1)..];
    Ok(ResilienceRecord {
        config_hash: cfg.config_hash(),
        seed: cfg.seed,
        failure_step: f,
        victim,
        recovery: cfg.recovery,
        pre_plateau_bps: if pre.is_empty() { rates[0] } else { mean(pre) },
        post_plateau_bps: mean(tail),
        post_min_bps: post.iter().copied().fold(f64::INFINITY, f64::min),
        mean_rates_bps: rates,
        rewards,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::evaluate_network;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n_uavs: 2,
            n_users: 20,
            episodes: 5,
            iterations: 40,
            failure_step: 20,
            plateau_window: 5,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn series_covers_every_step() {
        let rec = run_resilience(&small()).unwrap();
        assert_eq!(rec.mean_rates_bps.len(), 40);
        assert_eq!(rec.trajectory.len(), 41);
        assert!(rec.victim < 2);
        assert!(rec.post_min_bps <= rec.post_plateau_bps);
    }

    #[test]
    fn failure_beyond_run_is_a_config_error() {
        let cfg = ExperimentConfig {
            failure_step: 41,
            ..small()
        };
        assert!(run_resilience(&cfg).unwrap_err().is_config());
    }

    #[test]
    fn dead_victim_matches_network_without_it() {
        let cfg = ExperimentConfig {
            recovery: RecoveryMode::Retained,
            ..small()
        };
        let rec = run_resilience(&cfg).unwrap();
        let world = super::super::training::build_world(&cfg).unwrap();
        let f = cfg.failure_step;
        let cells = &rec.trajectory[f];
        let survivors: Vec<_> = EnvState {
            cells: cells.clone(),
            alive: (0..2).map(|i| i != rec.victim).collect(),
        }
        .uavs(&world.grid)
        .into_iter()
        .filter(|u| u.alive)
        .collect();
        let oracle = evaluate_network(&world.bs, &survivors, &world.users, &world.radio);
        assert_eq!(rec.mean_rates_bps[f - 1], oracle.mean_rate_bps());
    }
}
