//! Learners. Every UAV gets its own learner; all of them are trained on the
//! shared team reward.
//!
//! * [`tabular`] — Q-table over the UAV's own grid cell.
//! * [`d3qn`] — dueling double deep Q-network over the normalised coordinates
//!   of every UAV, with uniform experience replay.

pub mod checkpoint;
pub mod d3qn;
pub mod dueling;
pub mod replay;
pub mod tabular;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::environment::{Action, EnvState, GridSpec};
use crate::error::{Error, Result};

pub use d3qn::{double_q_target, sync_target, train_step, D3qnAgent, TrainConfig};
pub use dueling::DuelingNet;
pub use replay::{ReplayBuffer, Transition};
pub use tabular::{QTable, TabularAgent};

/// Linearly decaying exploration rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub eps_max: f64,
    pub eps_min: f64,
    pub eps_delta: f64,
    pub current: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self::new(0.99, 0.01, 0.01)
    }
}

impl EpsilonSchedule {
    /// Starts at `eps_max`.
    pub fn new(eps_max: f64, eps_min: f64, eps_delta: f64) -> Self {
        Self {
            eps_max,
            eps_min,
            eps_delta,
            current: eps_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.eps_max) {
            return Err(Error::config("eps_max", format!("must lie in [0, 1], got {}", self.eps_max)));
        }
        if !(0.0..=self.eps_max).contains(&self.eps_min) {
            return Err(Error::config(
                "eps_min",
                format!("must lie in [0, eps_max = {}], got {}", self.eps_max, self.eps_min),
            ));
        }
        if !(self.eps_delta.is_finite() && self.eps_delta > 0.0) {
            return Err(Error::config("eps_delta", format!("must be > 0, got {}", self.eps_delta)));
        }
        if !(self.eps_min..=self.eps_max).contains(&self.current) {
            return Err(Error::config("eps_current", "outside [eps_min, eps_max]"));
        }
        Ok(())
    }

    pub fn decay(&self) -> Self {
        Self {
            current: self.eps_min.max(self.current - self.eps_delta),
            ..*self
        }
    }

    pub fn reset(&self) -> Self {
        Self {
            current: self.eps_max,
            ..*self
        }
    }
}

/// When the exploration rate is decayed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayEvery {
    Iteration,
    Episode,
}

/// ε-greedy: a uniformly random action with probability `epsilon`, otherwise
/// the argmax with ties broken uniformly at random.
pub fn select_action<R: Rng + ?Sized>(values: &[f64; Action::COUNT], epsilon: f64, rng: &mut R) -> Action {
    if rng.random::<f64>() < epsilon {
        return Action::ALL[rng.random_range(0..Action::COUNT)];
    }
    greedy_action(values, rng)
}

pub fn greedy_action<R: Rng + ?Sized>(values: &[f64; Action::COUNT], rng: &mut R) -> Action {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties: Vec<usize> = (0..Action::COUNT).filter(|&i| values[i] == best).collect();
    let pick = if ties.len() <= 1 {
        // all-NaN values leave no tie set; fall back to the first action
        ties.first().copied().unwrap_or(0)
    } else {
        ties[rng.random_range(0..ties.len())]
    };
    Action::ALL[pick]
}

/// First index of the maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Normalised coordinates of every UAV, three values each, all in [0, 1].
pub fn joint_observation(state: &EnvState, spec: &GridSpec) -> Vec<f64> {
    let mut obs = Vec::with_capacity(3 * state.n_uavs());
    for cell in &state.cells {
        obs.push(cell.x as f64 / (spec.nx - 1) as f64);
        obs.push(cell.y as f64 / (spec.ny - 1) as f64);
        // every UAV flies at the grid altitude
        obs.push(1.0);
    }
    obs
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LearnerKind {
    Tabular,
    D3qn,
}

impl std::str::FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tabular" => Ok(LearnerKind::Tabular),
            "d3qn" => Ok(LearnerKind::D3qn),
            other => Err(Error::config(
                "learner",
                format!("expected `tabular` or `d3qn`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Agent {
    Tabular(TabularAgent),
    D3qn(D3qnAgent),
}

impl Agent {
    pub fn action_values(&self, state: &EnvState, own: usize, spec: &GridSpec) -> [f64; Action::COUNT] {
        match self {
            Agent::Tabular(agent) => *agent.table.values(spec.index_of(state.cells[own])),
            Agent::D3qn(agent) => agent
                .online
                .forward(&joint_observation(state, spec))
                .expect("observation width fixed at construction"),
        }
    }

    /// Record one transition and learn from it. Returns the training loss
    /// when a gradient step was taken.
    #[allow(clippy::too_many_arguments)]
    pub fn learn<R: Rng + ?Sized>(
        &mut self,
        prev: &EnvState,
        own: usize,
        action: Action,
        reward: f64,
        next: &EnvState,
        spec: &GridSpec,
        rng: &mut R,
    ) -> Option<f64> {
        match self {
            Agent::Tabular(agent) => {
                agent.update(
                    spec.index_of(prev.cells[own]),
                    action,
                    reward,
                    spec.index_of(next.cells[own]),
                );
                None
            }
            Agent::D3qn(agent) => agent.observe(
                Transition {
                    obs: joint_observation(prev, spec),
                    action,
                    reward,
                    next_obs: joint_observation(next, spec),
                    // the environment only truncates, it never terminates
                    terminal: false,
                },
                rng,
            ),
        }
    }
}

/// One independent learner per UAV.
#[derive(Debug, Clone)]
pub struct Team {
    pub kind: LearnerKind,
    pub agents: Vec<Agent>,
}

impl Team {
    pub fn new<R: Rng + ?Sized>(
        kind: LearnerKind,
        n_uavs: usize,
        spec: &GridSpec,
        cfg: &TrainConfig,
        rng: &mut R,
    ) -> Self {
        let agents = (0..n_uavs)
            .map(|_| match kind {
                LearnerKind::Tabular => Agent::Tabular(TabularAgent::new(spec.n_cells(), cfg.mu, cfg.gamma)),
                LearnerKind::D3qn => Agent::D3qn(D3qnAgent::new(3 * n_uavs, cfg.clone(), rng)),
            })
            .collect();
        Self { kind, agents }
    }

    /// ε-greedy joint action; failed UAVs hover.
    pub fn act<R: Rng + ?Sized>(&self, state: &EnvState, spec: &GridSpec, epsilon: f64, rng: &mut R) -> Vec<Action> {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, agent)| {
                if state.alive[i] {
                    select_action(&agent.action_values(state, i, spec), epsilon, rng)
                } else {
                    Action::Hover
                }
            })
            .collect()
    }

    /// Let every live UAV learn from the shared reward. Fails as soon as a
    /// gradient step yields a non-finite loss.
    pub fn learn<R: Rng + ?Sized>(
        &mut self,
        prev: &EnvState,
        actions: &[Action],
        reward: f64,
        next: &EnvState,
        spec: &GridSpec,
        rng: &mut R,
    ) -> Result<Vec<Option<f64>>> {
        let mut losses = Vec::with_capacity(self.agents.len());
        for (i, agent) in self.agents.iter_mut().enumerate() {
            let loss = if prev.alive[i] {
                agent.learn(prev, i, actions[i], reward, next, spec, rng)
            } else {
                None
            };
            if let Some(l) = loss {
                if !l.is_finite() {
                    return Err(Error::Diverged(format!(
                        "UAV {i} loss is {l}; lower mu, raise reward_scale or set grad_clip"
                    )));
                }
            }
            losses.push(loss);
        }
        Ok(losses)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn pure_greedy_picks_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&[1.0, 5.0, 2.0, 0.0, 0.0], 0.0, &mut rng), Action::East);
    }

    #[test]
    fn greedy_ties_cover_all_tied_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [0usize; 5];
        for _ in 0..1000 {
            seen[greedy_action(&[3.0, 1.0, 3.0, 3.0, 0.0], &mut rng).index()] += 1;
        }
        assert_eq!(seen[1], 0);
        assert_eq!(seen[4], 0);
        assert!(seen[0] > 250 && seen[2] > 250 && seen[3] > 250);
    }

    #[test]
    fn uniform_exploration_passes_chi_square() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let mut counts = [0f64; 5];
        for _ in 0..n {
            counts[select_action(&[9.0, 0.0, 0.0, 0.0, 0.0], 1.0, &mut rng).index()] += 1.0;
        }
        let expected = n as f64 / 5.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        // 99th percentile of chi-square with 4 degrees of freedom
        assert!(chi2 < 13.2767, "chi2 = {chi2}");
    }

    #[test]
    fn half_exploration_mixture_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 10_000;
        let greedy = (0..n)
            .filter(|_| select_action(&[0.0, 0.0, 4.0, 0.0, 0.0], 0.5, &mut rng) == Action::South)
            .count() as f64
            / n as f64;
        // p = 0.6, binomial sd ~ 0.0049
        assert!((greedy - 0.6).abs() < 4.0 * (0.6f64 * 0.4 / n as f64).sqrt(), "{greedy}");
    }

    #[test]
    fn decay_examples() {
        let s = EpsilonSchedule::default();
        assert!((s.decay().current - 0.98).abs() < 1e-12);
        let low = EpsilonSchedule {
            current: 0.015,
            ..EpsilonSchedule::default()
        };
        assert_eq!(low.decay().current, 0.01);
        let mut s = EpsilonSchedule::default();
        for _ in 0..200 {
            s = s.decay();
        }
        assert_eq!(s.current, 0.01);
    }

    #[test]
    fn schedule_validation_names_keys() {
        let bad = EpsilonSchedule::new(0.5, 0.6, 0.01);
        match bad.validate() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "eps_min"),
            other => panic!("{other:?}"),
        }
        assert!(EpsilonSchedule::new(0.9, 0.1, 0.0).validate().is_err());
    }

    #[test]
    fn joint_observation_is_normalised() {
        let spec = GridSpec::default();
        let state = EnvState {
            cells: vec![crate::environment::Cell::new(9, 0), crate::environment::Cell::new(3, 9)],
            alive: vec![true, true],
        };
        let obs = joint_observation(&state, &spec);
        assert_eq!(obs.len(), 6);
        assert_eq!(obs[0], 1.0);
        assert_eq!(obs[1], 0.0);
        assert!(obs.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
