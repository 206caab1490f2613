//! Dueling double DQN: an online and a target [`DuelingNet`] trained from a
//! uniform replay buffer.

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dueling::DuelingNet;
use super::replay::{ReplayBuffer, Transition};
use super::argmax;
use crate::environment::Action;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    /// Learning rate for both learners.
    pub mu: f64,
    pub gamma: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    /// Gradient steps between target-network copies.
    pub target_sync_period: usize,
    pub grad_clip: Option<f64>,
    pub trunk_widths: Vec<usize>,
    pub head_width: usize,
    /// Environment steps between gradient steps.
    pub train_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mu: 0.01,
            gamma: 0.9,
            batch_size: 32,
            buffer_capacity: 10_000,
            target_sync_period: 100,
            grad_clip: None,
            trunk_widths: vec![128, 128],
            head_width: 64,
            train_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::config("mu", format!("must lie in (0, 1], got {}", self.mu)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::config("gamma", format!("must lie in [0, 1), got {}", self.gamma)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be positive"));
        }
        if self.buffer_capacity < self.batch_size {
            return Err(Error::config(
                "buffer_capacity",
                format!("must be at least batch_size = {}", self.batch_size),
            ));
        }
        if self.target_sync_period == 0 {
            return Err(Error::config("target_sync_period", "must be positive"));
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0) {
                return Err(Error::config("grad_clip", format!("must be > 0, got {c}")));
            }
        }
        if self.trunk_widths.contains(&0) {
            return Err(Error::config("trunk_widths", "layer widths must be positive"));
        }
        if self.head_width == 0 {
            return Err(Error::config("head_width", "must be positive"));
        }
        if self.train_every == 0 {
            return Err(Error::config("train_every", "must be positive"));
        }
        Ok(())
    }
}

/// Double-Q target: the online network picks the next action, the target
/// network scores it.
pub fn double_q_target(
    reward: f64,
    gamma: f64,
    terminal: bool,
    q_online_next: &[f64; Action::COUNT],
    q_target_next: &[f64; Action::COUNT],
) -> f64 {
    if terminal {
        return reward;
    }
    reward + gamma * q_target_next[argmax(q_online_next)]
}

pub fn sync_target(online: &DuelingNet, target: &mut DuelingNet) {
    target.clone_from(online);
}

fn stack(rows: &[&[f64]]) -> Array2<f64> {
    let width = rows.first().map_or(0, |r| r.len());
    Array2::from_shape_fn((rows.len(), width), |(i, j)| rows[i][j])
}

fn row(q: &Array2<f64>, i: usize) -> [f64; Action::COUNT] {
    let mut out = [0.0; Action::COUNT];
    for (o, v) in out.iter_mut().zip(q.row(i)) {
        *o = *v;
    }
    out
}

/// One gradient step on a uniformly sampled minibatch. `None` while the
/// buffer holds fewer than `batch_size` transitions.
pub fn train_step<R: Rng + ?Sized>(
    online: &mut DuelingNet,
    target: &DuelingNet,
    buffer: &ReplayBuffer,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Option<f64> {
    let batch = buffer.sample(cfg.batch_size, rng)?;
    let obs = stack(&batch.iter().map(|t| t.obs.as_slice()).collect::<Vec<_>>());
    let next = stack(&batch.iter().map(|t| t.next_obs.as_slice()).collect::<Vec<_>>());
    let q_online_next = online.forward_batch(&next).expect("replay widths match the network");
    let q_target_next = target.forward_batch(&next).expect("replay widths match the network");
    let targets: Vec<f64> = batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            double_q_target(
                t.reward,
                cfg.gamma,
                t.terminal,
                &row(&q_online_next, i),
                &row(&q_target_next, i),
            )
        })
        .collect();
    let actions: Vec<usize> = batch.iter().map(|t| t.action.index()).collect();
    let (loss, grads) = online
        .loss_and_gradients(&obs, &actions, &targets)
        .expect("replay widths match the network");
    online.sgd_step(&grads, cfg.mu, cfg.grad_clip);
    Some(loss)
}

#[derive(Debug, Clone)]
pub struct D3qnAgent {
    pub online: DuelingNet,
    pub target: DuelingNet,
    pub buffer: ReplayBuffer,
    pub cfg: TrainConfig,
    pub env_steps: usize,
    pub train_steps: usize,
}

impl D3qnAgent {
    pub fn new<R: Rng + ?Sized>(input: usize, cfg: TrainConfig, rng: &mut R) -> Self {
        let online = DuelingNet::new(input, &cfg.trunk_widths, cfg.head_width, rng);
        Self::from_network(online, cfg)
    }

    /// Wrap an existing network; the target starts as a copy of it.
    pub fn from_network(online: DuelingNet, cfg: TrainConfig) -> Self {
        Self {
            target: online.clone(),
            online,
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            cfg,
            env_steps: 0,
            train_steps: 0,
        }
    }

    /// Store a transition and, every `train_every` environment steps, take a
    /// gradient step. The target is refreshed every `target_sync_period`
    /// gradient steps.
    pub fn observe<R: Rng + ?Sized>(&mut self, transition: Transition, rng: &mut R) -> Option<f64> {
        self.buffer.push(transition);
        self.env_steps += 1;
        if self.env_steps % self.cfg.train_every != 0 {
            return None;
        }
        let loss = train_step(&mut self.online, &self.target, &self.buffer, &self.cfg, rng)?;
        self.train_steps += 1;
        if self.train_steps % self.cfg.target_sync_period == 0 {
            sync_target(&self.online, &mut self.target);
        }
        Some(loss)
    }
}
