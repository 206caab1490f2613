//! The placement MDP.
//!
//! UAVs live on the cells of a rectangular grid at a fixed altitude. Each
//! step every alive UAV moves one cell (or hovers), the network is
//! re-evaluated and all UAVs share one reward built from the users' rates.
//! Moves that would leave the grid are clamped at the boundary.

use serde::{Deserialize, Serialize};

use crate::channel::{Position, RadioParams};
use crate::error::{Error, Result};
use crate::stats::{mean, percentile_linear};
use crate::topology::{evaluate_network, GroundStation, NetworkSnapshot, Uav, UserTerminal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Distance between neighbouring cells, same unit as positions.
    pub cell_size: f64,
    pub altitude_m: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 10,
            ny: 10,
            cell_size: 10.0,
            altitude_m: 100.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 {
            return Err(Error::config("grid_nx", format!("must be >= 2, got {}", self.nx)));
        }
        if self.ny < 2 {
            return Err(Error::config("grid_ny", format!("must be >= 2, got {}", self.ny)));
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(Error::config(
                "cell_size_m",
                format!("must be > 0, got {}", self.cell_size),
            ));
        }
        if !(self.altitude_m.is_finite() && self.altitude_m > 0.0) {
            return Err(Error::config(
                "altitude_m",
                format!("must be > 0, got {}", self.altitude_m),
            ));
        }
        Ok(())
    }

    pub fn x_max(&self) -> f64 {
        (self.nx - 1) as f64 * self.cell_size
    }

    pub fn y_max(&self) -> f64 {
        (self.ny - 1) as f64 * self.cell_size
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.x < self.nx && cell.y < self.ny
    }

    /// Row-major index of a cell.
    pub fn index_of(&self, cell: Cell) -> usize {
        cell.y * self.nx + cell.x
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.nx, index / self.nx)
    }

    /// Airborne position of a UAV hovering over `cell`.
    pub fn position(&self, cell: Cell) -> Position {
        Position::new(
            cell.x as f64 * self.cell_size,
            cell.y as f64 * self.cell_size,
            self.altitude_m,
        )
    }

    /// Cell closest to a horizontal point, clamped into the grid.
    pub fn nearest_cell(&self, x: f64, y: f64) -> Cell {
        let snap = |v: f64, n: usize| -> usize {
            let i = (v / self.cell_size).round();
            i.clamp(0.0, (n - 1) as f64) as usize
        };
        Cell::new(snap(x, self.nx), snap(y, self.ny))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// North is +y, East is +x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
    Hover = 4,
}

impl Action {
    pub const COUNT: usize = 5;
    pub const ALL: [Action; 5] = [
        Action::North,
        Action::East,
        Action::South,
        Action::West,
        Action::Hover,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvState {
    pub cells: Vec<Cell>,
    pub alive: Vec<bool>,
}

impl EnvState {
    pub fn n_uavs(&self) -> usize {
        self.cells.len()
    }

    pub fn uavs(&self, spec: &GridSpec) -> Vec<Uav> {
        self.cells
            .iter()
            .zip(&self.alive)
            .enumerate()
            .map(|(id, (&cell, &alive))| Uav {
                id,
                pos: spec.position(cell),
                alive,
            })
            .collect()
    }

    pub fn alive_count(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    /// Weight of the mean rate; the 75th percentile gets `1 − alpha`.
    pub alpha: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self { alpha: 0.5 }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        if (0.0..=1.0).contains(&self.alpha) {
            Ok(())
        } else {
            Err(Error::config(
                "alpha",
                format!("must lie in [0, 1], got {}", self.alpha),
            ))
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub next_state: EnvState,
    pub reward: f64,
    pub snapshot: NetworkSnapshot,
    pub done: bool,
}

/// Everything a step needs besides the UAV state.
#[derive(Debug, Clone)]
pub struct World {
    pub bs: GroundStation,
    pub users: Vec<UserTerminal>,
    pub radio: RadioParams,
    pub grid: GridSpec,
    pub weights: RewardWeights,
    /// Rates are divided by this before entering the reward (1e6: Mbps).
    pub reward_scale: f64,
    pub max_iterations: usize,
}

impl World {
    pub fn evaluate(&self, state: &EnvState) -> NetworkSnapshot {
        evaluate_network(&self.bs, &state.uavs(&self.grid), &self.users, &self.radio)
    }

    pub fn reward_of(&self, snapshot: &NetworkSnapshot) -> f64 {
        scaled_reward(&snapshot.user_rates_bps, &self.weights, self.reward_scale)
    }
}

/// `alpha · mean + (1 − alpha) · p75` of the given rates.
pub fn reward(rates: &[f64], weights: &RewardWeights) -> Result<f64> {
    if rates.is_empty() {
        return Err(Error::Domain("reward of an empty rate list".into()));
    }
    let alpha = weights.alpha;
    Ok(alpha * mean(rates) + (1.0 - alpha) * percentile_linear(rates, 0.75))
}

fn scaled_reward(rates_bps: &[f64], weights: &RewardWeights, scale: f64) -> f64 {
    let scaled: Vec<f64> = rates_bps.iter().map(|r| r / scale).collect();
    // worlds always carry at least one user
    reward(&scaled, weights).unwrap_or(0.0)
}

/// Initial state: every UAV at cell (0, 0) unless explicit cells are given.
pub fn reset(spec: &GridSpec, n_uavs: usize, initial: Option<&[Cell]>) -> Result<EnvState> {
    let cells = match initial {
        None => vec![Cell::new(0, 0); n_uavs],
        Some(cells) => {
            if cells.len() != n_uavs {
                return Err(Error::config(
                    "initial_cells",
                    format!("expected {n_uavs} cells, got {}", cells.len()),
                ));
            }
            if let Some(bad) = cells.iter().find(|c| !spec.contains(**c)) {
                return Err(Error::config(
                    "initial_cells",
                    format!("cell ({}, {}) outside the {}x{} grid", bad.x, bad.y, spec.nx, spec.ny),
                ));
            }
            cells.to_vec()
        }
    };
    Ok(EnvState {
        cells,
        alive: vec![true; n_uavs],
    })
}

fn moved(cell: Cell, action: Action, spec: &GridSpec) -> Cell {
    match action {
        Action::North => Cell::new(cell.x, (cell.y + 1).min(spec.ny - 1)),
        Action::East => Cell::new((cell.x + 1).min(spec.nx - 1), cell.y),
        Action::South => Cell::new(cell.x, cell.y.saturating_sub(1)),
        Action::West => Cell::new(cell.x.saturating_sub(1), cell.y),
        Action::Hover => cell,
    }
}

/// Move one UAV; moves across the boundary leave that axis unchanged.
pub fn apply_action(state: &EnvState, uav_index: usize, action: Action, spec: &GridSpec) -> EnvState {
    let mut next = state.clone();
    next.cells[uav_index] = moved(state.cells[uav_index], action, spec);
    next
}

/// Apply a joint action from the shared pre-state, re-evaluate the network
/// and compute the shared reward. `iteration` is the 1-based index of this
/// step within the episode; the episode ends at `world.max_iterations`.
pub fn step(state: &EnvState, joint_action: &[Action], world: &World, iteration: usize) -> Result<StepOutcome> {
    if joint_action.len() != state.n_uavs() {
        return Err(Error::Shape(format!(
            "joint action has {} entries for {} UAVs",
            joint_action.len(),
            state.n_uavs()
        )));
    }
    let mut next_state = state.clone();
    for (i, &action) in joint_action.iter().enumerate() {
        if state.alive[i] {
            next_state.cells[i] = moved(state.cells[i], action, &world.grid);
        }
    }
    let snapshot = world.evaluate(&next_state);
    let reward = world.reward_of(&snapshot);
    Ok(StepOutcome {
        next_state,
        reward,
        snapshot,
        done: iteration >= world.max_iterations,
    })
}

/// Mark a UAV as failed. It stays frozen in its cell and takes no further
/// part in any link.
pub fn inject_failure(state: &EnvState, uav_index: usize) -> EnvState {
    let mut next = state.clone();
    if !next.alive[uav_index] {
        log::warn!("UAV {uav_index} already failed; ignoring");
        return next;
    }
    next.alive[uav_index] = false;
    next
}
