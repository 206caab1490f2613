//! Reference placements: the exhaustive oracle and the centroid baseline.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::Position;
use crate::environment::{Cell, EnvState, GridSpec, World};
use crate::error::{Error, Result};
use crate::topology::{GroundStation, UserTerminal};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub cells: Vec<Cell>,
    pub reward: f64,
}

pub fn search_space(spec: &GridSpec, n_uavs: usize) -> Option<u64> {
    (spec.n_cells() as u64).checked_pow(n_uavs as u32)
}

/// Reward of a joint placement with every UAV alive.
pub fn placement_reward(world: &World, cells: &[Cell]) -> f64 {
    let state = EnvState {
        cells: cells.to_vec(),
        alive: vec![true; cells.len()],
    };
    world.reward_of(&world.evaluate(&state))
}

/// Evaluate every joint placement and return the best. Ties go to the
/// lexicographically smallest tuple of row-major cell indices.
pub fn brute_force_placement(world: &World, n_uavs: usize, max_evals: u64) -> Result<Placement> {
    let spec = world.grid;
    let total = search_space(&spec, n_uavs).filter(|&n| n <= max_evals).ok_or_else(|| {
        Error::SearchSpace(format!(
            "{} cells ^ {n_uavs} UAVs exceeds the limit of {max_evals} placements",
            spec.n_cells()
        ))
    })?;
    let n = spec.n_cells() as u64;
    let decode = |mut code: u64| -> Vec<Cell> {
        // most significant digit is UAV 0, so code order is lexicographic order
        let mut cells = vec![Cell::new(0, 0); n_uavs];
        for k in (0..n_uavs).rev() {
            cells[k] = spec.cell_at((code % n) as usize);
            code /= n;
        }
        cells
    };
    let (best_code, reward) = (0..total)
        .into_par_iter()
        .map(|code| (code, placement_reward(world, &decode(code))))
        .reduce(
            || (u64::MAX, f64::NEG_INFINITY),
            |a, b| {
                if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
                    b
                } else {
                    a
                }
            },
        );
    Ok(Placement {
        cells: decode(best_code),
        reward,
    })
}

/// UAV 0 hovers over the users' centroid; the others sit at equal spacing
/// on the straight segment from the base station to it, nearest first.
pub fn baseline_centroid(users: &[UserTerminal], n_uavs: usize, bs: &GroundStation, spec: &GridSpec) -> Vec<Cell> {
    let n = users.len().max(1) as f64;
    let cx = users.iter().map(|u| u.pos.x).sum::<f64>() / n;
    let cy = users.iter().map(|u| u.pos.y).sum::<f64>() / n;
    let Position { x: bx, y: by, .. } = bs.pos;
    let mut cells = Vec::with_capacity(n_uavs);
    cells.push(spec.nearest_cell(cx, cy));
    for j in 1..n_uavs {
        let f = j as f64 / n_uavs as f64;
        cells.push(spec.nearest_cell(bx + f * (cx - bx), by + f * (cy - by)));
    }
    cells
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::RadioParams;
    use crate::environment::RewardWeights;

    fn user(id: usize, x: f64, y: f64) -> UserTerminal {
        UserTerminal {
            id,
            pos: Position::ground(x, y),
        }
    }

    fn world(spec: GridSpec, users: Vec<UserTerminal>) -> World {
        World {
            bs: GroundStation {
                pos: Position::new(10.0, 0.0, 10.0),
            },
            users,
            radio: RadioParams::default(),
            grid: spec,
            weights: RewardWeights::default(),
            reward_scale: 1e6,
            max_iterations: 100,
        }
    }

    #[test]
    fn centroid_examples() {
        let unit = GridSpec {
            cell_size: 1.0,
            ..GridSpec::default()
        };
        let origin = GroundStation {
            pos: Position::new(0.0, 0.0, 10.0),
        };
        let users = [user(0, 0.0, 0.0), user(1, 2.0, 0.0)];
        assert_eq!(baseline_centroid(&users, 1, &origin, &unit), vec![Cell::new(1, 0)]);
        let users = [user(0, 8.0, 8.0)];
        assert_eq!(
            baseline_centroid(&users, 2, &origin, &unit),
            vec![Cell::new(8, 8), Cell::new(4, 4)]
        );
        let users = [user(0, 5.0, 3.0), user(1, 5.0, 3.0)];
        assert_eq!(baseline_centroid(&users, 1, &origin, &unit)[0], Cell::new(5, 3));
    }

    #[test]
    fn oracle_is_exhaustive_on_small_grid() {
        let spec = GridSpec {
            nx: 4,
            ny: 4,
            ..GridSpec::default()
        };
        let w = world(spec, vec![user(0, 30.0, 30.0), user(1, 20.0, 25.0)]);
        let best = brute_force_placement(&w, 1, 1_000_000).unwrap();
        let max = (0..16)
            .map(|i| placement_reward(&w, &[spec.cell_at(i)]))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best.reward, max);
    }

    #[test]
    fn extra_uav_never_hurts_the_optimum() {
        let spec = GridSpec {
            nx: 4,
            ny: 4,
            ..GridSpec::default()
        };
        let w = world(spec, vec![user(0, 30.0, 30.0), user(1, 0.0, 30.0), user(2, 25.0, 5.0)]);
        let one = brute_force_placement(&w, 1, 1_000_000).unwrap();
        let two = brute_force_placement(&w, 2, 1_000_000).unwrap();
        assert!(two.reward >= one.reward);
    }

    #[test]
    fn guard_refuses_large_spaces() {
        let w = world(GridSpec::default(), vec![user(0, 1.0, 1.0)]);
        assert!(matches!(
            brute_force_placement(&w, 4, 1_000_000),
            Err(Error::SearchSpace(_))
        ));
    }
}
