//! Coverage sweeps over one configuration axis, parallel over points and
//! seeds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{Cell, EnvState};
use crate::error::{Error, Result};
use crate::stats::{mean, std_dev};
use crate::topology::coverage_ratio;

use super::config::ExperimentConfig;
use super::placement::{baseline_centroid, brute_force_placement, search_space};
use super::training::{build_world, train};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    NUavs,
    CommRange,
    CovarianceScale,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_uavs" => Ok(SweepAxis::NUavs),
            "comm_range" => Ok(SweepAxis::CommRange),
            "covariance_scale" => Ok(SweepAxis::CovarianceScale),
            other => Err(Error::config(
                "axis",
                format!("expected n_uavs, comm_range or covariance_scale, got `{other}`"),
            )),
        }
    }
}

/// How the placement at each sweep point is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepPlacement {
    /// Oracle when the search space is at most `oracle_auto_limit`, else train.
    Auto,
    Train,
    Oracle,
    Baseline,
}

impl std::str::FromStr for SweepPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(SweepPlacement::Auto),
            "train" => Ok(SweepPlacement::Train),
            "oracle" => Ok(SweepPlacement::Oracle),
            "baseline" => Ok(SweepPlacement::Baseline),
            other => Err(Error::config(
                "placement",
                format!("expected auto, train, oracle or baseline, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    /// One entry per seed, in seed order.
    pub coverage: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

pub fn apply_axis(base: &ExperimentConfig, axis: SweepAxis, value: f64) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    match axis {
        SweepAxis::NUavs => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(Error::config("n_uavs", format!("sweep value {value} is not a positive integer")));
            }
            cfg.n_uavs = value as usize;
            cfg.initial_cells = None;
        }
        SweepAxis::CommRange => cfg.comm_range = value,
        SweepAxis::CovarianceScale => cfg.covariance_scale = value,
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Placement for one configuration under the chosen mode.
pub fn placement_for(cfg: &ExperimentConfig, mode: SweepPlacement) -> Result<Vec<Cell>> {
    let mode = match mode {
        SweepPlacement::Auto => match search_space(&cfg.grid(), cfg.n_uavs) {
            Some(n) if n <= cfg.oracle_auto_limit => SweepPlacement::Oracle,
            _ => SweepPlacement::Train,
        },
        other => other,
    };
    match mode {
        SweepPlacement::Train => Ok(train(cfg, |_| {})?.record.final_cells),
        SweepPlacement::Oracle => {
            let world = build_world(cfg)?;
            Ok(brute_force_placement(&world, cfg.n_uavs, cfg.oracle_max_evals)?.cells)
        }
        SweepPlacement::Baseline => {
            let world = build_world(cfg)?;
            Ok(baseline_centroid(&world.users, cfg.n_uavs, &world.bs, &world.grid))
        }
        SweepPlacement::Auto => unreachable!("resolved above"),
    }
}

/// Coverage of the placement chosen for `cfg`.
pub fn coverage_for(cfg: &ExperimentConfig, mode: SweepPlacement) -> Result<f64> {
    let cells = placement_for(cfg, mode)?;
    let world = build_world(cfg)?;
    let state = EnvState {
        alive: vec![true; cells.len()],
        cells,
    };
    Ok(coverage_ratio(&world.evaluate(&state), &world.radio))
}

/// For every value and seed, place the UAVs and record the coverage ratio.
/// Results are ordered by value, then seed, whatever the thread count.
pub fn run_coverage_sweep(
    base: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    seeds: &[u64],
    mode: SweepPlacement,
) -> Result<Vec<SweepPoint>> {
    if values.is_empty() {
        return Err(Error::config("values", "sweep needs at least one value"));
    }
    if seeds.is_empty() {
        return Err(Error::config("n_seeds", "sweep needs at least one seed"));
    }
    let configs = values
        .iter()
        .map(|&v| apply_axis(base, axis, v))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let coverages = jobs
        .par_iter()
        .map(|&(i, seed)| coverage_for(&ExperimentConfig { seed, ..configs[i].clone() }, mode))
        .collect::<Result<Vec<f64>>>()?;
    Ok(values
        .iter()
        .enumerate()
        .map(|(i, &value)| {
            let coverage = coverages[i * seeds.len()..(i + 1) * seeds.len()].to_vec();
            SweepPoint {
                value,
                mean: mean(&coverage),
                std: std_dev(&coverage),
                coverage,
            }
        })
        .collect())
}
