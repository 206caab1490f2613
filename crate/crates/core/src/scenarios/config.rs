//! Experiment configuration: one flat YAML mapping, every key optional.
//!
//! Unset keys take the defaults below. Any key can be overridden from the
//! environment as `UAV_IAB_<KEY>` (upper case); the value is parsed as YAML.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agent::{DecayEvery, EpsilonSchedule, LearnerKind, TrainConfig};
use crate::channel::{dbm_to_mw, Position, RadioParams, TxPower};
use crate::environment::{Cell, GridSpec, RewardWeights};
use crate::error::{Error, Result};
use crate::topology::GroundStation;

use super::users::UserDistribution;

pub const ENV_PREFIX: &str = "UAV_IAB_";

/// Which UAV fails in a resilience run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VictimRule {
    Index(usize),
    Named(VictimKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VictimKind {
    /// The UAV at the tail of the backhaul chain.
    Serving,
    /// The first chain member that is not the tail.
    Relay,
    Random,
}

/// What the survivors do after a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMode {
    /// Keep following the policy trained for the full team.
    Retained,
    /// Switch to a policy pretrained for one UAV fewer.
    Reduced,
    /// Keep the full-team policy and keep learning online.
    Finetune,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    // radio
    pub theta_env: f64,
    pub xi_env: f64,
    pub delta_exp: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    pub f_access_hz: f64,
    pub f_a2a_hz: f64,
    pub tx_power_dbm: f64,
    pub tx_power_direct_dbm: Option<f64>,
    pub tx_power_fronthaul_dbm: Option<f64>,
    pub tx_power_backhaul_dbm: Option<f64>,
    pub noise_dbm: f64,
    pub bw_access_hz: f64,
    pub bw_bs_hz: f64,
    pub snr_threshold: f64,
    pub comm_range: f64,
    pub min_distance_m: f64,

    // geometry
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub cell_size_m: f64,
    pub altitude_m: f64,
    pub bs_position: [f64; 3],
    pub n_uavs: usize,
    pub initial_cells: Option<Vec<[usize; 2]>>,
    pub n_users: usize,
    pub user_mean: [f64; 2],
    pub user_cov: [[f64; 2]; 2],
    pub covariance_scale: f64,

    // learning
    pub learner: LearnerKind,
    pub alpha: f64,
    pub mu: f64,
    pub gamma: f64,
    pub eps_max: f64,
    pub eps_min: f64,
    pub eps_delta: f64,
    pub eps_decay_every: DecayEvery,
    pub episodes: usize,
    pub iterations: usize,
    pub reward_scale: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub target_sync_period: usize,
    pub grad_clip: Option<f64>,
    pub trunk_widths: Vec<usize>,
    pub head_width: usize,
    pub train_every: usize,

    // resilience
    pub failure_step: usize,
    pub failure_victim: VictimRule,
    pub recovery: RecoveryMode,
    pub eval_steps: Option<usize>,
    pub plateau_window: usize,

    // sweeps and oracle
    pub n_seeds: usize,
    pub oracle_max_evals: u64,
    pub oracle_auto_limit: u64,

    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let radio = RadioParams::default();
        let train = TrainConfig::default();
        let grid = GridSpec::default();
        Self {
            theta_env: radio.theta_env,
            xi_env: radio.xi_env,
            delta_exp: radio.delta_exp,
            eta_los_db: radio.eta_los_db,
            eta_nlos_db: radio.eta_nlos_db,
            f_access_hz: radio.f_access_hz,
            f_a2a_hz: radio.f_a2a_hz,
            tx_power_dbm: 30.0,
            tx_power_direct_dbm: None,
            tx_power_fronthaul_dbm: None,
            tx_power_backhaul_dbm: None,
            noise_dbm: -96.0,
            bw_access_hz: radio.bw_access_hz,
            bw_bs_hz: radio.bw_bs_hz,
            snr_threshold: radio.snr_threshold,
            comm_range: radio.comm_range_m,
            min_distance_m: radio.min_distance_m,

            grid_nx: grid.nx,
            grid_ny: grid.ny,
            cell_size_m: grid.cell_size,
            altitude_m: grid.altitude_m,
            bs_position: [10.0, 0.0, 10.0],
            n_uavs: 3,
            initial_cells: None,
            n_users: 100,
            user_mean: [70.0, 70.0],
            user_cov: [[100.0, 0.0], [0.0, 50.0]],
            covariance_scale: 1.0,

            learner: LearnerKind::Tabular,
            alpha: 0.5,
            mu: train.mu,
            gamma: train.gamma,
            eps_max: 0.99,
            eps_min: 0.01,
            eps_delta: 0.01,
            eps_decay_every: DecayEvery::Iteration,
            episodes: 100,
            iterations: 100,
            reward_scale: 1e6,
            batch_size: train.batch_size,
            buffer_capacity: train.buffer_capacity,
            target_sync_period: train.target_sync_period,
            grad_clip: train.grad_clip,
            trunk_widths: train.trunk_widths,
            head_width: train.head_width,
            train_every: train.train_every,

            failure_step: 30,
            failure_victim: VictimRule::Named(VictimKind::Serving),
            recovery: RecoveryMode::Reduced,
            eval_steps: None,
            plateau_window: 20,

            n_seeds: 10,
            oracle_max_evals: 1_000_000,
            oracle_auto_limit: 20_000,

            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn radio(&self) -> RadioParams {
        let class = |v: Option<f64>| dbm_to_mw(v.unwrap_or(self.tx_power_dbm));
        RadioParams {
            theta_env: self.theta_env,
            xi_env: self.xi_env,
            delta_exp: self.delta_exp,
            eta_los_db: self.eta_los_db,
            eta_nlos_db: self.eta_nlos_db,
            f_access_hz: self.f_access_hz,
            f_a2a_hz: self.f_a2a_hz,
            tx_power_mw: TxPower {
                direct_mw: class(self.tx_power_direct_dbm),
                fronthaul_mw: class(self.tx_power_fronthaul_dbm),
                backhaul_mw: class(self.tx_power_backhaul_dbm),
            },
            noise_mw: dbm_to_mw(self.noise_dbm),
            bw_access_hz: self.bw_access_hz,
            bw_bs_hz: self.bw_bs_hz,
            snr_threshold: self.snr_threshold,
            comm_range_m: self.comm_range,
            min_distance_m: self.min_distance_m,
            ..RadioParams::default()
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            nx: self.grid_nx,
            ny: self.grid_ny,
            cell_size: self.cell_size_m,
            altitude_m: self.altitude_m,
        }
    }

    pub fn bs(&self) -> GroundStation {
        let [x, y, z] = self.bs_position;
        GroundStation {
            pos: Position::new(x, y, z),
        }
    }

    pub fn distribution(&self) -> UserDistribution {
        let s = self.covariance_scale;
        let c = self.user_cov;
        UserDistribution {
            mean: self.user_mean,
            cov: [[s * c[0][0], s * c[0][1]], [s * c[1][0], s * c[1][1]]],
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            mu: self.mu,
            gamma: self.gamma,
            batch_size: self.batch_size,
            buffer_capacity: self.buffer_capacity,
            target_sync_period: self.target_sync_period,
            grad_clip: self.grad_clip,
            trunk_widths: self.trunk_widths.clone(),
            head_width: self.head_width,
            train_every: self.train_every,
        }
    }

    pub fn schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule::new(self.eps_max, self.eps_min, self.eps_delta)
    }

    pub fn weights(&self) -> RewardWeights {
        RewardWeights { alpha: self.alpha }
    }

    pub fn initial_cells(&self) -> Option<Vec<Cell>> {
        self.initial_cells
            .as_ref()
            .map(|cells| cells.iter().map(|&[x, y]| Cell::new(x, y)).collect())
    }

    pub fn eval_steps(&self) -> usize {
        self.eval_steps.unwrap_or(self.iterations)
    }

    pub fn validate(&self) -> Result<()> {
        self.radio().validate()?;
        self.grid().validate()?;
        self.weights().validate()?;
        self.schedule().validate()?;
        self.train_config().validate()?;
        self.distribution().validate()?;
        for (key, v) in [
            ("tx_power_dbm", Some(self.tx_power_dbm)),
            ("tx_power_direct_dbm", self.tx_power_direct_dbm),
            ("tx_power_fronthaul_dbm", self.tx_power_fronthaul_dbm),
            ("tx_power_backhaul_dbm", self.tx_power_backhaul_dbm),
            ("noise_dbm", Some(self.noise_dbm)),
        ] {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(Error::config(key, "must be finite"));
                }
            }
        }
        if !self.bs_position.iter().all(|v| v.is_finite()) || self.bs_position[2] < 0.0 {
            return Err(Error::config("bs_position", "must be finite with z >= 0"));
        }
        if self.n_uavs == 0 {
            return Err(Error::config("n_uavs", "must be at least 1"));
        }
        if self.n_users == 0 {
            return Err(Error::config("n_users", "must be at least 1"));
        }
        if !(self.covariance_scale.is_finite() && self.covariance_scale >= 0.0) {
            return Err(Error::config("covariance_scale", "must be finite and >= 0"));
        }
        if !self.user_mean.iter().all(|v| v.is_finite()) {
            return Err(Error::config("user_mean", "must be finite"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be at least 1"));
        }
        if !(self.reward_scale.is_finite() && self.reward_scale > 0.0) {
            return Err(Error::config("reward_scale", "must be > 0"));
        }
        if let Some(cells) = self.initial_cells() {
            crate::environment::reset(&self.grid(), self.n_uavs, Some(&cells))?;
        }
        if self.eval_steps() == 0 {
            return Err(Error::config("eval_steps", "must be at least 1"));
        }
        if self.plateau_window == 0 {
            return Err(Error::config("plateau_window", "must be at least 1"));
        }
        if self.n_seeds == 0 {
            return Err(Error::config("n_seeds", "must be at least 1"));
        }
        if let VictimRule::Index(k) = self.failure_victim {
            if k >= self.n_uavs {
                return Err(Error::config(
                    "failure_victim",
                    format!("UAV index {k} out of range for {} UAVs", self.n_uavs),
                ));
            }
        }
        Ok(())
    }

    /// Resilience-specific checks on top of [`Self::validate`].
    pub fn validate_failure(&self) -> Result<()> {
        if self.failure_step == 0 || self.failure_step > self.eval_steps() {
            return Err(Error::config(
                "failure_step",
                format!("must lie in [1, eval_steps = {}], got {}", self.eval_steps(), self.failure_step),
            ));
        }
        if self.n_uavs < 2 {
            return Err(Error::config("n_uavs", "resilience runs need at least 2 UAVs"));
        }
        Ok(())
    }

    /// Short digest of every setting except the seed.
    pub fn config_hash(&self) -> String {
        let canonical = serde_json::to_string(&Self { seed: 0, ..self.clone() }).expect("config serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    /// Parse YAML text (empty text means all defaults), apply environment
    /// overrides and validate.
    pub fn from_yaml_str<I>(text: &str, origin: &Path, env: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            message,
        };
        let mut doc: serde_yaml::Value = if text.trim().is_empty() {
            serde_yaml::Value::Mapping(Default::default())
        } else {
            serde_yaml::from_str(text).map_err(|e| parse_err(e.to_string()))?
        };
        if doc.is_null() {
            doc = serde_yaml::Value::Mapping(Default::default());
        }
        let map = doc
            .as_mapping_mut()
            .ok_or_else(|| parse_err("top level must be a mapping of keys to values".into()))?;
        let mut overrides: Vec<(String, String)> = env
            .into_iter()
            .filter_map(|(k, v)| k.strip_prefix(ENV_PREFIX).map(|key| (key.to_ascii_lowercase(), v)))
            .collect();
        overrides.sort();
        for (key, raw) in overrides {
            let value: serde_yaml::Value = serde_yaml::from_str(&raw)
                .map_err(|e| Error::config(key.clone(), format!("bad override `{raw}`: {e}")))?;
            map.insert(serde_yaml::Value::String(key), value);
        }
        let cfg: Self = serde_yaml::from_value(doc).map_err(|e| parse_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        // an unreadable config file is a configuration problem, not a run failure
        let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: format!("cannot read: {e}"),
        })?;
        Self::from_yaml_str(&text, path, std::env::vars())
    }
}
