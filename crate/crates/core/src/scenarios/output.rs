//! On-disk artifacts. Every file name embeds the config hash and the seed:
//! `<kind>_<hash>_seed<seed>.csv`, `..._trajectory.csv`, `..._summary.json`.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::environment::Cell;
use crate::error::{Error, Result};

use super::resilience::ResilienceRecord;
use super::sweep::SweepPoint;
use super::training::{EpisodeMetrics, OracleSummary, RunRecord};

pub fn stem(kind: &str, config_hash: &str, seed: u64) -> String {
    format!("{kind}_{config_hash}_seed{seed}")
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// Episode CSV written row by row and flushed after each row, so an
/// interrupted run leaves every finished episode on disk.
pub struct EpisodeCsv {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl EpisodeCsv {
    pub fn create(path: &Path) -> Result<Self> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        writer
            .write_record(["episode", "reward", "mean_rate_bps", "p75_rate_bps", "coverage"])
            .map_err(|e| csv_err(path, e))?;
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            writer,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&mut self, m: &EpisodeMetrics) -> Result<()> {
        self.writer
            .serialize((m.episode, m.reward, m.mean_rate_bps, m.p75_rate_bps, m.coverage))
            .map_err(|e| csv_err(&self.path, e))?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn write_episodes(path: &Path, episodes: &[EpisodeMetrics]) -> Result<()> {
    let mut out = EpisodeCsv::create(path)?;
    for m in episodes {
        out.write(m)?;
    }
    Ok(())
}

pub fn write_trajectory(path: &Path, trajectory: &[Vec<Cell>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["step", "uav_id", "x_cell", "y_cell"])
        .map_err(|e| csv_err(path, e))?;
    for (step, cells) in trajectory.iter().enumerate() {
        for (uav, cell) in cells.iter().enumerate() {
            w.serialize((step, uav, cell.x, cell.y)).map_err(|e| csv_err(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes())
        .and_then(|_| f.write_all(b"\n"))
        .map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize)]
pub struct RunSummary<'a> {
    pub kind: &'a str,
    pub config_hash: &'a str,
    pub seed: u64,
    pub episodes: usize,
    pub final_cells: &'a [Cell],
    pub final_reward: f64,
    pub final_mean_rate_bps: f64,
    pub coverage: f64,
    pub backhaul_chain: &'a [usize],
    pub oracle: Option<&'a OracleSummary>,
    pub wall_time_s: f64,
}

/// Write the trajectory and summary of a run whose episode CSV was already
/// streamed. Returns the written paths.
pub fn write_run_tail(dir: &Path, kind: &str, record: &RunRecord) -> Result<Vec<PathBuf>> {
    let stem = stem(kind, &record.config_hash, record.seed);
    let traj = dir.join(format!("{stem}_trajectory.csv"));
    write_trajectory(&traj, &record.trajectory)?;
    let summary = dir.join(format!("{stem}_summary.json"));
    write_json(
        &summary,
        &RunSummary {
            kind,
            config_hash: &record.config_hash,
            seed: record.seed,
            episodes: record.episodes.len(),
            final_cells: &record.final_cells,
            final_reward: record.final_reward,
            final_mean_rate_bps: record.final_mean_rate_bps,
            coverage: record.coverage,
            backhaul_chain: &record.final_snapshot.chain.order,
            oracle: record.oracle.as_ref(),
            wall_time_s: record.wall_time_s,
        },
    )?;
    Ok(vec![traj, summary])
}

pub fn write_run(dir: &Path, kind: &str, record: &RunRecord) -> Result<Vec<PathBuf>> {
    let csv = dir.join(format!("{}.csv", stem(kind, &record.config_hash, record.seed)));
    write_episodes(&csv, &record.episodes)?;
    let mut paths = vec![csv];
    paths.extend(write_run_tail(dir, kind, record)?);
    Ok(paths)
}

pub fn write_resilience(dir: &Path, record: &ResilienceRecord) -> Result<Vec<PathBuf>> {
    let stem = stem("resilience", &record.config_hash, record.seed);
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| csv_err(&csv_path, e))?;
    w.write_record(["step", "reward", "mean_rate_bps", "failed"])
        .map_err(|e| csv_err(&csv_path, e))?;
    for (i, (&reward, &rate)) in record.rewards.iter().zip(&record.mean_rates_bps).enumerate() {
        let step = i + 1;
        w.serialize((step, reward, rate, u8::from(step >= record.failure_step)))
            .map_err(|e| csv_err(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let traj = dir.join(format!("{stem}_trajectory.csv"));
    write_trajectory(&traj, &record.trajectory)?;
    let summary = dir.join(format!("{stem}_summary.json"));
    write_json(
        &summary,
        &serde_json::json!({
            "kind": "resilience",
            "config_hash": record.config_hash,
            "seed": record.seed,
            "failure_step": record.failure_step,
            "victim": record.victim,
            "recovery": record.recovery,
            "pre_plateau_bps": record.pre_plateau_bps,
            "post_plateau_bps": record.post_plateau_bps,
            "post_min_bps": record.post_min_bps,
            "recovery_ratio": record.recovery_ratio(),
        }),
    )?;
    Ok(vec![csv_path, traj, summary])
}

pub fn write_sweep(path: &Path, axis: &str, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([axis, "coverage_mean", "coverage_std", "seeds"])
        .map_err(|e| csv_err(path, e))?;
    for p in points {
        w.serialize((p.value, p.mean, p.std, p.coverage.len()))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
