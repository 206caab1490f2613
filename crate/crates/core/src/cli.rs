//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for configuration problems (bad flags, bad
//! config file, invalid values), 2 for failures while running.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use crate::agent::checkpoint::Checkpoint;
use crate::error::{Error, Result};
use crate::scenarios::output::{self, EpisodeCsv};
use crate::scenarios::placement::{baseline_centroid, brute_force_placement, placement_reward, search_space};
use crate::scenarios::training::{build_world, greedy_rollout, initial_state, rng_for, train, Stream};
use crate::scenarios::{run_coverage_sweep, run_resilience, ExperimentConfig, SweepAxis, SweepPlacement};
use crate::selftest;
use crate::topology::coverage_ratio;

#[derive(Debug, Parser)]
#[command(name = "uav-iab", version, about = "UAV relay placement simulator and Q-learning trainer")]
pub struct Cli {
    /// YAML config; every key is optional.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for CSV and JSON artifacts.
    #[arg(long, short, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// -v info, -vv debug, -vvv trace.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    /// Worker threads for sweeps and the oracle; defaults to all cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the configured learner and roll out the greedy policy.
    Train(TrainArgs),
    /// Greedy rollout of a saved checkpoint.
    Evaluate {
        /// Checkpoint JSON written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Exhaustive search for the best joint placement.
    Oracle,
    /// Centroid placement with relays on the line to the base station.
    Baseline,
    /// Kill one UAV mid-evaluation and record the recovery.
    Resilience,
    /// Coverage ratio over one axis, averaged over seeds.
    Sweep(SweepArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Also run the oracle and record the optimality gap.
    #[arg(long)]
    pub with_oracle: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// n_uavs, comm_range or covariance_scale.
    #[arg(long)]
    pub axis: SweepAxis,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', required = true)]
    pub values: Vec<f64>,
    /// Number of seeds, starting at the configured seed; defaults to `n_seeds`.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// auto, train, oracle or baseline.
    #[arg(long, default_value = "auto")]
    pub placement: SweepPlacement,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::from_yaml_str("", Path::new("<defaults>"), std::env::vars())?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn cmd_train(cfg: &ExperimentConfig, out: &Path, args: &TrainArgs) -> Result<()> {
    let hash = cfg.config_hash();
    let stem = output::stem("train", &hash, cfg.seed);
    let mut csv = EpisodeCsv::create(&out.join(format!("{stem}.csv")))?;
    let mut write_err = None;
    let mut run = train(cfg, |m| {
        info!("episode {} reward {:.4}", m.episode, m.reward);
        if write_err.is_none() {
            write_err = csv.write(m).err();
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    if args.with_oracle {
        let best = brute_force_placement(&run.world, cfg.n_uavs, cfg.oracle_max_evals)?;
        run.record.oracle = Some(crate::scenarios::training::OracleSummary {
            gap: run.record.final_reward / best.reward,
            cells: best.cells,
            reward: best.reward,
        });
    }
    output::write_run_tail(out, "train", &run.record)?;
    let ckpt = Checkpoint::capture(&run.team, &run.world.grid, run.schedule, &cfg.train_config(), &hash);
    ckpt.save(&out.join(format!("{stem}_checkpoint.json")))?;
    println!(
        "train {hash} seed {}: final reward {:.6}, mean rate {:.3e} bit/s, coverage {:.3}, cells {:?}{}",
        cfg.seed,
        run.record.final_reward,
        run.record.final_mean_rate_bps,
        run.record.coverage,
        run.record.final_cells.iter().map(|c| (c.x, c.y)).collect::<Vec<_>>(),
        run.record
            .oracle
            .as_ref()
            .map(|o| format!(", oracle gap {:.4}", o.gap))
            .unwrap_or_default()
    );
    Ok(())
}

fn cmd_evaluate(cfg: &ExperimentConfig, out: &Path, path: &Path) -> Result<()> {
    let ckpt = Checkpoint::load(path)?;
    let hash = cfg.config_hash();
    if ckpt.config_hash != hash {
        warn!("checkpoint was trained under config {}, evaluating under {hash}", ckpt.config_hash);
    }
    let world = build_world(cfg)?;
    let team = ckpt.restore(cfg.learner, &world.grid, cfg.n_uavs)?;
    let start = initial_state(cfg)?;
    let rollout = greedy_rollout(&team, &world, &start, cfg.iterations, &mut rng_for(cfg.seed, Stream::Eval))?;
    let stem = output::stem("evaluate", &hash, cfg.seed);
    output::write_trajectory(&out.join(format!("{stem}_trajectory.csv")), &rollout.trajectory)?;
    let coverage = coverage_ratio(&rollout.snapshot, &world.radio);
    output::write_json(
        &out.join(format!("{stem}_summary.json")),
        &serde_json::json!({
            "kind": "evaluate",
            "config_hash": hash,
            "seed": cfg.seed,
            "checkpoint": path.display().to_string(),
            "final_cells": rollout.final_state.cells,
            "final_reward": rollout.reward,
            "final_mean_rate_bps": rollout.snapshot.mean_rate_bps(),
            "coverage": coverage,
        }),
    )?;
    println!(
        "evaluate {hash} seed {}: reward {:.6}, coverage {coverage:.3}, cells {:?}",
        cfg.seed,
        rollout.reward,
        rollout.final_state.cells.iter().map(|c| (c.x, c.y)).collect::<Vec<_>>()
    );
    Ok(())
}

fn cmd_oracle(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let world = build_world(cfg)?;
    let evals = search_space(&world.grid, cfg.n_uavs).unwrap_or(u64::MAX);
    info!("searching {evals} joint placements");
    let best = brute_force_placement(&world, cfg.n_uavs, cfg.oracle_max_evals)?;
    let hash = cfg.config_hash();
    output::write_json(
        &out.join(format!("{}_summary.json", output::stem("oracle", &hash, cfg.seed))),
        &serde_json::json!({
            "kind": "oracle",
            "config_hash": hash,
            "seed": cfg.seed,
            "evaluations": evals,
            "best_cells": best.cells,
            "best_reward": best.reward,
        }),
    )?;
    println!(
        "oracle {hash} seed {}: best cells {:?}, reward {:.6}",
        cfg.seed,
        best.cells.iter().map(|c| (c.x, c.y)).collect::<Vec<_>>(),
        best.reward
    );
    Ok(())
}

fn cmd_baseline(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let world = build_world(cfg)?;
    let cells = baseline_centroid(&world.users, cfg.n_uavs, &world.bs, &world.grid);
    let reward = placement_reward(&world, &cells);
    let state = crate::environment::EnvState {
        cells: cells.clone(),
        alive: vec![true; cells.len()],
    };
    let coverage = coverage_ratio(&world.evaluate(&state), &world.radio);
    let hash = cfg.config_hash();
    output::write_json(
        &out.join(format!("{}_summary.json", output::stem("baseline", &hash, cfg.seed))),
        &serde_json::json!({
            "kind": "baseline",
            "config_hash": hash,
            "seed": cfg.seed,
            "cells": cells,
            "reward": reward,
            "coverage": coverage,
        }),
    )?;
    println!(
        "baseline {hash} seed {}: cells {:?}, reward {reward:.6}, coverage {coverage:.3}",
        cfg.seed,
        cells.iter().map(|c| (c.x, c.y)).collect::<Vec<_>>()
    );
    Ok(())
}

fn cmd_resilience(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let rec = run_resilience(cfg)?;
    output::write_resilience(out, &rec)?;
    println!(
        "resilience {} seed {}: victim {} at step {}, pre {:.3e}, post min {:.3e}, post plateau {:.3e} ({:.1}%)",
        rec.config_hash,
        rec.seed,
        rec.victim,
        rec.failure_step,
        rec.pre_plateau_bps,
        rec.post_min_bps,
        rec.post_plateau_bps,
        100.0 * rec.recovery_ratio()
    );
    Ok(())
}

fn axis_name(axis: SweepAxis) -> &'static str {
    match axis {
        SweepAxis::NUavs => "n_uavs",
        SweepAxis::CommRange => "comm_range",
        SweepAxis::CovarianceScale => "covariance_scale",
    }
}

fn cmd_sweep(cfg: &ExperimentConfig, out: &Path, args: &SweepArgs) -> Result<()> {
    let n = args.seeds.unwrap_or(cfg.n_seeds);
    if n == 0 {
        return Err(Error::config("seeds", "must be at least 1"));
    }
    let seeds: Vec<u64> = (0..n as u64).map(|k| cfg.seed.wrapping_add(k)).collect();
    let points = run_coverage_sweep(cfg, args.axis, &args.values, &seeds, args.placement)?;
    let name = axis_name(args.axis);
    let path = out.join(format!("{}.csv", output::stem(&format!("sweep_{name}"), &cfg.config_hash(), cfg.seed)));
    output::write_sweep(&path, name, &points)?;
    println!("{name:>16}  coverage_mean  coverage_std");
    for p in &points {
        println!("{:>16}  {:>13.4}  {:>12.4}", p.value, p.mean, p.std);
    }
    Ok(())
}

fn cmd_selftest(seed: u64) -> Result<()> {
    let checks = selftest::run_all(seed);
    let mut failed = 0;
    for c in &checks {
        println!("{} {:<45} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed += usize::from(!c.passed);
    }
    if failed > 0 {
        return Err(Error::Domain(format!("{failed} of {} self-test checks failed", checks.len())));
    }
    Ok(())
}

pub fn dispatch(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    if let Some(workers) = cli.workers {
        if workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        // a second initialisation in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
    }
    if !matches!(cli.command, Command::Selftest) {
        ensure_dir(&cli.out)?;
    }
    match &cli.command {
        Command::Train(args) => cmd_train(&cfg, &cli.out, args),
        Command::Evaluate { checkpoint } => cmd_evaluate(&cfg, &cli.out, checkpoint),
        Command::Oracle => cmd_oracle(&cfg, &cli.out),
        Command::Baseline => cmd_baseline(&cfg, &cli.out),
        Command::Resilience => cmd_resilience(&cfg, &cli.out),
        Command::Sweep(args) => cmd_sweep(&cfg, &cli.out, args),
        Command::Selftest => cmd_selftest(cfg.seed),
    }
}

/// Parse arguments, run, and map the outcome to an exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                1
            } else {
                2
            }
        }
    }
}
