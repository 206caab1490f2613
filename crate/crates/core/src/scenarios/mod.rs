//! Experiment harness: configuration, training runs, reference placements,
//! failure injection, coverage sweeps and their on-disk artifacts.

pub mod config;
pub mod output;
pub mod placement;
pub mod resilience;
pub mod sweep;
pub mod training;
pub mod users;

pub use config::{ExperimentConfig, RecoveryMode, VictimKind, VictimRule};
pub use placement::{baseline_centroid, brute_force_placement, placement_reward, Placement};
pub use resilience::{run_resilience, ResilienceRecord};
pub use sweep::{run_coverage_sweep, SweepAxis, SweepPlacement, SweepPoint};
pub use training::{build_world, greedy_rollout, run_training, train, EpisodeMetrics, RunRecord, TrainedRun};
pub use users::{sample_users, UserDistribution};
