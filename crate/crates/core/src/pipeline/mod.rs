//! Experiment driver: configs, checkpoints, and the commands behind the CLI.
//!
//! Layout of an experiment directory:
//!
//! ```text
//! <out>/config.toml
//! <out>/logs/seed_<s>.csv
//! <out>/logs/seed_<s>_actions.csv      (record_actions only)
//! <out>/checkpoints/prior.toml         (latent modes)
//! <out>/checkpoints/policy_seed_<s>.toml
//! <out>/reports/seeds.csv
//! <out>/reports/summary.csv
//! <out>/reports/learning_curve.svg
//! ```

mod checkpoint;
mod commands;
mod config;
mod report;

pub use checkpoint::{Checkpoint, CheckpointKind, PolicyCheckpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use commands::{
    analyze, eval_seed, evaluate_checkpoint, gen_demo, run_experiment, sweep, train_prior, write_eval_reports,
    Analysis, CheckpointEval, ExperimentReport, SeedRun, SweepParam, SweepPoint, EVAL_SEED_BASE,
};
pub use config::{resolve_out_dir, ExperimentConfig, Mode};
pub use report::{bar_chart_svg, learning_curve_svg, line_chart_svg, quantile, Series, Summary};

/// Environment variable that overrides the output directory of a config.
pub const OUT_DIR_ENV: &str = "GAITPRIOR_OUT";
