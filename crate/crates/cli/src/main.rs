use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gaitprior::envs::Variant;
use gaitprior::latent::PriorTrainingConfig;
use gaitprior::pipeline::{self, ExperimentConfig, SweepParam, OUT_DIR_ENV};
use gaitprior::{Error, Result};

#[derive(Parser)]
#[command(name = "gaitprior", version, about = "Latent action priors and style rewards for PPO locomotion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Record one gait cycle from an expert oscillator.
    GenDemo {
        #[arg(long, default_value = "point_gait")]
        env: String,
        /// Oscillator TOML; the shipped expert for `env` if omitted.
        #[arg(long)]
        oscillator: Option<PathBuf>,
        #[arg(long)]
        settle_cycles: Option<usize>,
        /// Defaults to <out>/demos/<env>.toml.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PCA of the demo actions.
    Analyze {
        #[arg(long)]
        demo: PathBuf,
        /// Output root; reports go under <out>/reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the latent action autoencoder to a demo.
    TrainPrior {
        #[arg(long)]
        demo: PathBuf,
        #[arg(long)]
        latent_dim: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        w_full: Option<f64>,
        /// Defaults to <out>/checkpoints/prior.toml.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train one policy per seed as described by an experiment config.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the config's seed list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        total_steps: Option<usize>,
    },
    /// Evaluate a policy checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 10)]
        episodes: usize,
        /// Sample actions instead of using the mean.
        #[arg(long)]
        stochastic: bool,
        #[arg(long, default_value_t = pipeline::EVAL_SEED_BASE)]
        seed: u64,
        /// Evaluate on a different speed multiplier than the one trained on.
        #[arg(long)]
        speed_multiplier: Option<u32>,
        #[arg(long)]
        tracking: Option<bool>,
        /// Output root; reports go under <out>/reports.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the config once per value of `w_full` or `latent_dim`.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn out_root(flag: Option<&Path>) -> PathBuf {
    let env = std::env::var(OUT_DIR_ENV).ok();
    pipeline::resolve_out_dir(flag, env.as_deref(), &ExperimentConfig::default())
}

fn load_config(path: &Path, out: Option<&Path>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    let env = std::env::var(OUT_DIR_ENV).ok();
    cfg.out_dir = pipeline::resolve_out_dir(out, env.as_deref(), &cfg);
    // relative demo and prior paths are taken from the config's directory
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut cfg.demo, &mut cfg.prior].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenDemo {
            env,
            oscillator,
            settle_cycles,
            out,
        } => {
            let path = out.unwrap_or_else(|| out_root(None).join("demos").join(format!("{env}.toml")));
            let demo = pipeline::gen_demo(&env, oscillator.as_deref(), settle_cycles, &path)?;
            println!(
                "wrote {} ({} frames, {} actions, id {})",
                path.display(),
                demo.n_frames(),
                demo.action_dim(),
                demo.id()
            );
        }
        Command::Analyze { demo, out } => {
            let dir = out_root(out.as_deref()).join("reports");
            let a = pipeline::analyze(&demo, &dir)?;
            for (k, (r, c)) in a.pca.explained_variance_ratio.iter().zip(a.pca.cumulative()).enumerate() {
                println!("component {}: ratio {r:.6}, cumulative {c:.6}", k + 1);
            }
            println!(
                "suggested latent dim {}, components for 97% {}",
                a.suggested_latent_dim, a.dims_for_97pct
            );
            println!("reports in {}", dir.display());
        }
        Command::TrainPrior {
            demo,
            latent_dim,
            epochs,
            lr,
            seed,
            w_full,
            out,
        } => {
            let d = PriorTrainingConfig::default();
            let cfg = PriorTrainingConfig {
                epochs: epochs.unwrap_or(d.epochs),
                lr: lr.unwrap_or(d.lr),
                seed: seed.unwrap_or(d.seed),
                full_action_weight: w_full.unwrap_or(d.full_action_weight),
                ..d
            };
            let path = out.unwrap_or_else(|| out_root(None).join("checkpoints").join("prior.toml"));
            let report = pipeline::train_prior(&demo, latent_dim, &cfg, &path)?;
            println!(
                "latent dim {}, {} epochs, final loss {:e}",
                report.prior.latent_dim, report.prior.epochs_run, report.prior.final_loss
            );
            println!("wrote {}", path.display());
        }
        Command::Train {
            config,
            out,
            seeds,
            total_steps,
        } => {
            let mut cfg = load_config(&config, out.as_deref())?;
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            if let Some(t) = total_steps {
                cfg.total_steps = t;
            }
            let report = pipeline::run_experiment(&cfg)?;
            for r in &report.runs {
                println!(
                    "seed {}: eval task return {:.3} (std {:.3}), final train return {:.3}",
                    r.seed,
                    r.eval.mean_task_return(),
                    r.eval.std_task_return(),
                    r.final_train_return()
                );
            }
            let s = report.eval_summary();
            println!("eval over seeds: mean {:.3}, std {:.3}, median {:.3}, iqr {:.3}", s.mean, s.std, s.median, s.iqr());
            println!("outputs in {}", report.out_dir.display());
        }
        Command::Eval {
            checkpoint,
            episodes,
            stochastic,
            seed,
            speed_multiplier,
            tracking,
            out,
        } => {
            let variant = if speed_multiplier.is_some() || tracking.is_some() {
                let trained = pipeline::Checkpoint::load(&checkpoint)?.into_policy()?.variant;
                Some(Variant {
                    speed_multiplier: speed_multiplier.unwrap_or(trained.speed_multiplier),
                    tracking: tracking.unwrap_or(trained.tracking),
                    ..trained
                })
            } else {
                None
            };
            let eval = pipeline::evaluate_checkpoint(&checkpoint, episodes, !stochastic, seed, variant)?;
            let dir = out_root(out.as_deref()).join("reports");
            pipeline::write_eval_reports(&eval, &dir)?;
            let r = &eval.report;
            println!(
                "{} x{}: task return {:.3} (std {:.3}), style return {:.3}, length {:.1}",
                eval.env_id,
                eval.variant.speed_multiplier,
                r.mean_task_return(),
                r.std_task_return(),
                r.mean_style_return(),
                r.mean_length()
            );
            println!("reports in {}", dir.display());
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = load_config(&config, out.as_deref())?;
            let param: SweepParam = param.parse()?;
            for p in pipeline::sweep(&cfg, param, &values)? {
                println!(
                    "{} = {}: eval task return {:.3} (std {:.3})",
                    param.name(),
                    p.value,
                    p.summary.mean,
                    p.summary.std
                );
            }
            println!("reports in {}", cfg.out_dir.join("reports").display());
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    if err.is_config_error() {
        2
    } else {
        3
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
