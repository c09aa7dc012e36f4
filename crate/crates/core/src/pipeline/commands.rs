use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::demo::{actions_matrix, load_demonstration, save_demonstration, Demonstration};
use crate::envs::{default_oscillator, generate_demonstration, make_env, Env, OscillatorConfig, Variant};
use crate::error::{Error, Result};
use crate::latent::{train_autoencoder, LatentActionPrior, PriorTrainingConfig, PriorTrainingReport};
use crate::ppo::{evaluate, train, ActMode, ActionRecord, EvalReport, LogRow, TrainOptions, TrainOutput};
use crate::synergy::{compute_pca, dims_for_variance, suggest_latent_dim, PcaResult};

use super::checkpoint::{write_file, Checkpoint, PolicyCheckpoint};
use super::config::ExperimentConfig;
use super::report::{bar_chart_svg, fmt, learning_curve_svg, line_chart_svg, summary_line, Series, Summary, SUMMARY_HEADER};

/// Evaluation episodes for seed `s` start at `EVAL_SEED_BASE + 1000 * s`.
pub const EVAL_SEED_BASE: u64 = 1_000_000;

pub fn eval_seed(training_seed: u64) -> u64 {
    EVAL_SEED_BASE.wrapping_add(training_seed.wrapping_mul(1000))
}

/// Runs the expert oscillator (the shipped one unless `oscillator` is given)
/// and writes the recorded cycle to `out`.
pub fn gen_demo(
    env_id: &str,
    oscillator: Option<&Path>,
    settle_cycles: Option<usize>,
    out: &Path,
) -> Result<Demonstration> {
    let cfg = match oscillator {
        Some(p) => OscillatorConfig::load(p)?,
        None => default_oscillator(env_id)?,
    };
    let mut env = make_env(env_id, Variant::default(), 0)?;
    let demo = generate_demonstration(env.as_mut(), &cfg, settle_cycles.unwrap_or(cfg.settle_cycles))?;
    save_demonstration(&demo, out)?;
    Ok(demo)
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub pca: PcaResult,
    pub suggested_latent_dim: usize,
    pub dims_for_97pct: usize,
}

/// PCA of the demo actions, written as `pca.csv`, `pca_summary.csv` and
/// `pca.svg` under `out_dir`.
pub fn analyze(demo_path: &Path, out_dir: &Path) -> Result<Analysis> {
    let demo = load_demonstration(demo_path)?;
    let pca = compute_pca(&actions_matrix(&demo))?;
    let analysis = Analysis {
        suggested_latent_dim: suggest_latent_dim(demo.action_dim()),
        dims_for_97pct: dims_for_variance(&pca, 0.97),
        pca,
    };
    let cumulative = analysis.pca.cumulative();
    let mut csv = String::from("component,explained_variance,explained_variance_ratio,cumulative_ratio\n");
    for (k, (v, r)) in analysis
        .pca
        .explained_variance
        .iter()
        .zip(&analysis.pca.explained_variance_ratio)
        .enumerate()
    {
        let _ = writeln!(csv, "{},{},{},{}", k + 1, fmt(*v), fmt(*r), fmt(cumulative[k]));
    }
    write_file(&out_dir.join("pca.csv"), &csv)?;
    let summary = format!(
        "key,value\ndemo_id,{}\nenv_id,{}\naction_dim,{}\nsuggested_latent_dim,{}\ncomponents_for_97pct,{}\n",
        demo.id(),
        demo.env_id(),
        demo.action_dim(),
        analysis.suggested_latent_dim,
        analysis.dims_for_97pct
    );
    write_file(&out_dir.join("pca_summary.csv"), &summary)?;
    let svg = line_chart_svg(
        &format!("PCA of {} actions", demo.env_id()),
        "components",
        "cumulative explained variance",
        &[Series {
            name: "cumulative ratio".into(),
            points: cumulative.iter().enumerate().map(|(k, c)| ((k + 1) as f64, *c)).collect(),
        }],
    );
    write_file(&out_dir.join("pca.svg"), &svg)?;
    Ok(analysis)
}

/// Trains the autoencoder prior and writes it as a prior checkpoint.
pub fn train_prior(
    demo_path: &Path,
    latent_dim: Option<usize>,
    config: &PriorTrainingConfig,
    out: &Path,
) -> Result<PriorTrainingReport> {
    let demo = load_demonstration(demo_path)?;
    let dim = latent_dim.unwrap_or_else(|| suggest_latent_dim(demo.action_dim()));
    let report = train_autoencoder(&demo, dim, config)?;
    Checkpoint::prior(report.prior.clone()).save(out)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub log: Vec<LogRow>,
    pub eval: EvalReport,
    pub checkpoint: PathBuf,
}

impl SeedRun {
    /// Mean training task return over the final logging window.
    pub fn final_train_return(&self) -> f64 {
        self.log.last().map_or(f64::NAN, |r| r.mean_task_return)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub out_dir: PathBuf,
    pub prior: Option<LatentActionPrior>,
    pub runs: Vec<SeedRun>,
}

impl ExperimentReport {
    pub fn eval_returns(&self) -> Vec<f64> {
        self.runs.iter().map(|r| r.eval.mean_task_return()).collect()
    }

    pub fn eval_summary(&self) -> Summary {
        Summary::of(&self.eval_returns())
    }

    pub fn train_summary(&self) -> Summary {
        Summary::of(&self.runs.iter().map(SeedRun::final_train_return).collect::<Vec<_>>())
    }
}

fn load_demo_for(cfg: &ExperimentConfig, env_id: &str, action_dim: usize) -> Result<Option<Demonstration>> {
    let Some(path) = cfg.demo.as_deref() else {
        return Ok(None);
    };
    let demo = load_demonstration(path)?;
    if demo.env_id() != env_id || demo.action_dim() != action_dim {
        return Err(Error::Config(format!(
            "demo {} was recorded on {} ({} actions) but the experiment runs {} ({} actions)",
            path.display(),
            demo.env_id(),
            demo.action_dim(),
            env_id,
            action_dim
        )));
    }
    Ok(Some(demo))
}

fn build_prior(cfg: &ExperimentConfig, demo: Option<&Demonstration>) -> Result<LatentActionPrior> {
    let prior = match (&cfg.prior, demo) {
        (Some(path), _) => Checkpoint::load(path)?.into_prior()?.with_full_action_weight(cfg.w_full)?,
        (None, Some(demo)) => {
            let dim = cfg.latent_dim.unwrap_or_else(|| suggest_latent_dim(demo.action_dim()));
            train_autoencoder(demo, dim, &cfg.prior_training())?.prior
        }
        (None, None) => return Err(Error::Config(format!("mode {} needs a prior or a demo", cfg.mode))),
    };
    if let Some(dim) = cfg.latent_dim {
        if dim != prior.latent_dim {
            return Err(Error::Config(format!(
                "latent_dim = {dim} but the prior has {} latent dimensions",
                prior.latent_dim
            )));
        }
    }
    Ok(prior)
}

/// Trains one policy per seed, evaluates each deterministically, and writes
/// logs, checkpoints and reports under `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let variant = cfg.variant();
    let probe = make_env(&cfg.env, variant, 0)?;
    let spec = probe.spec().clone();
    drop(probe);

    let demo = if cfg.mode == super::Mode::Ppo {
        None
    } else {
        load_demo_for(cfg, &spec.id, spec.action_dim)?
    };
    let prior = if cfg.mode.uses_prior() {
        Some(build_prior(cfg, demo.as_ref())?)
    } else {
        None
    };
    if let Some(p) = &prior {
        if p.action_dim() != spec.action_dim {
            return Err(Error::Config(format!(
                "prior decodes {} actions but {} takes {}",
                p.action_dim(),
                spec.id,
                spec.action_dim
            )));
        }
    }

    let out = cfg.out_dir.clone();
    let config_text = cfg.to_toml()?;
    write_file(&out.join("config.toml"), &config_text)?;
    if let Some(p) = &prior {
        Checkpoint::prior(p.clone()).save(&out.join("checkpoints").join("prior.toml"))?;
    }

    let mut runs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let opts = TrainOptions {
            ppo: cfg.ppo(seed),
            reward_weights: cfg.reward_weights(),
            record_wall_time: cfg.record_wall_time,
            record_actions: cfg.record_actions,
        };
        let mut factory = || make_env(&cfg.env, variant, seed);
        let TrainOutput { agent, log, actions, .. } = train(&mut factory, &opts, prior.clone(), demo.as_ref())?;

        let logs = out.join("logs");
        write_file(&logs.join(format!("seed_{seed}.csv")), &LogRow::to_csv(&log))?;
        if cfg.record_actions {
            let mut text = ActionRecord::csv_header(agent.params.head_dim(), agent.action_dim());
            text.push('\n');
            for a in &actions {
                text.push_str(&a.csv_line());
                text.push('\n');
            }
            write_file(&logs.join(format!("seed_{seed}_actions.csv")), &text)?;
        }

        let mut env = make_env(&cfg.env, variant, seed)?;
        let eval = evaluate(
            &agent,
            env.as_mut(),
            cfg.eval_episodes,
            ActMode::Deterministic,
            eval_seed(seed),
            demo.as_ref(),
        )?;

        let checkpoint = out.join("checkpoints").join(format!("policy_seed_{seed}.toml"));
        Checkpoint::policy(PolicyCheckpoint {
            env_id: cfg.env.clone(),
            variant,
            mode: cfg.mode,
            seed,
            config: config_text.clone(),
            agent,
            demo: demo.clone(),
        })
        .save(&checkpoint)?;
        runs.push(SeedRun {
            seed,
            log,
            eval,
            checkpoint,
        });
    }

    let report = ExperimentReport {
        out_dir: out,
        prior,
        runs,
    };
    write_experiment_reports(cfg, &report)?;
    Ok(report)
}

fn write_experiment_reports(cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<()> {
    let dir = report.out_dir.join("reports");
    let mut seeds = String::from(
        "seed,eval_mean_task_return,eval_std_task_return,eval_mean_style_return,eval_mean_length,\
         final_train_task_return,final_train_style_return\n",
    );
    for r in &report.runs {
        let last_style = r.log.last().map_or(f64::NAN, |l| l.mean_style_return);
        let _ = writeln!(
            seeds,
            "{},{},{},{},{},{},{}",
            r.seed,
            fmt(r.eval.mean_task_return()),
            fmt(r.eval.std_task_return()),
            fmt(r.eval.mean_style_return()),
            fmt(r.eval.mean_length()),
            fmt(r.final_train_return()),
            fmt(last_style)
        );
    }
    write_file(&dir.join("seeds.csv"), &seeds)?;

    let style: Vec<f64> = report.runs.iter().map(|r| r.eval.mean_style_return()).collect();
    let summary = format!(
        "{SUMMARY_HEADER}\n{}\n{}\n{}\n",
        summary_line("eval_task_return", &report.eval_summary()),
        summary_line("final_train_task_return", &report.train_summary()),
        summary_line("eval_style_return", &Summary::of(&style)),
    );
    write_file(&dir.join("summary.csv"), &summary)?;

    let curves: Vec<(u64, &[LogRow])> = report.runs.iter().map(|r| (r.seed, r.log.as_slice())).collect();
    let title = format!("{} on {} x{}", cfg.mode, cfg.env, cfg.speed_multiplier);
    write_file(&dir.join("learning_curve.svg"), &learning_curve_svg(&title, &curves))
}

#[derive(Debug, Clone)]
pub struct CheckpointEval {
    pub env_id: String,
    pub variant: Variant,
    pub report: EvalReport,
}

/// Loads a policy checkpoint and runs `episodes` evaluation episodes, on the
/// training variant unless `variant` overrides it.
pub fn evaluate_checkpoint(
    path: &Path,
    episodes: usize,
    deterministic: bool,
    seed: u64,
    variant: Option<Variant>,
) -> Result<CheckpointEval> {
    let policy = Checkpoint::load(path)?.into_policy()?;
    let variant = variant.unwrap_or(policy.variant);
    let mut env: Box<dyn Env> = make_env(&policy.env_id, variant, seed)?;
    let mode = if deterministic {
        ActMode::Deterministic
    } else {
        ActMode::Sample
    };
    let report = evaluate(&policy.agent, env.as_mut(), episodes, mode, seed, policy.demo.as_ref())?;
    Ok(CheckpointEval {
        env_id: policy.env_id,
        variant,
        report,
    })
}

/// Writes `eval_episodes.csv` and `eval_summary.csv` under `dir`.
pub fn write_eval_reports(eval: &CheckpointEval, dir: &Path) -> Result<()> {
    let mut episodes = String::from("episode,task_return,style_return,length,error\n");
    for (k, e) in eval.report.episodes.iter().enumerate() {
        let _ = writeln!(
            episodes,
            "{k},{},{},{},{}",
            fmt(e.task_return),
            fmt(e.style_return.unwrap_or(f64::NAN)),
            e.length,
            e.error
        );
    }
    write_file(&dir.join("eval_episodes.csv"), &episodes)?;
    let r = &eval.report;
    let summary = format!(
        "env_id,speed_multiplier,any_direction,tracking,episodes,mean_task_return,std_task_return,mean_style_return,mean_length\n\
         {},{},{},{},{},{},{},{},{}\n",
        eval.env_id,
        eval.variant.speed_multiplier,
        eval.variant.any_direction,
        eval.variant.is_tracking(),
        r.episodes.len(),
        fmt(r.mean_task_return()),
        fmt(r.std_task_return()),
        fmt(r.mean_style_return()),
        fmt(r.mean_length())
    );
    write_file(&dir.join("eval_summary.csv"), &summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    WFull,
    LatentDim,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::WFull => "w_full",
            SweepParam::LatentDim => "latent_dim",
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w_full" => Ok(SweepParam::WFull),
            "latent_dim" => Ok(SweepParam::LatentDim),
            _ => Err(Error::Config(format!("cannot sweep `{s}` (expected w_full or latent_dim)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub summary: Summary,
    pub out_dir: PathBuf,
}

/// One experiment per value, each under `<out_dir>/sweep/<param>_<value>`,
/// with a combined table and chart in `<out_dir>/reports`. Points are sorted
/// by value.
pub fn sweep(cfg: &ExperimentConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepPoint>> {
    if !cfg.mode.uses_prior() {
        return Err(Error::Config(format!("sweeping {} needs a latent mode, not {}", param.name(), cfg.mode)));
    }
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Config("sweep values must be distinct".into()));
    }
    let a_full = make_env(&cfg.env, cfg.variant(), 0)?.spec().action_dim;
    for &v in &sorted {
        let ok = match param {
            SweepParam::WFull => (0.0..=1.0).contains(&v),
            SweepParam::LatentDim => v.fract() == 0.0 && v >= 1.0 && v <= a_full as f64,
        };
        if !ok {
            let range = match param {
                SweepParam::WFull => "[0, 1]".to_string(),
                SweepParam::LatentDim => format!("integers in [1, {a_full}]"),
            };
            return Err(Error::Config(format!("{} value {v} outside {range}", param.name())));
        }
    }
    if param == SweepParam::LatentDim && cfg.demo.is_none() {
        return Err(Error::Config("a latent_dim sweep trains its own priors and needs a demo".into()));
    }

    let mut points = Vec::with_capacity(sorted.len());
    for &v in &sorted {
        let mut sub = cfg.clone();
        sub.out_dir = cfg.out_dir.join("sweep").join(format!("{}_{v}", param.name()));
        match param {
            SweepParam::WFull => sub.w_full = v,
            SweepParam::LatentDim => {
                sub.latent_dim = Some(v as usize);
                sub.prior = None;
            }
        }
        let report = run_experiment(&sub)?;
        points.push(SweepPoint {
            value: v,
            summary: report.eval_summary(),
            out_dir: sub.out_dir,
        });
    }

    let dir = cfg.out_dir.join("reports");
    let mut csv = format!("{}\n", SUMMARY_HEADER.replacen("metric", param.name(), 1));
    for p in &points {
        csv.push_str(&summary_line(&p.value.to_string(), &p.summary));
        csv.push('\n');
    }
    write_file(&dir.join(format!("sweep_{}.csv", param.name())), &csv)?;
    let bars: Vec<(String, f64, f64)> = points
        .iter()
        .map(|p| (p.value.to_string(), p.summary.mean, p.summary.std))
        .collect();
    let svg = bar_chart_svg(
        &format!("{} sweep, {} on {}", param.name(), cfg.mode, cfg.env),
        param.name(),
        "eval task return",
        &bars,
    );
    write_file(&dir.join(format!("sweep_{}.svg", param.name())), &svg)?;
    Ok(points)
}
