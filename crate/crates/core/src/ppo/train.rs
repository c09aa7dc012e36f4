use std::collections::VecDeque;
use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::update::PpoOptimizer;
use super::{ppo_update, split_action_head, ActMode, ActOutput, PolicyParams, PpoConfig, RolloutBuffer, RunningNorm};
use crate::demo::Demonstration;
use crate::envs::{Env, EnvSpec};
use crate::error::{ensure_len, Error, Result};
use crate::imitation::{expert_pose_at, mix_rewards, style_reward_wrapped, PhaseClock, RewardWeights};
use crate::latent::{blend_action, LatentActionPrior};

pub const LOG_HEADER: &str = "update,env_steps,mean_task_return,mean_style_return,ep_len_mean,\
mean_abs_decoded,mean_abs_residual,policy_loss,value_loss,entropy,approx_kl,clip_fraction,wall_seconds";

const RETURN_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOptions {
    pub ppo: PpoConfig,
    pub reward_weights: RewardWeights,
    /// Fill `wall_seconds`; off by default so logs are reproducible.
    pub record_wall_time: bool,
    /// Keep every (head, decoded, residual, applied) tuple.
    pub record_actions: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            ppo: PpoConfig::default(),
            reward_weights: RewardWeights::task_only(),
            record_wall_time: false,
            record_actions: false,
        }
    }
}

/// Everything needed to act: networks, normalisation statistics, and the
/// optional prior and phase input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub params: PolicyParams,
    pub norm: RunningNorm,
    pub prior: Option<LatentActionPrior>,
    /// Gait-cycle length driving the phase input, if the policy has one.
    pub phase_frames: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Composed {
    pub decoded: Vec<f64>,
    pub residual: Vec<f64>,
    pub applied: Vec<f64>,
    /// Mean `|(1 - w_full) · decoded|` over action dimensions.
    pub decoded_contribution: f64,
    /// Mean `|w_full · residual|` over action dimensions.
    pub residual_contribution: f64,
}

impl Agent {
    pub fn new(
        spec: &EnvSpec,
        prior: Option<LatentActionPrior>,
        phase_frames: Option<usize>,
        ppo: &PpoConfig,
    ) -> Result<Self> {
        let a_l = prior.as_ref().map_or(0, |p| p.latent_dim);
        if let Some(p) = &prior {
            p.validate()?;
            ensure_len("prior action dimension", spec.action_dim, p.action_dim())?;
        }
        let obs_in = spec.obs_dim + usize::from(phase_frames.is_some());
        Ok(Agent {
            params: PolicyParams::new(obs_in, a_l + spec.action_dim, &ppo.hidden, ppo.seed)?,
            norm: RunningNorm::new(spec.obs_dim),
            prior,
            phase_frames,
        })
    }

    pub fn action_dim(&self) -> usize {
        self.params.head_dim() - self.latent_dim()
    }

    pub fn latent_dim(&self) -> usize {
        self.prior.as_ref().map_or(0, |p| p.latent_dim)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let phase = usize::from(self.phase_frames.is_some());
        ensure_len("policy input", self.norm.dim() + phase, self.params.obs_dim())?;
        if let Some(p) = &self.prior {
            p.validate()?;
            ensure_len("prior action dimension", self.action_dim(), p.action_dim())?;
        }
        Ok(())
    }

    pub fn new_clock(&self) -> Result<Option<PhaseClock>> {
        self.phase_frames.map(PhaseClock::new).transpose()
    }

    /// Normalised observation with the raw phase appended.
    pub fn policy_input(&self, raw_obs: &[f64], clock: Option<&PhaseClock>) -> Result<Vec<f64>> {
        let mut x = self.norm.normalize(raw_obs)?;
        if let Some(c) = clock {
            x.push(c.normalized());
        }
        Ok(x)
    }

    /// Maps a policy head to the environment action.
    pub fn compose(&self, head: &[f64]) -> Result<Composed> {
        let a_full = self.action_dim();
        let mean_abs = |v: &[f64], w: f64| v.iter().map(|x| (w * x).abs()).sum::<f64>() / v.len() as f64;
        match &self.prior {
            None => {
                let (_, residual) = split_action_head(head, 0, a_full)?;
                let mut applied = residual.clone();
                crate::latent::clip_unit(&mut applied);
                Ok(Composed {
                    decoded: vec![0.0; a_full],
                    decoded_contribution: 0.0,
                    residual_contribution: mean_abs(&residual, 1.0),
                    residual,
                    applied,
                })
            }
            Some(prior) => {
                let (latent, residual) = split_action_head(head, prior.latent_dim, a_full)?;
                let decoded = prior.decode(&latent)?;
                let w = prior.full_action_weight;
                let mut applied = blend_action(&decoded, &residual, w)?;
                crate::latent::clip_unit(&mut applied);
                Ok(Composed {
                    decoded_contribution: mean_abs(&decoded, 1.0 - w),
                    residual_contribution: mean_abs(&residual, w),
                    decoded,
                    residual,
                    applied,
                })
            }
        }
    }

    pub fn act<R: Rng + ?Sized>(
        &self,
        raw_obs: &[f64],
        clock: Option<&PhaseClock>,
        mode: ActMode,
        rng: &mut R,
    ) -> Result<(ActOutput, Composed)> {
        let input = self.policy_input(raw_obs, clock)?;
        let out = self.params.act(&input, mode, rng)?;
        let composed = self.compose(&out.head)?;
        Ok((out, composed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeStats {
    pub task_return: f64,
    /// Only when a demonstration is attached.
    pub style_return: Option<f64>,
    pub length: usize,
    pub error: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub update: usize,
    pub env_steps: usize,
    pub mean_task_return: f64,
    pub mean_style_return: f64,
    pub ep_len_mean: f64,
    pub mean_abs_decoded: f64,
    pub mean_abs_residual: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
    pub wall_seconds: f64,
}

pub(crate) fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x}")
    }
}

impl LogRow {
    pub fn csv_line(&self) -> String {
        let vals = [
            self.mean_task_return,
            self.mean_style_return,
            self.ep_len_mean,
            self.mean_abs_decoded,
            self.mean_abs_residual,
            self.policy_loss,
            self.value_loss,
            self.entropy,
            self.approx_kl,
            self.clip_fraction,
            self.wall_seconds,
        ];
        let mut s = format!("{},{}", self.update, self.env_steps);
        for v in vals {
            s.push(',');
            s.push_str(&fmt_f64(v));
        }
        s
    }

    pub fn to_csv(rows: &[LogRow]) -> String {
        let mut out = String::from(LOG_HEADER);
        out.push('\n');
        for r in rows {
            out.push_str(&r.csv_line());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionRecord {
    pub update: usize,
    pub step: usize,
    pub env: usize,
    pub head: Vec<f64>,
    pub decoded: Vec<f64>,
    pub residual: Vec<f64>,
    pub applied: Vec<f64>,
}

impl ActionRecord {
    pub fn csv_header(head_dim: usize, a_full: usize) -> String {
        let mut s = String::from("update,step,env");
        for (name, n) in [("head", head_dim), ("decoded", a_full), ("residual", a_full), ("applied", a_full)] {
            for j in 0..n {
                let _ = write!(s, ",{name}_{j}");
            }
        }
        s
    }

    pub fn csv_line(&self) -> String {
        let mut s = format!("{},{},{}", self.update, self.step, self.env);
        for v in self.head.iter().chain(&self.decoded).chain(&self.residual).chain(&self.applied) {
            s.push(',');
            s.push_str(&fmt_f64(*v));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub agent: Agent,
    pub log: Vec<LogRow>,
    pub actions: Vec<ActionRecord>,
    pub episodes: Vec<EpisodeStats>,
}

struct StyleTarget<'a> {
    demo: &'a Demonstration,
    angular: Vec<bool>,
}

impl StyleTarget<'_> {
    fn reward(&self, pose: &crate::imitation::PoseFeatures, clock: &PhaseClock) -> Result<f64> {
        let expert = expert_pose_at(self.demo, clock.value())?;
        style_reward_wrapped(pose, &expert, &self.angular)
    }
}

fn style_target<'a>(spec: &EnvSpec, demo: Option<&'a Demonstration>) -> Result<Option<StyleTarget<'a>>> {
    let Some(demo) = demo else { return Ok(None) };
    demo.validate()?;
    ensure_len("demonstration action dimension", spec.action_dim, demo.action_dim())?;
    ensure_len("demonstration pose dimension", spec.pose_dim(), demo.pose_dim())?;
    Ok(Some(StyleTarget {
        demo,
        angular: spec.pose_angular.clone(),
    }))
}

/// Cycle length of the phase input: the demonstration's if one is attached,
/// otherwise the prior's source cycle.
fn phase_frames(demo: Option<&Demonstration>, prior: Option<&LatentActionPrior>) -> Result<Option<usize>> {
    match (demo, prior) {
        (Some(d), Some(p)) if p.source_cycle_frames != 0 && p.source_cycle_frames != d.n_frames() => {
            Err(Error::Config(format!(
                "prior was trained on a {}-frame cycle but the demonstration has {} frames",
                p.source_cycle_frames,
                d.n_frames()
            )))
        }
        (Some(d), _) => Ok(Some(d.n_frames())),
        (None, Some(p)) if p.source_cycle_frames == 0 => Err(Error::Config(
            "prior does not record its gait-cycle length; attach the demonstration".into(),
        )),
        (None, Some(p)) => Ok(Some(p.source_cycle_frames)),
        (None, None) => Ok(None),
    }
}

fn mean_or_nan(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

struct Worker {
    env: Box<dyn Env>,
    obs: Vec<f64>,
    clock: Option<PhaseClock>,
    episode_start: bool,
    task_return: f64,
    style_return: f64,
    length: usize,
}

/// Trains a policy on environments built by `make_env`, optionally with a
/// latent prior and a demonstration for the style reward and phase input.
pub fn train(
    make_env: &mut dyn FnMut() -> Result<Box<dyn Env>>,
    opts: &TrainOptions,
    prior: Option<LatentActionPrior>,
    demo: Option<&Demonstration>,
) -> Result<TrainOutput> {
    let cfg = &opts.ppo;
    cfg.validate()?;
    opts.reward_weights.validate()?;
    if demo.is_none() && opts.reward_weights.w_style != 0.0 {
        return Err(Error::Config("a style weight needs a demonstration".into()));
    }
    let mut envs: Vec<Box<dyn Env>> = (0..cfg.n_envs).map(|_| make_env()).collect::<Result<_>>()?;
    let spec = envs[0].spec().clone();
    for e in &envs[1..] {
        if e.spec() != &spec {
            return Err(Error::Config("environment factory returned differing environments".into()));
        }
    }
    let style = style_target(&spec, demo)?;
    let frames = phase_frames(demo, prior.as_ref())?;
    let mut agent = Agent::new(&spec, prior, frames, cfg)?;
    let mut opt = PpoOptimizer::new(&agent.params, cfg);

    let mut seed_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    seed_rng.set_stream(1);
    let mut act_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    act_rng.set_stream(2);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(3);

    let mut workers: Vec<Worker> = envs
        .drain(..)
        .map(|mut env| {
            let obs = env.reset(seed_rng.random());
            Ok(Worker {
                env,
                obs,
                clock: agent.new_clock()?,
                episode_start: true,
                task_return: 0.0,
                style_return: 0.0,
                length: 0,
            })
        })
        .collect::<Result<_>>()?;

    let started = Instant::now();
    let mut recent: VecDeque<EpisodeStats> = VecDeque::with_capacity(RETURN_WINDOW);
    let mut episodes = Vec::new();
    let mut log = Vec::with_capacity(cfg.n_updates());
    let mut actions = Vec::new();
    let mut env_steps = 0usize;

    for update in 1..=cfg.n_updates() {
        let mut buffer = RolloutBuffer::new(cfg.rollout_length, cfg.n_envs);
        let (mut dec_sum, mut res_sum) = (0.0, 0.0);
        for step in 0..cfg.rollout_length {
            let raw: Vec<Vec<f64>> = workers.iter().map(|w| w.obs.clone()).collect();
            agent.norm.update(&raw)?;
            for (i, w) in workers.iter_mut().enumerate() {
                let input = agent.policy_input(&w.obs, w.clock.as_ref())?;
                let out = agent.params.act(&input, ActMode::Sample, &mut act_rng)?;
                let composed = agent.compose(&out.head)?;
                dec_sum += composed.decoded_contribution;
                res_sum += composed.residual_contribution;
                let t = w.env.step(&composed.applied);
                env_steps += 1;

                let r_style = match (&style, &w.clock) {
                    (Some(s), Some(c)) if !t.error => Some(s.reward(&t.pose, c)?),
                    _ => None,
                };
                let mut reward = match r_style {
                    Some(rs) => mix_rewards(t.task_reward, rs, &opts.reward_weights),
                    None => opts.reward_weights.w_task * t.task_reward,
                };
                if let Some(c) = w.clock.as_mut() {
                    c.tick();
                }
                w.task_return += t.task_reward;
                w.style_return += r_style.unwrap_or(0.0);
                w.length += 1;

                if t.truncated && !t.terminated {
                    let last = agent.policy_input(&t.observation, w.clock.as_ref())?;
                    reward += cfg.gamma * agent.params.value(&last)?;
                }
                if opts.record_actions {
                    actions.push(ActionRecord {
                        update,
                        step,
                        env: i,
                        head: out.head.clone(),
                        decoded: composed.decoded,
                        residual: composed.residual,
                        applied: composed.applied,
                    });
                }
                buffer.push(input, out.head, out.log_prob, out.value, reward, w.episode_start);
                w.episode_start = false;

                if t.done() {
                    let ep = EpisodeStats {
                        task_return: w.task_return,
                        style_return: style.as_ref().map(|_| w.style_return),
                        length: w.length,
                        error: t.error,
                    };
                    if recent.len() == RETURN_WINDOW {
                        recent.pop_front();
                    }
                    recent.push_back(ep);
                    episodes.push(ep);
                    w.obs = w.env.reset(seed_rng.random());
                    if let Some(c) = w.clock.as_mut() {
                        c.reset();
                    }
                    w.episode_start = true;
                    w.task_return = 0.0;
                    w.style_return = 0.0;
                    w.length = 0;
                } else {
                    w.obs = t.observation;
                }
            }
        }

        let mut last_values = Vec::with_capacity(cfg.n_envs);
        for w in &workers {
            let input = agent.policy_input(&w.obs, w.clock.as_ref())?;
            last_values.push(agent.params.value(&input)?);
        }
        let last_starts: Vec<bool> = workers.iter().map(|w| w.episode_start).collect();
        buffer.compute_advantages(&last_values, &last_starts, cfg.gamma, cfg.gae_lambda)?;
        let stats = ppo_update(&mut agent.params, &mut opt, &buffer, cfg, &mut shuffle_rng)?;

        let n = buffer.len() as f64;
        log.push(LogRow {
            update,
            env_steps,
            mean_task_return: mean_or_nan(recent.iter().map(|e| e.task_return)),
            mean_style_return: mean_or_nan(recent.iter().filter_map(|e| e.style_return)),
            ep_len_mean: mean_or_nan(recent.iter().map(|e| e.length as f64)),
            mean_abs_decoded: dec_sum / n,
            mean_abs_residual: res_sum / n,
            policy_loss: stats.policy_loss,
            value_loss: stats.value_loss,
            entropy: stats.entropy,
            approx_kl: stats.approx_kl,
            clip_fraction: stats.clip_fraction,
            wall_seconds: if opts.record_wall_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
        });
    }
    Ok(TrainOutput {
        agent,
        log,
        actions,
        episodes,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub episodes: Vec<EpisodeStats>,
}

impl EvalReport {
    pub fn task_returns(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.task_return).collect()
    }

    pub fn mean_task_return(&self) -> f64 {
        mean_or_nan(self.episodes.iter().map(|e| e.task_return))
    }

    /// Population standard deviation of the task returns.
    pub fn std_task_return(&self) -> f64 {
        let m = self.mean_task_return();
        mean_or_nan(self.episodes.iter().map(|e| (e.task_return - m).powi(2))).sqrt()
    }

    pub fn mean_style_return(&self) -> f64 {
        mean_or_nan(self.episodes.iter().filter_map(|e| e.style_return))
    }

    pub fn mean_length(&self) -> f64 {
        mean_or_nan(self.episodes.iter().map(|e| e.length as f64))
    }
}

/// Runs `episodes` full episodes with frozen normalisation. Episode `k` is
/// reset with seed `seed + k`.
pub fn evaluate(
    agent: &Agent,
    env: &mut dyn Env,
    episodes: usize,
    mode: ActMode,
    seed: u64,
    demo: Option<&Demonstration>,
) -> Result<EvalReport> {
    if episodes == 0 {
        return Err(Error::InvalidArgument("evaluation needs at least one episode".into()));
    }
    agent.validate()?;
    let spec = env.spec().clone();
    ensure_len("environment observation", agent.norm.dim(), spec.obs_dim)?;
    ensure_len("environment action", agent.action_dim(), spec.action_dim)?;
    let style = style_target(&spec, demo)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4);
    let mut out = Vec::with_capacity(episodes);
    for k in 0..episodes {
        let mut obs = env.reset(seed.wrapping_add(k as u64));
        let mut clock = agent.new_clock()?;
        let (mut task, mut sty, mut length) = (0.0, 0.0, 0usize);
        loop {
            let (_, composed) = agent.act(&obs, clock.as_ref(), mode, &mut rng)?;
            let t = env.step(&composed.applied);
            if let (Some(s), Some(c)) = (&style, &clock) {
                if !t.error {
                    sty += s.reward(&t.pose, c)?;
                }
            }
            if let Some(c) = clock.as_mut() {
                c.tick();
            }
            task += t.task_reward;
            length += 1;
            if t.done() {
                out.push(EpisodeStats {
                    task_return: task,
                    style_return: style.as_ref().map(|_| sty),
                    length,
                    error: t.error,
                });
                break;
            }
            obs = t.observation;
        }
    }
    Ok(EvalReport { episodes: out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{default_oscillator, generate_demonstration, make_env, Variant};
    use crate::latent::compose_action;

    fn small(total: usize) -> TrainOptions {
        TrainOptions {
            ppo: PpoConfig {
                rollout_length: 128,
                total_steps: total,
                hidden: vec![16, 16],
                ..PpoConfig::default()
            },
            ..TrainOptions::default()
        }
    }

    fn factory() -> impl FnMut() -> Result<Box<dyn Env>> {
        || make_env("point_gait", Variant::default(), 0)
    }

    fn demo() -> Demonstration {
        let mut env = make_env("point_gait", Variant::default(), 0).unwrap();
        let c = default_oscillator("point_gait").unwrap();
        generate_demonstration(env.as_mut(), &c, c.settle_cycles).unwrap()
    }

    #[test]
    fn baseline_head_is_action_sized_and_runs() {
        let out = train(&mut factory(), &small(512), None, None).unwrap();
        assert_eq!(out.agent.params.head_dim(), 4);
        assert_eq!(out.agent.params.obs_dim(), 5);
        assert_eq!(out.log.len(), 4);
        assert_eq!(out.log[3].env_steps, 512);
        assert!(out.log.iter().all(|r| r.mean_style_return.is_nan()));
        assert!(out.log.iter().all(|r| r.mean_abs_decoded == 0.0));
    }

    #[test]
    fn identical_seeds_identical_logs() {
        let a = train(&mut factory(), &small(384), None, None).unwrap();
        let b = train(&mut factory(), &small(384), None, None).unwrap();
        assert_eq!(LogRow::to_csv(&a.log), LogRow::to_csv(&b.log));
        let mut other = small(384);
        other.ppo.seed = 1;
        let c = train(&mut factory(), &other, None, None).unwrap();
        assert_ne!(LogRow::to_csv(&a.log), LogRow::to_csv(&c.log));
    }

    #[test]
    fn zero_style_weight_matches_task_only() {
        let d = demo();
        let prior = LatentActionPrior::untrained(4, 2, 0).unwrap();
        let mut with_style = small(256);
        with_style.reward_weights = RewardWeights {
            w_task: 1.0,
            w_style: 0.0,
        };
        let a = train(&mut factory(), &with_style, Some(prior.clone()), Some(&d)).unwrap();
        let b = train(&mut factory(), &small(256), Some(prior), Some(&d)).unwrap();
        assert_eq!(LogRow::to_csv(&a.log), LogRow::to_csv(&b.log));
    }

    #[test]
    fn full_residual_weight_applies_clipped_residual() {
        let d = demo();
        let prior = LatentActionPrior::untrained(4, 2, 0)
            .unwrap()
            .with_full_action_weight(1.0)
            .unwrap();
        let mut opts = small(256);
        opts.record_actions = true;
        let out = train(&mut factory(), &opts, Some(prior), Some(&d)).unwrap();
        assert_eq!(out.actions.len(), 256);
        for r in &out.actions {
            let clipped: Vec<f64> = r.residual.iter().map(|x| x.clamp(-1.0, 1.0)).collect();
            assert_eq!(r.applied, clipped);
            assert_eq!(r.applied, compose_action(&r.decoded, &r.residual, 1.0).unwrap());
        }
        assert_eq!(out.agent.params.head_dim(), 6);
        assert_eq!(out.agent.params.obs_dim(), 6);
    }

    #[test]
    fn phase_channel_bypasses_normalisation() {
        let d = demo();
        let out = train(&mut factory(), &small(128), None, Some(&d)).unwrap();
        let agent = &out.agent;
        assert_eq!(agent.norm.dim(), 5);
        let clock = PhaseClock::at(d.n_frames(), 7).unwrap();
        let x = agent.policy_input(&[0.0; 5], Some(&clock)).unwrap();
        assert_eq!(x[5], 7.0 / d.n_frames() as f64);
    }

    #[test]
    fn evaluation_is_deterministic() {
        let out = train(&mut factory(), &small(256), None, None).unwrap();
        let mut env = make_env("point_gait", Variant::default(), 0).unwrap();
        let a = evaluate(&out.agent, env.as_mut(), 3, ActMode::Deterministic, 11, None).unwrap();
        let b = evaluate(&out.agent, env.as_mut(), 3, ActMode::Deterministic, 11, None).unwrap();
        assert_eq!(a, b);
        assert!(evaluate(&out.agent, env.as_mut(), 0, ActMode::Deterministic, 0, None).is_err());
        assert_eq!(a.mean_length(), 500.0);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let d = demo();
        let prior = LatentActionPrior::untrained(6, 3, 0).unwrap();
        assert!(train(&mut factory(), &small(128), Some(prior), Some(&d)).is_err());
        let mut styled = small(128);
        styled.reward_weights = RewardWeights::default();
        assert!(train(&mut factory(), &styled, None, None).is_err());
    }
}
