use crate::error::{ensure_len, Error, Result};

/// Generalised advantage estimates for one trajectory segment.
///
/// `episode_starts[t]` marks that step `t` began a new episode, so no value
/// flows back across it. `last_episode_start` says whether the step after the
/// segment begins a new episode; `last_value` is the value estimate there.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    episode_starts: &[bool],
    last_value: f64,
    last_episode_start: bool,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rewards.len();
    ensure_len("gae values", n, values.len())?;
    ensure_len("gae episode starts", n, episode_starts.len())?;
    let mut adv = vec![0.0; n];
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let (next_value, next_start) = if t + 1 == n {
            (last_value, last_episode_start)
        } else {
            (values[t + 1], episode_starts[t + 1])
        };
        let carry = if next_start { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * carry - values[t];
        next_adv = delta + gamma * lambda * carry * next_adv;
        adv[t] = next_adv;
    }
    if !adv.iter().all(|a| a.is_finite()) {
        return Err(Error::NonFinite {
            context: "advantages".into(),
        });
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}

/// Rollout storage for `n_envs` lockstep environments; entry `t * n_envs + i`
/// is step `t` of environment `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer {
    pub n_steps: usize,
    pub n_envs: usize,
    pub observations: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub log_probs: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub episode_starts: Vec<bool>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBuffer {
    pub fn new(n_steps: usize, n_envs: usize) -> Self {
        let cap = n_steps * n_envs;
        RolloutBuffer {
            n_steps,
            n_envs,
            observations: Vec::with_capacity(cap),
            actions: Vec::with_capacity(cap),
            log_probs: Vec::with_capacity(cap),
            values: Vec::with_capacity(cap),
            rewards: Vec::with_capacity(cap),
            episode_starts: Vec::with_capacity(cap),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.n_steps * self.n_envs
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.capacity()
    }

    pub fn push(
        &mut self,
        observation: Vec<f64>,
        action: Vec<f64>,
        log_prob: f64,
        value: f64,
        reward: f64,
        episode_start: bool,
    ) {
        self.observations.push(observation);
        self.actions.push(action);
        self.log_probs.push(log_prob);
        self.values.push(value);
        self.rewards.push(reward);
        self.episode_starts.push(episode_start);
    }

    /// Adds to the most recent reward of environment `env` (time-limit
    /// bootstrapping).
    pub fn add_to_last_reward(&mut self, env: usize, amount: f64) {
        let idx = self.len() - self.n_envs + env;
        self.rewards[idx] += amount;
    }

    pub fn compute_advantages(
        &mut self,
        last_values: &[f64],
        last_episode_starts: &[bool],
        gamma: f64,
        lambda: f64,
    ) -> Result<()> {
        if !self.is_full() {
            return Err(Error::InvalidArgument(format!(
                "rollout buffer holds {} of {} steps",
                self.len(),
                self.capacity()
            )));
        }
        ensure_len("last values", self.n_envs, last_values.len())?;
        ensure_len("last episode starts", self.n_envs, last_episode_starts.len())?;
        let cap = self.capacity();
        self.advantages = vec![0.0; cap];
        self.returns = vec![0.0; cap];
        for env in 0..self.n_envs {
            let column = |v: &[f64]| -> Vec<f64> { (0..self.n_steps).map(|t| v[t * self.n_envs + env]).collect() };
            let starts: Vec<bool> = (0..self.n_steps)
                .map(|t| self.episode_starts[t * self.n_envs + env])
                .collect();
            let (adv, ret) = compute_gae(
                &column(&self.rewards),
                &column(&self.values),
                &starts,
                last_values[env],
                last_episode_starts[env],
                gamma,
                lambda,
            )?;
            for t in 0..self.n_steps {
                self.advantages[t * self.n_envs + env] = adv[t];
                self.returns[t * self.n_envs + env] = ret[t];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_example() {
        let (adv, ret) = compute_gae(&[1.0, 1.0], &[0.0, 0.0], &[false, false], 0.0, false, 1.0, 1.0).unwrap();
        assert_eq!(adv, vec![2.0, 1.0]);
        assert_eq!(ret, vec![2.0, 1.0]);
    }

    #[test]
    fn zero_discount_is_one_step_error() {
        let r = [0.5, -1.0, 2.0];
        let v = [0.1, 0.2, 0.3];
        let (adv, _) = compute_gae(&r, &v, &[true, false, false], 9.0, false, 0.0, 0.95).unwrap();
        for t in 0..3 {
            assert!((adv[t] - (r[t] - v[t])).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_rewards_and_values() {
        let (adv, _) = compute_gae(&[0.0; 5], &[0.0; 5], &[false; 5], 0.0, true, 0.99, 0.95).unwrap();
        assert_eq!(adv, vec![0.0; 5]);
    }

    #[test]
    fn episode_boundary_blocks_bootstrap() {
        // step 1 starts a new episode, so step 0 sees no future
        let (adv, _) = compute_gae(&[1.0, 5.0], &[0.0, 10.0], &[true, true], 0.0, false, 0.9, 0.9).unwrap();
        assert!((adv[0] - 1.0).abs() < 1e-15);
        assert!((adv[1] - (5.0 - 10.0)).abs() < 1e-15);
    }

    #[test]
    fn buffer_columns_are_independent() {
        let mut buf = RolloutBuffer::new(2, 2);
        for t in 0..2 {
            for env in 0..2 {
                let r = if env == 0 { 1.0 } else { 0.0 };
                buf.push(vec![], vec![], 0.0, 0.0, r, t == 0);
            }
        }
        assert!(buf.is_full());
        buf.compute_advantages(&[0.0, 0.0], &[false, false], 1.0, 1.0).unwrap();
        assert_eq!(buf.advantages, vec![2.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn partial_buffer_rejected() {
        let mut buf = RolloutBuffer::new(3, 1);
        buf.push(vec![], vec![], 0.0, 0.0, 0.0, true);
        assert!(buf.compute_advantages(&[0.0], &[false], 0.99, 0.95).is_err());
    }
}
