//! Quantile-critic actor-critic learner.
//!
//! An ensemble of quantile critics is trained by quantile-Huber regression
//! against a truncated mixture of target-critic atoms (the top atoms of each
//! critic are dropped before bootstrapping, which fights overestimation). The
//! squashed-Gaussian actor ascends the truncated critic value plus an entropy
//! bonus whose temperature is auto-tuned toward a target entropy.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::nets::{Adam, Mlp, ScalarAdam};
use super::policy::{clamp_log_std, clamp_log_std_grad, squash_sample};
use super::quantile::{quantile_fractions, quantile_huber_loss, truncate_pooled_with_sources};
use super::replay::{ReplayBuffer, Transition};

#[derive(Debug, Error)]
pub enum LearnerError {
    #[error("non-finite {context} loss; diagnostics: {diagnostics}")]
    NonFiniteLoss { context: &'static str, diagnostics: String },
    #[error("replay buffer holds {available} transitions, batch needs {needed}")]
    NotEnoughData { available: usize, needed: usize },
}

/// Temperature handling for the entropy bonus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// Fixed temperature.
    Fixed(f64),
    /// Auto-tuned toward the target entropy, starting at the given value.
    Auto { init: f64 },
}

/// Hyperparameters of the learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub hidden: Vec<usize>,
    pub n_critics: usize,
    pub n_quantiles: usize,
    /// Atoms dropped from the top of each critic before bootstrapping.
    pub drop_top_per_critic: usize,
    pub gamma: f64,
    /// Target-network smoothing coefficient per update.
    pub polyak: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    pub batch_size: usize,
    pub replay_capacity: usize,
    pub alpha: AlphaMode,
    /// Defaults to −act_dim when unset.
    pub target_entropy: Option<f64>,
    /// Action bound; actions are `limit·tanh(·)`.
    pub action_limit: f64,
    pub huber_kappa: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            obs_dim: 38,
            act_dim: 8,
            hidden: vec![64, 64],
            n_critics: 2,
            n_quantiles: 25,
            drop_top_per_critic: 2,
            gamma: 0.98,
            polyak: 0.005,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            alpha_lr: 3e-4,
            batch_size: 256,
            replay_capacity: 100_000,
            alpha: AlphaMode::Auto { init: 0.1 },
            target_entropy: None,
            action_limit: 0.02,
            huber_kappa: 1.0,
        }
    }
}

impl LearnerConfig {
    fn target_entropy(&self) -> f64 {
        self.target_entropy.unwrap_or(-(self.act_dim as f64))
    }
}

/// Losses from one gradient step.
#[derive(Clone, Copy, Debug, Default)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
}

struct Batch {
    obs: DMatrix<f64>,
    actions: DMatrix<f64>,
    rewards: Vec<f64>,
    next_obs: DMatrix<f64>,
    terminal: Vec<bool>,
}

/// The learner: actor, critic ensemble, targets, temperature and replay.
pub struct TqcLearner {
    pub config: LearnerConfig,
    actor: Mlp,
    critics: Vec<Mlp>,
    target_critics: Vec<Mlp>,
    actor_opt: Adam,
    critic_opts: Vec<Adam>,
    log_alpha: f64,
    alpha_opt: ScalarAdam,
    taus: Vec<f64>,
    pub replay: ReplayBuffer,
    rng: ChaCha8Rng,
}

impl TqcLearner {
    pub fn new(config: LearnerConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut actor_dims = vec![config.obs_dim];
        actor_dims.extend(&config.hidden);
        actor_dims.push(2 * config.act_dim);
        let mut actor = Mlp::new(&actor_dims, &mut rng);
        // Zero head: the initial mean action is exactly zero, so a fresh
        // residual policy reproduces the open-loop controller.
        actor.zero_output_layer();

        let mut critic_dims = vec![config.obs_dim + config.act_dim];
        critic_dims.extend(&config.hidden);
        critic_dims.push(config.n_quantiles);
        let critics: Vec<Mlp> = (0..config.n_critics)
            .map(|_| Mlp::new(&critic_dims, &mut rng))
            .collect();
        let target_critics = critics.clone();

        let log_alpha = match config.alpha {
            AlphaMode::Fixed(a) => a.max(1e-12).ln(),
            AlphaMode::Auto { init } => init.max(1e-12).ln(),
        };

        TqcLearner {
            actor_opt: Adam::new(&actor, config.actor_lr),
            critic_opts: critics.iter().map(|c| Adam::new(c, config.critic_lr)).collect(),
            alpha_opt: ScalarAdam::new(config.alpha_lr),
            taus: quantile_fractions(config.n_quantiles),
            replay: ReplayBuffer::new(config.replay_capacity),
            rng,
            actor,
            critics,
            target_critics,
            log_alpha,
            config,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn push_transition(&mut self, transition: Transition) {
        self.replay.push(transition);
    }

    /// Deterministic action: the squashed policy mean.
    pub fn mean_action(&self, obs: &[f64]) -> Vec<f64> {
        let input = DMatrix::from_row_slice(1, obs.len(), obs);
        let out = self.actor.infer(&input);
        (0..self.config.act_dim)
            .map(|a| self.config.action_limit * out[(0, a)].tanh())
            .collect()
    }

    /// Pre-squash policy mean (exposed for exploration wrappers).
    pub fn policy_mean_raw(&self, obs: &[f64]) -> Vec<f64> {
        let input = DMatrix::from_row_slice(1, obs.len(), obs);
        let out = self.actor.infer(&input);
        (0..self.config.act_dim).map(|a| out[(0, a)]).collect()
    }

    /// Squashes a pre-squash vector into a bounded action.
    pub fn squash(&self, pre: &[f64]) -> Vec<f64> {
        pre.iter().map(|u| self.config.action_limit * u.tanh()).collect()
    }

    fn gather(&self, indices: &[usize]) -> Batch {
        let b = indices.len();
        let (no, na) = (self.config.obs_dim, self.config.act_dim);
        let mut obs = DMatrix::zeros(b, no);
        let mut actions = DMatrix::zeros(b, na);
        let mut next_obs = DMatrix::zeros(b, no);
        let mut rewards = Vec::with_capacity(b);
        let mut terminal = Vec::with_capacity(b);
        for (row, &idx) in indices.iter().enumerate() {
            let t = self.replay.get(idx);
            for c in 0..no {
                obs[(row, c)] = t.obs[c];
                next_obs[(row, c)] = t.next_obs[c];
            }
            for c in 0..na {
                actions[(row, c)] = t.action[c];
            }
            rewards.push(t.reward);
            terminal.push(t.terminal);
        }
        Batch {
            obs,
            actions,
            rewards,
            next_obs,
            terminal,
        }
    }

    fn standard_normal(&mut self, rows: usize, cols: usize) -> DMatrix<f64> {
        let dist = rand_distr::StandardNormal;
        DMatrix::from_fn(rows, cols, |_, _| dist.sample(&mut self.rng))
    }

    /// Splits actor output into (mean, clamped log-std, raw log-std).
    fn policy_heads(&self, out: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let (b, a) = (out.nrows(), self.config.act_dim);
        let mean = DMatrix::from_fn(b, a, |r, c| out[(r, c)]);
        let raw = DMatrix::from_fn(b, a, |r, c| out[(r, c + a)]);
        let log_std = raw.map(clamp_log_std);
        (mean, log_std, raw)
    }

    fn diagnostics(&self, batch: &Batch) -> String {
        format!(
            "actor |θ|={:.3e}, critic |θ|={:.3e}, alpha={:.3e}, batch reward range=[{:.3e}, {:.3e}]",
            self.actor.param_norm(),
            self.critics[0].param_norm(),
            self.alpha(),
            batch.rewards.iter().cloned().fold(f64::INFINITY, f64::min),
            batch.rewards.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    /// One quantile-regression step on every critic against the truncated
    /// target mixture. Returns the mean critic loss.
    pub fn critic_update(&mut self, indices: &[usize]) -> Result<f64, LearnerError> {
        let batch = self.gather(indices);
        let b = indices.len();
        let (no, na) = (self.config.obs_dim, self.config.act_dim);

        // Next actions from the current policy.
        let actor_out = self.actor.infer(&batch.next_obs);
        let (mean, log_std, _) = self.policy_heads(&actor_out);
        let eps = self.standard_normal(b, na);
        let next_sample = squash_sample(&mean, &log_std, &eps, self.config.action_limit);

        // Target atoms from the target critics, truncated after pooling.
        let mut next_input = DMatrix::zeros(b, no + na);
        next_input.view_mut((0, 0), (b, no)).copy_from(&batch.next_obs);
        next_input.view_mut((0, no), (b, na)).copy_from(&next_sample.action);
        let target_atoms: Vec<DMatrix<f64>> = self
            .target_critics
            .iter()
            .map(|critic| critic.infer(&next_input))
            .collect();
        let refs: Vec<&DMatrix<f64>> = target_atoms.iter().collect();
        let (kept, _) = truncate_pooled_with_sources(&refs, self.config.drop_top_per_critic);

        let alpha = self.alpha();
        let mut targets = kept;
        for row in 0..b {
            let bootstrap = if batch.terminal[row] { 0.0 } else { self.config.gamma };
            let entropy = alpha * next_sample.log_prob[row];
            for col in 0..targets.ncols() {
                targets[(row, col)] = batch.rewards[row] + bootstrap * (targets[(row, col)] - entropy);
            }
        }

        let mut input = DMatrix::zeros(b, no + na);
        input.view_mut((0, 0), (b, no)).copy_from(&batch.obs);
        input.view_mut((0, no), (b, na)).copy_from(&batch.actions);

        let mut total_loss = 0.0;
        for c in 0..self.critics.len() {
            let (pred, cache) = self.critics[c].forward(&input);
            let (loss, grad) = quantile_huber_loss(&pred, &targets, &self.taus, self.config.huber_kappa);
            if !loss.is_finite() {
                return Err(LearnerError::NonFiniteLoss {
                    context: "critic",
                    diagnostics: self.diagnostics(&batch),
                });
            }
            total_loss += loss;
            let (grads, _) = self.critics[c].backward(&cache, &grad);
            self.critic_opts[c].step(&mut self.critics[c], &grads);
        }
        Ok(total_loss / self.critics.len() as f64)
    }

    /// One ascent step on the truncated critic value plus entropy bonus, then
    /// the temperature update. Returns the actor loss.
    pub fn actor_update(&mut self, indices: &[usize]) -> Result<f64, LearnerError> {
        let batch = self.gather(indices);
        let b = indices.len();
        let (no, na) = (self.config.obs_dim, self.config.act_dim);

        let (actor_out, actor_cache) = self.actor.forward(&batch.obs);
        let (mean, log_std, raw) = self.policy_heads(&actor_out);
        let eps = self.standard_normal(b, na);
        let sample = squash_sample(&mean, &log_std, &eps, self.config.action_limit);

        let mut input = DMatrix::zeros(b, no + na);
        input.view_mut((0, 0), (b, no)).copy_from(&batch.obs);
        input.view_mut((0, no), (b, na)).copy_from(&sample.action);

        // Truncated value over the online critic ensemble.
        let mut forwards = Vec::with_capacity(self.critics.len());
        for critic in &self.critics {
            forwards.push(critic.forward(&input));
        }
        let atoms: Vec<&DMatrix<f64>> = forwards.iter().map(|(pred, _)| pred).collect();
        let (kept, sources) = truncate_pooled_with_sources(&atoms, self.config.drop_top_per_critic);
        let keep = kept.ncols();

        let alpha = self.alpha();
        let value_mean: f64 = kept.iter().sum::<f64>() / (b * keep) as f64;
        let log_prob_mean: f64 = sample.log_prob.iter().sum::<f64>() / b as f64;
        let actor_loss = alpha * log_prob_mean - value_mean;
        if !actor_loss.is_finite() {
            return Err(LearnerError::NonFiniteLoss {
                context: "actor",
                diagnostics: self.diagnostics(&batch),
            });
        }

        // dLoss/daction through the kept atoms of each critic.
        let scale = -1.0 / (b * keep) as f64;
        let mut dvalue_daction = DMatrix::<f64>::zeros(b, na);
        for c in 0..self.critics.len() {
            let mut grad_atoms = DMatrix::<f64>::zeros(b, self.config.n_quantiles);
            let mut touched = false;
            for row in 0..b {
                for &(critic_idx, quantile_idx) in &sources[row] {
                    if critic_idx == c {
                        grad_atoms[(row, quantile_idx)] += scale;
                        touched = true;
                    }
                }
            }
            if !touched {
                continue;
            }
            let (_, grad_input) = self.critics[c].backward(&forwards[c].1, &grad_atoms);
            for row in 0..b {
                for a in 0..na {
                    dvalue_daction[(row, a)] += grad_input[(row, no + a)];
                }
            }
        }

        // Chain into the actor heads.
        let dlogp_dmean = sample.dlogp_dmean();
        let dlogp_dlogstd = sample.dlogp_dlogstd();
        let da_dmean = sample.daction_dmean();
        let da_dlogstd = sample.daction_dlogstd();
        let alpha_scale = alpha / b as f64;
        let mut grad_out = DMatrix::zeros(b, 2 * na);
        for row in 0..b {
            for a in 0..na {
                let dmean = alpha_scale * dlogp_dmean[(row, a)]
                    + dvalue_daction[(row, a)] * da_dmean[(row, a)];
                let dlogstd = alpha_scale * dlogp_dlogstd[(row, a)]
                    + dvalue_daction[(row, a)] * da_dlogstd[(row, a)];
                grad_out[(row, a)] = dmean;
                grad_out[(row, a + na)] = dlogstd * clamp_log_std_grad(raw[(row, a)]);
            }
        }
        let (grads, _) = self.actor.backward(&actor_cache, &grad_out);
        self.actor_opt.step(&mut self.actor, &grads);

        // Temperature toward the target entropy.
        if let AlphaMode::Auto { .. } = self.config.alpha {
            let grad = -(log_prob_mean + self.config.target_entropy());
            self.alpha_opt.step(&mut self.log_alpha, grad);
        }
        Ok(actor_loss)
    }

    /// One full gradient step: critic, actor, temperature, target smoothing.
    pub fn update(&mut self) -> Result<UpdateStats, LearnerError> {
        if self.replay.len() < self.config.batch_size {
            return Err(LearnerError::NotEnoughData {
                available: self.replay.len(),
                needed: self.config.batch_size,
            });
        }
        let indices = self.replay.sample_indices(self.config.batch_size, &mut self.rng);
        let critic_loss = self.critic_update(&indices)?;
        let actor_loss = self.actor_update(&indices)?;
        for (target, online) in self.target_critics.iter_mut().zip(self.critics.iter()) {
            target.lerp_from(online, self.config.polyak);
        }
        Ok(UpdateStats {
            critic_loss,
            actor_loss,
            alpha: self.alpha(),
        })
    }

    /// Critic quantiles for one (obs, action) pair, per critic.
    pub fn critic_quantiles(&self, obs: &[f64], action: &[f64]) -> Vec<Vec<f64>> {
        let (no, na) = (self.config.obs_dim, self.config.act_dim);
        let mut input = DMatrix::zeros(1, no + na);
        for (c, &v) in obs.iter().enumerate() {
            input[(0, c)] = v;
        }
        for (c, &v) in action.iter().enumerate() {
            input[(0, no + c)] = v;
        }
        self.critics
            .iter()
            .map(|critic| critic.infer(&input).row(0).iter().copied().collect())
            .collect()
    }

    /// Flat snapshot of every parameter (actor, critics, targets, log α).
    pub fn flatten_params(&self) -> Vec<f64> {
        let mut flat = self.actor.flatten();
        for critic in &self.critics {
            flat.extend(critic.flatten());
        }
        for target in &self.target_critics {
            flat.extend(target.flatten());
        }
        flat.push(self.log_alpha);
        flat
    }

    /// Restores parameters captured by [`TqcLearner::flatten_params`].
    pub fn restore_params(&mut self, flat: &[f64]) {
        let actor_len = self.actor.flatten().len();
        let critic_len = self.critics[0].flatten().len();
        let mut cursor = 0;
        self.actor.unflatten(&flat[cursor..cursor + actor_len]);
        cursor += actor_len;
        for critic in &mut self.critics {
            critic.unflatten(&flat[cursor..cursor + critic_len]);
            cursor += critic_len;
        }
        for target in &mut self.target_critics {
            target.unflatten(&flat[cursor..cursor + critic_len]);
            cursor += critic_len;
        }
        self.log_alpha = flat[cursor];
        assert_eq!(cursor + 1, flat.len(), "parameter snapshot size mismatch");
    }

    /// Zeroes every critic (used by decoupling tests).
    #[doc(hidden)]
    pub fn zero_critics(&mut self) {
        for critic in &mut self.critics {
            for layer in &mut critic.layers {
                layer.weight.fill(0.0);
                layer.bias.fill(0.0);
            }
        }
    }

    /// Direct access to the actor parameters (tests only).
    #[doc(hidden)]
    pub fn actor_params(&self) -> Vec<f64> {
        self.actor.flatten()
    }
}
