//! Training loops: SeqKD, joint warmup, GAD with GRPO, and the frozen
//! discriminator ablation.
//!
//! Every phase is a sequence of batch steps. Each step draws its randomness
//! from a fork labelled by phase, epoch and batch, so results do not depend on
//! how rollouts are scheduled across threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discriminator::{group_loss_and_grad, DiscLoss, Discriminator};
use crate::error::{Error, Result};
use crate::math::log_softmax_t;
use crate::optim::{adam_step, AdamState};
use crate::policy::{add_step_score, ce_loss_and_grad, policy_sample, AutoregressivePolicy, PolicySnapshot};
use crate::rng::Rng;
use crate::seq::{Dataset, Episode, ParamVector, Sequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscMode {
    OnPolicy,
    Frozen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub group_size: usize,
    pub kl_weight: f64,
    pub clip_eps: f64,
    pub inner_epochs: usize,
    pub temperature: f64,
    pub batch_size: usize,
    /// Generator learning rate for cross-entropy phases.
    pub warmup_lr: f64,
    /// Generator learning rate for policy-gradient phases.
    pub gen_lr: f64,
    pub disc_lr: f64,
    pub warmup_epochs: usize,
    pub gad_epochs: usize,
    pub seqkd_epochs: usize,
    /// Discriminator epochs on frozen-student outputs in the off-policy protocol.
    pub disc_epochs: usize,
    pub disc_pretrain_steps: usize,
    pub checkpoint_interval: usize,
    pub seed: u64,
    pub disc_loss: DiscLoss,
    pub disc_mode: DiscMode,
    pub std_floor: f64,
    pub max_response_len: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            kl_weight: 0.001,
            clip_eps: 0.2,
            inner_epochs: 1,
            temperature: 0.8,
            batch_size: 16,
            warmup_lr: 1e-2,
            gen_lr: 5e-3,
            disc_lr: 1e-2,
            warmup_epochs: 1,
            gad_epochs: 2,
            seqkd_epochs: 3,
            disc_epochs: 2,
            disc_pretrain_steps: 10,
            checkpoint_interval: 50,
            seed: 0,
            disc_loss: DiscLoss::BradleyTerry,
            disc_mode: DiscMode::OnPolicy,
            std_floor: 1e-6,
            max_response_len: 24,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("group_size", self.group_size),
            ("inner_epochs", self.inner_epochs),
            ("batch_size", self.batch_size),
            ("checkpoint_interval", self.checkpoint_interval),
            ("max_response_len", self.max_response_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::arg(format!("{name} must be positive")));
            }
        }
        let nonneg = [
            ("kl_weight", self.kl_weight),
            ("clip_eps", self.clip_eps),
            ("warmup_lr", self.warmup_lr),
            ("gen_lr", self.gen_lr),
            ("disc_lr", self.disc_lr),
            ("std_floor", self.std_floor),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::arg(format!("{name} must be finite and non-negative")));
            }
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::arg("temperature must be positive"));
        }
        Ok(())
    }
}

/// `(r - mean) / std` with population std; all zeros when `std < std_floor`.
pub fn grpo_advantages(rewards: &[f64], std_floor: f64) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std < std_floor {
        return vec![0.0; rewards.len()];
    }
    rewards.iter().map(|r| (r - mean) / std).collect()
}

/// One prompt's group of sampled student responses.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub prompt: Sequence,
    pub teacher_response: Sequence,
    pub responses: Vec<Sequence>,
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    /// Per-token log-probabilities under the policy that sampled each response.
    pub behavior_logprobs: Vec<Vec<f64>>,
    pub teacher_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Seqkd,
    Warmup,
    DiscTrain,
    Gad,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Seqkd => "seqkd",
            Phase::Warmup => "warmup",
            Phase::DiscTrain => "disc",
            Phase::Gad => "gad",
        }
    }
}

/// Per-step training diagnostics. Fields a phase does not touch stay 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub phase: Phase,
    pub epoch: usize,
    /// Global step index, counted from 1.
    pub step: usize,
    pub gen_loss: f64,
    pub mean_reward: f64,
    pub mean_abs_advantage: f64,
    pub disc_loss: f64,
    pub disc_accuracy: f64,
    pub mean_response_len: f64,
    pub kl_to_ref: f64,
    pub gen_grad_norm: f64,
    pub disc_grad_norm: f64,
    pub rollouts: usize,
}

impl StepReport {
    fn new(phase: Phase, epoch: usize, step: usize) -> Self {
        Self {
            phase,
            epoch,
            step,
            gen_loss: 0.0,
            mean_reward: 0.0,
            mean_abs_advantage: 0.0,
            disc_loss: 0.0,
            disc_accuracy: 0.0,
            mean_response_len: 0.0,
            kl_to_ref: 0.0,
            gen_grad_norm: 0.0,
            disc_grad_norm: 0.0,
            rollouts: 0,
        }
    }

    fn check_finite(&self) -> Result<()> {
        let vals = [
            self.gen_loss,
            self.mean_reward,
            self.mean_abs_advantage,
            self.disc_loss,
            self.disc_accuracy,
            self.mean_response_len,
            self.kl_to_ref,
            self.gen_grad_norm,
            self.disc_grad_norm,
        ];
        if vals.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite(format!("{} step {}: {:?}", self.phase.as_str(), self.step, self)))
        }
    }
}

/// Shuffled mini-batches of episode indices.
pub fn epoch_batches(len: usize, batch_size: usize, rng: &Rng) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..len).collect();
    rng.fork("shuffle").shuffle(&mut idx);
    idx.chunks(batch_size.max(1)).map(|c| c.to_vec()).collect()
}

fn ensure_finite(p: &ParamVector, what: &str) -> Result<()> {
    if p.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} contains non-finite values")))
    }
}

/// Cross-entropy step on a batch at temperature 1. Episode losses are
/// weighted by response length, so the batch loss is the mean over all of
/// the batch's response tokens.
pub fn seqkd_step(policy: &mut AutoregressivePolicy, batch: &[&Episode], adam: &mut AdamState) -> Result<(f64, f64)> {
    if batch.is_empty() {
        return Err(Error::arg("empty batch"));
    }
    let tokens: usize = batch.iter().map(|ep| ep.teacher_response.len()).sum();
    let mut grad = policy.params().zeros_like();
    let mut loss = 0.0;
    for ep in batch {
        let w = ep.teacher_response.len() as f64 / tokens as f64;
        let (l, g) = ce_loss_and_grad(policy, ep, 1.0)?;
        loss += w * l;
        grad.add_scaled(w, &g);
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("cross-entropy loss {loss}")));
    }
    ensure_finite(&grad, "generator gradient")?;
    let norm = grad.norm();
    adam_step(policy.params_mut(), &grad, adam)?;
    ensure_finite(policy.params(), "generator parameters")?;
    Ok((loss, norm))
}

/// One pass over shuffled mini-batches; returns the loss of each batch.
pub fn seqkd_epoch(
    policy: &mut AutoregressivePolicy,
    dataset: &Dataset,
    adam: &mut AdamState,
    cfg: &TrainConfig,
    rng: &Rng,
) -> Result<Vec<f64>> {
    epoch_batches(dataset.len(), cfg.batch_size, rng)
        .iter()
        .map(|b| {
            let batch: Vec<&Episode> = b.iter().map(|&i| &dataset.episodes()[i]).collect();
            seqkd_step(policy, &batch, adam).map(|(l, _)| l)
        })
        .collect()
}

/// `group_size` responses for every episode, each from its own fork.
pub fn sample_groups(
    policy: &AutoregressivePolicy,
    batch: &[&Episode],
    cfg: &TrainConfig,
    rng: &Rng,
) -> Vec<Vec<Sequence>> {
    let n = cfg.group_size;
    let flat: Vec<Sequence> = (0..batch.len() * n)
        .into_par_iter()
        .map(|k| {
            let (j, i) = (k / n, k % n);
            let mut r = rng.fork(&format!("rollout/{j}/{i}"));
            policy_sample(policy, &batch[j].prompt, cfg.temperature, cfg.max_response_len, &mut r)
        })
        .collect();
    flat.chunks(n).map(|c| c.to_vec()).collect()
}

struct DiscUpdate {
    loss: f64,
    accuracy: f64,
    grad_norm: f64,
}

/// Loss and accuracy of the discriminator on a batch of groups; takes one
/// optimizer step when `adam` is given.
fn disc_update(
    disc: &mut Discriminator,
    batch: &[&Episode],
    groups: &[Vec<Sequence>],
    kind: DiscLoss,
    adam: Option<&mut AdamState>,
) -> Result<DiscUpdate> {
    let feats = batch
        .par_iter()
        .zip(groups)
        .map(|(ep, ys)| {
            let ft = disc.featurize(&ep.prompt, &ep.teacher_response)?;
            let fs = ys.iter().map(|y| disc.featurize(&ep.prompt, y)).collect::<Result<Vec<_>>>()?;
            Ok((ft, fs))
        })
        .collect::<Result<Vec<_>>>()?;
    let w = 1.0 / batch.len() as f64;
    let mut grad = disc.params().zeros_like();
    let mut loss = 0.0;
    let (mut won, mut pairs) = (0.0, 0usize);
    for (ft, fs) in &feats {
        let (l, g) = group_loss_and_grad(&disc.scorer, kind, ft, fs)?;
        loss += w * l;
        grad.add_scaled(w, &g);
        let st = disc.scorer.score_features(ft);
        for f in fs {
            let ss = disc.scorer.score_features(f);
            won += if st > ss {
                1.0
            } else if st == ss {
                0.5
            } else {
                0.0
            };
            pairs += 1;
        }
    }
    if !loss.is_finite() {
        return Err(Error::NonFinite(format!("discriminator loss {loss}")));
    }
    ensure_finite(&grad, "discriminator gradient")?;
    let grad_norm = grad.norm();
    if let Some(adam) = adam {
        adam_step(disc.params_mut(), &grad, adam)?;
        ensure_finite(disc.params(), "discriminator parameters")?;
    }
    Ok(DiscUpdate { loss, accuracy: won / pairs.max(1) as f64, grad_norm })
}

fn mean_len(groups: &[Vec<Sequence>]) -> f64 {
    let (mut total, mut count) = (0usize, 0usize);
    for g in groups {
        for y in g {
            total += y.len();
            count += 1;
        }
    }
    total as f64 / count.max(1) as f64
}

/// Samples rollouts, scores them with the current discriminator and forms
/// group advantages.
pub fn rollout(
    policy: &AutoregressivePolicy,
    disc: &Discriminator,
    batch: &[&Episode],
    cfg: &TrainConfig,
    rng: &Rng,
) -> Result<Vec<RolloutGroup>> {
    let groups = sample_groups(policy, batch, cfg, rng);
    batch
        .par_iter()
        .zip(groups)
        .map(|(ep, responses)| {
            let rewards = responses.iter().map(|y| disc.score(&ep.prompt, y)).collect::<Result<Vec<_>>>()?;
            if rewards.iter().any(|r| !r.is_finite()) {
                return Err(Error::NonFinite(format!("reward {rewards:?}")));
            }
            let behavior_logprobs =
                responses.iter().map(|y| policy.step_logprobs(&ep.prompt, y, cfg.temperature)).collect();
            Ok(RolloutGroup {
                prompt: ep.prompt.clone(),
                teacher_response: ep.teacher_response.clone(),
                advantages: grpo_advantages(&rewards, cfg.std_floor),
                teacher_score: disc.score(&ep.prompt, &ep.teacher_response)?,
                responses,
                rewards,
                behavior_logprobs,
            })
        })
        .collect()
}

/// Value and ascent gradient of the clipped GRPO objective
///
/// `J = mean_groups (1/N) Σ_i Σ_t [min(ρ A_i, clip(ρ, 1-ε, 1+ε) A_i) - β KL_t]`
///
/// where `KL_t` is the exact KL from the policy to the reference at the
/// context of token `t`. Also returns the mean per-token KL.
pub fn surrogate_objective_and_grad(
    policy: &AutoregressivePolicy,
    reference: &PolicySnapshot,
    groups: &[RolloutGroup],
    cfg: &TrainConfig,
) -> Result<(f64, ParamVector, f64)> {
    if groups.is_empty() {
        return Err(Error::arg("no rollout groups"));
    }
    if !reference.params().same_layout(policy.params()) {
        return Err(Error::ShapeMismatch { expected: policy.params().len(), actual: reference.params().len() });
    }
    let tau = cfg.temperature;
    let beta = cfg.kl_weight;
    let (lo, hi) = (1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    let v = policy.vocab().size();
    let ref_values = reference.params().values();
    let mut obj = 0.0;
    let mut grad = policy.params().zeros_like();
    let (mut kl_sum, mut tokens) = (0.0, 0usize);
    for g in groups {
        let w = 1.0 / (groups.len() * g.responses.len()) as f64;
        for ((y, &a), behavior) in g.responses.iter().zip(&g.advantages).zip(&g.behavior_logprobs) {
            let mut t = 0;
            let gv = grad.values_mut();
            policy.visit_steps(&g.prompt, y, tau, |s| {
                let ratio = (s.log_probs[s.token.index()] - behavior[t]).exp();
                let unclipped = ratio * a;
                let clipped = ratio.clamp(lo, hi) * a;
                obj += w * unclipped.min(clipped);
                if unclipped <= clipped && a != 0.0 {
                    add_step_score(gv, &s, w * a * ratio / tau);
                }
                if beta != 0.0 {
                    let ref_lp = log_softmax_t(&ref_values[s.row_offset..s.row_offset + v], tau);
                    let kl: f64 = s.probs.iter().zip(s.log_probs).zip(&ref_lp).map(|((q, lq), lr)| q * (lq - lr)).sum();
                    obj -= w * beta * kl;
                    kl_sum += kl;
                    let row = &mut gv[s.row_offset..s.row_offset + v];
                    for j in 0..v {
                        row[j] -= w * beta / tau * s.probs[j] * (s.log_probs[j] - ref_lp[j] - kl);
                    }
                }
                tokens += 1;
                t += 1;
            });
        }
    }
    Ok((obj, grad, kl_sum / tokens.max(1) as f64))
}

/// Everything one GAD step produced.
#[derive(Debug, Clone)]
pub struct GadStepOutput {
    pub report: StepReport,
    pub groups: Vec<RolloutGroup>,
    /// Ascent gradient of the surrogate at the first inner epoch.
    pub surrogate_grad: ParamVector,
}

/// One GAD step: rollouts scored by the discriminator, clipped policy update,
/// then one discriminator step unless the discriminator is frozen.
#[allow(clippy::too_many_arguments)]
pub fn gad_step(
    policy: &mut AutoregressivePolicy,
    reference: &PolicySnapshot,
    disc: &mut Discriminator,
    batch: &[&Episode],
    gen_opt: &mut AdamState,
    disc_opt: &mut AdamState,
    cfg: &TrainConfig,
    rng: &Rng,
) -> Result<GadStepOutput> {
    if batch.is_empty() {
        return Err(Error::arg("empty batch"));
    }
    let groups = rollout(policy, disc, batch, cfg, rng)?;
    let mut report = StepReport::new(Phase::Gad, 0, 0);
    let n_roll: usize = groups.iter().map(|g| g.responses.len()).sum();
    report.rollouts = n_roll;
    report.mean_reward = groups.iter().flat_map(|g| &g.rewards).sum::<f64>() / n_roll as f64;
    report.mean_abs_advantage = groups.iter().flat_map(|g| &g.advantages).map(|a| a.abs()).sum::<f64>() / n_roll as f64;
    let responses: Vec<Vec<Sequence>> = groups.iter().map(|g| g.responses.clone()).collect();
    report.mean_response_len = mean_len(&responses);

    let mut surrogate_grad = None;
    for _ in 0..cfg.inner_epochs {
        let (obj, grad, kl) = surrogate_objective_and_grad(policy, reference, &groups, cfg)?;
        if !obj.is_finite() {
            return Err(Error::NonFinite(format!("surrogate objective {obj}")));
        }
        ensure_finite(&grad, "generator gradient")?;
        let mut descent = grad.clone();
        descent.scale(-1.0);
        adam_step(policy.params_mut(), &descent, gen_opt)?;
        ensure_finite(policy.params(), "generator parameters")?;
        if surrogate_grad.is_none() {
            report.gen_loss = -obj;
            report.kl_to_ref = kl;
            report.gen_grad_norm = grad.norm();
            surrogate_grad = Some(grad);
        }
    }

    let opt = match cfg.disc_mode {
        DiscMode::OnPolicy => Some(disc_opt),
        DiscMode::Frozen => None,
    };
    let d = disc_update(disc, batch, &responses, cfg.disc_loss, opt)?;
    report.disc_loss = d.loss;
    report.disc_accuracy = d.accuracy;
    if cfg.disc_mode == DiscMode::OnPolicy {
        report.disc_grad_norm = d.grad_norm;
    }
    report.check_finite()?;
    Ok(GadStepOutput { report, groups, surrogate_grad: surrogate_grad.expect("inner_epochs >= 1") })
}

/// Generator, discriminator and their optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct Learner {
    pub policy: AutoregressivePolicy,
    pub disc: Discriminator,
    pub gen_opt: AdamState,
    pub disc_opt: AdamState,
    pub reference: Option<PolicySnapshot>,
    /// Number of completed steps.
    pub step: usize,
}

impl Learner {
    pub fn new(policy: AutoregressivePolicy, disc: Discriminator, cfg: &TrainConfig) -> Self {
        let gen_opt = AdamState::for_params(policy.params(), cfg.warmup_lr);
        let disc_opt = AdamState::for_params(disc.params(), cfg.disc_lr);
        Self { policy, disc, gen_opt, disc_opt, reference: None, step: 0 }
    }
}

fn batch_refs<'a>(dataset: &'a Dataset, idx: &[usize]) -> Vec<&'a Episode> {
    idx.iter().map(|&i| &dataset.episodes()[i]).collect()
}

fn emit<E, F>(
    learner: &mut Learner,
    mut report: StepReport,
    epoch: usize,
    observe: &mut F,
) -> std::result::Result<(), E>
where
    E: From<Error>,
    F: FnMut(&Learner, &StepReport) -> std::result::Result<(), E>,
{
    learner.step += 1;
    report.step = learner.step;
    report.epoch = epoch;
    report.check_finite()?;
    observe(learner, &report)
}

/// `cfg.seqkd_epochs` epochs of cross-entropy on teacher responses.
pub fn run_seqkd<E, F>(
    learner: &mut Learner,
    dataset: &Dataset,
    epochs: usize,
    cfg: &TrainConfig,
    rng: &Rng,
    observe: &mut F,
) -> std::result::Result<(), E>
where
    E: From<Error>,
    F: FnMut(&Learner, &StepReport) -> std::result::Result<(), E>,
{
    learner.gen_opt.lr = cfg.warmup_lr;
    for e in 0..epochs {
        let er = rng.fork(&format!("seqkd/{e}"));
        for b in epoch_batches(dataset.len(), cfg.batch_size, &er) {
            let batch = batch_refs(dataset, &b);
            let (loss, norm) = seqkd_step(&mut learner.policy, &batch, &mut learner.gen_opt)?;
            let mut r = StepReport::new(Phase::Seqkd, e, 0);
            r.gen_loss = loss;
            r.gen_grad_norm = norm;
            emit(learner, r, e, observe)?;
        }
    }
    Ok(())
}

/// Joint warmup: the first `disc_pretrain_steps` batches train only the
/// discriminator; afterwards each batch takes a generator cross-entropy step
/// and then a discriminator step on fresh samples.
pub fn warmup<E, F>(
    learner: &mut Learner,
    dataset: &Dataset,
    cfg: &TrainConfig,
    rng: &Rng,
    observe: &mut F,
) -> std::result::Result<(), E>
where
    E: From<Error>,
    F: FnMut(&Learner, &StepReport) -> std::result::Result<(), E>,
{
    learner.gen_opt.lr = cfg.warmup_lr;
    let mut seen = 0usize;
    for e in 0..cfg.warmup_epochs {
        let er = rng.fork(&format!("warmup/{e}"));
        for (bi, b) in epoch_batches(dataset.len(), cfg.batch_size, &er).into_iter().enumerate() {
            let batch = batch_refs(dataset, &b);
            let mut r = StepReport::new(Phase::Warmup, e, 0);
            if seen >= cfg.disc_pretrain_steps {
                let (loss, norm) = seqkd_step(&mut learner.policy, &batch, &mut learner.gen_opt)?;
                r.gen_loss = loss;
                r.gen_grad_norm = norm;
            }
            seen += 1;
            let groups = sample_groups(&learner.policy, &batch, cfg, &er.fork(&format!("batch/{bi}")));
            let d = disc_update(&mut learner.disc, &batch, &groups, cfg.disc_loss, Some(&mut learner.disc_opt))?;
            r.disc_loss = d.loss;
            r.disc_accuracy = d.accuracy;
            r.disc_grad_norm = d.grad_norm;
            r.mean_response_len = mean_len(&groups);
            r.rollouts = groups.iter().map(|g| g.len()).sum();
            emit(learner, r, e, observe)?;
        }
    }
    Ok(())
}

/// `cfg.gad_epochs` epochs of `gad_step` against `learner.reference`
/// (taken from the current policy when absent).
pub fn run_gad_phase<E, F>(
    learner: &mut Learner,
    dataset: &Dataset,
    cfg: &TrainConfig,
    rng: &Rng,
    observe: &mut F,
) -> std::result::Result<(), E>
where
    E: From<Error>,
    F: FnMut(&Learner, &StepReport) -> std::result::Result<(), E>,
{
    learner.gen_opt.lr = cfg.gen_lr;
    let reference = learner.reference.get_or_insert_with(|| learner.policy.snapshot()).clone();
    for e in 0..cfg.gad_epochs {
        let er = rng.fork(&format!("gad/{e}"));
        for (bi, b) in epoch_batches(dataset.len(), cfg.batch_size, &er).into_iter().enumerate() {
            let batch = batch_refs(dataset, &b);
            let out = gad_step(
                &mut learner.policy,
                &reference,
                &mut learner.disc,
                &batch,
                &mut learner.gen_opt,
                &mut learner.disc_opt,
                cfg,
                &er.fork(&format!("batch/{bi}")),
            )?;
            emit(learner, out.report, e, observe)?;
        }
    }
    Ok(())
}

/// Warmup followed by GAD training with `cfg.disc_mode`.
pub fn run_gad<E, F>(
    learner: &mut Learner,
    dataset: &Dataset,
    cfg: &TrainConfig,
    rng: &Rng,
    observe: &mut F,
) -> std::result::Result<(), E>
where
    E: From<Error>,
    F: FnMut(&Learner, &StepReport) -> std::result::Result<(), E>,
{
    warmup(learner, dataset, cfg, rng, observe)?;
    learner.reference = Some(learner.policy.snapshot());
    run_gad_phase(learner, dataset, cfg, rng, observe)
}

/// SeqKD for `warmup_epochs`, then `disc_epochs` of discriminator training
/// on the frozen student's samples, then GAD training against the frozen
/// discriminator.
pub fn offpolicy_protocol<E, F>(
    learner: &mut Learner,
    dataset: &Dataset,
    cfg: &TrainConfig,
    rng: &Rng,
    observe: &mut F,
) -> std::result::Result<(), E>
where
    E: From<Error>,
    F: FnMut(&Learner, &StepReport) -> std::result::Result<(), E>,
{
    run_seqkd(learner, dataset, cfg.warmup_epochs, cfg, rng, observe)?;
    for e in 0..cfg.disc_epochs {
        let er = rng.fork(&format!("disc/{e}"));
        for (bi, b) in epoch_batches(dataset.len(), cfg.batch_size, &er).into_iter().enumerate() {
            let batch = batch_refs(dataset, &b);
            let groups = sample_groups(&learner.policy, &batch, cfg, &er.fork(&format!("batch/{bi}")));
            let d = disc_update(&mut learner.disc, &batch, &groups, cfg.disc_loss, Some(&mut learner.disc_opt))?;
            let mut r = StepReport::new(Phase::DiscTrain, e, 0);
            r.disc_loss = d.loss;
            r.disc_accuracy = d.accuracy;
            r.disc_grad_norm = d.grad_norm;
            r.mean_response_len = mean_len(&groups);
            r.rollouts = groups.iter().map(|g| g.len()).sum();
            emit(learner, r, e, observe)?;
        }
    }
    learner.reference = Some(learner.policy.snapshot());
    let frozen = TrainConfig { disc_mode: DiscMode::Frozen, ..cfg.clone() };
    run_gad_phase(learner, dataset, &frozen, rng, observe)
}

/// Observer that ignores every step.
pub fn no_observer(_: &Learner, _: &StepReport) -> Result<()> {
    Ok(())
}
