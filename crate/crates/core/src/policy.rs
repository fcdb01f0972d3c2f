//! Student policies: a discretized single Gaussian for the toy study and an
//! order-m tabular softmax policy for sequences.

use serde::{Deserialize, Serialize};
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::math::{argmax, log_softmax_t, softmax_t};
use crate::rng::Rng;
use crate::seq::{Episode, ParamVector, Sequence, TokenId, Vocab};
use crate::teacher::context_count;

/// Temperatures at or below this decode greedily.
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

/// `pmf(k) ∝ exp(-(k - mu)^2 / (2 sigma^2))` over `0..support`, `sigma = exp(log_sigma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStudent {
    pub mu: f64,
    pub log_sigma: f64,
    pub support: usize,
}

impl GaussianStudent {
    pub fn new(mu: f64, sigma: f64, support: usize) -> Self {
        Self { mu, log_sigma: sigma.ln(), support }
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    fn exponents(&self) -> Vec<f64> {
        let s2 = (2.0 * self.log_sigma).exp();
        (0..self.support)
            .map(|k| {
                let d = k as f64 - self.mu;
                -d * d / (2.0 * s2)
            })
            .collect()
    }

    pub fn pmf(&self) -> Vec<f64> {
        softmax_t(&self.exponents(), 1.0)
    }

    pub fn sample(&self, rng: &mut Rng, count: usize) -> Vec<usize> {
        let pmf = self.pmf();
        (0..count).map(|_| rng.categorical(&pmf)).collect()
    }

    /// `(d/d mu, d/d log_sigma)` of `log pmf(k)`, normalizer included.
    pub fn grad_logp(&self, k: usize) -> Result<[f64; 2]> {
        if k >= self.support {
            return Err(Error::arg(format!("category {k} outside support {}", self.support)));
        }
        let pmf = self.pmf();
        let s2 = (2.0 * self.log_sigma).exp();
        let d_mu = |j: usize| (j as f64 - self.mu) / s2;
        let d_ls = |j: usize| (j as f64 - self.mu).powi(2) / s2;
        let (mut e_mu, mut e_ls) = (0.0, 0.0);
        for (j, p) in pmf.iter().enumerate() {
            e_mu += p * d_mu(j);
            e_ls += p * d_ls(j);
        }
        Ok([d_mu(k) - e_mu, d_ls(k) - e_ls])
    }

    pub fn to_params(&self) -> ParamVector {
        let mut p = ParamVector::zeros(&[("mu", 1), ("log_sigma", 1)]);
        p.values_mut().copy_from_slice(&[self.mu, self.log_sigma]);
        p
    }

    pub fn set_params(&mut self, p: &ParamVector) {
        self.mu = p.values()[0];
        self.log_sigma = p.values()[1];
    }
}

pub fn gaussian_student_pmf(student: &GaussianStudent) -> Vec<f64> {
    student.pmf()
}

pub fn gaussian_student_grad_logp(student: &GaussianStudent, k: usize) -> Result<[f64; 2]> {
    student.grad_logp(k)
}

pub const LOGITS: &str = "logits";

/// Order-m tabular softmax policy. Row `c` of the `logits` segment holds the
/// next-token logits for context key `c`, the last `order` tokens of
/// `prompt ++ response-so-far` with BOS padding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoregressivePolicy {
    order: usize,
    vocab: Vocab,
    params: ParamVector,
}

/// One scored position of a response.
pub struct Step<'a> {
    /// Offset of the context row inside the `logits` segment.
    pub row_offset: usize,
    pub probs: &'a [f64],
    pub log_probs: &'a [f64],
    pub token: TokenId,
}

impl AutoregressivePolicy {
    pub fn zeros(vocab: Vocab, order: usize) -> Self {
        let n = context_count(vocab, order) * vocab.size();
        Self { order, vocab, params: ParamVector::zeros(&[(LOGITS, n)]) }
    }

    pub fn random(vocab: Vocab, order: usize, scale: f64, rng: &mut Rng) -> Self {
        let mut p = Self::zeros(vocab, order);
        p.params.values_mut().iter_mut().for_each(|v| *v = scale * rng.normal());
        p
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        &mut self.params
    }

    pub fn set_params(&mut self, params: ParamVector) -> Result<()> {
        if !params.same_layout(&self.params) {
            return Err(Error::ShapeMismatch { expected: self.params.len(), actual: params.len() });
        }
        self.params = params;
        Ok(())
    }

    fn row_offset(&self, prompt: &[TokenId], prefix: &[TokenId]) -> usize {
        let base = self.vocab.size() + 1;
        let bos = self.vocab.bos().index();
        let mut key = 0;
        for back in (1..=self.order).rev() {
            // back-th most recent token of prompt ++ prefix
            let t = if back <= prefix.len() {
                prefix[prefix.len() - back].index()
            } else if back - prefix.len() <= prompt.len() {
                prompt[prompt.len() - (back - prefix.len())].index()
            } else {
                bos
            };
            key = key * base + t;
        }
        key * self.vocab.size()
    }

    pub fn logits_at(&self, prompt: &[TokenId], prefix: &[TokenId]) -> &[f64] {
        let off = self.row_offset(prompt, prefix);
        &self.params.values()[off..off + self.vocab.size()]
    }

    /// Next-token distribution at temperature `temperature`.
    pub fn next_distribution(&self, prompt: &[TokenId], prefix: &[TokenId], temperature: f64) -> Vec<f64> {
        softmax_t(self.logits_at(prompt, prefix), temperature)
    }

    /// Walks the response position by position.
    pub fn visit_steps(&self, prompt: &Sequence, response: &Sequence, temperature: f64, mut f: impl FnMut(Step<'_>)) {
        let toks = response.tokens();
        for t in 0..toks.len() {
            let row_offset = self.row_offset(prompt.tokens(), &toks[..t]);
            let logits = &self.params.values()[row_offset..row_offset + self.vocab.size()];
            let log_probs = log_softmax_t(logits, temperature);
            let probs: Vec<f64> = log_probs.iter().map(|l| l.exp()).collect();
            f(Step { row_offset, probs: &probs, log_probs: &log_probs, token: toks[t] });
        }
    }

    pub fn step_logprobs(&self, prompt: &Sequence, response: &Sequence, temperature: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(response.len());
        self.visit_steps(prompt, response, temperature, |s| out.push(s.log_probs[s.token.index()]));
        out
    }

    /// `grad += coef * d log q(response) / d logits`
    pub fn accumulate_grad_logprob(
        &self,
        prompt: &Sequence,
        response: &Sequence,
        temperature: f64,
        coef: f64,
        grad: &mut ParamVector,
    ) {
        let g = grad.values_mut();
        self.visit_steps(prompt, response, temperature, |s| {
            add_step_score(g, &s, coef / temperature);
        });
    }

    pub fn snapshot(&self) -> PolicySnapshot {
        PolicySnapshot(self.clone())
    }
}

/// `g[row] += scale * (one_hot(token) - probs)`
pub(crate) fn add_step_score(g: &mut [f64], step: &Step<'_>, scale: f64) {
    let row = &mut g[step.row_offset..step.row_offset + step.probs.len()];
    for (j, (gj, p)) in row.iter_mut().zip(step.probs).enumerate() {
        let hot = if j == step.token.index() { 1.0 } else { 0.0 };
        *gj += scale * (hot - p);
    }
}

/// Frozen copy of a policy, used as the KL reference.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySnapshot(AutoregressivePolicy);

impl Deref for PolicySnapshot {
    type Target = AutoregressivePolicy;

    fn deref(&self) -> &AutoregressivePolicy {
        &self.0
    }
}

/// Samples until EOS or `max_len` tokens. Truncated responses carry no EOS.
pub fn policy_sample(
    policy: &AutoregressivePolicy,
    prompt: &Sequence,
    temperature: f64,
    max_len: usize,
    rng: &mut Rng,
) -> Sequence {
    let eos = policy.vocab.eos();
    let mut out = Vec::new();
    while out.len() < max_len {
        let logits = policy.logits_at(prompt.tokens(), &out);
        let k = if temperature <= GREEDY_TEMPERATURE {
            argmax(logits)
        } else {
            rng.categorical(&softmax_t(logits, temperature))
        };
        let t = TokenId(k as u32);
        out.push(t);
        if t == eos {
            break;
        }
    }
    Sequence::new(out, policy.vocab, max_len).expect("sampled tokens are in vocabulary")
}

pub fn policy_logprob(policy: &AutoregressivePolicy, prompt: &Sequence, response: &Sequence, temperature: f64) -> f64 {
    policy.step_logprobs(prompt, response, temperature).iter().sum()
}

pub fn policy_grad_logprob(
    policy: &AutoregressivePolicy,
    prompt: &Sequence,
    response: &Sequence,
    temperature: f64,
) -> ParamVector {
    let mut grad = policy.params.zeros_like();
    policy.accumulate_grad_logprob(prompt, response, temperature, 1.0, &mut grad);
    grad
}

/// Mean per-token cross-entropy of the teacher response and its gradient.
pub fn ce_loss_and_grad(
    policy: &AutoregressivePolicy,
    episode: &Episode,
    temperature: f64,
) -> Result<(f64, ParamVector)> {
    let resp = &episode.teacher_response;
    if resp.is_empty() {
        return Err(Error::arg("empty response"));
    }
    let n = resp.len() as f64;
    let loss = -policy_logprob(policy, &episode.prompt, resp, temperature) / n;
    let mut grad = policy.params.zeros_like();
    policy.accumulate_grad_logprob(&episode.prompt, resp, temperature, -1.0 / n, &mut grad);
    Ok((loss, grad))
}
