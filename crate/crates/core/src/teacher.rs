//! Synthetic teachers.
//!
//! A [`TeacherHandle`] wraps a teacher spec with an access mode. Black-box
//! handles only sample; probability queries return
//! [`Error::AccessViolation`]. Trainers are handed black-box handles or
//! datasets; oracle handles are for evaluation.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::seq::{Dataset, Episode, Sequence, TokenId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: f64,
    pub std: f64,
}

/// Gaussian mixture discretized onto categories `0..support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    components: Vec<MixtureComponent>,
    support: usize,
}

impl MixtureSpec {
    pub fn new(components: Vec<MixtureComponent>, support: usize) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::arg("mixture needs at least one component"));
        }
        if support == 0 {
            return Err(Error::arg("mixture support is empty"));
        }
        for c in &components {
            if !(c.weight > 0.0 && c.std > 0.0 && c.mean.is_finite()) {
                return Err(Error::arg(format!("invalid mixture component {c:?}")));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        let components = components.into_iter().map(|c| MixtureComponent { weight: c.weight / total, ..c }).collect();
        Ok(Self { components, support })
    }

    /// Three separated modes on ten categories.
    pub fn default_fixture() -> Self {
        Self::new(
            vec![
                MixtureComponent { weight: 0.4, mean: 1.5, std: 0.7 },
                MixtureComponent { weight: 0.35, mean: 5.0, std: 0.7 },
                MixtureComponent { weight: 0.25, mean: 8.0, std: 0.7 },
            ],
            10,
        )
        .expect("fixture is valid")
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    pub fn support(&self) -> usize {
        self.support
    }
}

/// Density evaluated at the integer support points, then normalized.
pub fn toy_teacher_pmf(spec: &MixtureSpec) -> Vec<f64> {
    let raw: Vec<f64> = (0..spec.support)
        .map(|k| {
            let x = k as f64;
            spec.components
                .iter()
                .map(|c| {
                    let z = (x - c.mean) / c.std;
                    c.weight * (-0.5 * z * z).exp() / c.std
                })
                .sum()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Order-m Markov chain over response tokens, bucketed by prompt class.
///
/// The next-token law at response step `t` mixes a stop hazard `h_t` with the
/// transition row: `P(EOS) = h_t + (1 - h_t) T(EOS | ctx)` and
/// `P(v) = (1 - h_t) T(v | ctx)` otherwise. The context is the last `order`
/// response tokens, padded with BOS. A prompt's class is its last token
/// modulo the class count (class 0 for an empty prompt). Responses that reach
/// `max_response_len` without EOS are truncated there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovTeacherSpec {
    id: String,
    vocab: Vocab,
    order: usize,
    classes: usize,
    /// `[class][context][next]`, contexts indexed base `V + 1`.
    table: Vec<f64>,
    hazard: Vec<f64>,
    max_response_len: usize,
}

/// Parameters for a random teacher.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkovTeacherParams {
    pub vocab_size: u32,
    pub order: usize,
    pub classes: usize,
    /// Scale of the row logits; larger gives peakier rows.
    pub sharpness: f64,
    /// Uniform mass mixed into every row (EOS included).
    pub floor: f64,
    pub hazard: Vec<f64>,
    pub max_response_len: usize,
}

impl Default for MarkovTeacherParams {
    fn default() -> Self {
        Self {
            vocab_size: 8,
            order: 1,
            classes: 4,
            sharpness: 2.5,
            floor: 0.02,
            hazard: vec![0.0, 0.1],
            max_response_len: 24,
        }
    }
}

pub(crate) fn context_count(vocab: Vocab, order: usize) -> usize {
    (vocab.size() + 1).pow(order as u32)
}

/// Base-`(V+1)` key of the last `order` tokens of `history`, BOS-padded.
pub(crate) fn context_key(vocab: Vocab, order: usize, history: &[TokenId]) -> usize {
    let base = vocab.size() + 1;
    let start = history.len().saturating_sub(order);
    let pad = order - (history.len() - start);
    let bos = vocab.bos().index();
    let mut key = 0;
    for _ in 0..pad {
        key = key * base + bos;
    }
    for t in &history[start..] {
        key = key * base + t.index();
    }
    key
}

impl MarkovTeacherSpec {
    pub fn new(
        id: impl Into<String>,
        vocab: Vocab,
        order: usize,
        classes: usize,
        table: Vec<f64>,
        hazard: Vec<f64>,
        max_response_len: usize,
    ) -> Result<Self> {
        if order == 0 || classes == 0 || max_response_len == 0 {
            return Err(Error::arg("teacher order, classes and max length must be positive"));
        }
        let v = vocab.size();
        let expected = classes * context_count(vocab, order) * v;
        if table.len() != expected {
            return Err(Error::ShapeMismatch { expected, actual: table.len() });
        }
        for row in table.chunks(v) {
            if row.iter().any(|p| p.is_nan() || *p < 0.0) {
                return Err(Error::arg("negative transition probability"));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::arg(format!("transition row sums to {s}")));
            }
        }
        if hazard.iter().any(|h| !(0.0..=1.0).contains(h)) {
            return Err(Error::arg("hazard outside [0, 1]"));
        }
        Ok(Self { id: id.into(), vocab, order, classes, table, hazard, max_response_len })
    }

    /// Random peaked rows with a uniform floor. Every token, EOS included,
    /// has positive probability in every context.
    pub fn random(params: &MarkovTeacherParams, rng: &mut Rng) -> Result<Self> {
        let vocab = Vocab::new(params.vocab_size)?;
        if !(0.0..=1.0).contains(&params.floor) {
            return Err(Error::arg("floor outside [0, 1]"));
        }
        let v = vocab.size();
        let rows = params.classes * context_count(vocab, params.order.max(1));
        let mut table = Vec::with_capacity(rows * v);
        for _ in 0..rows {
            let logits: Vec<f64> = (0..v - 1).map(|_| params.sharpness * rng.normal()).collect();
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
            let z: f64 = exp.iter().sum();
            let uniform = params.floor / v as f64;
            let mut row: Vec<f64> = exp.iter().map(|e| (1.0 - params.floor) * e / z + uniform).collect();
            row.push(uniform);
            // exact renormalization so rows sum to 1 to rounding
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|p| *p /= s);
            table.extend(row);
        }
        let id = format!("markov-v{}-m{}-c{}-s{}", params.vocab_size, params.order, params.classes, rng.seed());
        Self::new(id, vocab, params.order, params.classes, table, params.hazard.clone(), params.max_response_len)
    }

    /// Uniform transitions over all ids, including EOS.
    pub fn uniform(vocab: Vocab, hazard: Vec<f64>, max_response_len: usize) -> Result<Self> {
        let v = vocab.size();
        let table = vec![1.0 / v as f64; context_count(vocab, 1) * v];
        Self::new("uniform", vocab, 1, 1, table, hazard, max_response_len)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn max_response_len(&self) -> usize {
        self.max_response_len
    }

    pub fn class_of(&self, prompt: &Sequence) -> usize {
        prompt.tokens().last().map_or(0, |t| t.index() % self.classes)
    }

    fn hazard_at(&self, step: usize) -> f64 {
        match self.hazard.last() {
            None => 0.0,
            Some(&last) => self.hazard.get(step).copied().unwrap_or(last),
        }
    }

    fn row(&self, class: usize, history: &[TokenId]) -> &[f64] {
        let v = self.vocab.size();
        let key = context_key(self.vocab, self.order, history);
        let offset = (class * context_count(self.vocab, self.order) + key) * v;
        &self.table[offset..offset + v]
    }

    /// Next-token probabilities at response step `history.len()`.
    fn next_distribution(&self, class: usize, history: &[TokenId]) -> Vec<f64> {
        let h = self.hazard_at(history.len());
        let eos = self.vocab.eos().index();
        let mut dist: Vec<f64> = self.row(class, history).iter().map(|p| (1.0 - h) * p).collect();
        dist[eos] += h;
        dist
    }

    fn sample(&self, prompt: &Sequence, rng: &mut Rng) -> Sequence {
        let class = self.class_of(prompt);
        let eos = self.vocab.eos();
        let mut out = Vec::new();
        while out.len() < self.max_response_len {
            let dist = self.next_distribution(class, &out);
            let t = TokenId(rng.categorical(&dist) as u32);
            out.push(t);
            if t == eos {
                break;
            }
        }
        Sequence::new(out, self.vocab, self.max_response_len).expect("sampled response is valid")
    }

    fn logprob(&self, prompt: &Sequence, response: &Sequence) -> f64 {
        if response.len() > self.max_response_len {
            return f64::NEG_INFINITY;
        }
        let class = self.class_of(prompt);
        let toks = response.tokens();
        (0..toks.len()).map(|t| self.next_distribution(class, &toks[..t])[toks[t].index()].ln()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Access {
    BlackBox,
    Oracle,
}

#[derive(Debug, Clone)]
pub struct TeacherHandle<S> {
    spec: Arc<S>,
    access: Access,
}

impl<S> TeacherHandle<S> {
    pub fn black_box(spec: S) -> Self {
        Self { spec: Arc::new(spec), access: Access::BlackBox }
    }

    pub fn oracle(spec: S) -> Self {
        Self { spec: Arc::new(spec), access: Access::Oracle }
    }

    /// Sample-only view sharing the same spec.
    pub fn to_black_box(&self) -> Self {
        Self { spec: Arc::clone(&self.spec), access: Access::BlackBox }
    }

    pub fn access(&self) -> Access {
        self.access
    }

    /// The underlying spec; oracle handles only.
    pub fn spec(&self) -> Result<&S> {
        match self.access {
            Access::Oracle => Ok(&self.spec),
            Access::BlackBox => Err(Error::AccessViolation),
        }
    }
}

impl TeacherHandle<MixtureSpec> {
    pub fn support(&self) -> usize {
        self.spec.support
    }

    pub fn pmf(&self) -> Result<Vec<f64>> {
        self.spec().map(toy_teacher_pmf)
    }
}

impl TeacherHandle<MarkovTeacherSpec> {
    pub fn vocab(&self) -> Vocab {
        self.spec.vocab
    }

    pub fn spec_id(&self) -> &str {
        &self.spec.id
    }

    pub fn max_response_len(&self) -> usize {
        self.spec.max_response_len
    }
}

pub fn toy_teacher_sample(handle: &TeacherHandle<MixtureSpec>, rng: &mut Rng, count: usize) -> Vec<usize> {
    let pmf = toy_teacher_pmf(&handle.spec);
    (0..count).map(|_| rng.categorical(&pmf)).collect()
}

pub fn seq_teacher_sample(handle: &TeacherHandle<MarkovTeacherSpec>, prompt: &Sequence, rng: &mut Rng) -> Sequence {
    handle.spec.sample(prompt, rng)
}

/// Exact log-probability of a complete response, stop event included.
pub fn seq_teacher_logprob(
    handle: &TeacherHandle<MarkovTeacherSpec>,
    prompt: &Sequence,
    response: &Sequence,
) -> Result<f64> {
    Ok(handle.spec()?.logprob(prompt, response))
}

/// One teacher response per prompt, each drawn from its own forked stream.
pub fn build_dataset(handle: &TeacherHandle<MarkovTeacherSpec>, prompts: &[Sequence], rng: &Rng) -> Result<Dataset> {
    if prompts.is_empty() {
        return Err(Error::arg("no prompts"));
    }
    let episodes = prompts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut r = rng.fork(&format!("episode/{i}"));
            Episode::new(p.clone(), seq_teacher_sample(handle, p, &mut r))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(episodes, handle.spec_id(), rng.seed())
}

/// Random content-token prompts of fixed length.
pub fn random_prompts(vocab: Vocab, count: usize, len: usize, rng: &Rng) -> Vec<Sequence> {
    let content = vocab.size() - 1;
    (0..count)
        .map(|i| {
            let mut r = rng.fork(&format!("prompt/{i}"));
            let toks = (0..len).map(|_| TokenId(r.below(content) as u32)).collect();
            Sequence::new(toks, vocab, len).expect("content tokens are valid")
        })
        .collect()
}
