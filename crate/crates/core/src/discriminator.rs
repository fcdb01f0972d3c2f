//! Sequence-level scorer `D([x, y])` and its training losses.
//!
//! Inputs are featurized into hashed n-gram frequencies of `[x, SEP, y]` plus
//! a normalized response-length feature, then passed through a one-hidden-layer
//! tanh network with a scalar head. All gradients are closed-form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{sigmoid, softplus};
use crate::rng::Rng;
use crate::seq::{concat_prompt_response, ParamVector, SeqLimits, Sequence, TokenId, Vocab};

const HASH_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const HASH_PRIME: u64 = 0x0000_0100_0000_01b3;

/// Bucket of an n-gram: FNV-1a over `[n, t_1, ..., t_n]` taken as whole
/// 64-bit words, modulo `dim`.
pub fn ngram_bucket(gram: &[TokenId], dim: usize) -> usize {
    let mut h = (HASH_OFFSET ^ gram.len() as u64).wrapping_mul(HASH_PRIME);
    for t in gram {
        h = (h ^ u64::from(t.0)).wrapping_mul(HASH_PRIME);
    }
    (h % dim as u64) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub vocab: Vocab,
    pub ngram_orders: Vec<usize>,
    pub dim: usize,
    /// Response length is divided by this for the trailing length feature.
    pub length_scale: usize,
    pub limits: SeqLimits,
}

impl FeatureSpec {
    pub fn new(vocab: Vocab, ngram_orders: Vec<usize>, dim: usize, length_scale: usize) -> Result<Self> {
        if dim < vocab.size() {
            return Err(Error::arg(format!("feature dim {dim} below vocabulary size {}", vocab.size())));
        }
        if ngram_orders.is_empty() || ngram_orders.contains(&0) {
            return Err(Error::arg("n-gram orders must be positive"));
        }
        if length_scale == 0 {
            return Err(Error::arg("length scale must be positive"));
        }
        Ok(Self { vocab, ngram_orders, dim, length_scale, limits: SeqLimits::default() })
    }

    pub fn input_dim(&self) -> usize {
        self.dim + 1
    }
}

/// L1-normalized hashed n-gram counts of `[x, SEP, y]`, then `len(y) / length_scale`.
pub fn featurize(spec: &FeatureSpec, prompt: &Sequence, response: &Sequence) -> Result<Vec<f64>> {
    let joined = concat_prompt_response(prompt, response, spec.limits)?;
    let mut f = vec![0.0; spec.input_dim()];
    let mut total = 0usize;
    for &n in &spec.ngram_orders {
        for gram in joined.tokens.windows(n) {
            f[ngram_bucket(gram, spec.dim)] += 1.0;
            total += 1;
        }
    }
    if total > 0 {
        let inv = 1.0 / total as f64;
        f[..spec.dim].iter_mut().for_each(|v| *v *= inv);
    }
    f[spec.dim] = response.len() as f64 / spec.length_scale as f64;
    Ok(f)
}

pub const HIDDEN_W: &str = "hidden.w";
pub const HIDDEN_B: &str = "hidden.b";
pub const OUT_W: &str = "out.w";
pub const OUT_B: &str = "out.b";

/// `out_w · tanh(W f + b) + out_b`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scorer {
    input_dim: usize,
    hidden: usize,
    params: ParamVector,
}

impl Scorer {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let params =
            ParamVector::zeros(&[(HIDDEN_W, hidden * input_dim), (HIDDEN_B, hidden), (OUT_W, hidden), (OUT_B, 1)]);
        Self { input_dim, hidden, params }
    }

    /// Gaussian init: hidden weights with std `scale`, head with std `1/sqrt(hidden)`.
    pub fn random(input_dim: usize, hidden: usize, scale: f64, rng: &mut Rng) -> Self {
        let mut s = Self::zeros(input_dim, hidden);
        for w in s.params.segment_mut(HIDDEN_W).unwrap() {
            *w = scale * rng.normal();
        }
        let head = 1.0 / (hidden as f64).sqrt();
        for w in s.params.segment_mut(OUT_W).unwrap() {
            *w = head * rng.normal();
        }
        s
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
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

    fn activations(&self, f: &[f64]) -> Vec<f64> {
        let w = self.params.segment(HIDDEN_W).unwrap();
        let b = self.params.segment(HIDDEN_B).unwrap();
        (0..self.hidden)
            .map(|j| {
                let row = &w[j * self.input_dim..(j + 1) * self.input_dim];
                let mut a = b[j];
                for (wk, fk) in row.iter().zip(f) {
                    if *fk != 0.0 {
                        a += wk * fk;
                    }
                }
                a.tanh()
            })
            .collect()
    }

    pub fn score_features(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.input_dim);
        let h = self.activations(f);
        let ow = self.params.segment(OUT_W).unwrap();
        let ob = self.params.segment(OUT_B).unwrap()[0];
        h.iter().zip(ow).map(|(a, w)| a * w).sum::<f64>() + ob
    }

    /// `grad += coef * d score(f) / d params`
    pub fn accumulate_grad(&self, f: &[f64], coef: f64, grad: &mut ParamVector) {
        let h = self.activations(f);
        let ow: Vec<f64> = self.params.segment(OUT_W).unwrap().to_vec();
        let (d, hid) = (self.input_dim, self.hidden);
        let g = grad.values_mut();
        // segment layout is fixed: W | b | out_w | out_b
        let (gw, rest) = g.split_at_mut(hid * d);
        let (gb, rest) = rest.split_at_mut(hid);
        let (gow, gob) = rest.split_at_mut(hid);
        gob[0] += coef;
        for j in 0..hid {
            gow[j] += coef * h[j];
            let delta = coef * ow[j] * (1.0 - h[j] * h[j]);
            gb[j] += delta;
            if delta != 0.0 {
                let row = &mut gw[j * d..(j + 1) * d];
                for (gk, fk) in row.iter_mut().zip(f) {
                    if *fk != 0.0 {
                        *gk += delta * fk;
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiscLoss {
    BradleyTerry,
    CrossEntropy,
}

/// Mean `-ln σ(s_t - s_i)` over pairs, with `d loss / d s_t` and `d loss / d s_i`.
fn bt_terms(teacher: &[f64], student: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let n = student.len() as f64;
    let mut loss = 0.0;
    let mut dt = Vec::with_capacity(student.len());
    let mut ds = Vec::with_capacity(student.len());
    for (t, s) in teacher.iter().zip(student) {
        let m = t - s;
        loss += softplus(-m);
        let w = sigmoid(-m) / n;
        dt.push(-w);
        ds.push(w);
    }
    (loss / n, dt, ds)
}

/// Mean `-ln σ(s_t) - ln(1 - σ(s_i))` over pairs.
fn ce_terms(teacher: &[f64], student: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
    let n = student.len() as f64;
    let mut loss = 0.0;
    let mut dt = Vec::with_capacity(student.len());
    let mut ds = Vec::with_capacity(student.len());
    for (t, s) in teacher.iter().zip(student) {
        loss += softplus(-t) + softplus(*s);
        dt.push(-sigmoid(-t) / n);
        ds.push(sigmoid(*s) / n);
    }
    (loss / n, dt, ds)
}

/// Loss over `(teacher_features, student_features)` pairs and its gradient.
pub fn pairs_loss_and_grad(scorer: &Scorer, kind: DiscLoss, pairs: &[(&[f64], &[f64])]) -> Result<(f64, ParamVector)> {
    if pairs.is_empty() {
        return Err(Error::arg("no preference pairs"));
    }
    let ts: Vec<f64> = pairs.iter().map(|(t, _)| scorer.score_features(t)).collect();
    let ss: Vec<f64> = pairs.iter().map(|(_, s)| scorer.score_features(s)).collect();
    let (loss, dt, ds) = match kind {
        DiscLoss::BradleyTerry => bt_terms(&ts, &ss),
        DiscLoss::CrossEntropy => ce_terms(&ts, &ss),
    };
    let mut grad = scorer.params.zeros_like();
    for (i, (t, s)) in pairs.iter().enumerate() {
        scorer.accumulate_grad(t, dt[i], &mut grad);
        scorer.accumulate_grad(s, ds[i], &mut grad);
    }
    Ok((loss, grad))
}

/// Group loss with one teacher input shared by all `N` student inputs.
pub fn group_loss_and_grad(
    scorer: &Scorer,
    kind: DiscLoss,
    teacher: &[f64],
    students: &[Vec<f64>],
) -> Result<(f64, ParamVector)> {
    if students.is_empty() {
        return Err(Error::arg("group has no student responses"));
    }
    let st = scorer.score_features(teacher);
    let ts = vec![st; students.len()];
    let ss: Vec<f64> = students.iter().map(|f| scorer.score_features(f)).collect();
    let (loss, dt, ds) = match kind {
        DiscLoss::BradleyTerry => bt_terms(&ts, &ss),
        DiscLoss::CrossEntropy => ce_terms(&ts, &ss),
    };
    let mut grad = scorer.params.zeros_like();
    // the shared teacher input collects its coefficient from every pair
    scorer.accumulate_grad(teacher, dt.iter().sum(), &mut grad);
    for (f, c) in students.iter().zip(&ds) {
        scorer.accumulate_grad(f, *c, &mut grad);
    }
    Ok((loss, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub features: FeatureSpec,
    pub scorer: Scorer,
}

impl Discriminator {
    pub fn new(features: FeatureSpec, hidden: usize, init_scale: f64, rng: &mut Rng) -> Self {
        let scorer = Scorer::random(features.input_dim(), hidden, init_scale, rng);
        Self { features, scorer }
    }

    pub fn zeros(features: FeatureSpec, hidden: usize) -> Self {
        let scorer = Scorer::zeros(features.input_dim(), hidden);
        Self { features, scorer }
    }

    pub fn featurize(&self, prompt: &Sequence, response: &Sequence) -> Result<Vec<f64>> {
        featurize(&self.features, prompt, response)
    }

    pub fn score(&self, prompt: &Sequence, response: &Sequence) -> Result<f64> {
        Ok(self.scorer.score_features(&self.featurize(prompt, response)?))
    }

    pub fn params(&self) -> &ParamVector {
        self.scorer.params()
    }

    pub fn params_mut(&mut self) -> &mut ParamVector {
        self.scorer.params_mut()
    }
}

pub fn score(disc: &Discriminator, prompt: &Sequence, response: &Sequence) -> Result<f64> {
    disc.score(prompt, response)
}

fn group_features(
    disc: &Discriminator,
    prompt: &Sequence,
    y_t: &Sequence,
    y_s: &[Sequence],
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let ft = disc.featurize(prompt, y_t)?;
    let fs = y_s.iter().map(|y| disc.featurize(prompt, y)).collect::<Result<Vec<_>>>()?;
    Ok((ft, fs))
}

/// `(1/N) Σ_i -ln σ(D(y_t) - D(y_s^i))` and its exact gradient.
pub fn bt_loss_and_grad(
    disc: &Discriminator,
    prompt: &Sequence,
    y_t: &Sequence,
    y_s: &[Sequence],
) -> Result<(f64, ParamVector)> {
    let (ft, fs) = group_features(disc, prompt, y_t, y_s)?;
    group_loss_and_grad(&disc.scorer, DiscLoss::BradleyTerry, &ft, &fs)
}

/// `(1/N) Σ_i [-ln σ(D(y_t)) - ln(1 - σ(D(y_s^i)))]` and its exact gradient.
pub fn ce_loss_and_grad_disc(
    disc: &Discriminator,
    prompt: &Sequence,
    y_t: &Sequence,
    y_s: &[Sequence],
) -> Result<(f64, ParamVector)> {
    let (ft, fs) = group_features(disc, prompt, y_t, y_s)?;
    group_loss_and_grad(&disc.scorer, DiscLoss::CrossEntropy, &ft, &fs)
}

/// Fraction of `(teacher_score, student_score)` pairs the teacher wins; ties count half.
pub fn pairwise_accuracy(scores: &[(f64, f64)]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::arg("no pairs"));
    }
    let won: f64 = scores
        .iter()
        .map(|(t, s)| {
            if t > s {
                1.0
            } else if t == s {
                0.5
            } else {
                0.0
            }
        })
        .sum();
    Ok(won / scores.len() as f64)
}

pub fn disc_accuracy(disc: &Discriminator, pairs: &[(Sequence, Sequence, Sequence)]) -> Result<f64> {
    let scores =
        pairs.iter().map(|(x, yt, ys)| Ok((disc.score(x, yt)?, disc.score(x, ys)?))).collect::<Result<Vec<_>>>()?;
    pairwise_accuracy(&scores)
}

/// Scores of one teacher response and its student group.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub prompt: Sequence,
    pub teacher_response: Sequence,
    pub student_responses: Vec<Sequence>,
    pub teacher_score: f64,
    pub student_scores: Vec<f64>,
}

impl ScoredPair {
    pub fn score(disc: &Discriminator, prompt: &Sequence, y_t: &Sequence, y_s: &[Sequence]) -> Result<Self> {
        if y_s.is_empty() {
            return Err(Error::arg("group has no student responses"));
        }
        Ok(Self {
            prompt: prompt.clone(),
            teacher_response: y_t.clone(),
            student_responses: y_s.to_vec(),
            teacher_score: disc.score(prompt, y_t)?,
            student_scores: y_s.iter().map(|y| disc.score(prompt, y)).collect::<Result<_>>()?,
        })
    }

    pub fn loss(&self, kind: DiscLoss) -> f64 {
        let ts = vec![self.teacher_score; self.student_scores.len()];
        match kind {
            DiscLoss::BradleyTerry => bt_terms(&ts, &self.student_scores).0,
            DiscLoss::CrossEntropy => ce_terms(&ts, &self.student_scores).0,
        }
    }
}
