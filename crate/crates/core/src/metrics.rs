//! Evaluation metrics: n-gram overlap, divergences, entropy and summaries.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::seq::{Sequence, TokenId};
use crate::teacher::MixtureSpec;

/// Multiset of the order-`n` n-grams of a token slice.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NgramProfile {
    pub n: usize,
    pub counts: HashMap<Vec<TokenId>, usize>,
    pub total: usize,
}

impl NgramProfile {
    pub fn new(tokens: &[TokenId], n: usize) -> Self {
        let mut counts = HashMap::new();
        let mut total = 0;
        if n > 0 {
            for g in tokens.windows(n) {
                *counts.entry(g.to_vec()).or_insert(0) += 1;
                total += 1;
            }
        }
        Self { n, counts, total }
    }

    /// `Σ_g min(count_self(g), count_other(g))`
    pub fn matched(&self, other: &NgramProfile) -> usize {
        self.counts.iter().map(|(g, &c)| c.min(other.counts.get(g).copied().unwrap_or(0))).sum()
    }
}

/// F1 plus a flag raised when either side had fewer than `n` tokens.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1 {
    pub f1: f64,
    pub too_short: bool,
}

fn f1_from_counts(matched: usize, cand_total: usize, ref_total: usize) -> f64 {
    if cand_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let p = matched as f64 / cand_total as f64;
    let r = matched as f64 / ref_total as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn ngram_f1(candidate: &Sequence, reference: &Sequence, n: usize) -> Result<F1> {
    if n == 0 {
        return Err(Error::arg("n-gram order must be positive"));
    }
    if candidate.len() < n || reference.len() < n {
        return Ok(F1 { f1: 0.0, too_short: true });
    }
    let c = NgramProfile::new(candidate.tokens(), n);
    let r = NgramProfile::new(reference.tokens(), n);
    Ok(F1 { f1: f1_from_counts(c.matched(&r), c.total, r.total), too_short: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Average {
    /// Pool matched and total counts over the corpus first.
    Micro,
    /// Mean of per-pair F1.
    Macro,
}

pub fn corpus_ngram_f1(pairs: &[(Sequence, Sequence)], n: usize, average: Average) -> Result<f64> {
    if n == 0 {
        return Err(Error::arg("n-gram order must be positive"));
    }
    if pairs.is_empty() {
        return Err(Error::arg("empty corpus"));
    }
    match average {
        Average::Micro => {
            let (mut m, mut ct, mut rt) = (0, 0, 0);
            for (c, r) in pairs {
                let pc = NgramProfile::new(c.tokens(), n);
                let pr = NgramProfile::new(r.tokens(), n);
                m += pc.matched(&pr);
                ct += pc.total;
                rt += pr.total;
            }
            Ok(f1_from_counts(m, ct, rt))
        }
        Average::Macro => {
            let mut sum = 0.0;
            for (c, r) in pairs {
                sum += ngram_f1(c, r, n)?.f1;
            }
            Ok(sum / pairs.len() as f64)
        }
    }
}

/// `Σ p log(p/q)`; `+inf` when `p` puts mass where `q` has none.
pub fn forward_kl(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::arg(format!("length mismatch: {} vs {}", p.len(), q.len())));
    }
    let mut kl = 0.0;
    for (&pk, &qk) in p.iter().zip(q) {
        if pk == 0.0 {
            continue;
        }
        if qk == 0.0 {
            return Ok(f64::INFINITY);
        }
        kl += pk * (pk / qk).ln();
    }
    Ok(kl.max(0.0))
}

/// `forward_kl(q, p)`
pub fn reverse_kl(p: &[f64], q: &[f64]) -> Result<f64> {
    forward_kl(q, p)
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

/// The teacher component whose ±`radius` window around its rounded mean
/// holds the most student mass, with that mass. Earlier components win ties.
pub fn mode_mass(student_pmf: &[f64], teacher: &MixtureSpec, radius: usize) -> (usize, f64) {
    let k = student_pmf.len() as i64;
    let mut best = (0, f64::NEG_INFINITY);
    for (i, c) in teacher.components().iter().enumerate() {
        let center = (c.mean.round() as i64).clamp(0, k - 1);
        let lo = (center - radius as i64).max(0);
        let hi = (center + radius as i64).min(k - 1);
        let mass: f64 = (lo..=hi).map(|j| student_pmf[j as usize]).sum();
        if mass > best.1 {
            best = (i, mass);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

/// Mean, population std, min and max.
pub fn summary_stats(xs: &[f64]) -> Result<Summary> {
    if xs.is_empty() {
        return Err(Error::arg("no values"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    let min = xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(Summary { mean, std, min, max })
}

pub fn length_stats(responses: &[Sequence]) -> Result<Summary> {
    let lens: Vec<f64> = responses.iter().map(|r| r.len() as f64).collect();
    summary_stats(&lens)
}

pub fn reward_stats(rewards: &[f64]) -> Result<Summary> {
    summary_stats(rewards)
}
