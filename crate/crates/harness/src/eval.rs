//! Teacher-oracle evaluation of a student on a held-out split.

use gad_core::metrics::{corpus_ngram_f1, summary_stats, Average};
use gad_core::policy::{policy_sample, AutoregressivePolicy};
use gad_core::teacher::{seq_teacher_logprob, MarkovTeacherSpec, TeacherHandle};
use gad_core::{Dataset, Rng, Sequence};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitEval {
    pub split: String,
    pub prompts: usize,
    /// Mean teacher log-probability of the greedy responses.
    pub logprob_greedy: f64,
    /// Same for the temperature samples, averaged over all samples.
    pub logprob_sample: f64,
    pub len_greedy: f64,
    pub len_sample: f64,
    pub len_sample_std: f64,
    pub len_sample_min: f64,
    pub len_sample_max: f64,
    pub teacher_len: f64,
    /// Micro-averaged corpus F1 against the reference responses, `n = 1..`.
    pub f1_greedy: Vec<f64>,
    pub f1_sample: Vec<f64>,
}

impl SplitEval {
    /// Flat `split.metric` entries.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let p = &self.split;
        let mut out = vec![
            (format!("{p}.logprob_greedy"), self.logprob_greedy),
            (format!("{p}.logprob_sample"), self.logprob_sample),
            (format!("{p}.len_greedy"), self.len_greedy),
            (format!("{p}.len_sample"), self.len_sample),
            (format!("{p}.len_sample_std"), self.len_sample_std),
            (format!("{p}.len_sample_min"), self.len_sample_min),
            (format!("{p}.len_sample_max"), self.len_sample_max),
            (format!("{p}.teacher_len"), self.teacher_len),
        ];
        for (i, v) in self.f1_greedy.iter().enumerate() {
            out.push((format!("{p}.f1_greedy_{}", i + 1), *v));
        }
        for (i, v) in self.f1_sample.iter().enumerate() {
            out.push((format!("{p}.f1_sample_{}", i + 1), *v));
        }
        out
    }
}

struct PromptOutputs {
    greedy: Sequence,
    samples: Vec<Sequence>,
    lp_greedy: f64,
    lp_samples: Vec<f64>,
}

/// Greedy and `cfg.eval.samples` temperature samples per prompt, scored by the
/// teacher oracle. Sample `k` of prompt `i` draws from the stream
/// `eval/{split}/sample/{i}/{k}` of the run seed, so results do not depend on
/// thread count or on training progress.
pub fn evaluate(
    policy: &AutoregressivePolicy,
    teacher: &TeacherHandle<MarkovTeacherSpec>,
    dataset: &Dataset,
    split: &str,
    cfg: &RunConfig,
) -> Result<SplitEval> {
    let base = Rng::new(cfg.seed).fork("eval").fork(split);
    let max_len = cfg.train.max_response_len;
    let tau = cfg.train.temperature;
    let outputs = dataset
        .episodes()
        .par_iter()
        .enumerate()
        .map(|(i, ep)| -> Result<PromptOutputs> {
            let mut unused = base.fork("greedy");
            let greedy = policy_sample(policy, &ep.prompt, 0.0, max_len, &mut unused);
            let lp_greedy = seq_teacher_logprob(teacher, &ep.prompt, &greedy)?;
            let mut samples = Vec::with_capacity(cfg.eval.samples);
            let mut lp_samples = Vec::with_capacity(cfg.eval.samples);
            for k in 0..cfg.eval.samples {
                let mut r = base.fork(&format!("sample/{i}/{k}"));
                let s = policy_sample(policy, &ep.prompt, tau, max_len, &mut r);
                lp_samples.push(seq_teacher_logprob(teacher, &ep.prompt, &s)?);
                samples.push(s);
            }
            Ok(PromptOutputs { greedy, samples, lp_greedy, lp_samples })
        })
        .collect::<Result<Vec<_>>>()?;

    let n = outputs.len() as f64;
    let greedy_pairs: Vec<(Sequence, Sequence)> =
        outputs.iter().zip(dataset.episodes()).map(|(o, ep)| (o.greedy.clone(), ep.teacher_response.clone())).collect();
    let sample_pairs: Vec<(Sequence, Sequence)> = outputs
        .iter()
        .zip(dataset.episodes())
        .flat_map(|(o, ep)| o.samples.iter().map(move |s| (s.clone(), ep.teacher_response.clone())))
        .collect();
    let lp_samples: Vec<f64> = outputs.iter().flat_map(|o| o.lp_samples.iter().copied()).collect();
    let sample_lens: Vec<f64> = sample_pairs.iter().map(|(s, _)| s.len() as f64).collect();

    let f1 = |pairs: &[(Sequence, Sequence)]| -> Result<Vec<f64>> {
        if pairs.is_empty() {
            return Ok(Vec::new());
        }
        (1..=cfg.eval.ngram_max).map(|k| Ok(corpus_ngram_f1(pairs, k, Average::Micro)?)).collect()
    };
    let (mean_lp_sample, len_summary) = if sample_lens.is_empty() {
        (f64::NAN, None)
    } else {
        (lp_samples.iter().sum::<f64>() / lp_samples.len() as f64, Some(summary_stats(&sample_lens)?))
    };
    Ok(SplitEval {
        split: split.to_string(),
        prompts: outputs.len(),
        logprob_greedy: outputs.iter().map(|o| o.lp_greedy).sum::<f64>() / n,
        logprob_sample: mean_lp_sample,
        len_greedy: outputs.iter().map(|o| o.greedy.len() as f64).sum::<f64>() / n,
        len_sample: len_summary.map_or(f64::NAN, |s| s.mean),
        len_sample_std: len_summary.map_or(f64::NAN, |s| s.std),
        len_sample_min: len_summary.map_or(f64::NAN, |s| s.min),
        len_sample_max: len_summary.map_or(f64::NAN, |s| s.max),
        teacher_len: dataset.mean_response_len(),
        f1_greedy: f1(&greedy_pairs)?,
        f1_sample: f1(&sample_pairs)?,
    })
}
