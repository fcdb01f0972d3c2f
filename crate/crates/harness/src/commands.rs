//! Implementations of the non-training subcommands.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use gad_core::metrics::{corpus_ngram_f1, ngram_f1, summary_stats, Average};
use gad_core::toy::{run_toy, toy_figure_csv, ToyRunResult};
use gad_core::{Sequence, Vocab};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::io::{create_dir, format_number, to_json, write_atomic};
use crate::run::{load_checkpoint, Experiment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub checkpoint: String,
    pub label: String,
    pub step: usize,
    pub phase: String,
    pub seed: u64,
    pub teacher: String,
    pub metrics: BTreeMap<String, f64>,
}

/// Validation and test metrics of a saved student. `config` replaces the
/// configuration stored in the checkpoint.
pub fn eval_checkpoint(path: &Path, config: Option<&RunConfig>) -> Result<EvalReport> {
    let ckpt = load_checkpoint(path)?;
    let cfg = config.cloned().unwrap_or_else(|| ckpt.meta.config.clone());
    let exp = Experiment::build(&cfg)?;
    let learner = exp.restore(&ckpt)?;
    let mut metrics = BTreeMap::new();
    for split in ["val", "test"] {
        metrics.extend(exp.evaluate(&learner.policy, split)?.entries());
    }
    Ok(EvalReport {
        checkpoint: path.display().to_string(),
        label: ckpt.meta.label.clone(),
        step: ckpt.meta.step,
        phase: ckpt.meta.phase.clone(),
        seed: cfg.seed,
        teacher: exp.teacher.spec_id().to_string(),
        metrics,
    })
}

fn read_token_lines(path: &Path) -> Result<Vec<Vec<u32>>> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            line.split_whitespace()
                .map(|t| {
                    t.parse::<u32>().map_err(|_| HarnessError::Parse {
                        file: path.display().to_string(),
                        line: i + 1,
                        msg: format!("not a token id: {t:?}"),
                    })
                })
                .collect()
        })
        .collect()
}

/// Corpus n-gram F1 between two files of whitespace-separated token ids,
/// one response per line. Returns a CSV table with one row per order.
pub fn ngram_table(candidates: &Path, references: &Path, n_min: usize, n_max: usize) -> Result<String> {
    if n_min == 0 || n_min > n_max {
        return Err(gad_core::Error::Argument(format!("bad n-gram range {n_min}..={n_max}")).into());
    }
    let cand = read_token_lines(candidates)?;
    let refs = read_token_lines(references)?;
    if cand.len() != refs.len() {
        let (file, line) =
            if cand.len() < refs.len() { (candidates, cand.len() + 1) } else { (references, refs.len() + 1) };
        return Err(HarnessError::Parse {
            file: file.display().to_string(),
            line,
            msg: format!("{} candidates but {} references", cand.len(), refs.len()),
        });
    }
    if cand.is_empty() {
        return Err(HarnessError::Parse {
            file: candidates.display().to_string(),
            line: 1,
            msg: "no responses".into(),
        });
    }
    let max_id = cand.iter().chain(&refs).flatten().copied().max().unwrap_or(0);
    let vocab = Vocab::new(max_id + 2)?;
    let max_len = cand.iter().chain(&refs).map(Vec::len).max().unwrap_or(0);
    let to_seq = |ids: &Vec<u32>| Sequence::from_ids(ids, vocab, max_len);
    let pairs =
        cand.iter().zip(&refs).map(|(c, r)| Ok((to_seq(c)?, to_seq(r)?))).collect::<gad_core::Result<Vec<_>>>()?;

    let mut out = String::from("n,micro,macro,mean,std,min,max,short\n");
    for n in n_min..=n_max {
        let micro = corpus_ngram_f1(&pairs, n, Average::Micro)?;
        let mac = corpus_ngram_f1(&pairs, n, Average::Macro)?;
        let per = pairs.iter().map(|(c, r)| ngram_f1(c, r, n)).collect::<gad_core::Result<Vec<_>>>()?;
        let f1s: Vec<f64> = per.iter().map(|f| f.f1).collect();
        let s = summary_stats(&f1s)?;
        let short = per.iter().filter(|f| f.too_short).count();
        let f = format_number;
        let _ =
            writeln!(out, "{n},{},{},{},{},{},{},{short}", f(micro), f(mac), f(s.mean), f(s.std), f(s.min), f(s.max));
    }
    Ok(out)
}

/// Runs the toy comparison and writes `toy_figure.csv` and `toy_summary.json`.
pub fn toy(cfg: &RunConfig, out_dir: &Path) -> Result<ToyRunResult> {
    let spec = cfg.toy.mixture()?;
    let result = run_toy(&spec, &cfg.toy.run, cfg.seed)?;
    create_dir(out_dir)?;
    write_atomic(&out_dir.join("toy_figure.csv"), toy_figure_csv(&result).as_bytes())?;
    write_atomic(&out_dir.join("toy_summary.json"), to_json(&result).as_bytes())?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSummary {
    pub name: String,
    pub len: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectReport {
    pub label: String,
    pub step: usize,
    pub phase: String,
    pub seed: u64,
    pub gen_opt_step: u64,
    pub disc_opt_step: u64,
    pub segments: Vec<SegmentSummary>,
}

pub fn inspect(path: &Path) -> Result<InspectReport> {
    let ckpt = load_checkpoint(path)?;
    let segments = ckpt
        .meta
        .segments
        .iter()
        .zip(&ckpt.data)
        .map(|(s, d)| SegmentSummary {
            name: s.name.clone(),
            len: s.len,
            norm: d.iter().map(|x| x * x).sum::<f64>().sqrt(),
        })
        .collect();
    Ok(InspectReport {
        label: ckpt.meta.label.clone(),
        step: ckpt.meta.step,
        phase: ckpt.meta.phase.clone(),
        seed: ckpt.meta.config.seed,
        gen_opt_step: ckpt.meta.gen_opt.step,
        disc_opt_step: ckpt.meta.disc_opt.step,
        segments,
    })
}
