//! Experiment construction, checkpoint conversion and the training driver.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gad_core::discriminator::{Discriminator, FeatureSpec};
use gad_core::optim::AdamState;
use gad_core::policy::AutoregressivePolicy;
use gad_core::teacher::{build_dataset, random_prompts, MarkovTeacherSpec, TeacherHandle};
use gad_core::trainers::{offpolicy_protocol, run_gad, run_seqkd, Learner, StepReport};
use gad_core::{Dataset, ParamVector, Rng, Vocab};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{Checkpoint, CheckpointMeta, OptimizerInfo, SegmentInfo, FORMAT_VERSION};
use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::eval::{evaluate, SplitEval};
use crate::io::{create_dir, format_number, to_json, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Cross-entropy on teacher responses only.
    Seqkd,
    /// Warmup, then on-policy adversarial training.
    Gad,
    /// SeqKD warmup, discriminator training, then GAD against the frozen discriminator.
    Offpolicy,
}

/// Teacher, data splits and model shapes derived from one config.
pub struct Experiment {
    pub cfg: RunConfig,
    pub teacher: TeacherHandle<MarkovTeacherSpec>,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl Experiment {
    pub fn build(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let root = Rng::new(cfg.seed);
        let spec = MarkovTeacherSpec::random(&cfg.teacher, &mut root.fork("teacher"))?;
        let teacher = TeacherHandle::oracle(spec);
        let black_box = teacher.to_black_box();
        let vocab = teacher.vocab();
        let split = |name: &str, count: usize| -> Result<Dataset> {
            let prompts = random_prompts(vocab, count, cfg.data.prompt_len, &root.fork(&format!("prompts/{name}")));
            Ok(build_dataset(&black_box, &prompts, &root.fork(&format!("data/{name}")))?)
        };
        Ok(Self {
            cfg: cfg.clone(),
            train: split("train", cfg.data.train_prompts)?,
            val: split("val", cfg.data.val_prompts)?,
            test: split("test", cfg.data.test_prompts)?,
            teacher,
        })
    }

    pub fn vocab(&self) -> Vocab {
        self.teacher.vocab()
    }

    pub fn feature_spec(&self) -> Result<FeatureSpec> {
        Ok(FeatureSpec::new(
            self.vocab(),
            self.cfg.disc.ngram_orders.clone(),
            self.cfg.disc.feature_dim,
            self.cfg.teacher.max_response_len,
        )?)
    }

    /// Freshly initialized student and discriminator.
    pub fn fresh_learner(&self) -> Result<Learner> {
        let root = Rng::new(self.cfg.seed);
        let s = &self.cfg.student;
        let policy = if s.init_scale == 0.0 {
            AutoregressivePolicy::zeros(self.vocab(), s.order)
        } else {
            AutoregressivePolicy::random(self.vocab(), s.order, s.init_scale, &mut root.fork("student-init"))
        };
        let disc = Discriminator::new(
            self.feature_spec()?,
            self.cfg.disc.hidden,
            self.cfg.disc.init_scale,
            &mut root.fork("disc-init"),
        );
        Ok(Learner::new(policy, disc, &self.cfg.train))
    }

    pub fn evaluate(&self, policy: &AutoregressivePolicy, split: &str) -> Result<SplitEval> {
        let data = match split {
            "train" => &self.train,
            "val" => &self.val,
            "test" => &self.test,
            _ => return Err(HarnessError::Core(gad_core::Error::Argument(format!("unknown split {split:?}")))),
        };
        evaluate(policy, &self.teacher, data, split, &self.cfg)
    }

    /// The learner stored in `ckpt`, with shapes checked against this experiment.
    pub fn restore(&self, ckpt: &Checkpoint) -> Result<Learner> {
        let mut l = self.fresh_learner()?;
        fill_params(l.policy.params_mut(), "generator", ckpt)?;
        fill_params(l.disc.params_mut(), "discriminator", ckpt)?;
        fill_vec(&mut l.gen_opt.m, "gen_opt.m", ckpt)?;
        fill_vec(&mut l.gen_opt.v, "gen_opt.v", ckpt)?;
        fill_vec(&mut l.disc_opt.m, "disc_opt.m", ckpt)?;
        fill_vec(&mut l.disc_opt.v, "disc_opt.v", ckpt)?;
        l.gen_opt.lr = ckpt.meta.gen_opt.lr;
        l.gen_opt.step = ckpt.meta.gen_opt.step;
        l.disc_opt.lr = ckpt.meta.disc_opt.lr;
        l.disc_opt.step = ckpt.meta.disc_opt.step;
        if ckpt.meta.segments.iter().any(|s| s.name.starts_with("reference.")) {
            let mut r = l.policy.clone();
            fill_params(r.params_mut(), "reference", ckpt)?;
            l.reference = Some(r.snapshot());
        }
        l.step = ckpt.meta.step;
        Ok(l)
    }
}

fn fill_params(p: &mut ParamVector, prefix: &str, ckpt: &Checkpoint) -> Result<()> {
    let names: Vec<String> = p.segments().iter().map(|s| s.name.clone()).collect();
    for name in names {
        let full = format!("{prefix}.{name}");
        let src = ckpt.segment(&full).ok_or_else(|| HarnessError::Integrity(format!("missing segment {full}")))?;
        let dst = p.segment_mut(&name).expect("segment listed by the vector itself");
        if src.len() != dst.len() {
            return Err(HarnessError::Integrity(format!(
                "segment {full} has {} values, model expects {}",
                src.len(),
                dst.len()
            )));
        }
        dst.copy_from_slice(src);
    }
    Ok(())
}

fn fill_vec(dst: &mut [f64], name: &str, ckpt: &Checkpoint) -> Result<()> {
    let src = ckpt.segment(name).ok_or_else(|| HarnessError::Integrity(format!("missing segment {name}")))?;
    if src.len() != dst.len() {
        return Err(HarnessError::Integrity(format!(
            "segment {name} has {} values, expected {}",
            src.len(),
            dst.len()
        )));
    }
    dst.copy_from_slice(src);
    Ok(())
}

fn push_params(segs: &mut Vec<SegmentInfo>, data: &mut Vec<Vec<f64>>, prefix: &str, p: &ParamVector) {
    for s in p.segments() {
        segs.push(SegmentInfo { name: format!("{prefix}.{}", s.name), len: s.len });
        data.push(p.segment(&s.name).unwrap().to_vec());
    }
}

fn opt_info(o: &AdamState) -> OptimizerInfo {
    OptimizerInfo { lr: o.lr, step: o.step }
}

/// Snapshot of `learner`. `rng` records the training stream the run was
/// derived from.
pub fn checkpoint_of(learner: &Learner, cfg: &RunConfig, phase: &str, rng: &Rng) -> Checkpoint {
    let (mut segs, mut data) = (Vec::new(), Vec::new());
    push_params(&mut segs, &mut data, "generator", learner.policy.params());
    push_params(&mut segs, &mut data, "discriminator", learner.disc.params());
    if let Some(r) = &learner.reference {
        push_params(&mut segs, &mut data, "reference", r.params());
    }
    for (name, v) in [
        ("gen_opt.m", &learner.gen_opt.m),
        ("gen_opt.v", &learner.gen_opt.v),
        ("disc_opt.m", &learner.disc_opt.m),
        ("disc_opt.v", &learner.disc_opt.v),
    ] {
        segs.push(SegmentInfo { name: name.into(), len: v.len() });
        data.push(v.clone());
    }
    Checkpoint {
        meta: CheckpointMeta {
            version: FORMAT_VERSION,
            label: cfg.label.clone(),
            step: learner.step,
            phase: phase.into(),
            segments: segs,
            gen_opt: opt_info(&learner.gen_opt),
            disc_opt: opt_info(&learner.disc_opt),
            rng: rng.state(),
            config: cfg.clone(),
        },
        data,
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &ckpt.to_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    Checkpoint::from_bytes(&crate::io::read(path)?)
}

pub const METRIC_COLUMNS: [&str; 19] = [
    "step",
    "phase",
    "epoch",
    "gen_loss",
    "mean_reward",
    "mean_abs_advantage",
    "disc_loss",
    "disc_accuracy",
    "mean_response_len",
    "kl_to_ref",
    "gen_grad_norm",
    "disc_grad_norm",
    "rollouts",
    "val_logprob_greedy",
    "val_logprob_sample",
    "val_len_greedy",
    "val_len_sample",
    "val_f1_1",
    "val_f1_2",
];

fn csv_row(r: &StepReport, ev: &SplitEval) -> String {
    let f = format_number;
    let f1 = |i: usize| ev.f1_sample.get(i).copied().map_or_else(|| "nan".into(), f);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.step,
        r.phase.as_str(),
        r.epoch,
        f(r.gen_loss),
        f(r.mean_reward),
        f(r.mean_abs_advantage),
        f(r.disc_loss),
        f(r.disc_accuracy),
        f(r.mean_response_len),
        f(r.kl_to_ref),
        f(r.gen_grad_norm),
        f(r.disc_grad_norm),
        r.rollouts,
        f(ev.logprob_greedy),
        f(ev.logprob_sample),
        f(ev.len_greedy),
        f(ev.len_sample),
        f1(0),
        f1(1),
    );
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub step: usize,
    pub phase: String,
    pub file: String,
    pub val_logprob_greedy: f64,
    pub val_len_greedy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub mode: Mode,
    pub seed: u64,
    pub teacher: String,
    pub steps: usize,
    pub val_teacher_len: f64,
    pub checkpoints: Vec<CheckpointRecord>,
    /// Step of the checkpoint with the best validation greedy log-probability
    /// among those whose greedy length is within a factor of 2 of the teacher's.
    pub selected_step: Option<usize>,
    pub final_val: SplitEval,
    pub final_test: SplitEval,
    pub selected_test: Option<SplitEval>,
}

#[derive(Default)]
struct Progress {
    rows: Vec<String>,
    checkpoints: Vec<CheckpointRecord>,
    last_phase: String,
}

fn csv_text(rows: &[String]) -> String {
    let mut s = METRIC_COLUMNS.join(",");
    s.push('\n');
    rows.iter().for_each(|r| s.push_str(r));
    s
}

pub fn checkpoint_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("checkpoints")
}

pub fn checkpoint_path(out_dir: &Path, step: usize) -> PathBuf {
    checkpoint_dir(out_dir).join(format!("step_{step:06}.ckpt"))
}

/// Runs `mode` and writes `config.txt`, `metrics.csv`, checkpoints and
/// `report.json` under `out_dir`. On failure a `FAILED` marker holding the
/// error message is written next to whatever partial output exists.
pub fn train(cfg: &RunConfig, mode: Mode, out_dir: &Path) -> Result<RunReport> {
    create_dir(out_dir)?;
    let failed = out_dir.join("FAILED");
    if failed.exists() {
        std::fs::remove_file(&failed).map_err(|e| HarnessError::io(&failed, e))?;
    }
    let mut progress = Progress::default();
    let result = train_inner(cfg, mode, out_dir, &mut progress);
    if let Err(e) = &result {
        let _ = write_atomic(&out_dir.join("metrics.csv"), csv_text(&progress.rows).as_bytes());
        write_atomic(&failed, format!("{e}\n").as_bytes())?;
    }
    result
}

fn train_inner(cfg: &RunConfig, mode: Mode, out_dir: &Path, progress: &mut Progress) -> Result<RunReport> {
    write_atomic(&out_dir.join("config.txt"), cfg.to_text().as_bytes())?;
    let exp = Experiment::build(cfg)?;
    create_dir(&checkpoint_dir(out_dir))?;
    let rng = Rng::new(cfg.seed).fork("train");
    let mut learner = exp.fresh_learner()?;

    let save = |learner: &Learner, phase: &str, ev: &SplitEval, progress: &mut Progress| -> Result<()> {
        let path = checkpoint_path(out_dir, learner.step);
        save_checkpoint(&checkpoint_of(learner, cfg, phase, &rng), &path)?;
        progress.checkpoints.push(CheckpointRecord {
            step: learner.step,
            phase: phase.into(),
            file: path.strip_prefix(out_dir).unwrap_or(&path).display().to_string(),
            val_logprob_greedy: ev.logprob_greedy,
            val_len_greedy: ev.len_greedy,
        });
        Ok(())
    };

    let ev0 = exp.evaluate(&learner.policy, "val")?;
    save(&learner, "init", &ev0, progress)?;
    progress.last_phase = "init".into();
    let mut last_eval = ev0;

    let interval = cfg.train.checkpoint_interval;
    let mut observe = |l: &Learner, r: &StepReport| -> Result<()> {
        let ev = exp.evaluate(&l.policy, "val")?;
        progress.rows.push(csv_row(r, &ev));
        progress.last_phase = r.phase.as_str().into();
        if interval > 0 && r.step.is_multiple_of(interval) {
            save(l, r.phase.as_str(), &ev, progress)?;
            write_atomic(&out_dir.join("metrics.csv"), csv_text(&progress.rows).as_bytes())?;
        }
        last_eval = ev;
        Ok(())
    };
    match mode {
        Mode::Seqkd => run_seqkd(&mut learner, &exp.train, cfg.train.seqkd_epochs, &cfg.train, &rng, &mut observe)?,
        Mode::Gad => run_gad(&mut learner, &exp.train, &cfg.train, &rng, &mut observe)?,
        Mode::Offpolicy => offpolicy_protocol(&mut learner, &exp.train, &cfg.train, &rng, &mut observe)?,
    }
    if progress.checkpoints.last().map(|c| c.step) != Some(learner.step) {
        let phase = progress.last_phase.clone();
        save(&learner, &phase, &last_eval, progress)?;
    }
    write_atomic(&out_dir.join("metrics.csv"), csv_text(&progress.rows).as_bytes())?;

    let selected_step = select_checkpoint(&progress.checkpoints, exp.val.mean_response_len());
    let selected_test = match selected_step {
        Some(step) => {
            let l = exp.restore(&load_checkpoint(&checkpoint_path(out_dir, step))?)?;
            Some(exp.evaluate(&l.policy, "test")?)
        }
        None => None,
    };
    let report = RunReport {
        label: cfg.label.clone(),
        mode,
        seed: cfg.seed,
        teacher: exp.teacher.spec_id().to_string(),
        steps: learner.step,
        val_teacher_len: exp.val.mean_response_len(),
        checkpoints: progress.checkpoints.clone(),
        selected_step,
        final_val: last_eval,
        final_test: exp.evaluate(&learner.policy, "test")?,
        selected_test,
    };
    write_atomic(&out_dir.join("report.json"), to_json(&report).as_bytes())?;
    Ok(report)
}

/// Best validation greedy log-probability among checkpoints whose greedy
/// mean length lies in `[0.5, 2]` times the teacher's. Earlier steps win ties.
pub fn select_checkpoint(records: &[CheckpointRecord], teacher_len: f64) -> Option<usize> {
    let mut best: Option<&CheckpointRecord> = None;
    for r in records {
        let ok = r.val_len_greedy >= 0.5 * teacher_len && r.val_len_greedy <= 2.0 * teacher_len;
        if ok && best.is_none_or(|b| r.val_logprob_greedy > b.val_logprob_greedy) {
            best = Some(r);
        }
    }
    best.map(|r| r.step)
}
