//! Toy study: a single-Gaussian student distilled from a discretized Gaussian
//! mixture, once by maximum likelihood on teacher samples (SeqKD) and once
//! adversarially with REINFORCE against a one-hot discriminator (GAD).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discriminator::{pairs_loss_and_grad, pairwise_accuracy, DiscLoss, Scorer};
use crate::error::{Error, Result};
use crate::metrics::{entropy, forward_kl, mode_mass, reverse_kl};
use crate::optim::{adam_step, AdamState};
use crate::policy::GaussianStudent;
use crate::rng::Rng;
use crate::teacher::{toy_teacher_sample, MixtureSpec, TeacherHandle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub init_mu: f64,
    pub init_sigma: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub student_lr: f64,
    pub disc_lr: f64,
    pub disc_hidden: usize,
    pub disc_init_scale: f64,
    pub seqkd_samples: usize,
    pub seqkd_lr: f64,
    pub seqkd_max_steps: usize,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            init_mu: 4.5,
            init_sigma: 2.0,
            batch_size: 64,
            steps: 1500,
            student_lr: 0.02,
            disc_lr: 0.02,
            disc_hidden: 16,
            disc_init_scale: 0.5,
            seqkd_samples: 10_000,
            seqkd_lr: 0.05,
            seqkd_max_steps: 5000,
        }
    }
}

impl ToyConfig {
    pub fn initial_student(&self, support: usize) -> GaussianStudent {
        GaussianStudent::new(self.init_mu, self.init_sigma, support)
    }
}

pub fn one_hot(k: usize, size: usize) -> Vec<f64> {
    let mut v = vec![0.0; size];
    v[k] = 1.0;
    v
}

/// Toy discriminator: the standard scorer over one-hot category features.
pub fn toy_discriminator(support: usize, cfg: &ToyConfig, rng: &mut Rng) -> Scorer {
    Scorer::random(support, cfg.disc_hidden, cfg.disc_init_scale, rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyStepReport {
    pub step: usize,
    pub mean_reward: f64,
    pub disc_loss: f64,
    pub disc_accuracy: f64,
    pub mu: f64,
    pub sigma: f64,
}

fn check_student(s: &GaussianStudent) -> Result<()> {
    if s.mu.is_finite() && s.log_sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("student diverged: mu={} log_sigma={}", s.mu, s.log_sigma)))
    }
}

/// One REINFORCE step for the student with the batch-mean reward as
/// baseline, then one Bradley-Terry step for the discriminator pairing the
/// i-th teacher sample with the i-th student sample.
#[allow(clippy::too_many_arguments)]
pub fn reinforce_step_toy(
    student: &mut GaussianStudent,
    disc: &mut Scorer,
    teacher: &TeacherHandle<MixtureSpec>,
    student_opt: &mut AdamState,
    disc_opt: &mut AdamState,
    cfg: &ToyConfig,
    rng: &Rng,
    step: usize,
) -> Result<ToyStepReport> {
    let k = student.support;
    let b = cfg.batch_size;
    if b == 0 {
        return Err(Error::arg("toy batch size must be positive"));
    }
    let ys = student.sample(&mut rng.fork("student"), b);
    let ts = toy_teacher_sample(teacher, &mut rng.fork("teacher"), b);
    let fs: Vec<Vec<f64>> = ys.iter().map(|&y| one_hot(y, k)).collect();
    let ft: Vec<Vec<f64>> = ts.iter().map(|&t| one_hot(t, k)).collect();

    let rewards: Vec<f64> = fs.iter().map(|f| disc.score_features(f)).collect();
    let baseline = rewards.iter().sum::<f64>() / b as f64;
    let mut g = [0.0; 2];
    for (&y, r) in ys.iter().zip(&rewards) {
        let s = student.grad_logp(y)?;
        let c = (r - baseline) / b as f64;
        g[0] += c * s[0];
        g[1] += c * s[1];
    }
    let mut params = student.to_params();
    let mut descent = params.zeros_like();
    descent.values_mut().copy_from_slice(&[-g[0], -g[1]]);
    adam_step(&mut params, &descent, student_opt)?;
    student.set_params(&params);
    check_student(student)?;

    let pairs: Vec<(&[f64], &[f64])> = ft.iter().zip(&fs).map(|(t, s)| (t.as_slice(), s.as_slice())).collect();
    let scores: Vec<(f64, f64)> = pairs.iter().map(|(t, s)| (disc.score_features(t), disc.score_features(s))).collect();
    let (disc_loss, grad) = pairs_loss_and_grad(disc, DiscLoss::BradleyTerry, &pairs)?;
    adam_step(disc.params_mut(), &grad, disc_opt)?;
    if !disc.params().is_finite() {
        return Err(Error::NonFinite("toy discriminator diverged".into()));
    }
    Ok(ToyStepReport {
        step,
        mean_reward: baseline,
        disc_loss,
        disc_accuracy: pairwise_accuracy(&scores)?,
        mu: student.mu,
        sigma: student.sigma(),
    })
}

/// Fits the student to `sample_count` teacher samples by Adam on the mean
/// cross-entropy, stopping when the gradient norm drops below 1e-6.
pub fn run_toy_seqkd(
    teacher: &TeacherHandle<MixtureSpec>,
    init: GaussianStudent,
    sample_count: usize,
    cfg: &ToyConfig,
    rng: &Rng,
) -> Result<GaussianStudent> {
    if sample_count < 100 {
        return Err(Error::arg(format!("need at least 100 teacher samples, got {sample_count}")));
    }
    let k = teacher.support();
    let mut freq = vec![0.0; k];
    for s in toy_teacher_sample(teacher, &mut rng.fork("samples"), sample_count) {
        freq[s] += 1.0 / sample_count as f64;
    }
    let mut student = init;
    let mut params = student.to_params();
    let mut opt = AdamState::for_params(&params, cfg.seqkd_lr);
    for _ in 0..cfg.seqkd_max_steps {
        let mut g = [0.0; 2];
        for (c, f) in freq.iter().enumerate() {
            if *f > 0.0 {
                let s = student.grad_logp(c)?;
                g[0] -= f * s[0];
                g[1] -= f * s[1];
            }
        }
        if g[0].hypot(g[1]) < 1e-6 {
            break;
        }
        let mut grad = params.zeros_like();
        grad.values_mut().copy_from_slice(&g);
        adam_step(&mut params, &grad, &mut opt)?;
        student.set_params(&params);
        check_student(&student)?;
    }
    Ok(student)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTrace {
    pub steps: Vec<ToyStepReport>,
}

impl ToyTrace {
    pub fn rewards(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.mean_reward).collect()
    }
}

/// Alternating REINFORCE / discriminator training from `cfg`'s initial student.
pub fn run_toy_gad(
    teacher: &TeacherHandle<MixtureSpec>,
    cfg: &ToyConfig,
    rng: &Rng,
) -> Result<(GaussianStudent, ToyTrace)> {
    let k = teacher.support();
    let mut student = cfg.initial_student(k);
    let mut disc = toy_discriminator(k, cfg, &mut rng.fork("disc-init"));
    let mut student_opt = AdamState::new(2, cfg.student_lr);
    let mut disc_opt = AdamState::for_params(disc.params(), cfg.disc_lr);
    let mut steps = Vec::with_capacity(cfg.steps);
    for s in 0..cfg.steps {
        let r = rng.fork(&format!("step/{s}"));
        let rep = reinforce_step_toy(&mut student, &mut disc, teacher, &mut student_opt, &mut disc_opt, cfg, &r, s + 1)
            .map_err(|e| match e {
                Error::NonFinite(msg) => Error::NonFinite(format!("{msg}; trace: {:?}", steps.last())),
                other => other,
            })?;
        steps.push(rep);
    }
    Ok((student, ToyTrace { steps }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub component: usize,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyRunResult {
    pub teacher_pmf: Vec<f64>,
    pub seqkd_pmf: Vec<f64>,
    pub gad_pmf: Vec<f64>,
    pub reward_trace: Vec<f64>,
    pub seqkd_student: GaussianStudent,
    pub gad_student: GaussianStudent,
    pub seqkd_mode: ModeSummary,
    pub gad_mode: ModeSummary,
    pub seqkd_forward_kl: f64,
    pub seqkd_reverse_kl: f64,
    pub gad_forward_kl: f64,
    pub gad_reverse_kl: f64,
    pub teacher_entropy: f64,
    pub gad_entropy: f64,
    /// `gad_reverse_kl < seqkd_reverse_kl`
    pub gad_reverse_kl_lower: bool,
}

/// Both toy pipelines on `spec`, compared against the exact teacher pmf.
pub fn run_toy(spec: &MixtureSpec, cfg: &ToyConfig, seed: u64) -> Result<ToyRunResult> {
    let oracle = TeacherHandle::oracle(spec.clone());
    let black_box = oracle.to_black_box();
    let rng = Rng::new(seed);
    let k = spec.support();
    let seqkd_student = run_toy_seqkd(&black_box, cfg.initial_student(k), cfg.seqkd_samples, cfg, &rng.fork("seqkd"))?;
    let (gad_student, trace) = run_toy_gad(&black_box, cfg, &rng.fork("gad"))?;

    let teacher_pmf = oracle.pmf()?;
    let seqkd_pmf = seqkd_student.pmf();
    let gad_pmf = gad_student.pmf();
    let mode = |pmf: &[f64]| {
        let (component, mass) = mode_mass(pmf, spec, 1);
        ModeSummary { component, mass }
    };
    let seqkd_reverse_kl = reverse_kl(&teacher_pmf, &seqkd_pmf)?;
    let gad_reverse_kl = reverse_kl(&teacher_pmf, &gad_pmf)?;
    Ok(ToyRunResult {
        seqkd_mode: mode(&seqkd_pmf),
        gad_mode: mode(&gad_pmf),
        seqkd_forward_kl: forward_kl(&teacher_pmf, &seqkd_pmf)?,
        gad_forward_kl: forward_kl(&teacher_pmf, &gad_pmf)?,
        teacher_entropy: entropy(&teacher_pmf),
        gad_entropy: entropy(&gad_pmf),
        gad_reverse_kl_lower: gad_reverse_kl < seqkd_reverse_kl,
        seqkd_reverse_kl,
        gad_reverse_kl,
        reward_trace: trace.rewards(),
        teacher_pmf,
        seqkd_pmf,
        gad_pmf,
        seqkd_student,
        gad_student,
    })
}

/// Numbers in the CSV dialect: 17 significant digits, `.` decimal point.
pub fn format_number(x: f64) -> String {
    format!("{x:.16e}")
}

/// `category,teacher,seqkd,gad` table, one row per support point.
pub fn toy_figure_csv(result: &ToyRunResult) -> String {
    let mut out = String::from("category,teacher,seqkd,gad\n");
    for k in 0..result.teacher_pmf.len() {
        let _ = writeln!(
            out,
            "{k},{},{},{}",
            format_number(result.teacher_pmf[k]),
            format_number(result.seqkd_pmf[k]),
            format_number(result.gad_pmf[k])
        );
    }
    out
}

pub fn emit_toy_figure_data(result: &ToyRunResult, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, toy_figure_csv(result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::teacher::MixtureComponent;

    fn single(mean: f64) -> MixtureSpec {
        MixtureSpec::new(vec![MixtureComponent { weight: 1.0, mean, std: 0.7 }], 10).unwrap()
    }

    #[test]
    fn seqkd_zero_steps_returns_init() {
        let h = TeacherHandle::black_box(single(5.0));
        let cfg = ToyConfig { seqkd_max_steps: 0, ..Default::default() };
        let init = cfg.initial_student(10);
        assert_eq!(run_toy_seqkd(&h, init, 500, &cfg, &Rng::new(1)).unwrap(), init);
        assert!(run_toy_seqkd(&h, init, 99, &cfg, &Rng::new(1)).is_err());
    }

    #[test]
    fn seqkd_single_mode_recovers_mean() {
        let h = TeacherHandle::black_box(single(5.0));
        let cfg = ToyConfig::default();
        let s = run_toy_seqkd(&h, cfg.initial_student(10), 10_000, &cfg, &Rng::new(2)).unwrap();
        assert!((s.mu - 5.0).abs() < 0.1, "mu = {}", s.mu);
    }

    #[test]
    fn constant_disc_leaves_student_unchanged() {
        let spec = MixtureSpec::default_fixture();
        let h = TeacherHandle::black_box(spec);
        let cfg = ToyConfig::default();
        let mut disc = Scorer::zeros(10, 4);
        let mut student = cfg.initial_student(10);
        let before = student;
        let mut so = AdamState::new(2, 0.1);
        let mut d_opt = AdamState::for_params(disc.params(), 0.0);
        for s in 0..20 {
            reinforce_step_toy(&mut student, &mut disc, &h, &mut so, &mut d_opt, &cfg, &Rng::new(s), s as usize)
                .unwrap();
        }
        assert_eq!(student, before);
    }

    #[test]
    fn figure_csv_shape() {
        let cfg = ToyConfig { steps: 5, seqkd_max_steps: 10, ..Default::default() };
        let r = run_toy(&MixtureSpec::default_fixture(), &cfg, 3).unwrap();
        let csv = toy_figure_csv(&r);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 11);
        assert_eq!(lines[0], "category,teacher,seqkd,gad");
    }
}
