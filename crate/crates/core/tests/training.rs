//! Generator and discriminator training loops on a small Markov task.

use gad_core::discriminator::{Discriminator, FeatureSpec, OUT_W};
use gad_core::optim::AdamState;
use gad_core::policy::{policy_grad_logprob, AutoregressivePolicy};
use gad_core::teacher::{build_dataset, random_prompts, MarkovTeacherParams, MarkovTeacherSpec, TeacherHandle};
use gad_core::trainers::{
    gad_step, no_observer, offpolicy_protocol, rollout, run_gad, run_seqkd, sample_groups, seqkd_epoch,
    surrogate_objective_and_grad, DiscMode, Learner, Phase, StepReport, TrainConfig,
};
use gad_core::{Dataset, Episode, Rng};

fn task(seed: u64, prompts: usize) -> Dataset {
    let params = MarkovTeacherParams { vocab_size: 5, classes: 2, max_response_len: 10, ..Default::default() };
    let spec = MarkovTeacherSpec::random(&params, &mut Rng::new(seed)).unwrap();
    let teacher = TeacherHandle::black_box(spec);
    let root = Rng::new(seed).fork("data");
    let xs = random_prompts(teacher.vocab(), prompts, 3, &root.fork("prompts"));
    build_dataset(&teacher, &xs, &root.fork("responses")).unwrap()
}

fn cfg() -> TrainConfig {
    TrainConfig {
        group_size: 4,
        batch_size: 4,
        max_response_len: 10,
        disc_pretrain_steps: 2,
        warmup_lr: 0.05,
        gen_lr: 0.02,
        disc_lr: 0.02,
        ..Default::default()
    }
}

fn learner(data: &Dataset, seed: u64) -> Learner {
    let mut rng = Rng::new(seed);
    let policy = AutoregressivePolicy::random(data.vocab(), 2, 0.3, &mut rng);
    let features = FeatureSpec::new(data.vocab(), vec![1, 2], 32, 10).unwrap();
    let disc = Discriminator::new(features, 4, 0.5, &mut rng);
    Learner::new(policy, disc, &cfg())
}

fn batch(data: &Dataset, n: usize) -> Vec<&Episode> {
    data.episodes().iter().take(n).collect()
}

#[test]
fn constant_discriminator_without_kl_leaves_generator_unchanged() {
    let data = task(1, 8);
    let mut l = learner(&data, 2);
    l.disc.params_mut().segment_mut(OUT_W).unwrap().fill(0.0);
    let c = TrainConfig { kl_weight: 0.0, ..cfg() };
    let reference = l.policy.snapshot();
    let before = l.policy.clone();
    let out = gad_step(
        &mut l.policy,
        &reference,
        &mut l.disc,
        &batch(&data, 4),
        &mut l.gen_opt,
        &mut l.disc_opt,
        &c,
        &Rng::new(3),
    )
    .unwrap();
    assert!(out.groups.iter().all(|g| g.advantages.iter().all(|&a| a == 0.0)));
    assert_eq!(l.policy, before);
}

#[test]
fn surrogate_gradient_is_advantage_weighted_score() {
    let data = task(4, 8);
    let l = learner(&data, 5);
    let c = TrainConfig { kl_weight: 0.0, ..cfg() };
    let b = batch(&data, 3);
    let groups = rollout(&l.policy, &l.disc, &b, &c, &Rng::new(6)).unwrap();
    assert!(groups.iter().any(|g| g.advantages.iter().any(|&a| a != 0.0)));
    let (_, grad, _) = surrogate_objective_and_grad(&l.policy, &l.policy.snapshot(), &groups, &c).unwrap();
    let mut expect = l.policy.params().zeros_like();
    for g in &groups {
        let w = 1.0 / (groups.len() * g.responses.len()) as f64;
        for (y, a) in g.responses.iter().zip(&g.advantages) {
            expect.add_scaled(w * a, &policy_grad_logprob(&l.policy, &g.prompt, y, c.temperature));
        }
    }
    for (x, y) in grad.values().iter().zip(expect.values()) {
        assert!((x - y).abs() < 1e-10);
    }
}

#[test]
fn kl_penalty_vanishes_at_reference_and_pulls_back_otherwise() {
    let data = task(7, 8);
    let l = learner(&data, 8);
    let c = TrainConfig { kl_weight: 1.0, ..cfg() };
    let b = batch(&data, 2);
    let mut groups = rollout(&l.policy, &l.disc, &b, &c, &Rng::new(9)).unwrap();
    groups.iter_mut().for_each(|g| g.advantages.fill(0.0));
    let (_, g0, kl0) = surrogate_objective_and_grad(&l.policy, &l.policy.snapshot(), &groups, &c).unwrap();
    assert_eq!(kl0, 0.0);
    assert!(g0.norm() < 1e-15);
    let far = AutoregressivePolicy::random(data.vocab(), 2, 1.0, &mut Rng::new(10)).snapshot();
    let (obj, g1, kl1) = surrogate_objective_and_grad(&l.policy, &far, &groups, &c).unwrap();
    assert!(kl1 > 0.0 && obj < 0.0 && g1.norm() > 0.0);
}

#[test]
fn rollouts_have_group_size_and_do_not_depend_on_threads() {
    let data = task(11, 8);
    let l = learner(&data, 12);
    let b = batch(&data, 4);
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = serial.install(|| rollout(&l.policy, &l.disc, &b, &cfg(), &Rng::new(13)).unwrap());
    let z = wide.install(|| rollout(&l.policy, &l.disc, &b, &cfg(), &Rng::new(13)).unwrap());
    assert_eq!(a, z);
    assert_eq!(a.len(), 4);
    assert!(a.iter().all(|g| g.responses.len() == 4 && g.behavior_logprobs.len() == 4));
    assert!(a.iter().all(|g| g.responses.iter().all(|y| y.len() <= 10)));
}

#[test]
fn seqkd_lowers_loss_and_is_reproducible() {
    let data = task(14, 64);
    let run = |lr: f64| {
        let mut l = learner(&data, 15);
        let mut opt = AdamState::for_params(l.policy.params(), lr);
        let losses: Vec<Vec<f64>> = (0..4)
            .map(|e| seqkd_epoch(&mut l.policy, &data, &mut opt, &cfg(), &Rng::new(16).fork(&e.to_string())).unwrap())
            .collect();
        (l.policy, losses)
    };
    let (p1, losses) = run(0.05);
    let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&losses[3]) < mean(&losses[0]));
    assert_eq!(run(0.05).0, p1);
    let (frozen, _) = run(0.0);
    assert_eq!(frozen, learner(&data, 15).policy);
}

fn collect_reports(
    f: impl FnOnce(&mut Learner, &mut dyn FnMut(&Learner, &StepReport) -> gad_core::Result<()>) -> gad_core::Result<()>,
    l: &mut Learner,
) -> Vec<StepReport> {
    let mut reports = Vec::new();
    let mut obs = |_: &Learner, r: &StepReport| {
        reports.push(r.clone());
        Ok(())
    };
    f(l, &mut obs).unwrap();
    reports
}

#[test]
fn gad_pipeline_step_counts_and_phases() {
    let data = task(17, 16);
    let c = TrainConfig { gad_epochs: 1, ..cfg() };
    let mut l = learner(&data, 18);
    let reports = collect_reports(|l, mut obs| run_gad(l, &data, &c, &Rng::new(19), &mut obs), &mut l);
    let per_epoch = 4;
    assert_eq!(reports.len(), 2 * per_epoch);
    assert!(reports[..per_epoch].iter().all(|r| r.phase == Phase::Warmup));
    assert!(reports[per_epoch..].iter().all(|r| r.phase == Phase::Gad && r.rollouts == 16));
    assert_eq!(reports.iter().map(|r| r.step).collect::<Vec<_>>(), (1..=8).collect::<Vec<_>>());
    // discriminator-only warmup batches leave the generator loss unset
    assert!(reports[..2].iter().all(|r| r.gen_loss == 0.0));
    assert!(reports[2..per_epoch].iter().all(|r| r.gen_loss > 0.0));
    assert_eq!(l.step, 8);
    assert!(l.reference.is_some());
}

#[test]
fn pipelines_are_deterministic() {
    let data = task(20, 16);
    let c = TrainConfig { gad_epochs: 1, ..cfg() };
    let go = || {
        let mut l = learner(&data, 21);
        run_gad(&mut l, &data, &c, &Rng::new(22), &mut no_observer).unwrap();
        l
    };
    assert_eq!(go(), go());
}

#[test]
fn frozen_protocol_keeps_discriminator_fixed_during_gad() {
    let data = task(23, 32);
    let c = TrainConfig { gad_epochs: 1, disc_epochs: 3, disc_mode: DiscMode::Frozen, ..cfg() };
    let mut l = learner(&data, 24);
    let mut snapshots = Vec::new();
    let mut reports = Vec::new();
    let mut obs = |l: &Learner, r: &StepReport| -> gad_core::Result<()> {
        snapshots.push(l.disc.clone());
        reports.push(r.clone());
        Ok(())
    };
    offpolicy_protocol(&mut l, &data, &c, &Rng::new(25), &mut obs).unwrap();
    let per_epoch = 8;
    let phases: Vec<Phase> = reports.iter().map(|r| r.phase).collect();
    assert_eq!(phases.iter().filter(|&&p| p == Phase::Seqkd).count(), per_epoch);
    assert_eq!(phases.iter().filter(|&&p| p == Phase::DiscTrain).count(), 3 * per_epoch);
    assert_eq!(phases.iter().filter(|&&p| p == Phase::Gad).count(), per_epoch);
    let first_gad = phases.iter().position(|&p| p == Phase::Gad).unwrap();
    let frozen = &snapshots[first_gad - 1];
    assert!(snapshots[first_gad..].iter().all(|d| d == frozen));
    let acc: Vec<f64> = reports.iter().filter(|r| r.phase == Phase::DiscTrain).map(|r| r.disc_accuracy).collect();
    let (head, tail) = (acc[..per_epoch].iter().sum::<f64>(), acc[2 * per_epoch..].iter().sum::<f64>());
    assert!(tail > head, "accuracy did not rise: {head} -> {tail}");
}

#[test]
fn seqkd_pipeline_counts_epochs() {
    let data = task(26, 10);
    let mut l = learner(&data, 27);
    let reports = collect_reports(|l, mut obs| run_seqkd(l, &data, 2, &cfg(), &Rng::new(28), &mut obs), &mut l);
    assert_eq!(reports.len(), 6);
    assert_eq!(reports.last().unwrap().epoch, 1);
}

#[test]
fn sampled_groups_use_independent_streams() {
    let data = task(29, 4);
    let l = learner(&data, 30);
    let b = batch(&data, 2);
    let groups = sample_groups(&l.policy, &b, &cfg(), &Rng::new(31));
    let again = sample_groups(&l.policy, &b[..1], &cfg(), &Rng::new(31));
    assert_eq!(groups[0], again[0]);
}
