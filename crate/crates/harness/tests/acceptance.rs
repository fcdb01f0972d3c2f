//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use gad_core::discriminator::{bt_loss_and_grad, ce_loss_and_grad_disc, Discriminator, FeatureSpec, OUT_W};
use gad_core::metrics::{corpus_ngram_f1, mode_mass, ngram_f1, Average};
use gad_core::optim::AdamState;
use gad_core::policy::{ce_loss_and_grad, policy_grad_logprob, policy_logprob, AutoregressivePolicy, GaussianStudent};
use gad_core::teacher::{
    build_dataset, random_prompts, toy_teacher_sample, MarkovTeacherParams, MarkovTeacherSpec, MixtureComponent,
    MixtureSpec, TeacherHandle,
};
use gad_core::toy::{run_toy, run_toy_seqkd, ToyConfig};
use gad_core::trainers::{gad_step, grpo_advantages, rollout, surrogate_objective_and_grad, TrainConfig};
use gad_core::{Episode, ParamVector, Rng, Sequence, TokenId, Vocab};
use gad_harness::checkpoint::Checkpoint;
use gad_harness::commands::eval_checkpoint;
use gad_harness::run::{checkpoint_path, RunReport};
use gad_harness::{train, Mode, RunConfig};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- gradients

const H: f64 = 1e-5;

fn central_diff(params: &ParamVector, mut f: impl FnMut(&ParamVector) -> f64) -> Vec<f64> {
    let mut p = params.clone();
    (0..params.len())
        .map(|i| {
            let x = p.values()[i];
            p.values_mut()[i] = x + H;
            let up = f(&p);
            p.values_mut()[i] = x - H;
            let down = f(&p);
            p.values_mut()[i] = x;
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale < 1e-10 {
        norm(&diff)
    } else {
        norm(&diff) / scale
    }
}

fn random_seq(vocab: Vocab, rng: &mut Rng, max: usize, eos: bool) -> Sequence {
    let len = 1 + rng.below(max);
    let mut ids: Vec<TokenId> = (0..len).map(|_| TokenId(rng.below(vocab.size() - 1) as u32)).collect();
    if eos {
        *ids.last_mut().unwrap() = vocab.eos();
    }
    Sequence::new(ids, vocab, max).unwrap()
}

fn gradient_correctness() -> Outcome {
    let mut worst: BTreeMap<&str, f64> = BTreeMap::new();
    let mut record = |name: &'static str, e: f64| {
        let w = worst.entry(name).or_insert(0.0);
        *w = w.max(e);
    };
    for i in 0..100u64 {
        let mut rng = Rng::new(1000 + i);
        let vocab = Vocab::new(3 + rng.below(4) as u32).unwrap();
        let order = 1 + rng.below(2);
        let policy = AutoregressivePolicy::random(vocab, order, 1.0, &mut rng);
        let x = random_seq(vocab, &mut rng, 4, false);
        let eos = rng.below(2) == 0;
        let y = random_seq(vocab, &mut rng, 8, eos);
        let tau = 0.5 + rng.uniform();
        let with = |p: &ParamVector| {
            let mut q = policy.clone();
            q.set_params(p.clone()).unwrap();
            q
        };
        let a = policy_grad_logprob(&policy, &x, &y, tau);
        let n = central_diff(policy.params(), |p| policy_logprob(&with(p), &x, &y, tau));
        record("policy_logprob", rel_err(a.values(), &n));

        let ep = Episode::new(x.clone(), y.clone()).unwrap();
        let (_, a) = ce_loss_and_grad(&policy, &ep, tau).unwrap();
        let n = central_diff(policy.params(), |p| ce_loss_and_grad(&with(p), &ep, tau).unwrap().0);
        record("ce_loss_and_grad", rel_err(a.values(), &n));

        let s = GaussianStudent::new(-1.0 + 11.0 * rng.uniform(), 0.3 + 3.0 * rng.uniform(), 10);
        let k = rng.below(10);
        let a = s.grad_logp(k).unwrap();
        let n = central_diff(&s.to_params(), |p| {
            let mut t = s;
            t.set_params(p);
            t.pmf()[k].ln()
        });
        record("gaussian_student_grad_logp", rel_err(&a, &n));

        let dv = Vocab::new(4).unwrap();
        let features = FeatureSpec::new(dv, vec![1, 2], 8, 6).unwrap();
        let disc = Discriminator::new(features, 3, 0.8, &mut rng);
        let dx = random_seq(dv, &mut rng, 3, false);
        let yt = random_seq(dv, &mut rng, 6, true);
        let n_s = 1 + rng.below(4);
        let ys: Vec<Sequence> = (0..n_s)
            .map(|_| {
                let e = rng.below(2) == 0;
                random_seq(dv, &mut rng, 6, e)
            })
            .collect();
        for (name, loss) in [
            ("bt_loss_and_grad", bt_loss_and_grad as fn(&_, &_, &_, &_) -> _),
            ("ce_loss_and_grad_disc", ce_loss_and_grad_disc),
        ] {
            let (_, a) = loss(&disc, &dx, &yt, &ys).unwrap();
            let n = central_diff(disc.params(), |p| {
                let mut d = disc.clone();
                d.params_mut().values_mut().copy_from_slice(p.values());
                loss(&d, &dx, &yt, &ys).unwrap().0
            });
            record(name, rel_err(a.values(), &n));
        }
    }
    let max = worst.values().cloned().fold(0.0, f64::max);
    let detail = format!("worst relative error {max:.2e} over 100 instances x 5 functions");
    if max < 1e-4 {
        Ok(detail)
    } else {
        Err(format!("{detail}: {worst:?}"))
    }
}

// -------------------------------------------------------------------- GRPO

fn grpo_identities() -> Outcome {
    let a = grpo_advantages(&[1.0, 2.0, 3.0], 1e-6);
    let expect = [-1.224745, 0.0, 1.224745];
    check(a.iter().zip(expect).all(|(x, e)| (x - e).abs() < 1e-6), || format!("[1,2,3] -> {a:?}"))?;
    check(grpo_advantages(&[0.7; 8], 1e-6).iter().all(|&x| x == 0.0), || "constant rewards".into())?;
    let mut rng = Rng::new(2);
    for _ in 0..1000 {
        let n = 2 + rng.below(15);
        let r: Vec<f64> = (0..n).map(|_| 10.0 * rng.normal()).collect();
        let a = grpo_advantages(&r, 1e-6);
        let m = a.iter().sum::<f64>() / n as f64;
        let sd = (a.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64).sqrt();
        check(m.abs() < 1e-12 && (sd - 1.0).abs() < 1e-9, || format!("mean {m:e} std {sd}"))?;
    }
    Ok("hand values, degenerate groups and 1000 random groups".into())
}

// ------------------------------------------------------------ fixed point

fn small_task(seed: u64) -> (gad_core::Dataset, AutoregressivePolicy, Discriminator) {
    let params = MarkovTeacherParams { vocab_size: 5, classes: 2, max_response_len: 10, ..Default::default() };
    let spec = MarkovTeacherSpec::random(&params, &mut Rng::new(seed)).unwrap();
    let teacher = TeacherHandle::black_box(spec);
    let xs = random_prompts(teacher.vocab(), 8, 3, &Rng::new(seed).fork("prompts"));
    let data = build_dataset(&teacher, &xs, &Rng::new(seed).fork("data")).unwrap();
    let mut rng = Rng::new(seed + 1);
    let policy = AutoregressivePolicy::random(data.vocab(), 2, 0.5, &mut rng);
    let disc = Discriminator::new(FeatureSpec::new(data.vocab(), vec![1, 2], 32, 10).unwrap(), 4, 0.5, &mut rng);
    (data, policy, disc)
}

fn small_cfg() -> TrainConfig {
    TrainConfig { group_size: 4, batch_size: 4, max_response_len: 10, ..Default::default() }
}

fn fixed_point_identities() -> Outcome {
    let v = Vocab::new(4).unwrap();
    let spec = FeatureSpec::new(v, vec![1], 8, 4).unwrap();
    let zero = Discriminator::zeros(spec, 3);
    let x = Sequence::from_ids(&[0, 1], v, 4).unwrap();
    let yt = Sequence::from_ids(&[2, 3], v, 4).unwrap();
    let ys = vec![Sequence::from_ids(&[1, 1, 3], v, 4).unwrap(), Sequence::from_ids(&[0], v, 4).unwrap()];
    let bt = bt_loss_and_grad(&zero, &x, &yt, &ys).unwrap().0;
    let ce = ce_loss_and_grad_disc(&zero, &x, &yt, &ys).unwrap().0;
    check((bt - 2f64.ln()).abs() < 1e-9, || format!("BT at equal scores {bt}"))?;
    check((ce - 2.0 * 2f64.ln()).abs() < 1e-9, || format!("CE at zero scores {ce}"))?;

    let (data, mut policy, mut disc) = small_task(3);
    disc.params_mut().segment_mut(OUT_W).unwrap().fill(0.0);
    let reference = policy.snapshot();
    let before = policy.clone();
    let cfg = TrainConfig { kl_weight: 0.0, ..small_cfg() };
    let mut g = AdamState::for_params(policy.params(), 0.05);
    let mut d = AdamState::for_params(disc.params(), 0.05);
    let batch: Vec<&Episode> = data.episodes().iter().take(4).collect();
    gad_step(&mut policy, &reference, &mut disc, &batch, &mut g, &mut d, &cfg, &Rng::new(4))
        .map_err(|e| e.to_string())?;
    check(policy == before, || "generator moved under a constant discriminator".into())?;
    Ok(format!("BT {bt:.12}, CE {ce:.12}, generator bit-unchanged"))
}

// -------------------------------------------------------------- surrogate

fn surrogate_equivalence() -> Outcome {
    let (data, policy, disc) = small_task(5);
    let cfg = TrainConfig { kl_weight: 0.0, ..small_cfg() };
    let batch: Vec<&Episode> = data.episodes().iter().take(4).collect();
    let groups = rollout(&policy, &disc, &batch, &cfg, &Rng::new(6)).map_err(|e| e.to_string())?;
    let (_, grad, _) = surrogate_objective_and_grad(&policy, &policy.snapshot(), &groups, &cfg).unwrap();
    let mut expect = policy.params().zeros_like();
    for g in &groups {
        let w = 1.0 / (groups.len() * g.responses.len()) as f64;
        for (y, a) in g.responses.iter().zip(&g.advantages) {
            expect.add_scaled(w * a, &policy_grad_logprob(&policy, &g.prompt, y, cfg.temperature));
        }
    }
    let err = grad.values().iter().zip(expect.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(err < 1e-10 && expect.norm() > 0.0, || format!("max deviation {err:e}"))?;
    Ok(format!("max deviation {err:.1e}"))
}

// -------------------------------------------------------------------- toy

fn toy_mode_covering() -> Outcome {
    let start = Instant::now();
    let spec = MixtureSpec::new(
        vec![
            MixtureComponent { weight: 0.5, mean: 2.0, std: 1.0 },
            MixtureComponent { weight: 0.5, mean: 7.0, std: 1.0 },
        ],
        10,
    )
    .unwrap();
    let teacher = TeacherHandle::black_box(spec);
    let cfg = ToyConfig::default();
    let rng = Rng::new(0).fork("seqkd");
    let fit = run_toy_seqkd(&teacher, cfg.initial_student(10), cfg.seqkd_samples, &cfg, &rng).unwrap();
    let xs = toy_teacher_sample(&teacher, &mut rng.fork("samples"), cfg.seqkd_samples);
    let sample_mean = xs.iter().sum::<usize>() as f64 / xs.len() as f64;
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("student mean {:.4}, sample mean {sample_mean:.4}, {secs:.1}s", fit.mu);
    check((fit.mu - 4.5).abs() < 0.2 && (sample_mean - 4.5).abs() < 0.2 && secs < 10.0, || detail.clone())?;
    Ok(detail)
}

fn toy_mode_seeking() -> Outcome {
    let start = Instant::now();
    let spec = MixtureSpec::default_fixture();
    let cfg = ToyConfig::default();
    let mut passes = 0;
    let mut notes = Vec::new();
    for seed in 0..5 {
        let r = run_toy(&spec, &cfg, seed).map_err(|e| e.to_string())?;
        let (_, mass) = mode_mass(&r.gad_pmf, &spec, 1);
        let ok = mass >= 0.8 && r.gad_reverse_kl < r.seqkd_reverse_kl;
        passes += ok as usize;
        notes.push(format!(
            "seed {seed}: mass {mass:.3}, reverse KL gad {:.4} vs seqkd {:.4}",
            r.gad_reverse_kl, r.seqkd_reverse_kl
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("{passes}/5 seeds, {secs:.1}s [{}]", notes.join("; "));
    check(passes >= 3 && secs < 120.0, || detail.clone())?;
    Ok(detail)
}

// ------------------------------------------------------- sequence task runs

/// Markov-teacher fixture shared by the on/off-policy and ordering criteria.
fn sequence_fixture(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::with_seed(seed);
    for (k, v) in SEQUENCE_FIXTURE {
        cfg.set(k, v).unwrap();
    }
    cfg
}

const SEQUENCE_FIXTURE: &[(&str, &str)] = &[
    ("teacher.classes", "2"),
    ("teacher.sharpness", "2.5"),
    ("teacher.hazard", "0,0.1"),
    ("student.order", "1"),
    ("train.warmup_lr", "0.05"),
    ("train.gen_lr", "0.01"),
    ("train.disc_lr", "0.01"),
];

struct Run {
    report: RunReport,
    rows: Vec<BTreeMap<String, String>>,
}

impl Run {
    fn col(&self, row: usize, name: &str) -> f64 {
        self.rows[row][name].parse().unwrap()
    }

    fn gad_rows(&self) -> Vec<usize> {
        (0..self.rows.len()).filter(|&i| self.rows[i]["phase"] == "gad").collect()
    }

    /// Last row before GAD training begins.
    fn post_warmup(&self) -> usize {
        self.gad_rows()[0] - 1
    }
}

fn run_mode(cfg: &RunConfig, mode: Mode, dir: &Path) -> Result<Run, String> {
    let report = train(cfg, mode, dir).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(dir.join("metrics.csv")).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| header.iter().cloned().zip(l.split(',').map(String::from)).collect()).collect();
    Ok(Run { report, rows })
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn on_vs_off_policy() -> Outcome {
    let start = Instant::now();
    let mut passes = 0;
    let mut notes = Vec::new();
    for seed in 0..5 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = sequence_fixture(seed);
        let on = run_mode(&cfg, Mode::Gad, &dir.path().join("on"))?;
        let mut frozen_cfg = cfg.clone();
        frozen_cfg.set("train.disc_mode", "frozen").unwrap();
        let off = run_mode(&frozen_cfg, Mode::Offpolicy, &dir.path().join("off"))?;

        let gad = off.gad_rows();
        let k = (gad.len() / 10).max(1);
        let rewards: Vec<f64> = gad.iter().map(|&i| off.col(i, "mean_reward")).collect();
        let reward_up = mean(&rewards[rewards.len() - k..]) > mean(&rewards[..k]);
        let last_off = off.rows.len() - 1;
        let last_on = on.rows.len() - 1;
        let off_post = off.col(off.post_warmup(), "val_logprob_sample");
        let off_final = off.col(last_off, "val_logprob_sample");
        let on_post = on.col(on.post_warmup(), "val_logprob_sample");
        let on_final = on.col(last_on, "val_logprob_sample");
        let teacher_len = on.report.val_teacher_len;
        let drift_off = (off.col(last_off, "val_len_sample") - teacher_len).abs();
        let drift_on = (on.col(last_on, "val_len_sample") - teacher_len).abs();
        let ok = reward_up && off_final < off_post && drift_off >= 1.5 * drift_on && on_final >= on_post;
        passes += ok as usize;
        notes.push(format!(
            "seed {seed}: frozen reward {} lp {off_post:.2}->{off_final:.2} drift {drift_off:.2}; \
             onpolicy lp {on_post:.2}->{on_final:.2} drift {drift_on:.2}",
            if reward_up { "up" } else { "down" }
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("{passes}/5 seeds, {secs:.0}s [{}]", notes.join("; "));
    check(passes >= 3 && secs < 600.0, || detail.clone())?;
    Ok(detail)
}

fn distillation_ordering() -> Outcome {
    let mut passes = 0;
    let mut notes = Vec::new();
    for seed in 0..5 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = sequence_fixture(seed);
        let gad = run_mode(&cfg, Mode::Gad, &dir.path().join("gad"))?;
        let seqkd = run_mode(&cfg, Mode::Seqkd, &dir.path().join("seqkd"))?;
        check(gad.report.steps == seqkd.report.steps, || {
            format!("step budgets differ: {} vs {}", gad.report.steps, seqkd.report.steps)
        })?;
        let (g, s) = (gad.report.final_test.logprob_greedy, seqkd.report.final_test.logprob_greedy);
        passes += (g >= s) as usize;
        notes.push(format!("seed {seed}: gad {g:.2} vs seqkd {s:.2}"));
    }
    let detail = format!("{passes}/5 seeds [{}]", notes.join("; "));
    check(passes >= 3, || detail.clone())?;
    Ok(detail)
}

// ------------------------------------------------------------------ n-grams

fn brute_counts(ids: &[TokenId], n: usize) -> Vec<(Vec<TokenId>, usize)> {
    let mut grams: Vec<Vec<TokenId>> =
        if ids.len() >= n { ids.windows(n).map(<[_]>::to_vec).collect() } else { vec![] };
    grams.sort();
    let mut out: Vec<(Vec<TokenId>, usize)> = Vec::new();
    for g in grams {
        match out.last_mut() {
            Some((last, c)) if *last == g => *c += 1,
            _ => out.push((g, 1)),
        }
    }
    out
}

fn brute_parts(c: &Sequence, r: &Sequence, n: usize) -> (usize, usize, usize) {
    let (bc, br) = (brute_counts(c.tokens(), n), brute_counts(r.tokens(), n));
    let matched = bc.iter().map(|(g, k)| br.iter().find(|(h, _)| h == g).map_or(0, |(_, j)| (*k).min(*j))).sum();
    (matched, bc.iter().map(|x| x.1).sum(), br.iter().map(|x| x.1).sum())
}

fn brute_f1((m, ct, rt): (usize, usize, usize)) -> f64 {
    if ct == 0 || rt == 0 || m == 0 {
        return 0.0;
    }
    let (p, r) = (m as f64 / ct as f64, m as f64 / rt as f64);
    2.0 * p * r / (p + r)
}

fn ngram_oracle() -> Outcome {
    let v = Vocab::new(5).unwrap();
    let s = |ids: &[u32]| Sequence::from_ids(ids, v, 32).unwrap();
    let (c, r) = (s(&[0, 1, 2]), s(&[0, 1, 3]));
    check(ngram_f1(&c, &r, 1).unwrap().f1 == 2.0 / 3.0, || "unigram fixture".into())?;
    check(ngram_f1(&c, &r, 2).unwrap().f1 == 0.5, || "bigram fixture".into())?;
    let mut rng = Rng::new(9);
    let mut pairs = Vec::new();
    for _ in 0..1000 {
        let mk = |rng: &mut Rng| {
            let len = rng.below(13);
            Sequence::new((0..len).map(|_| TokenId(rng.below(4) as u32)).collect(), v, 32).unwrap()
        };
        let (a, b) = (mk(&mut rng), mk(&mut rng));
        for n in 1..=4 {
            let got = ngram_f1(&a, &b, n).unwrap().f1;
            let want = brute_f1(brute_parts(&a, &b, n));
            check(got == want, || format!("pair {:?} / {:?} n={n}: {got} vs {want}", a.ids(), b.ids()))?;
        }
        pairs.push((a, b));
    }
    for n in 1..=4 {
        for chunk in pairs.chunks(50) {
            let parts: Vec<_> = chunk.iter().map(|(a, b)| brute_parts(a, b, n)).collect();
            let pooled = parts.iter().fold((0, 0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
            let macro_avg = parts.iter().map(|&p| brute_f1(p)).sum::<f64>() / parts.len() as f64;
            check(corpus_ngram_f1(chunk, n, Average::Micro).unwrap() == brute_f1(pooled), || "micro".into())?;
            check(corpus_ngram_f1(chunk, n, Average::Macro).unwrap() == macro_avg, || "macro".into())?;
        }
    }
    Ok("hand fixtures and 1000 random pairs, n = 1..4, exact".into())
}

// ---------------------------------------------------------- persistence

fn determinism_and_persistence() -> Outcome {
    let mut cfg = RunConfig::with_seed(11);
    for (k, v) in [
        ("data.train_prompts", "64"),
        ("data.val_prompts", "16"),
        ("train.checkpoint_interval", "5"),
        ("train.disc_pretrain_steps", "2"),
    ] {
        cfg.set(k, v).unwrap();
    }
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    train(&cfg, Mode::Gad, a.path()).map_err(|e| e.to_string())?;
    train(&cfg, Mode::Gad, b.path()).map_err(|e| e.to_string())?;
    let csv = |d: &Path| std::fs::read(d.join("metrics.csv")).unwrap();
    check(csv(a.path()) == csv(b.path()), || "metrics CSVs differ".into())?;

    let step = 10;
    let path = checkpoint_path(a.path(), step);
    let bytes = std::fs::read(&path).unwrap();
    let again = Checkpoint::from_bytes(&bytes).map_err(|e| e.to_string())?.to_bytes();
    check(again == bytes, || "checkpoint save/load/save not byte-identical".into())?;

    let report = eval_checkpoint(&path, None).map_err(|e| e.to_string())?;
    let text = String::from_utf8(csv(a.path())).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = text.lines().nth(step).unwrap().split(',').collect();
    check(row[0] == step.to_string(), || "row/step mismatch".into())?;
    let mut worst: f64 = 0.0;
    for (col, key) in [
        ("val_logprob_greedy", "val.logprob_greedy"),
        ("val_logprob_sample", "val.logprob_sample"),
        ("val_len_greedy", "val.len_greedy"),
        ("val_len_sample", "val.len_sample"),
        ("val_f1_1", "val.f1_sample_1"),
        ("val_f1_2", "val.f1_sample_2"),
    ] {
        let i = header.iter().position(|h| *h == col).unwrap();
        let in_run: f64 = row[i].parse().unwrap();
        worst = worst.max((in_run - report.metrics[key]).abs());
    }
    check(worst <= 1e-9, || format!("eval deviates from in-run metrics by {worst:e}"))?;
    Ok(format!("identical CSVs, byte-identical checkpoint, eval deviation {worst:.1e}"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("gradient correctness", gradient_correctness),
        ("GRPO identities", grpo_identities),
        ("minimax fixed points", fixed_point_identities),
        ("surrogate equivalence", surrogate_equivalence),
        ("toy mode covering", toy_mode_covering),
        ("toy mode seeking", toy_mode_seeking),
        ("on-policy vs frozen discriminator", on_vs_off_policy),
        ("distillation ordering", distillation_ordering),
        ("n-gram F1 oracle", ngram_oracle),
        ("determinism and persistence", determinism_and_persistence),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
