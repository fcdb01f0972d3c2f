//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, keys are dotted
//! (`train.group_size = 8`). Every key except `seed` has a default; unknown
//! keys are rejected.

use std::path::Path;
use std::str::FromStr;

use gad_core::discriminator::DiscLoss;
use gad_core::teacher::{MarkovTeacherParams, MixtureComponent, MixtureSpec};
use gad_core::toy::ToyConfig;
use gad_core::trainers::{DiscMode, TrainConfig};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown config key {0:?}")]
    UnknownKey(String),

    #[error("missing required config key {0:?}")]
    MissingKey(String),

    #[error("invalid value for {key:?}: {msg}")]
    Invalid { key: String, msg: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentConfig {
    pub order: usize,
    /// Std of the initial logits; 0 starts from uniform rows.
    pub init_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscConfig {
    pub hidden: usize,
    pub ngram_orders: Vec<usize>,
    pub feature_dim: usize,
    pub init_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub train_prompts: usize,
    pub val_prompts: usize,
    pub test_prompts: usize,
    pub prompt_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Sampled responses per prompt for the temperature variant.
    pub samples: usize,
    pub ngram_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySettings {
    pub components: Vec<MixtureComponent>,
    pub support: usize,
    pub run: ToyConfig,
}

impl ToySettings {
    pub fn mixture(&self) -> gad_core::Result<MixtureSpec> {
        MixtureSpec::new(self.components.clone(), self.support)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub label: String,
    pub out_dir: Option<String>,
    pub seed: u64,
    pub train: TrainConfig,
    pub teacher: MarkovTeacherParams,
    pub student: StudentConfig,
    pub disc: DiscConfig,
    pub data: DataConfig,
    pub eval: EvalConfig,
    pub toy: ToySettings,
}

impl RunConfig {
    /// All defaults with the given seed.
    pub fn with_seed(seed: u64) -> Self {
        let fixture = MixtureSpec::default_fixture();
        let mut cfg = Self {
            label: "gad".into(),
            out_dir: None,
            seed,
            train: TrainConfig::default(),
            teacher: MarkovTeacherParams::default(),
            student: StudentConfig { order: 2, init_scale: 0.0 },
            disc: DiscConfig { hidden: 16, ngram_orders: vec![1, 2], feature_dim: 256, init_scale: 1.0 },
            data: DataConfig { train_prompts: 1024, val_prompts: 64, test_prompts: 128, prompt_len: 4 },
            eval: EvalConfig { samples: 4, ngram_max: 8 },
            toy: ToySettings {
                components: fixture.components().to_vec(),
                support: fixture.support(),
                run: ToyConfig::default(),
            },
        };
        cfg.sync();
        cfg
    }

    fn sync(&mut self) {
        self.train.seed = self.seed;
        self.train.max_response_len = self.teacher.max_response_len;
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::Parse { line, msg: format!("expected key = value, got {content:?}") })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Parse { line, msg: "empty key".into() });
            }
            if entries.iter().any(|(_, prev, _): &(usize, String, String)| prev == k) {
                return Err(ConfigError::Parse { line, msg: format!("duplicate key {k:?}") });
            }
            entries.push((line, k.to_string(), v.to_string()));
        }
        let seed =
            entries.iter().find(|(_, k, _)| k == "seed").ok_or_else(|| ConfigError::MissingKey("seed".into()))?;
        let mut cfg = Self::with_seed(num("seed", &seed.2)?);
        for (_, k, v) in &entries {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> crate::error::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::error::HarnessError::io(path, e))?;
        Ok(Self::parse_str(&text)?)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let t = &mut self.train;
        match key {
            "seed" => self.seed = num(key, v)?,
            "label" => self.label = v.to_string(),
            "out_dir" => self.out_dir = Some(v.to_string()),
            "train.group_size" => t.group_size = num(key, v)?,
            "train.kl_weight" => t.kl_weight = num(key, v)?,
            "train.clip_eps" => t.clip_eps = num(key, v)?,
            "train.inner_epochs" => t.inner_epochs = num(key, v)?,
            "train.temperature" => t.temperature = num(key, v)?,
            "train.batch_size" => t.batch_size = num(key, v)?,
            "train.warmup_lr" => t.warmup_lr = num(key, v)?,
            "train.gen_lr" => t.gen_lr = num(key, v)?,
            "train.disc_lr" => t.disc_lr = num(key, v)?,
            "train.warmup_epochs" => t.warmup_epochs = num(key, v)?,
            "train.gad_epochs" => t.gad_epochs = num(key, v)?,
            "train.seqkd_epochs" => t.seqkd_epochs = num(key, v)?,
            "train.disc_epochs" => t.disc_epochs = num(key, v)?,
            "train.disc_pretrain_steps" => t.disc_pretrain_steps = num(key, v)?,
            "train.checkpoint_interval" => t.checkpoint_interval = num(key, v)?,
            "train.std_floor" => t.std_floor = num(key, v)?,
            "train.disc_loss" => {
                t.disc_loss = match v {
                    "bt" => DiscLoss::BradleyTerry,
                    "ce" => DiscLoss::CrossEntropy,
                    _ => return Err(invalid(key, "expected bt or ce")),
                }
            }
            "train.disc_mode" => {
                t.disc_mode = match v {
                    "onpolicy" => DiscMode::OnPolicy,
                    "frozen" => DiscMode::Frozen,
                    _ => return Err(invalid(key, "expected onpolicy or frozen")),
                }
            }
            "teacher.vocab_size" => self.teacher.vocab_size = num(key, v)?,
            "teacher.order" => self.teacher.order = num(key, v)?,
            "teacher.classes" => self.teacher.classes = num(key, v)?,
            "teacher.sharpness" => self.teacher.sharpness = num(key, v)?,
            "teacher.floor" => self.teacher.floor = num(key, v)?,
            "teacher.hazard" => self.teacher.hazard = list(key, v)?,
            "teacher.max_response_len" => self.teacher.max_response_len = num(key, v)?,
            "student.order" => self.student.order = num(key, v)?,
            "student.init_scale" => self.student.init_scale = num(key, v)?,
            "disc.hidden" => self.disc.hidden = num(key, v)?,
            "disc.ngram_orders" => self.disc.ngram_orders = list(key, v)?,
            "disc.feature_dim" => self.disc.feature_dim = num(key, v)?,
            "disc.init_scale" => self.disc.init_scale = num(key, v)?,
            "data.train_prompts" => self.data.train_prompts = num(key, v)?,
            "data.val_prompts" => self.data.val_prompts = num(key, v)?,
            "data.test_prompts" => self.data.test_prompts = num(key, v)?,
            "data.prompt_len" => self.data.prompt_len = num(key, v)?,
            "eval.samples" => self.eval.samples = num(key, v)?,
            "eval.ngram_max" => self.eval.ngram_max = num(key, v)?,
            "toy.components" => self.toy.components = components(key, v)?,
            "toy.support" => self.toy.support = num(key, v)?,
            "toy.init_mu" => self.toy.run.init_mu = num(key, v)?,
            "toy.init_sigma" => self.toy.run.init_sigma = num(key, v)?,
            "toy.batch_size" => self.toy.run.batch_size = num(key, v)?,
            "toy.steps" => self.toy.run.steps = num(key, v)?,
            "toy.student_lr" => self.toy.run.student_lr = num(key, v)?,
            "toy.disc_lr" => self.toy.run.disc_lr = num(key, v)?,
            "toy.disc_hidden" => self.toy.run.disc_hidden = num(key, v)?,
            "toy.disc_init_scale" => self.toy.run.disc_init_scale = num(key, v)?,
            "toy.seqkd_samples" => self.toy.run.seqkd_samples = num(key, v)?,
            "toy.seqkd_lr" => self.toy.run.seqkd_lr = num(key, v)?,
            "toy.seqkd_max_steps" => self.toy.run.seqkd_max_steps = num(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        self.sync();
        Ok(())
    }

    /// Every key with its current value, in canonical order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.train;
        let join = |xs: &[usize]| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut out = vec![("seed", self.seed.to_string()), ("label", self.label.clone())];
        if let Some(d) = &self.out_dir {
            out.push(("out_dir", d.clone()));
        }
        out.extend([
            ("train.group_size", t.group_size.to_string()),
            ("train.kl_weight", t.kl_weight.to_string()),
            ("train.clip_eps", t.clip_eps.to_string()),
            ("train.inner_epochs", t.inner_epochs.to_string()),
            ("train.temperature", t.temperature.to_string()),
            ("train.batch_size", t.batch_size.to_string()),
            ("train.warmup_lr", t.warmup_lr.to_string()),
            ("train.gen_lr", t.gen_lr.to_string()),
            ("train.disc_lr", t.disc_lr.to_string()),
            ("train.warmup_epochs", t.warmup_epochs.to_string()),
            ("train.gad_epochs", t.gad_epochs.to_string()),
            ("train.seqkd_epochs", t.seqkd_epochs.to_string()),
            ("train.disc_epochs", t.disc_epochs.to_string()),
            ("train.disc_pretrain_steps", t.disc_pretrain_steps.to_string()),
            ("train.checkpoint_interval", t.checkpoint_interval.to_string()),
            ("train.std_floor", t.std_floor.to_string()),
            (
                "train.disc_loss",
                match t.disc_loss {
                    DiscLoss::BradleyTerry => "bt".into(),
                    DiscLoss::CrossEntropy => "ce".into(),
                },
            ),
            (
                "train.disc_mode",
                match t.disc_mode {
                    DiscMode::OnPolicy => "onpolicy".into(),
                    DiscMode::Frozen => "frozen".into(),
                },
            ),
            ("teacher.vocab_size", self.teacher.vocab_size.to_string()),
            ("teacher.order", self.teacher.order.to_string()),
            ("teacher.classes", self.teacher.classes.to_string()),
            ("teacher.sharpness", self.teacher.sharpness.to_string()),
            ("teacher.floor", self.teacher.floor.to_string()),
            ("teacher.hazard", self.teacher.hazard.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
            ("teacher.max_response_len", self.teacher.max_response_len.to_string()),
            ("student.order", self.student.order.to_string()),
            ("student.init_scale", self.student.init_scale.to_string()),
            ("disc.hidden", self.disc.hidden.to_string()),
            ("disc.ngram_orders", join(&self.disc.ngram_orders)),
            ("disc.feature_dim", self.disc.feature_dim.to_string()),
            ("disc.init_scale", self.disc.init_scale.to_string()),
            ("data.train_prompts", self.data.train_prompts.to_string()),
            ("data.val_prompts", self.data.val_prompts.to_string()),
            ("data.test_prompts", self.data.test_prompts.to_string()),
            ("data.prompt_len", self.data.prompt_len.to_string()),
            ("eval.samples", self.eval.samples.to_string()),
            ("eval.ngram_max", self.eval.ngram_max.to_string()),
            (
                "toy.components",
                self.toy
                    .components
                    .iter()
                    .map(|c| format!("{}:{}:{}", c.weight, c.mean, c.std))
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("toy.support", self.toy.support.to_string()),
            ("toy.init_mu", self.toy.run.init_mu.to_string()),
            ("toy.init_sigma", self.toy.run.init_sigma.to_string()),
            ("toy.batch_size", self.toy.run.batch_size.to_string()),
            ("toy.steps", self.toy.run.steps.to_string()),
            ("toy.student_lr", self.toy.run.student_lr.to_string()),
            ("toy.disc_lr", self.toy.run.disc_lr.to_string()),
            ("toy.disc_hidden", self.toy.run.disc_hidden.to_string()),
            ("toy.disc_init_scale", self.toy.run.disc_init_scale.to_string()),
            ("toy.seqkd_samples", self.toy.run.seqkd_samples.to_string()),
            ("toy.seqkd_lr", self.toy.run.seqkd_lr.to_string()),
            ("toy.seqkd_max_steps", self.toy.run.seqkd_max_steps.to_string()),
        ]);
        out
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_text(&self) -> String {
        self.entries().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.train.validate().map_err(|e| invalid("train", &e.to_string()))?;
        if self.teacher.vocab_size < 2 {
            return Err(invalid("teacher.vocab_size", "need at least 2 tokens"));
        }
        if self.teacher.order == 0 || self.teacher.classes == 0 {
            return Err(invalid("teacher.order", "teacher order and class count must be positive"));
        }
        if !(0.0..=1.0).contains(&self.teacher.floor) {
            return Err(invalid("teacher.floor", "must lie in [0, 1]"));
        }
        if self.teacher.hazard.iter().any(|h| !(0.0..=1.0).contains(h)) {
            return Err(invalid("teacher.hazard", "entries must lie in [0, 1]"));
        }
        if self.teacher.max_response_len == 0 {
            return Err(invalid("teacher.max_response_len", "must be positive"));
        }
        if self.disc.hidden == 0 {
            return Err(invalid("disc.hidden", "must be positive"));
        }
        if (self.disc.feature_dim as u64) < u64::from(self.teacher.vocab_size) {
            return Err(invalid("disc.feature_dim", "must be at least the vocabulary size"));
        }
        if self.disc.ngram_orders.is_empty() || self.disc.ngram_orders.contains(&0) {
            return Err(invalid("disc.ngram_orders", "orders must be positive"));
        }
        for (key, n) in [
            ("data.train_prompts", self.data.train_prompts),
            ("data.val_prompts", self.data.val_prompts),
            ("data.test_prompts", self.data.test_prompts),
            ("eval.samples", self.eval.samples),
            ("eval.ngram_max", self.eval.ngram_max),
        ] {
            if n == 0 {
                return Err(invalid(key, "must be positive"));
            }
        }
        if self.toy.run.batch_size == 0 {
            return Err(invalid("toy.batch_size", "must be positive"));
        }
        if self.toy.run.init_sigma.is_nan() || self.toy.run.init_sigma <= 0.0 {
            return Err(invalid("toy.init_sigma", "must be positive"));
        }
        self.toy.mixture().map_err(|e| invalid("toy.components", &e.to_string()))?;
        Ok(())
    }
}

fn invalid(key: &str, msg: &str) -> ConfigError {
    ConfigError::Invalid { key: key.into(), msg: msg.into() }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| invalid(key, &format!("cannot parse {v:?}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError> {
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| num(key, x.trim())).collect()
}

/// `weight:mean:std` triples separated by commas.
fn components(key: &str, v: &str) -> Result<Vec<MixtureComponent>, ConfigError> {
    v.split(',')
        .map(|c| {
            let parts: Vec<&str> = c.split(':').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(invalid(key, &format!("expected weight:mean:std, got {c:?}")));
            }
            Ok(MixtureComponent { weight: num(key, parts[0])?, mean: num(key, parts[1])?, std: num(key, parts[2])? })
        })
        .collect()
}
