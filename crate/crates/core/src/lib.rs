//! Desk-scale black-box generative adversarial distillation.
//!
//! A student policy is trained against a discriminator that only ever sees
//! teacher *samples*: the discriminator learns to prefer teacher responses,
//! and its score on student responses becomes the student's reward. Every
//! component is small enough that gradients are computed in closed form.

pub mod discriminator;
pub mod error;
pub mod math;
pub mod metrics;
pub mod optim;
pub mod policy;
pub mod rng;
pub mod seq;
pub mod teacher;
pub mod toy;
pub mod trainers;

pub use error::{Error, Result};
pub use rng::Rng;
pub use seq::{Dataset, Episode, ParamVector, SeqLimits, Sequence, TokenId, Vocab};
