//! Experiment harness for the distillation lab: configuration files, binary
//! checkpoints, metric logs and the `gad` command-line driver.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod error;
pub mod eval;
pub mod io;
pub mod run;

pub use config::{ConfigError, RunConfig};
pub use error::{HarnessError, Result};
pub use run::{train, Experiment, Mode};

/// Runs `f` on a rayon pool sized by `GAD_THREADS` when set, otherwise on the
/// global pool.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var("GAD_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid { key: "GAD_THREADS".into(), msg: format!("cannot parse {v:?}") })?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| ConfigError::Invalid { key: "GAD_THREADS".into(), msg: e.to_string() })?;
            Ok(pool.install(f))
        }
        Err(_) => Ok(f()),
    }
}
