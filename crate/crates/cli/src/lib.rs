//! Experiment driver for `qci-core`: flat key-value configs, CSV/JSON
//! artifacts, the acceptance criteria and a reproducible batch run.

pub mod acceptance;
pub mod config;
pub mod experiments;
pub mod output;
pub mod reproduce;

use anyhow::{Context, Result};

/// Environment variable capping sweep parallelism.
pub const THREADS_VAR: &str = "QCI_LAB_THREADS";

/// Sizes the global rayon pool from `QCI_LAB_THREADS`, if set. Calling it
/// again after the pool exists is a no-op.
pub fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .with_context(|| format!("{THREADS_VAR} = {raw}: expected a positive integer"))?;
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
