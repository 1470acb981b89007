//! Batch-parallel Monte Carlo over counter-based streams.
//!
//! Every batch owns one stream and runs its items sequentially; batch
//! results are concatenated in batch order, so the output does not depend
//! on the number of worker threads.

use mlz_core::streams::{stream, Stream};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};

pub const DEFAULT_BATCH: usize = 1000;

/// Stream index for (level, role, batch); each field gets its own bit range.
pub fn stream_index(level: usize, role: u64, batch: usize) -> u64 {
    ((level as u64) << 40) | (role << 32) | batch as u64
}

/// Draws `n` items, `batch` per stream, in parallel over batches.
pub fn map_batches<T, F>(seed: u64, level: usize, role: u64, n: usize, batch: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut Stream) -> mlz_core::Result<T> + Sync,
{
    let batch = batch.max(1);
    let n_batches = n.div_ceil(batch);
    let parts: Vec<mlz_core::Result<Vec<T>>> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream(seed, stream_index(level, role, b));
            let k = batch.min(n - b * batch);
            (0..k).map(|_| f(&mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(n);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Runs `f` on a dedicated pool with `threads` workers (all cores if `None`).
pub fn with_threads<T: Send, F: FnOnce() -> T + Send>(threads: Option<usize>, f: F) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}
