//! Deterministic parallel execution of independent sweep cells.

use anyhow::{Context, Result};
use rayon::prelude::*;
use rayon::ThreadPool;
use sha2::{Digest, Sha256};

/// Stable seed of one cell: SHA-256 over the little-endian triple.
pub fn cell_seed(master: u64, cell: u64, target: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(cell.to_le_bytes());
    h.update(target.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Worker pool; `threads = 0` lets rayon choose.
pub fn pool(threads: usize) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .context("building the worker pool")
}

/// Evaluates `f(0..n)` on the pool; results come back in cell order.
pub fn run_cells<T: Send>(pool: &ThreadPool, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Vec<T> {
    pool.install(|| (0..n).into_par_iter().map(&f).collect())
}

/// Status column entry of a cell.
pub fn status<T>(r: &Result<T>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("error: {e:#}"),
    }
}
