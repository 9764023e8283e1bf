//! Parallel/sequential dispatch.
//!
//! With the `parallel` feature enabled the [`Execution::Parallel`] strategy
//! fans work out over the rayon global pool; without it every strategy runs
//! sequentially. Each output slot is written by exactly one closure call, so
//! results are bit-identical across strategies.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether this strategy actually runs on more than one thread in the
    /// current build.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Minimum number of chunks before parallel dispatch is worth the overhead.
#[cfg(feature = "parallel")]
const PAR_THRESHOLD: usize = 64;
/// Smallest unit of work handed to one rayon task.
#[cfg(feature = "parallel")]
const PAR_MIN_LEN: usize = 256;

/// Calls `op(i, chunk)` for every `chunk_size`-wide chunk of `out`.
pub(crate) fn for_each_chunk<T, F>(exec: Execution, out: &mut [T], chunk_size: usize, op: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && out.len() / chunk_size >= PAR_THRESHOLD {
        out.par_chunks_mut(chunk_size)
            .with_min_len(PAR_MIN_LEN)
            .enumerate()
            .for_each(|(i, c)| op(i, c));
        return;
    }
    let _ = exec;
    out.chunks_mut(chunk_size)
        .enumerate()
        .for_each(|(i, c)| op(i, c));
}

/// Maps `0..len` through `op`, preserving order.
pub(crate) fn map_range<T, F>(exec: Execution, len: usize, op: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && len >= PAR_THRESHOLD {
        return (0..len)
            .into_par_iter()
            .with_min_len(PAR_MIN_LEN)
            .map(op)
            .collect();
    }
    let _ = exec;
    (0..len).map(op).collect()
}
