//! Data-parallel building blocks.
//!
//! With the `parallel` feature (default) these dispatch to rayon; without it
//! they run the same closures sequentially. Every caller goes through here so
//! the two builds execute identical arithmetic per item.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// `(0..n).map(f).collect()`, possibly in parallel. Output order is preserved.
pub(crate) fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Calls `f(row_index, row)` for each `row_len`-sized chunk of `data`.
pub(crate) fn for_each_row_mut<F>(data: &mut [f64], row_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if row_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(row_len)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
}

/// Minimum items per chunk in [`fold_range`].
pub(crate) const FOLD_CHUNK: usize = 2048;
/// Upper bound on live accumulators in [`fold_range`].
const MAX_FOLD_PARTIALS: usize = 64;

/// Folds `0..n` in chunks (each chunk starts from `identity()`), then merges
/// the chunk accumulators left to right.
///
/// Chunk boundaries depend only on `n`, never on the thread count, and the
/// merge order is fixed, so parallel and sequential builds produce
/// bit-identical floating-point results.
pub(crate) fn fold_range<T, Id, Fo, Re>(n: usize, identity: Id, fold: Fo, reduce: Re) -> T
where
    T: Send,
    Id: Fn() -> T + Sync + Send,
    Fo: Fn(T, usize) -> T + Sync + Send,
    Re: Fn(T, T) -> T,
{
    let chunk = FOLD_CHUNK.max(n.div_ceil(MAX_FOLD_PARTIALS));
    let chunks = n.div_ceil(chunk);
    let partials = map_range(chunks, |c| {
        let lo = c * chunk;
        let hi = (lo + chunk).min(n);
        (lo..hi).fold(identity(), &fold)
    });
    partials.into_iter().fold(identity(), reduce)
}

/// Runs two closures, concurrently when the `parallel` feature is on.
pub(crate) fn join<A, B, RA, RB>(a: A, b: B) -> (RA, RB)
where
    A: FnOnce() -> RA + Send,
    B: FnOnce() -> RB + Send,
    RA: Send,
    RB: Send,
{
    #[cfg(feature = "parallel")]
    {
        rayon::join(a, b)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (a(), b())
    }
}

/// Whether this build runs data-parallel loops on a thread pool.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
