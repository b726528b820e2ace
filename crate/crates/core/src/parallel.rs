//! Data-parallel mapping over sample collections.
//!
//! With the `parallel` feature (default) the indexed maps run on the rayon
//! pool; without it they fall back to the sequential versions below. Results
//! are always collected in input order, so reductions over them are
//! deterministic regardless of thread scheduling and feature choice.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Sequential indexed map. Always available; the benchmark suite uses it as
/// the baseline against the parallel path.
pub fn map_indexed_seq<T, R>(items: &[T], f: impl Fn(usize, &T) -> R) -> Vec<R> {
    items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
}

/// Sequential fallible indexed map, stopping at the first error.
pub fn try_map_indexed_seq<T, R, E>(
    items: &[T],
    f: impl Fn(usize, &T) -> Result<R, E>,
) -> Result<Vec<R>, E> {
    items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
}

/// Indexed map over `items`, parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn map_indexed<T: Sync, R: Send>(
    items: &[T],
    f: impl Fn(usize, &T) -> R + Sync + Send,
) -> Vec<R> {
    items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, R>(items: &[T], f: impl Fn(usize, &T) -> R) -> Vec<R> {
    map_indexed_seq(items, f)
}

/// Fallible indexed map, parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn try_map_indexed<T: Sync, R: Send, E: Send>(
    items: &[T],
    f: impl Fn(usize, &T) -> Result<R, E> + Sync + Send,
) -> Result<Vec<R>, E> {
    items
        .par_iter()
        .enumerate()
        .map(|(i, x)| f(i, x))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub fn try_map_indexed<T, R, E>(
    items: &[T],
    f: impl Fn(usize, &T) -> Result<R, E>,
) -> Result<Vec<R>, E> {
    try_map_indexed_seq(items, f)
}
