//! Data-parallel map-reduce with a sequential fallback.
//!
//! With the `parallel` feature (default) the map runs on the rayon pool.
//! Without it every mode runs sequentially and gives identical results.

/// How per-item work is scheduled and combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    /// Single thread, items combined in index order.
    Sequential,
    /// Parallel map, results combined in index order. Bitwise identical to
    /// `Sequential`.
    #[default]
    Deterministic,
    /// Parallel map and tree reduction. Reproducible only up to floating
    /// point reassociation.
    Unordered,
}

/// Maps every item and folds the results with `combine`, starting from
/// `identity()`.
pub fn map_reduce<T, R, M, I, C>(items: &[T], mode: Parallelism, map: M, identity: I, combine: C) -> R
where
    T: Sync,
    R: Send,
    M: Fn(usize, &T) -> R + Sync + Send,
    I: Fn() -> R + Sync + Send,
    C: Fn(R, R) -> R + Sync + Send,
{
    match mode {
        Parallelism::Sequential => sequential(items, map, identity, combine),
        #[cfg(feature = "parallel")]
        Parallelism::Deterministic => {
            use rayon::prelude::*;
            let mapped: Vec<R> = items.par_iter().enumerate().map(|(i, x)| map(i, x)).collect();
            mapped.into_iter().fold(identity(), combine)
        }
        #[cfg(feature = "parallel")]
        Parallelism::Unordered => {
            use rayon::prelude::*;
            items
                .par_iter()
                .enumerate()
                .map(|(i, x)| map(i, x))
                .reduce(&identity, &combine)
        }
        #[cfg(not(feature = "parallel"))]
        _ => sequential(items, map, identity, combine),
    }
}

/// Maps every item, preserving order.
pub fn map_collect<T, R, M>(items: &[T], mode: Parallelism, map: M) -> Vec<R>
where
    T: Sync,
    R: Send,
    M: Fn(usize, &T) -> R + Sync + Send,
{
    match mode {
        Parallelism::Sequential => items.iter().enumerate().map(|(i, x)| map(i, x)).collect(),
        #[cfg(feature = "parallel")]
        _ => {
            use rayon::prelude::*;
            items.par_iter().enumerate().map(|(i, x)| map(i, x)).collect()
        }
        #[cfg(not(feature = "parallel"))]
        _ => items.iter().enumerate().map(|(i, x)| map(i, x)).collect(),
    }
}

fn sequential<T, R, M, I, C>(items: &[T], map: M, identity: I, combine: C) -> R
where
    M: Fn(usize, &T) -> R,
    I: Fn() -> R,
    C: Fn(R, R) -> R,
{
    items
        .iter()
        .enumerate()
        .map(|(i, x)| map(i, x))
        .fold(identity(), combine)
}
