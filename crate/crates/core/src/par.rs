//! Data-parallel helpers. With the `parallel` feature (default) these run on
//! the rayon pool; without it they are plain sequential loops with the same
//! results in the same order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Minimum number of sites handed to one rayon task.
#[cfg(feature = "parallel")]
const MIN_CHUNK: usize = 256;

/// `(0..n).map(f).collect()`.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().with_min_len(MIN_CHUNK).map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Like [`map_range`] but without a minimum chunk size, for coarse work
/// items such as whole trials or runs.
pub fn map_tasks<T, F>(n: usize, f: F) -> Vec<T>
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

/// Maximum of `f(i)` over `0..n`; 0 for an empty range. NaN propagates.
pub fn max_range<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let fold = |a: f64, b: f64| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) };
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().with_min_len(MIN_CHUNK).map(f).reduce(|| 0.0, fold)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).fold(0.0, fold)
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
