//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (on by default) the helpers run on the rayon
//! thread pool; without it they are plain iterator pipelines.  Results are
//! always returned in input order, so callers observe identical output in
//! both modes.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether the helpers run in parallel.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

/// Execution strategy for [`map_in`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    /// Use the thread pool when the `parallel` feature is enabled.
    #[default]
    Auto,
    /// Always run on the calling thread.
    Sequential,
}

/// [`map`] with an explicit [`Mode`].
pub fn map_in<T, R, F>(mode: Mode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    match mode {
        Mode::Auto => map(items, f),
        Mode::Sequential => items.iter().map(f).collect(),
    }
}

/// Applies `f` to every item, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Applies `f` to every item, keeping the `Some` results in order.
pub fn filter_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Option<R> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().filter_map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().filter_map(f).collect()
    }
}

/// Applies `f` to `0..n`, preserving order.
pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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
