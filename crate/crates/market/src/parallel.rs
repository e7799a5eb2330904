//! Thin dispatch layer between rayon and a sequential fallback.
//!
//! Every data-parallel site in the crate funnels through `maybe_par_map`, so
//! builds without the `parallel` feature produce byte-identical results: the
//! map is pure per item and output order always matches input order.

#[cfg(feature = "parallel")]
pub fn maybe_par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(&f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn maybe_par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(&f).collect()
}

/// True when the `parallel` feature is compiled in.
pub const fn parallel_enabled() -> bool {
    cfg!(feature = "parallel")
}
