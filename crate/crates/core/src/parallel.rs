//! Execution helpers: rayon data-parallel loops with a sequential
//! fallback when the `parallel` feature is disabled.
//!
//! All helpers preserve input order, so results are byte-identical
//! between the two modes.

/// Map over a slice, in parallel when available.
#[cfg(feature = "parallel")]
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Map over a slice, in parallel when available.
#[cfg(not(feature = "parallel"))]
pub fn map_slice<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Map over an index range `0..n`, in parallel when available.
#[cfg(feature = "parallel")]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Map over an index range `0..n`, in parallel when available.
#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Cap the global worker count. A no-op in sequential builds and after
/// the pool has already been initialized.
#[cfg(feature = "parallel")]
pub fn configure_threads(n: usize) {
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n.max(1))
        .build_global();
}

/// Cap the global worker count. A no-op in sequential builds and after
/// the pool has already been initialized.
#[cfg(not(feature = "parallel"))]
pub fn configure_threads(_n: usize) {}
