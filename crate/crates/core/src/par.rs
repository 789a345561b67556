//! Data-parallel map over an index range.
//!
//! With the `parallel` feature this dispatches to rayon, otherwise it is a plain
//! sequential loop. Output order always follows the input index, so callers see
//! identical results either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..len`, collecting results in index order.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(len: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..len).map(f).collect()
}

/// Whether this build runs work on a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
