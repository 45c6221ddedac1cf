//! Ordered fan-out of independent work units.
//!
//! Every Monte Carlo routine in this crate splits its work into indexed
//! units whose results depend only on the index, then reduces them in index
//! order. An [`Executor`] decides how the units run; the reduction order is
//! fixed, so results are bit-identical across executors.

use alloc::vec::Vec;

pub trait Executor {
    /// Evaluates `f(0), ..., f(count - 1)` and returns them in index order.
    fn map_indexed<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send;
}

/// Runs units one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map_indexed<T, F>(&self, count: u64, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        (0..count).map(f).collect()
    }
}
