//! Work distribution.
//!
//! Independent work items (per-cluster fits, per-k clusterings, DTW matrix
//! rows) are expressed as an indexed map. Results always come back in index
//! order, so a parallel executor produces exactly what [`Sequential`] does.

use alloc::vec::Vec;

pub trait Executor: Sync {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        (0..n).map(f).collect()
    }
}
