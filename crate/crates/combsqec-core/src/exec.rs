//! Pluggable execution of independent tasks.

use alloc::vec::Vec;

use crate::error::Result;

/// Runs independent closures over a list of items, returning results in
/// input order.
pub trait Executor: Sync {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send;
}

/// In-order sequential execution.
#[derive(Clone, Copy, Debug, Default)]
pub struct Serial;

impl Executor for Serial {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}

/// Like [`Executor::map`] for fallible tasks; the first error in input order wins.
pub fn try_map<X, T, R, F>(exec: &X, items: Vec<T>, f: F) -> Result<Vec<R>>
where
    X: Executor,
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync + Send,
{
    exec.map(items, f).into_iter().collect()
}
