//! Data-parallel batch helpers.
//!
//! With the `parallel` feature the batch work (oracle trials, random
//! cross-checks) runs on the rayon pool; without it every helper degrades
//! to a plain sequential loop. Results are always returned in input order,
//! so the output never depends on scheduling.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How a batch should be executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled; otherwise
    /// identical to [`Execution::Sequential`].
    #[default]
    Parallel,
}

/// Maps `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_collect<T, R, F>(exec: Execution, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Send + Sync,
{
    match exec {
        Execution::Sequential => items.into_iter().map(f).collect(),
        Execution::Parallel => items.into_par_iter().map(f).collect(),
    }
}

/// Maps `f` over `items`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, R, F>(_exec: Execution, items: Vec<T>, f: F) -> Vec<R>
where
    F: Fn(T) -> R,
{
    items.into_iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    map_collect(exec, (0..n).collect(), f)
}

/// Installs a dedicated pool with `jobs` worker threads for the duration of
/// `op`. A no-op without the `parallel` feature.
#[cfg(feature = "parallel")]
pub fn with_jobs<R: Send>(jobs: usize, op: impl FnOnce() -> R + Send) -> R {
    match rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build() {
        Ok(pool) => pool.install(op),
        Err(_) => op(),
    }
}

/// Installs a dedicated pool with `jobs` worker threads for the duration of
/// `op`. A no-op without the `parallel` feature.
#[cfg(not(feature = "parallel"))]
pub fn with_jobs<R>(_jobs: usize, op: impl FnOnce() -> R) -> R {
    op()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_modes_agree_and_keep_order() {
        let items: Vec<u64> = (0..1000).collect();
        let seq = map_collect(Execution::Sequential, items.clone(), |x| x * x);
        let par = map_collect(Execution::Parallel, items, |x| x * x);
        assert_eq!(seq, par);
        assert_eq!(seq[31], 961);
        assert_eq!(map_range(Execution::Parallel, 4, |i| i + 1), vec![1, 2, 3, 4]);
    }

    #[test]
    fn with_jobs_runs_operation() {
        assert_eq!(with_jobs(2, || map_range(Execution::Parallel, 3, |i| i)), vec![0, 1, 2]);
    }
}
