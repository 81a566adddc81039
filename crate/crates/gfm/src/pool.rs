use anyhow::Result;
use gfm_core::exec::Executor;
use rayon::prelude::*;

/// Environment variable that overrides the worker count.
pub const WORKERS_ENV: &str = "GFM_WORKERS";

/// A bounded rayon pool. Results come back in index order, so output does
/// not depend on the worker count.
pub struct Pool {
    pool: rayon::ThreadPool,
}

impl Pool {
    pub fn new(workers: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()?;
        Ok(Self { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Pool {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}

/// `GFM_WORKERS` when set and valid, else the flag, else the available
/// parallelism.
pub fn resolve_workers(flag: Option<usize>) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&w| w > 0)
        .or(flag)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        let p = Pool::new(4).unwrap();
        assert_eq!(p.map(100, |i| i * i), (0..100).map(|i| i * i).collect::<Vec<_>>());
    }
}
