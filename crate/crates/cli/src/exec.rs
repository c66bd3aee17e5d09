use cpxr_ptf_core::evaluation::Executor;
use rayon::prelude::*;

/// Executor backed by a dedicated rayon pool. Results come back in job
/// order, so output does not depend on the number of threads.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `None` uses one thread per available core.
    pub fn new(jobs: Option<usize>) -> anyhow::Result<Self> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(j) = jobs {
            builder = builder.num_threads(j);
        }
        Ok(Self { pool: builder.build()? })
    }
}

impl Executor for Parallel {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..n).into_par_iter().map(f).collect())
    }
}
