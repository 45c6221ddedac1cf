use ancova_core::Executor;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Runs indexed work on a dedicated rayon pool. Results come back in index
/// order, so output does not depend on the number of workers.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `None` uses one worker per available core.
    pub fn new(workers: Option<usize>) -> Result<Self> {
        if workers == Some(0) {
            return Err(Error::Usage("--workers must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.unwrap_or(0))
            .build()
            .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
        Ok(Parallel { pool })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn map_indexed<T: Send, F: Fn(u64) -> T + Sync + Send>(&self, count: u64, f: F) -> Vec<T> {
        let count = usize::try_from(count).expect("work count fits in usize");
        self.pool
            .install(|| (0..count).into_par_iter().map(|i| f(i as u64)).collect())
    }
}
