//! Path-level parallelism on a rayon pool.

use std::ops::Range;

use lamperti_core::PathMap;
use rayon::prelude::*;

/// Maps paths on a rayon pool. Results come back in index order, so estimates are
/// identical for every worker count.
pub struct Rayon {
    pool: Option<rayon::ThreadPool>,
}

impl Rayon {
    /// `None` or `Some(0)` uses rayon's global pool.
    pub fn new(workers: Option<usize>) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = match workers {
            Some(n) if n > 0 => Some(rayon::ThreadPoolBuilder::new().num_threads(n).build()?),
            _ => None,
        };
        Ok(Rayon { pool })
    }
}

impl PathMap for Rayon {
    fn map_range<T, F>(&self, range: Range<usize>, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        let run = || range.into_par_iter().map(&f).collect();
        match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_for_any_worker_count() {
        for workers in [None, Some(1), Some(3)] {
            let m = Rayon::new(workers).unwrap();
            let v = m.map_range(5..105, |i| i * i);
            assert_eq!(v, (5..105).map(|i| i * i).collect::<Vec<_>>());
        }
    }
}
