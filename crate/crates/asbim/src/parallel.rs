//! Indexed job execution for independent work items (fold x imputation
//! cells, gradient-check seeds).
//!
//! With the `parallel` feature the items run on a rayon pool; without it
//! they run sequentially. Results are collected in index order either
//! way, so output never depends on scheduling.

/// Run `f(0..n)` and collect results in index order.
///
/// `jobs` caps the worker count: `0` uses all available cores, `1`
/// forces the sequential path, `n > 1` builds a pool of `n` threads.
#[cfg(feature = "parallel")]
pub fn run_indexed<T, F>(n: usize, jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    match jobs {
        1 => run_sequential(n, f),
        0 => (0..n).into_par_iter().map(f).collect(),
        cap => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(cap)
                .build()
                .expect("failed to build worker pool");
            pool.install(|| (0..n).into_par_iter().map(f).collect())
        }
    }
}

#[cfg(not(feature = "parallel"))]
pub fn run_indexed<T, F>(n: usize, _jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    run_sequential(n, f)
}

/// Always-sequential lane; kept public so benchmarks can compare lanes
/// directly.
pub fn run_sequential<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_index_order() {
        let out = run_indexed(100, 0, |i| i * i);
        assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn capped_pool_matches_sequential() {
        let seq = run_sequential(37, |i| (i as f64).sqrt());
        let par = run_indexed(37, 3, |i| (i as f64).sqrt());
        assert_eq!(seq, par);
    }
}
