//! Data-parallel map helpers with a sequential fallback.
//!
//! Every estimator in this crate is a map over an index range followed by a
//! fixed-order reduction. `map_collect` evaluates the map (in parallel when
//! the `parallel` feature is on) and always returns results in index order,
//! so downstream reductions are bit-identical regardless of worker count.

/// Sequential reference implementation, always available.
pub fn map_collect_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync,
    T: Send,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync + Send,
    T: Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_collect<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T + Sync,
    T: Send,
{
    map_collect_seq(n, f)
}

/// Run `f` on a pool with `workers` threads. `workers == 0` means the current
/// (global) pool. Without the `parallel` feature the count is ignored.
#[cfg(feature = "parallel")]
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("failed to build worker pool");
        pool.install(f)
    }
}

#[cfg(not(feature = "parallel"))]
pub fn with_workers<T: Send>(_workers: usize, f: impl FnOnce() -> T + Send) -> T {
    f()
}

/// Sum in fixed index order. Used after `map_collect` so that the reduction
/// order never depends on scheduling.
pub fn ordered_sum(values: &[f64]) -> f64 {
    values.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_matches_sequential_bitwise() {
        let f = |i: usize| ((i as f64) * 0.1).sin() / (1.0 + i as f64);
        let a = map_collect(1000, f);
        let b = map_collect_seq(1000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn worker_count_does_not_change_result() {
        let f = |i: usize| (i as f64).sqrt();
        let one = with_workers(1, || ordered_sum(&map_collect(10_000, f)));
        let many = with_workers(2, || ordered_sum(&map_collect(10_000, f)));
        assert_eq!(one.to_bits(), many.to_bits());
    }
}
