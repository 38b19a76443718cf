//! Bounded work pools for per-source-point evaluation.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

static POOLS: LazyLock<Mutex<HashMap<usize, Arc<ThreadPool>>>> = LazyLock::new(|| Mutex::new(HashMap::new()));

/// Shared pool running at most `width` tasks at once (capped at the number of
/// hardware threads, since extra threads only add contention).
pub fn pool(width: usize) -> Arc<ThreadPool> {
    let hw = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let threads = width.clamp(1, hw);
    let mut pools = POOLS.lock().expect("pool registry poisoned");
    pools
        .entry(threads)
        .or_insert_with(|| {
            Arc::new(
                ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .thread_name(move |i| format!("smo-{threads}-{i}"))
                    .build()
                    .expect("thread pool"),
            )
        })
        .clone()
}

/// Evaluate `f(0..n)` on the pool and return results in index order.
pub fn map_ordered<R, F>(n: usize, width: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    if width <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    pool(width).install(|| (0..n).into_par_iter().map(f).collect())
}

/// Evaluate and reduce. With `deterministic` the partial results are folded
/// strictly in ascending index order; otherwise the pool's own reduction tree
/// is used.
pub fn map_reduce<R, F, G>(n: usize, width: usize, deterministic: bool, f: F, identity: R, combine: G) -> R
where
    R: Send + Sync + Clone,
    F: Fn(usize) -> R + Sync + Send,
    G: Fn(R, R) -> R + Sync + Send,
{
    if deterministic || width <= 1 {
        map_ordered(n, width, f).into_iter().fold(identity, combine)
    } else {
        pool(width).install(|| (0..n).into_par_iter().map(f).reduce(|| identity.clone(), &combine))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordered_results() {
        let v = map_ordered(100, 8, |i| i * i);
        assert_eq!(v, (0..100).map(|i| i * i).collect::<Vec<_>>());
    }

    #[test]
    fn reduce_modes_agree() {
        let f = |i: usize| 1.0 / (1.0 + i as f64);
        let a = map_reduce(1000, 4, true, f, 0.0, |a, b| a + b);
        let b = map_reduce(1000, 4, false, f, 0.0, |a, b| a + b);
        let c = map_reduce(1000, 1, true, f, 0.0, |a, b| a + b);
        assert_eq!(a, c);
        assert!((a - b).abs() < 1e-12 * a);
    }
}
