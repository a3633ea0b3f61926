//! Data-parallel helpers with a sequential fallback.
//!
//! Every reduction here runs over fixed-size chunks whose partial results are
//! combined in index order, so the output is bit-identical whichever policy
//! (and however many worker threads) ran it.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Samples per work unit in chunked reductions. Fixed so the floating-point
/// summation tree does not depend on the thread count.
pub const CHUNK: usize = 8;

/// How a data-parallel loop is executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses rayon when the `parallel` feature is enabled, otherwise
    /// degrades to [`Exec::Sequential`].
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(exec: Exec, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Maps `f` over `0..n`, preserving order.
pub fn map_range<R, F>(exec: Exec, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Folds each [`CHUNK`]-sized slice of `items` into an accumulator, then
/// merges the per-chunk accumulators left to right.
pub fn chunked_fold<T, A, I, F, M>(exec: Exec, items: &[T], init: I, fold: F, merge: M) -> A
where
    T: Sync,
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &T) + Sync + Send,
    M: Fn(&mut A, A),
{
    let run = |chunk: &[T]| {
        let mut acc = init();
        for item in chunk {
            fold(&mut acc, item);
        }
        acc
    };
    let partials: Vec<A>;
    #[cfg(feature = "parallel")]
    {
        partials = if exec.is_parallel() {
            items.par_chunks(CHUNK).map(run).collect()
        } else {
            items.chunks(CHUNK).map(run).collect()
        };
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = exec;
        partials = items.chunks(CHUNK).map(run).collect();
    }
    let mut parts = partials.into_iter();
    let mut total = parts.next().unwrap_or_else(&init);
    for p in parts {
        merge(&mut total, p);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_fold_is_policy_independent() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() * 1e3).collect();
        let sum = |e| chunked_fold(e, &xs, || 0.0, |a: &mut f64, x| *a += x, |a, b| *a += b);
        assert_eq!(sum(Exec::Sequential).to_bits(), sum(Exec::Parallel).to_bits());
    }

    #[test]
    fn empty_fold_returns_init() {
        let xs: Vec<f64> = vec![];
        let s = chunked_fold(Exec::Parallel, &xs, || 7.0, |a: &mut f64, x| *a += x, |a, b| *a += b);
        assert_eq!(s, 7.0);
    }

    #[test]
    fn map_preserves_order() {
        let v = map(Exec::Parallel, &[1, 2, 3, 4], |x| x * 10);
        assert_eq!(v, vec![10, 20, 30, 40]);
        assert_eq!(map_range(Exec::Sequential, 3, |i| i + 1), vec![1, 2, 3]);
    }
}
