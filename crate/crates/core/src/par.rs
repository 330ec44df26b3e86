//! Replica-level data parallelism.
//!
//! With the `parallel` feature (default) replicas run on the ambient rayon
//! pool; without it everything runs in a plain loop. Either way results come
//! back in index order, so downstream aggregation is identical.

/// Maps `f` over `0..count` sequentially.
pub fn map_seq<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

/// Maps `f` over `0..count` on the rayon pool, preserving index order.
#[cfg(feature = "parallel")]
pub fn map_par<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

/// Parallel when the `parallel` feature is on, sequential otherwise.
pub fn map<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_par(count, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(count, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v = map(1000, |i| i * i);
        assert_eq!(v, map_seq(1000, |i| i * i));
    }
}
