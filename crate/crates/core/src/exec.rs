//! Execution strategy for the data-parallel inner loops (Monte-Carlo
//! batches, scalar grid searches). With the `parallel` feature enabled the
//! work is spread over rayon; without it the same closures run on one
//! thread. The sequential path stays compiled either way so benchmarks can
//! compare the two directly.

/// Map `f` over `0..n` and collect in index order, in parallel when built
/// with the `parallel` feature.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(n, f)
    }
}

/// Single-threaded reference path for [`map_indexed`].
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let par = map_indexed(100, |i| i * i);
        let seq = map_indexed_seq(100, |i| i * i);
        assert_eq!(par, seq);
    }
}
