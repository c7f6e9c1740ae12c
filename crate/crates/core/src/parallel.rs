//! Data-parallel execution helpers.
//!
//! With the `parallel` feature (default) the work is dispatched through
//! rayon; without it the same entry points run sequentially, so callers and
//! benchmarks can compare both paths. Results always come back in input
//! order, and each item is computed by the same sequence of operations either
//! way, so outputs are bitwise identical across modes and thread counts.

/// Map `f` over `0..len`, in parallel when requested and compiled in.
pub fn indexed_map<U: Send>(len: usize, parallel: bool, f: impl Fn(usize) -> U + Sync + Send) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        if parallel {
            use rayon::prelude::*;
            return (0..len).into_par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    (0..len).map(f).collect()
}

/// Map `f` over a slice, in parallel when requested and compiled in.
pub fn slice_map<T: Sync, U: Send>(
    items: &[T],
    parallel: bool,
    f: impl Fn(&T) -> U + Sync + Send,
) -> Vec<U> {
    #[cfg(feature = "parallel")]
    {
        if parallel {
            use rayon::prelude::*;
            return items.par_iter().map(f).collect();
        }
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

/// Whether the parallel path is compiled in.
pub fn parallel_available() -> bool {
    cfg!(feature = "parallel")
}
