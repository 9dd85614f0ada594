//! Thin switch between rayon and sequential iteration.
//!
//! Results are always collected in index order, so the parallel and
//! sequential builds produce identical numbers.

/// Maps `f` over `0..n` and collects the results in order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
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
        (0..n).map(f).collect()
    }
}

/// Applies `f` to consecutive chunks of `len` elements.
pub fn for_each_chunk<F>(data: &mut [f64], len: usize, f: F)
where
    F: Fn(&mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        // small trailing blocks are cheaper without task overhead
        if data.len() >= 64 * len {
            data.par_chunks_mut(len).for_each(f);
            return;
        }
    }
    data.chunks_mut(len).for_each(f);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
