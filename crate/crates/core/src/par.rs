//! Data-parallel helpers.
//!
//! With the `parallel` feature (default) these dispatch to rayon; without it
//! they run the same closures sequentially. Every helper preserves output
//! order, and callers only reduce results sequentially afterwards, so the
//! numbers are bitwise identical regardless of thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f(row_index, row)` to each `row_len`-sized chunk of `data`.
pub fn for_each_row_mut<T, F>(data: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row));

    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row));
}

/// Map each `row_len`-sized chunk of `data` to a value, in row order.
pub fn map_rows<T, U, F>(data: &[T], row_len: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &[T]) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return data.par_chunks(row_len).enumerate().map(|(i, row)| f(i, row)).collect();

    #[cfg(not(feature = "parallel"))]
    return data.chunks(row_len).enumerate().map(|(i, row)| f(i, row)).collect();
}

/// Map every item of `items`, in order.
pub fn map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return items.par_iter().map(f).collect();

    #[cfg(not(feature = "parallel"))]
    return items.iter().map(f).collect();
}

/// Whether this build dispatches to a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
