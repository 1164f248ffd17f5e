//! Thin switch between rayon and plain iterators.
//!
//! Every helper here produces results that are independent of the worker
//! count: parallelism only ever splits work into disjoint outputs, and
//! collections keep input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Minimum scalar operations handed to one rayon task.
#[cfg(feature = "parallel")]
const MIN_TASK_WORK: usize = 1 << 14;

/// Calls `f(row_index, row)` for each `row_len`-sized chunk of `out`.
///
/// `work_per_row` is a rough operation count used to size tasks.
pub(crate) fn for_each_row<T, F>(out: &mut [T], row_len: usize, work_per_row: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Send + Sync,
{
    if row_len == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    {
        let min_rows = (MIN_TASK_WORK / work_per_row.max(1)).max(1);
        out.par_chunks_mut(row_len)
            .with_min_len(min_rows)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = work_per_row;
        out.chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row));
    }
}

/// Maps `f` over `items`, returning results in input order.
pub fn map_ordered<I, R, F>(items: &[I], f: F) -> Vec<R>
where
    I: Sync,
    R: Send,
    F: Fn(usize, &I) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
    }
}

/// Whether this build fans work out over rayon.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
