//! Execution policy for the data-parallel paths.
//!
//! Every parallel routine in the crate produces results identical to its
//! sequential counterpart; the policy only changes how work is scheduled.
//! Without the `parallel` feature, `Execution::Parallel` runs sequentially.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Number of pieces worth splitting work into.
    pub fn pieces(self) -> usize {
        if self.is_parallel() {
            current_threads() * 4
        } else {
            1
        }
    }
}

#[cfg(feature = "parallel")]
fn current_threads() -> usize {
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
fn current_threads() -> usize {
    1
}

/// Applies `f` to every item, preserving order.
pub fn map<T, R, F>(exec: Execution, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return items.into_par_iter().map(f).collect();
    }
    let _ = exec;
    items.into_iter().map(f).collect()
}

/// Stable sort; cheap on input made of a few long sorted runs.
pub fn sort_runs<T: Ord + Send>(exec: Execution, v: &mut [T]) {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::slice::ParallelSliceMut;
        v.par_sort();
        return;
    }
    let _ = exec;
    v.sort();
}

/// Sorts in place; both paths give the same result for a total order.
pub fn sort_unstable<T: Ord + Send>(exec: Execution, v: &mut [T]) {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::slice::ParallelSliceMut;
        v.par_sort_unstable();
        return;
    }
    let _ = exec;
    v.sort_unstable();
}
