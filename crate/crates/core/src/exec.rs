//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the helpers dispatch to rayon unless
//! the calling thread is inside [`sequential`]. Without the feature every
//! helper is a plain loop. All helpers preserve index order in their outputs,
//! so results never depend on the worker count.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with every helper in this module forced onto the calling thread.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let out = f();
    FORCE_SEQUENTIAL.with(|c| c.set(prev));
    out
}

#[cfg(feature = "parallel")]
fn forced_sequential() -> bool {
    FORCE_SEQUENTIAL.with(|c| c.get())
}

/// Runs `f` on a dedicated pool of `workers` threads (`0` = rayon default).
///
/// `workers == 1` takes the sequential path outright.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 1 {
        return sequential(f);
    }
    #[cfg(feature = "parallel")]
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if workers > 0 {
            builder = builder.num_threads(workers);
        }
        match builder.build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("thread pool construction failed ({e}); running on the global pool");
                f()
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        f()
    }
}

/// Evaluates `f(0..n)` and collects the results in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !forced_sequential() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Applies `f(i, row_i, aux_i)` to consecutive `width`-sized rows of `rows`
/// paired with the matching element of `aux`.
pub fn for_each_row<A, B, F>(rows: &mut [A], width: usize, aux: &mut [B], f: F)
where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut B) + Sync + Send,
{
    debug_assert_eq!(rows.len(), width * aux.len());
    #[cfg(feature = "parallel")]
    if !forced_sequential() {
        use rayon::prelude::*;
        rows.par_chunks_mut(width)
            .zip(aux.par_iter_mut())
            .enumerate()
            .for_each(|(i, (row, b))| f(i, row, b));
        return;
    }
    rows.chunks_mut(width)
        .zip(aux.iter_mut())
        .enumerate()
        .for_each(|(i, (row, b))| f(i, row, b));
}

/// Applies `f(scratch, i, row_i)` to consecutive `width`-sized rows, with a
/// per-task scratch value built by `init`.
pub fn for_each_row_init<A, S, I, F>(rows: &mut [A], width: usize, init: I, f: F)
where
    A: Send,
    I: Fn() -> S + Sync + Send,
    F: Fn(&mut S, usize, &mut [A]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !forced_sequential() {
        use rayon::prelude::*;
        rows.par_chunks_mut(width)
            .enumerate()
            .for_each_init(&init, |s, (i, row)| f(s, i, row));
        return;
    }
    let mut s = init();
    rows.chunks_mut(width)
        .enumerate()
        .for_each(|(i, row)| f(&mut s, i, row));
}

/// Like [`map_indexed`] but fallible; the first error in index order wins.
pub fn try_map_indexed<T, E, F>(n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(n, f).into_iter().collect()
}
