//! Order-preserving data-parallel helpers.
//!
//! With the `parallel` feature these dispatch to rayon on whatever pool is
//! current (see [`with_workers`]); without it they are ordinary sequential
//! iterator chains. Results are always returned in input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items` (with the item index), keeping input order.
pub fn map_indexed<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(usize, &T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
    }
}

/// Keeps the items for which `keep` holds, in input order.
pub fn filter<T, F>(items: Vec<T>, keep: F) -> Vec<T>
where
    T: Send,
    F: Fn(&T) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.into_par_iter().filter(|t| keep(t)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.into_iter().filter(|t| keep(t)).collect()
    }
}

/// Associative map-reduce. `reduce` must be associative with `identity` as
/// its neutral element.
pub fn map_reduce<T, A, M, R, I>(items: &[T], map: M, identity: I, reduce: R) -> A
where
    T: Sync,
    A: Send,
    M: Fn(&T) -> A + Sync + Send,
    R: Fn(A, A) -> A + Sync + Send,
    I: Fn() -> A + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(map).reduce(identity, reduce)
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(map).fold(identity(), reduce)
    }
}

/// Runs `f` on a dedicated pool with `workers` threads (0 = rayon default).
///
/// In sequential builds the worker count is ignored.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
            Ok(pool) => pool.install(f),
            Err(e) => {
                log::warn!("could not build a {workers}-thread pool ({e}); using the global pool");
                f()
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        f()
    }
}

/// Number of threads the current pool would use.
pub fn current_workers() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}
