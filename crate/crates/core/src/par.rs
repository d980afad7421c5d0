//! Order-preserving maps over independent work items.
//!
//! With the `parallel` feature (default) the maps run on the current rayon
//! pool; without it, or inside [`sequential`], they run on the calling
//! thread. Results are always returned in input order, and the first error
//! in input order wins, so output never depends on scheduling.

use std::cell::Cell;

use crate::error::Result;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with every map issued from this thread forced onto it.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    struct Reset(bool);
    impl Drop for Reset {
        fn drop(&mut self) {
            FORCE_SEQUENTIAL.with(|c| c.set(self.0));
        }
    }
    let _reset = Reset(FORCE_SEQUENTIAL.with(|c| c.replace(true)));
    f()
}

fn forced_sequential() -> bool {
    FORCE_SEQUENTIAL.with(|c| c.get())
}

pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !forced_sequential() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if !forced_sequential() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Fallible [`map`]; returns the error of the lowest failing index.
pub fn try_map<T, R, F>(items: &[T], f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    map(items, f).into_iter().collect()
}

pub fn try_map_range<R, F>(n: usize, f: F) -> Result<Vec<R>>
where
    R: Send,
    F: Fn(usize) -> Result<R> + Sync + Send,
{
    map_range(n, f).into_iter().collect()
}

/// Runs `f` on a dedicated pool of `jobs` threads (`jobs = 1` is sequential).
pub fn with_jobs<R: Send>(jobs: usize, f: impl FnOnce() -> R + Send) -> R {
    if jobs <= 1 {
        return sequential(f);
    }
    #[cfg(feature = "parallel")]
    {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("failed to build thread pool");
        pool.install(f)
    }
    #[cfg(not(feature = "parallel"))]
    f()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn order_preserved() {
        let xs: Vec<u64> = (0..1000).collect();
        let ys = map(&xs, |x| x * x);
        assert_eq!(ys, sequential(|| map(&xs, |x| x * x)));
        assert_eq!(ys[999], 999 * 999);
    }

    #[test]
    fn first_error_in_order_wins() {
        let r: Result<Vec<usize>> = try_map_range(100, |i| {
            if i % 10 == 7 {
                Err(Error::InvalidInput(format!("{i}")))
            } else {
                Ok(i)
            }
        });
        match r {
            Err(Error::InvalidInput(s)) => assert_eq!(s, "7"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn jobs_do_not_change_results() {
        let f = || map_range(500, |i| (i as f64).sqrt());
        assert_eq!(with_jobs(1, f), with_jobs(4, f));
    }
}
