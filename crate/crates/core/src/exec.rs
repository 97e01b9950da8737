//! Data-parallel map with a sequential fallback.
//!
//! With the `parallel` feature the parallel mode runs on the rayon pool;
//! without it both modes run the same sequential loop. Output order always
//! follows input order, so results never depend on the mode.

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

pub fn map_indexed<U, F>(n: usize, mode: Execution, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

pub fn map_slice<T, U, F>(items: &[T], mode: Execution, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    match mode {
        #[cfg(feature = "parallel")]
        Execution::Parallel => items.par_iter().map(f).collect(),
        _ => items.iter().map(f).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let a = map_indexed(100, Execution::Parallel, |i| (i as f64).sqrt());
        let b = map_indexed(100, Execution::Sequential, |i| (i as f64).sqrt());
        assert_eq!(a, b);
        let v: Vec<u32> = (0..10).collect();
        assert_eq!(map_slice(&v, Execution::Parallel, |x| x * 2), map_slice(&v, Execution::Sequential, |x| x * 2));
    }
}
