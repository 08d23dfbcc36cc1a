//! Execution strategy for the data-parallel loops in this crate.
//!
//! Every parallel helper preserves input order, so a parallel run and a
//! sequential run produce identical outputs.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Defaults to `Parallel` when the feature is on.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

impl Execution {
    /// All strategies compiled into this build.
    pub fn available() -> &'static [Execution] {
        #[cfg(feature = "parallel")]
        {
            &[Execution::Sequential, Execution::Parallel]
        }
        #[cfg(not(feature = "parallel"))]
        {
            &[Execution::Sequential]
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Execution::Sequential => "sequential",
            #[cfg(feature = "parallel")]
            Execution::Parallel => "parallel",
        }
    }

    /// Maps `f` over `items`, keeping order.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
        }
    }

    /// Maps `f` over `0..n`, keeping order.
    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            Execution::Sequential => (0..n).map(f).collect(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        }
    }

    /// Like [`Execution::map`] but short-circuits on the first error in
    /// input order.
    pub fn try_map<T, R, E, F>(self, items: &[T], f: F) -> Result<Vec<R>, E>
    where
        T: Sync,
        R: Send,
        E: Send,
        F: Fn(&T) -> Result<R, E> + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().map(f).collect(),
            // rayon's Result collection may return any error; keep input order.
            #[cfg(feature = "parallel")]
            Execution::Parallel => items
                .par_iter()
                .map(f)
                .collect::<Vec<_>>()
                .into_iter()
                .collect(),
        }
    }

    /// Counts the items satisfying `pred`.
    pub fn count<T, F>(self, items: &[T], pred: F) -> usize
    where
        T: Sync,
        F: Fn(&T) -> bool + Sync + Send,
    {
        match self {
            Execution::Sequential => items.iter().filter(|x| pred(x)).count(),
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().filter(|x| pred(x)).count(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree() {
        let xs: Vec<u64> = (0..10_000).collect();
        let reference = Execution::Sequential.map(&xs, |x| x * x % 97);
        for &exec in Execution::available() {
            assert_eq!(exec.map(&xs, |x| x * x % 97), reference);
            assert_eq!(exec.map_range(xs.len(), |i| xs[i] * xs[i] % 97), reference);
            assert_eq!(exec.count(&xs, |x| x % 3 == 0), 3334);
        }
    }

    #[test]
    fn try_map_reports_first_error_in_order() {
        let xs: Vec<i32> = (0..1000).collect();
        for &exec in Execution::available() {
            let r: Result<Vec<i32>, i32> =
                exec.try_map(&xs, |&x| if x == 10 { Err(x) } else { Ok(x) });
            assert_eq!(r, Err(10));
        }
    }
}
