//! Execution strategy for the data-parallel loops (folds, sequence
//! generation, dataset normalization).
//!
//! With the `parallel` feature (default) work is spread over a rayon pool.
//! Without it every strategy runs sequentially. Results always come back in
//! input order, so output is identical either way.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    Sequential,
    /// `jobs == 0` uses rayon's global pool.
    Parallel { jobs: usize },
}

impl Default for Exec {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Exec::Parallel { jobs: 0 }
        } else {
            Exec::Sequential
        }
    }
}

impl Exec {
    /// Worker count this strategy will use.
    pub fn threads(&self) -> usize {
        match *self {
            Exec::Sequential => 1,
            #[cfg(feature = "parallel")]
            Exec::Parallel { jobs: 0 } => rayon::current_num_threads(),
            Exec::Parallel { jobs } => {
                if cfg!(feature = "parallel") {
                    jobs.max(1)
                } else {
                    1
                }
            }
        }
    }

    /// Ordered map over `items`.
    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match *self {
            Exec::Sequential => items.iter().map(f).collect(),
            Exec::Parallel { jobs } => par_map(items, f, jobs),
        }
    }
}

#[cfg(feature = "parallel")]
fn par_map<T, R, F>(items: &[T], f: F, jobs: usize) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    if jobs == 0 {
        return items.par_iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R, F>(items: &[T], f: F, _jobs: usize) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategies_agree_and_keep_order() {
        let items: Vec<u64> = (0..257).collect();
        let f = |x: &u64| x.wrapping_mul(0x9e37_79b9) ^ (x >> 3);
        let seq = Exec::Sequential.map(&items, f);
        assert_eq!(Exec::Parallel { jobs: 0 }.map(&items, f), seq);
        assert_eq!(Exec::Parallel { jobs: 3 }.map(&items, f), seq);
        assert_eq!(seq[5], f(&5));
        assert!(Exec::Parallel { jobs: 3 }.threads() >= 1);
        assert_eq!(Exec::Sequential.threads(), 1);
    }
}
