//! Rayon-backed [`Executor`]; results keep input order, so output does not
//! depend on the number of threads.

use combsqec_core::exec::Executor;
use rayon::prelude::*;

pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// A pool with `jobs` threads; `0` lets rayon pick.
    pub fn new(jobs: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        Ok(Parallel { pool: rayon::ThreadPoolBuilder::new().num_threads(jobs).build()? })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        self.pool.install(|| items.into_par_iter().map(f).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use combsqec_core::conditions::check_algebraic;
    use combsqec_core::exec::Serial;
    use combsqec_core::library;
    use combsqec_core::model::Limits;

    #[test]
    fn keeps_order() {
        let p = Parallel::new(4).unwrap();
        assert_eq!(p.threads(), 4);
        assert_eq!(p.map((0..100).collect(), |x: i32| x * x), (0..100).map(|x| x * x).collect::<Vec<_>>());
    }

    #[test]
    fn checker_output_is_independent_of_jobs() {
        let inst = library::spacetime_toy_circuit().unwrap();
        let serial = check_algebraic(&inst.code, &inst.errors, 1e-8, &Limits::default(), &Serial).unwrap();
        for jobs in [1, 3] {
            let par = check_algebraic(&inst.code, &inst.errors, 1e-8, &Limits::default(), &Parallel::new(jobs).unwrap()).unwrap();
            assert_eq!(par, serial);
        }
    }
}
