//! Deterministic batched execution for Monte Carlo loops and sweeps.
//!
//! Work is cut into fixed-size batches and batch `b` always draws from
//! ChaCha stream `b` of the caller's seed, so results do not depend on the
//! thread count or on whether the `parallel` feature is enabled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub const BATCH_SIZE: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Rayon when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Auto,
    Sequential,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Auto
    }
}

/// Generator for stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives an independent seed for a named sub-task.
pub fn sub_seed(seed: u64, tag: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs `f(rng, batch_len)` over `ceil(trials / BATCH_SIZE)` batches and
/// returns the per-batch results in batch order.
pub fn run_batches<T, F>(trials: u64, seed: u64, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SimRng, u64) -> T + Sync + Send,
{
    let batches = trials.div_ceil(BATCH_SIZE);
    let job = |b: u64| {
        let len = BATCH_SIZE.min(trials - b * BATCH_SIZE);
        let mut rng = stream_rng(seed, b);
        f(&mut rng, len)
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..batches).into_par_iter().map(job).collect();
    }
    let _ = exec;
    (0..batches).map(job).collect()
}

/// Maps `f(index, rng)` over `0..count`, case `i` drawing from stream `i`.
pub fn map_cases<T, F>(count: usize, seed: u64, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut SimRng) -> T + Sync + Send,
{
    let job = |i: usize| {
        let mut rng = stream_rng(seed, i as u64);
        f(i, &mut rng)
    };
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..count).into_par_iter().map(job).collect();
    }
    let _ = exec;
    (0..count).map(job).collect()
}

/// Successes out of trials, with the binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tally {
    pub trials: u64,
    pub successes: u64,
}

impl Tally {
    pub fn rate(&self) -> Option<f64> {
        (self.trials > 0).then(|| self.successes as f64 / self.trials as f64)
    }

    /// Standard error of the rate under a reference probability `p`.
    pub fn std_error_at(&self, p: f64) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        (p * (1.0 - p) / self.trials as f64).max(0.0).sqrt()
    }

    pub fn std_error(&self) -> f64 {
        self.rate().map_or(0.0, |p| self.std_error_at(p))
    }

    pub fn merge(self, other: Self) -> Self {
        Self { trials: self.trials + other.trials, successes: self.successes + other.successes }
    }
}

impl std::iter::Sum for Tally {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Tally::default(), Tally::merge)
    }
}
