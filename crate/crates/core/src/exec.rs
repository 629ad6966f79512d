//! Data-parallel execution helpers.
//!
//! With the `parallel` feature (on by default) [`ExecMode::Parallel`] maps
//! work over a rayon pool. Without it every mode runs sequentially. Either
//! way results come back in input order and every reduction is performed
//! sequentially afterwards, so output does not depend on the mode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// True when this mode will actually fan out to worker threads.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// Apply `f` to `0..n`, returning results in index order.
pub fn map_indices<T, F>(n: usize, mode: ExecMode, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Fill `out` chunk by chunk. `f(start, chunk)` writes `chunk.len()` values
/// for indices `start..start + chunk.len()`.
pub fn for_each_chunk<T, F>(out: &mut [T], chunk: usize, mode: ExecMode, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if mode.is_parallel() && out.len() > chunk {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i * chunk, c));
        return;
    }
    let _ = mode;
    for (i, c) in out.chunks_mut(chunk).enumerate() {
        f(i * chunk, c);
    }
}

/// Run `f` inside a pool capped at `threads` workers (`None` = rayon default).
pub fn with_thread_cap<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    if let Some(n) = threads {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            return pool.install(f);
        }
    }
    let _ = threads;
    f()
}

/// SplitMix64 finaliser; used to derive well-separated child seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The generator used for every stochastic component of the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order_in_both_modes() {
        let a = map_indices(1000, ExecMode::Parallel, |i| i * i);
        let b = map_indices(1000, ExecMode::Sequential, |i| i * i);
        assert_eq!(a, b);
        assert_eq!(a[31], 961);
    }

    #[test]
    fn chunks_cover_everything() {
        let mut v = vec![0usize; 1003];
        for_each_chunk(&mut v, 64, ExecMode::Parallel, |start, c| {
            for (k, x) in c.iter_mut().enumerate() {
                *x = start + k;
            }
        });
        assert!(v.iter().enumerate().all(|(i, &x)| i == x));
    }

    #[test]
    fn child_seeds_differ() {
        assert_ne!(mix_seed(7, 0), mix_seed(7, 1));
        assert_ne!(mix_seed(7, 1), mix_seed(8, 0));
        assert_eq!(mix_seed(7, 3), mix_seed(7, 3));
    }
}
