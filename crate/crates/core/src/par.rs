//! Data-parallel helpers with a sequential fallback.
//!
//! Work is split into fixed-size chunks whose boundaries do not depend on the
//! thread count. Chunk results are combined left to right, so floating-point
//! reductions are bit-identical whether the chunks run on one thread or many,
//! and whether or not the `parallel` feature is compiled in.

use std::ops::Range;
use std::sync::atomic::{AtomicBool, Ordering};

/// Events per work unit in likelihood reductions.
pub const CHUNK: usize = 64;

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Force the sequential path at runtime even when `parallel` is enabled.
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::SeqCst);
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::SeqCst)
}

fn chunk_ranges(n: usize, chunk: usize) -> Vec<Range<usize>> {
    let chunk = chunk.max(1);
    (0..n.div_ceil(chunk))
        .map(|c| c * chunk..((c + 1) * chunk).min(n))
        .collect()
}

/// Apply `f` to each chunk of `0..n`, returning chunk results in order.
pub fn map_chunks<T, F>(n: usize, chunk: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
{
    let ranges = chunk_ranges(n, chunk);
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return ranges.into_par_iter().map(f).collect();
    }
    ranges.into_iter().map(f).collect()
}

/// Ordered map over `0..n`; output index `i` holds `f(i)`.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Chunked map-reduce with a deterministic left fold over chunk results.
pub fn map_reduce<T, F, R>(n: usize, chunk: usize, identity: T, f: F, reduce: R) -> T
where
    T: Send,
    F: Fn(Range<usize>) -> T + Sync + Send,
    R: Fn(T, T) -> T,
{
    map_chunks(n, chunk, f).into_iter().fold(identity, reduce)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_cover_range_in_order() {
        let r = chunk_ranges(10, 4);
        assert_eq!(r, vec![0..4, 4..8, 8..10]);
        assert!(chunk_ranges(0, 4).is_empty());
    }

    #[test]
    fn reduction_is_bit_stable_across_modes() {
        let xs: Vec<f64> = (0..10_000)
            .map(|i| ((i as f64) * 0.37).sin() * 1e3)
            .collect();
        let sum = |par: bool| {
            set_sequential(!par);
            let s = map_reduce(
                xs.len(),
                CHUNK,
                0.0,
                |r| xs[r].iter().sum::<f64>(),
                |a, b| a + b,
            );
            set_sequential(false);
            s
        };
        assert_eq!(sum(true).to_bits(), sum(false).to_bits());
    }
}
