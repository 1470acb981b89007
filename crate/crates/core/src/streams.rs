//! Counter-based random streams: one ChaCha8 key per master seed, one
//! stream id per batch.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream `index` under `master`; index 0 is the master stream itself.
pub fn stream(master: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

pub fn seed_streams(master: u64, n_batches: usize) -> Vec<Stream> {
    (0..n_batches as u64).map(|i| stream(master, i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_draws() {
        let mut a = seed_streams(7, 3);
        let mut b = seed_streams(7, 3);
        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
            for _ in 0..100 {
                assert_eq!(x.random::<u64>(), y.random::<u64>());
            }
        }
    }

    #[test]
    fn single_stream_is_master() {
        let mut s = seed_streams(99, 1).remove(0);
        let mut m = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            assert_eq!(s.random::<u64>(), m.random::<u64>());
        }
    }

    #[test]
    fn distinct_streams_uncorrelated() {
        let mut s = seed_streams(3, 4);
        let n = 20_000;
        let draws: Vec<Vec<f64>> = s.iter_mut().map(|r| (0..n).map(|_| r.random::<f64>() - 0.5).collect()).collect();
        for i in 0..4 {
            for j in (i + 1)..4 {
                let c: f64 = draws[i].iter().zip(&draws[j]).map(|(a, b)| a * b).sum::<f64>() / n as f64;
                // sd of the product mean is 1/(12 sqrt(n))
                assert!(c.abs() < 5.0 / (12.0 * (n as f64).sqrt()), "streams {i},{j}: {c}");
            }
        }
    }
}
