//! Small numeric helpers and the randomness-stream derivation scheme.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stochastic operation.
pub type SimRng = ChaCha8Rng;

/// Neumaier-compensated summation.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a sub-stream seed from a master seed and a path of counters.
///
/// Each counter is folded in with one SplitMix64 round:
/// `s_0 = splitmix(master)`, `s_{k+1} = splitmix(s_k ^ splitmix(tag_k + k + 1))`.
/// Distinct counter paths give statistically independent streams, and the
/// result does not depend on thread scheduling.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .enumerate()
        .fold(splitmix64(master), |s, (k, &tag)| {
            splitmix64(s ^ splitmix64(tag.wrapping_add(k as u64 + 1)))
        })
}

/// A generator seeded from [`derive_seed`].
pub fn stream(master: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, path))
}

/// `count` log-spaced values from `hi` down to `lo` (inclusive).
pub fn log_grid_descending(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![hi],
        _ => {
            let (lh, ll) = (hi.ln(), lo.ln());
            (0..count)
                .map(|k| (lh + (ll - lh) * k as f64 / (count - 1) as f64).exp())
                .collect()
        }
    }
}
