use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorruptionRates {
    pub substitution: f64,
    pub deletion: f64,
    pub insertion: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CorruptionCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

/// Corrupt each position independently: delete it with probability
/// `deletion`, otherwise replace it with a different uniformly drawn id
/// with probability `substitution`; then insert a uniform id after it with
/// probability `insertion`.
pub fn corrupt_stream(
    stream: &[u32],
    rates: CorruptionRates,
    symbol_count: u32,
    seed: u64,
) -> Result<(Vec<u32>, CorruptionCounts)> {
    for (name, r) in [
        ("substitution", rates.substitution),
        ("deletion", rates.deletion),
        ("insertion", rates.insertion),
    ] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Config(format!("{name} rate must lie in [0, 1], got {r}")));
        }
    }
    if symbol_count == 0 && (rates.substitution > 0.0 || rates.insertion > 0.0) {
        return Err(Error::Config("symbol_count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(stream.len());
    let mut counts = CorruptionCounts::default();
    for &s in stream {
        let del = rng.random::<f64>() < rates.deletion;
        let sub = rng.random::<f64>() < rates.substitution;
        let ins = rng.random::<f64>() < rates.insertion;
        if del {
            counts.deletions += 1;
        } else if sub && symbol_count > 1 {
            // 64-bit draws: mixing 32-bit draws into the f64 stream skewed
            // the per-position rates measurably.
            let mut r = rng.random_range(0..u64::from(symbol_count) - 1);
            if r >= u64::from(s) {
                r += 1;
            }
            out.push(r as u32);
            counts.substitutions += 1;
        } else {
            out.push(s);
        }
        if ins {
            out.push(rng.random_range(0..u64::from(symbol_count)) as u32);
            counts.insertions += 1;
        }
    }
    Ok((out, counts))
}
