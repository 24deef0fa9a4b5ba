//! Monte-Carlo estimate of the floored mean transmission time. Serves as an
//! independent check on the quadrature route.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{mean_snr, ChannelSpec};
use crate::sampling;

pub const MIN_ORACLE_DRAWS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: u64,
}

/// Sample mean of `xi / ln(1 + snr * max(h, h_min))` with `h ~ Exp(1)`.
///
/// Panics if `n_draws < MIN_ORACLE_DRAWS`.
pub fn mc_transmission_oracle(
    processed_bits: f64,
    ch: &ChannelSpec,
    n_draws: u64,
    seed: u64,
) -> McEstimate {
    mc_transmission_mean(
        ch.payload_scale(processed_bits),
        mean_snr(ch),
        ch.gain_floor,
        n_draws,
        seed,
    )
}

/// Same estimate parameterized directly by `(xi, snr, h_min)`.
pub fn mc_transmission_mean(xi: f64, snr: f64, gain_floor: f64, n_draws: u64, seed: u64) -> McEstimate {
    assert!(
        n_draws >= MIN_ORACLE_DRAWS,
        "oracle needs at least {MIN_ORACLE_DRAWS} draws, got {n_draws}"
    );
    if xi == 0.0 {
        return McEstimate {
            mean: 0.0,
            std_error: 0.0,
            draws: n_draws,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Welford
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 1..=n_draws {
        let h = sampling::exponential(&mut rng, 1.0);
        let z = sampling::transmission_time(xi, snr, gain_floor, h);
        let delta = z - mean;
        mean += delta / k as f64;
        m2 += delta * (z - mean);
    }
    let n = n_draws as f64;
    let var = m2 / (n - 1.0);
    McEstimate {
        mean,
        std_error: (var / n).sqrt(),
        draws: n_draws,
    }
}
