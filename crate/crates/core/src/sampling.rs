//! Inversion samplers shared by the simulator and the Monte-Carlo oracle.

use rand::Rng;

/// Exponential draw with the given rate: `-ln(1 - U) / rate`, `U` on `[0, 1)`.
#[inline]
pub fn exponential<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    -(-u).ln_1p() / rate
}

/// Transmission time of a packet with payload scale `xi` (`C~ ln2 / B`)
/// when the fading gain is `gain`, clamped below at `gain_floor`.
#[inline]
pub fn transmission_time(xi: f64, snr: f64, gain_floor: f64, gain: f64) -> f64 {
    if xi == 0.0 {
        return 0.0;
    }
    xi / (snr * gain.max(gain_floor)).ln_1p()
}
