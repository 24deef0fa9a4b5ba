//! Scenario data model: sources, channel, validation and the elementary
//! quantities (per-class processing time, loads, mean SNR) shared by the
//! analytic chain and the simulator.
//!
//! Units are fixed throughout the crate: bits, bits/s, seconds, watts, Hz
//! and meters.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Default channel-gain floor `h_min`.
pub const DEFAULT_GAIN_FLOOR: f64 = 1e-6;

fn default_gain_floor() -> f64 {
    DEFAULT_GAIN_FLOOR
}

/// One data source feeding the aggregator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    /// Priority index, 1 is the highest.
    pub priority: u32,
    /// Poisson arrival rate, packets/s.
    #[serde(rename = "lambda_pkt_per_s")]
    pub lambda: f64,
    /// Size before preprocessing, bits.
    #[serde(rename = "raw_size_bits")]
    pub raw_size: f64,
    /// Size after preprocessing, bits.
    #[serde(rename = "processed_size_bits")]
    pub processed_size: f64,
    /// Equivalent processing rate, bits/s.
    #[serde(rename = "proc_rate_bits_per_s")]
    pub proc_rate: f64,
}

impl SourceSpec {
    pub fn new(priority: u32, lambda: f64, raw_size: f64, processed_size: f64, proc_rate: f64) -> Self {
        Self {
            priority,
            lambda,
            raw_size,
            processed_size,
            proc_rate,
        }
    }
}

/// Aggregator-to-destination link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(rename = "tx_power_w")]
    pub tx_power: f64,
    #[serde(rename = "distance_m")]
    pub distance: f64,
    pub pathloss_exp: f64,
    /// Noise power spectral density N0, W/Hz.
    #[serde(rename = "noise_density_w_per_hz")]
    pub noise_density: f64,
    #[serde(rename = "bandwidth_hz")]
    pub bandwidth: f64,
    /// Lower clamp on the Rayleigh fading gain. Must be positive before any
    /// transmission-time expectation is computed.
    #[serde(default = "default_gain_floor")]
    pub gain_floor: f64,
}

impl ChannelSpec {
    /// Noise power sigma^2 = N0 * B.
    pub fn noise_power(&self) -> f64 {
        self.noise_density * self.bandwidth
    }

    /// Time scale of a payload: `bits * ln 2 / B`. A packet of this size
    /// takes `scale / ln(1 + snr)` seconds.
    pub fn payload_scale(&self, bits: f64) -> f64 {
        bits * std::f64::consts::LN_2 / self.bandwidth
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub label: String,
    pub channel: ChannelSpec,
    pub sources: Vec<SourceSpec>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ValidationError {
    pub field: String,
    pub source_index: Option<usize>,
    pub message: String,
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.source_index {
            Some(i) => write!(f, "invalid {} (source {}): {}", self.field, i, self.message),
            None => write!(f, "invalid {}: {}", self.field, self.message),
        }
    }
}

fn invalid(field: &str, source_index: Option<usize>, message: impl Into<String>) -> ValidationError {
    ValidationError {
        field: field.to_string(),
        source_index,
        message: message.into(),
    }
}

fn require_positive(field: &str, idx: Option<usize>, value: f64) -> Result<(), ValidationError> {
    // NaN fails this comparison as well.
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(invalid(field, idx, format!("must be finite and > 0, got {value}")))
    }
}

/// Checks every invariant of the scenario and returns it unchanged.
///
/// Unstable loads are accepted here; only the analysis refuses them.
pub fn validate_scenario(raw: Scenario) -> Result<Scenario, ValidationError> {
    check_channel(&raw.channel)?;
    if raw.sources.is_empty() {
        return Err(invalid("sources", None, "at least one source is required"));
    }
    for (i, s) in raw.sources.iter().enumerate() {
        require_positive("lambda", Some(i), s.lambda)?;
        require_positive("raw_size", Some(i), s.raw_size)?;
        require_positive("proc_rate", Some(i), s.proc_rate)?;
        require_positive("processed_size", Some(i), s.processed_size)?;
        if s.processed_size >= s.raw_size {
            return Err(invalid(
                "processed_size",
                Some(i),
                format!(
                    "must be smaller than raw_size ({} >= {})",
                    s.processed_size, s.raw_size
                ),
            ));
        }
    }
    let mut seen = BTreeSet::new();
    for (i, s) in raw.sources.iter().enumerate() {
        if !seen.insert(s.priority) {
            return Err(invalid(
                "priority",
                Some(i),
                format!("duplicate priority {}", s.priority),
            ));
        }
    }
    for (i, s) in raw.sources.iter().enumerate() {
        if s.priority as usize != i + 1 {
            return Err(invalid(
                "priority",
                Some(i),
                format!(
                    "priorities must be 1..{} in order, found {} at position {}",
                    raw.sources.len(),
                    s.priority,
                    i
                ),
            ));
        }
    }
    Ok(raw)
}

fn check_channel(ch: &ChannelSpec) -> Result<(), ValidationError> {
    require_positive("tx_power", None, ch.tx_power)?;
    require_positive("distance", None, ch.distance)?;
    require_positive("noise_density", None, ch.noise_density)?;
    require_positive("bandwidth", None, ch.bandwidth)?;
    if !(ch.pathloss_exp > 2.0 && ch.pathloss_exp.is_finite()) {
        return Err(invalid(
            "pathloss_exp",
            None,
            format!("must be finite and > 2, got {}", ch.pathloss_exp),
        ));
    }
    if !(ch.gain_floor >= 0.0 && ch.gain_floor.is_finite()) {
        return Err(invalid(
            "gain_floor",
            None,
            format!("must be finite and >= 0, got {}", ch.gain_floor),
        ));
    }
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioFileError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed scenario file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, ScenarioFileError> {
        let raw: Scenario = serde_json::from_str(text)?;
        Ok(validate_scenario(raw)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioFileError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Number of sources J.
    pub fn num_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn total_arrival_rate(&self) -> f64 {
        self.sources.iter().map(|s| s.lambda).sum()
    }

    /// Copy of the scenario with `lambda_j = multipliers[j] * base_rate`.
    pub fn with_base_rate(&self, base_rate: f64, multipliers: &[f64]) -> Scenario {
        let mut out = self.clone();
        for (s, m) in out.sources.iter_mut().zip(multipliers) {
            s.lambda = m * base_rate;
        }
        out
    }
}

/// Deterministic preprocessing time `(C - C~) / tau`, seconds.
pub fn processing_time(s: &SourceSpec) -> f64 {
    (s.raw_size - s.processed_size) / s.proc_rate
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadSummary {
    pub per_source_rho: Vec<f64>,
    pub total_rho_p: f64,
    /// Probability the preprocessor is busy; equals `total_rho_p`.
    pub busy_probability: f64,
    pub per_source_proc_time: Vec<f64>,
}

/// Per-class processing loads. Unstable totals are reported, not rejected.
pub fn load_summary(sc: &Scenario) -> LoadSummary {
    let per_source_proc_time: Vec<f64> = sc.sources.iter().map(processing_time).collect();
    let per_source_rho: Vec<f64> = sc
        .sources
        .iter()
        .zip(&per_source_proc_time)
        .map(|(s, z)| s.lambda * z)
        .collect();
    let total_rho_p: f64 = per_source_rho.iter().sum();
    LoadSummary {
        per_source_rho,
        total_rho_p,
        busy_probability: total_rho_p,
        per_source_proc_time,
    }
}

/// Mean SNR at unit fading gain: `p_A d^-alpha / (N0 B)`.
pub fn mean_snr(ch: &ChannelSpec) -> f64 {
    ch.tx_power * ch.distance.powf(-ch.pathloss_exp) / ch.noise_power()
}
