#![allow(dead_code)]

use aoi_tandem::{ChannelSpec, Scenario, SourceSpec};

/// Link with `E[Z^T]` of about 0.375 s for a 20 Mbit payload.
pub fn calibrated_channel() -> ChannelSpec {
    ChannelSpec {
        tx_power: 0.1,
        distance: 200.0,
        pathloss_exp: 3.0,
        noise_density: 3.98e-21,
        bandwidth: 2.8e6,
        gain_floor: 1e-6,
    }
}

/// A fast link, so the transmission stage hardly matters.
pub fn quiet_channel() -> ChannelSpec {
    ChannelSpec {
        bandwidth: 1e9,
        ..calibrated_channel()
    }
}

pub fn scenario(channel: ChannelSpec, sources: Vec<SourceSpec>) -> Scenario {
    aoi_tandem::model::validate_scenario(Scenario {
        label: "test".into(),
        channel,
        sources,
    })
    .expect("valid scenario")
}

/// Source with processing time `z` and a tiny processed payload.
pub fn timed_source(priority: u32, lambda: f64, z: f64) -> SourceSpec {
    SourceSpec::new(priority, lambda, z * 1e6 + 1.0, 1.0, 1e6)
}

/// The three-source sweep scenario at processing rate `tau` bit/s.
pub fn three_sources(tau: f64) -> Scenario {
    scenario(
        calibrated_channel(),
        vec![
            SourceSpec::new(1, 0.01, 120e6, 20e6, tau),
            SourceSpec::new(2, 0.02, 35e6, 20e6, tau),
            SourceSpec::new(3, 0.03, 30e6, 20e6, tau),
        ],
    )
}

/// The priority closed-form scenario: lambda = (0.05, 0.10, 0.15),
/// Z^P = (2.0, 0.3, 0.2).
pub fn priority_scenario(channel: ChannelSpec) -> Scenario {
    scenario(
        channel,
        vec![
            timed_source(1, 0.05, 2.0),
            timed_source(2, 0.10, 0.3),
            timed_source(3, 0.15, 0.2),
        ],
    )
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
