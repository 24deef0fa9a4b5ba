//! Peak age of information (PAoI) for a multi-source pipeline in which
//! packets are preprocessed by a non-preemptive priority server and then
//! sent FCFS over a Rayleigh-faded link.
//!
//! - [`model`]: scenario description and elementary loads.
//! - [`analysis`]: closed forms, quadrature and the maximum-entropy
//!   transmission-queue approximation.
//! - [`des`]: discrete-event simulation of the same tandem.
//! - [`harness`]: CSV output, comparison and arrival-rate sweeps behind the CLI.

pub mod analysis;
pub mod des;
pub mod harness;
pub mod model;
pub mod sampling;

pub use analysis::{analytic_report, AnalysisError, AnalyticReport, QuadratureSettings};
pub use des::{run, PacketRecord, SimConfig, SimReport, TraceRetention};
pub use model::{ChannelSpec, Scenario, SourceSpec, ValidationError};
