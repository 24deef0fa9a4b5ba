//! Analytic average PAoI for the priority-preprocessing / FCFS-transmission
//! tandem.
//!
//! The chain is:
//! 1. non-preemptive priority M/G/1 waits at the preprocessor (deterministic
//!    per-class service),
//! 2. mean Rayleigh-faded transmission time per class, by quadrature over the
//!    fading gain with a gain floor `h_min`,
//! 3. a maximum-entropy (first moment) approximation of the per-class wait in
//!    the transmission queue,
//! 4. additive assembly `1/lambda + Z^P + W^P + Z^T + W^T`.

mod oracle;
mod quadrature;

pub use oracle::{mc_transmission_mean, mc_transmission_oracle, McEstimate, MIN_ORACLE_DRAWS};
pub use quadrature::{integrate_adaptive, Integral, QuadratureSettings};

use serde::Serialize;

use crate::model::{load_summary, mean_snr, ChannelSpec, LoadSummary, Scenario};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("total processing load is zero")]
    DegenerateLoad,
    #[error("priority class {priority} is unstable (cumulative processing load {cumulative_load:.6} >= 1)")]
    UnstableClass { priority: usize, cumulative_load: f64 },
    #[error("transmission queue is unstable (rho_T = {rho_t:.6} >= 1)")]
    UnstableTransmission { rho_t: f64 },
    #[error("quadrature on [{lo}, {hi}] did not converge after {subdivisions} panels (estimate {estimate}, error {error})")]
    QuadratureNonConvergence {
        lo: f64,
        hi: f64,
        estimate: f64,
        error: f64,
        subdivisions: usize,
    },
    #[error("a positive gain floor is required: the unfloored mean transmission time is infinite")]
    FloorRequired,
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
}

impl AnalysisError {
    pub fn is_instability(&self) -> bool {
        matches!(
            self,
            AnalysisError::UnstableClass { .. } | AnalysisError::UnstableTransmission { .. }
        )
    }
}

fn class_index(priority: usize, classes: usize) -> usize {
    assert!(
        (1..=classes).contains(&priority),
        "priority {priority} outside 1..={classes}"
    );
    priority - 1
}

/// Second-moment sum `sum_k rho_k^2 / lambda_k`, written as `sum_k rho_k Z_k`.
fn second_moment_sum(loads: &LoadSummary) -> f64 {
    loads
        .per_source_rho
        .iter()
        .zip(&loads.per_source_proc_time)
        .map(|(rho, z)| rho * z)
        .sum()
}

/// Mean residual processing time seen by an arrival that finds the server
/// busy: `E[(Z^P)^2] / (2 E[Z^P])`.
pub fn residual_processing_time(loads: &LoadSummary) -> Result<f64, AnalysisError> {
    if !(loads.total_rho_p > 0.0) {
        return Err(AnalysisError::DegenerateLoad);
    }
    Ok(second_moment_sum(loads) / (2.0 * loads.total_rho_p))
}

/// Mean wait in the preprocessing queue for class `priority` (1-based):
///
/// `sum_k rho_k^2/lambda_k / (2 (1 - sigma_j) (1 - sigma_{j-1}))`
///
/// where `sigma_j` is the cumulative load of classes `1..=j`.
pub fn waiting_time_processing(priority: usize, loads: &LoadSummary) -> Result<f64, AnalysisError> {
    let j = class_index(priority, loads.per_source_rho.len());
    let sigma_prev: f64 = loads.per_source_rho[..j].iter().sum();
    let sigma = sigma_prev + loads.per_source_rho[j];
    let unstable = |cumulative_load| AnalysisError::UnstableClass {
        priority,
        cumulative_load,
    };
    if !(1.0 - sigma > 0.0) {
        return Err(unstable(sigma));
    }
    let upper = if j > 0 {
        if !(1.0 - sigma_prev > 0.0) {
            return Err(unstable(sigma_prev));
        }
        1.0 - sigma_prev
    } else {
        1.0
    };
    Ok(second_moment_sum(loads) / (2.0 * (1.0 - sigma) * upper))
}

/// Density of the unfloored transmission time `Z = xi / ln(1 + snr h)`,
/// `h ~ Exp(1)`, for a payload of `processed_bits`.
pub fn transmission_time_density(t: f64, processed_bits: f64, ch: &ChannelSpec) -> f64 {
    let xi = ch.payload_scale(processed_bits);
    let snr = mean_snr(ch);
    if !(t > 0.0) || xi == 0.0 {
        return 0.0;
    }
    let x = xi / t;
    let exponent = x - x.exp_m1() / snr;
    if exponent == f64::NEG_INFINITY || exponent.is_nan() {
        return 0.0;
    }
    xi / (snr * t * t) * exponent.exp()
}

/// Floored mean transmission time for payload scale `xi`:
///
/// `(1 - e^-h_min) xi / ln(1 + snr h_min) + int_{h_min}^{h_up} xi e^-h / ln(1 + snr h) dh`.
///
/// The gain integral is evaluated in `u = ln h`, which turns the `1/h`
/// behaviour near the floor into a smooth integrand.
pub fn expected_tx_time(
    xi: f64,
    snr: f64,
    gain_floor: f64,
    q: &QuadratureSettings,
) -> Result<f64, AnalysisError> {
    if xi == 0.0 {
        return Ok(0.0);
    }
    if !(gain_floor > 0.0) {
        return Err(AnalysisError::FloorRequired);
    }
    if !(q.upper_gain_cutoff > gain_floor) {
        return Err(AnalysisError::InvalidSettings(format!(
            "upper gain cutoff {} must exceed the gain floor {gain_floor}",
            q.upper_gain_cutoff
        )));
    }
    let atom = -(-gain_floor).exp_m1() * xi / (snr * gain_floor).ln_1p();
    let body = integrate_adaptive(
        |u: f64| {
            let h = u.exp();
            xi * h * (-h).exp() / (snr * h).ln_1p()
        },
        gain_floor.ln(),
        q.upper_gain_cutoff.ln(),
        q,
    )?;
    Ok(atom + body.value)
}

/// `E[Z_j^T]` for source `priority` of the scenario.
pub fn expected_transmission_time(
    priority: usize,
    sc: &Scenario,
    q: &QuadratureSettings,
) -> Result<f64, AnalysisError> {
    let j = class_index(priority, sc.num_sources());
    let ch = &sc.channel;
    expected_tx_time(
        ch.payload_scale(sc.sources[j].processed_size),
        mean_snr(ch),
        ch.gain_floor,
        q,
    )
}

/// Arrival-rate weighted mean of the per-class transmission times.
pub fn mixed_transmission_time(sc: &Scenario, per_source_tx: &[f64]) -> f64 {
    let lambdas: Vec<f64> = sc.sources.iter().map(|s| s.lambda).collect();
    weighted_mean(&lambdas, per_source_tx)
}

fn weighted_mean(weights: &[f64], values: &[f64]) -> f64 {
    assert_eq!(weights.len(), values.len());
    let total: f64 = weights.iter().sum();
    weights.iter().zip(values).map(|(w, v)| w * v).sum::<f64>() / total
}

/// Per-class quantities that feed the transmission-queue approximation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueueComponents {
    pub lambda: Vec<f64>,
    pub busy_probability: f64,
    pub wait_proc: Vec<f64>,
    pub tx_time: Vec<f64>,
}

impl QueueComponents {
    pub fn classes(&self) -> usize {
        self.lambda.len()
    }

    /// `E[Z^T]`, arrival-weighted.
    pub fn mixed_tx_time(&self) -> f64 {
        weighted_mean(&self.lambda, &self.tx_time)
    }

    /// Transmitter load `rho^T = sum_j lambda_j E[Z_j^T]`.
    pub fn rho_t(&self) -> f64 {
        self.lambda.iter().zip(&self.tx_time).map(|(l, z)| l * z).sum()
    }

    fn check_finite_waits(&self, upto: usize) -> Result<(), AnalysisError> {
        // Loads are not part of the components; an infinite wait is all we know.
        match self.wait_proc[..=upto].iter().position(|w| !w.is_finite()) {
            Some(i) => Err(AnalysisError::UnstableClass {
                priority: i + 1,
                cumulative_load: f64::INFINITY,
            }),
            None => Ok(()),
        }
    }
}

/// Ratio `mu_j = E[W_j^T] / E[W_1^T]`, estimated by assuming the packets
/// ahead of an arrival in the transmission queue mirror those found in the
/// processing queue. `mu_1 = 1`.
pub fn mu_ratio(priority: usize, c: &QueueComponents) -> Result<f64, AnalysisError> {
    let j = class_index(priority, c.classes());
    c.check_finite_waits(j)?;
    if j == 0 {
        return Ok(1.0);
    }
    let base = c.busy_probability * c.mixed_tx_time();
    let lam = &c.lambda;
    let w = &c.wait_proc;
    let z = &c.tx_time;
    let ahead: f64 = (0..j).map(|i| lam[i] * (w[i] + w[j]) * z[i]).sum();
    let numerator = lam[j] * (base + lam[j] * w[j] * z[j] + ahead);
    let denominator = lam[0] * (base + lam[0] * w[0] * z[0]);
    if !(denominator > 0.0) {
        return Err(AnalysisError::DegenerateLoad);
    }
    Ok(numerator / denominator)
}

/// All ratios `mu_1..mu_J`.
pub fn mu_ratios(c: &QueueComponents) -> Result<Vec<f64>, AnalysisError> {
    (1..=c.classes()).map(|p| mu_ratio(p, c)).collect()
}

/// Maximum-entropy approximation of the mean wait of class `priority` in the
/// transmission queue:
///
/// `mu_j (rho^T)^2 / (sum_i lambda_i mu_i (1 - rho^T))`.
pub fn waiting_time_transmission(priority: usize, c: &QueueComponents) -> Result<f64, AnalysisError> {
    let mus = mu_ratios(c)?;
    transmission_wait_with(priority, c, &mus)
}

fn transmission_wait_with(priority: usize, c: &QueueComponents, mus: &[f64]) -> Result<f64, AnalysisError> {
    let j = class_index(priority, c.classes());
    let rho_t = c.rho_t();
    if !(rho_t < 1.0) {
        return Err(AnalysisError::UnstableTransmission { rho_t });
    }
    let weighted_mu: f64 = c.lambda.iter().zip(mus).map(|(l, m)| l * m).sum();
    Ok(mus[j] * rho_t * rho_t / (weighted_mu * (1.0 - rho_t)))
}

/// Mean number in the transmission subsystem under the geometric
/// maximum-entropy distribution: `rho^T / (1 - rho^T)`.
pub fn transmission_queue_length(rho_t: f64) -> Result<f64, AnalysisError> {
    if !(rho_t < 1.0) {
        return Err(AnalysisError::UnstableTransmission { rho_t });
    }
    Ok(rho_t / (1.0 - rho_t))
}

/// The five additive terms of the average PAoI of one source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PaoiTerms {
    pub inter_arrival: f64,
    pub proc_time: f64,
    pub wait_proc: f64,
    pub tx_time: f64,
    pub wait_tx: f64,
}

pub fn average_paoi(t: &PaoiTerms) -> Result<f64, AnalysisError> {
    let sum = t.inter_arrival + t.proc_time + t.wait_proc + t.tx_time + t.wait_tx;
    if sum.is_finite() {
        Ok(sum)
    } else {
        Err(AnalysisError::InvalidSettings(format!(
            "non-finite PAoI component in {t:?}"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SourceAnalysis {
    pub priority: usize,
    pub lambda: f64,
    pub rho: f64,
    pub proc_time: f64,
    pub wait_proc: f64,
    pub tx_time: f64,
    pub mu: f64,
    pub wait_tx: f64,
    pub paoi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticReport {
    pub label: String,
    pub sources: Vec<SourceAnalysis>,
    pub busy_probability: f64,
    pub residual_proc: f64,
    pub mixed_tx_time: f64,
    pub rho_t: f64,
    pub queue_len_tx: f64,
}

/// Per-source row of a possibly incomplete analysis; `None` marks a
/// quantity that is unbounded or could not be computed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DraftRow {
    pub priority: usize,
    pub lambda: f64,
    pub rho: f64,
    pub proc_time: f64,
    pub wait_proc: Option<f64>,
    pub tx_time: Option<f64>,
    pub mu: Option<f64>,
    pub wait_tx: Option<f64>,
    pub paoi: Option<f64>,
}

/// Everything the analysis could establish, plus the first error hit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyticDraft {
    pub label: String,
    pub rows: Vec<DraftRow>,
    pub busy_probability: f64,
    pub residual_proc: Option<f64>,
    pub mixed_tx_time: Option<f64>,
    pub rho_t: Option<f64>,
    pub queue_len_tx: Option<f64>,
    #[serde(skip)]
    pub first_error: Option<AnalysisError>,
}

/// Runs the whole chain, keeping whatever is finite. Errors are recorded in
/// order: processing classes by priority, then transmission times, then the
/// transmission queue.
pub fn analyze(sc: &Scenario, q: &QuadratureSettings) -> AnalyticDraft {
    let loads = load_summary(sc);
    let mut first_error: Option<AnalysisError> = None;
    let note = |e: AnalysisError, slot: &mut Option<AnalysisError>| {
        if slot.is_none() {
            *slot = Some(e);
        }
    };

    let residual_proc = match residual_processing_time(&loads) {
        Ok(v) => Some(v),
        Err(e) => {
            note(e, &mut first_error);
            None
        }
    };
    let classes = sc.num_sources();
    let wait_proc: Vec<Option<f64>> = (1..=classes)
        .map(|p| match waiting_time_processing(p, &loads) {
            Ok(w) => Some(w),
            Err(e) => {
                note(e, &mut first_error);
                None
            }
        })
        .collect();
    let tx_time: Vec<Option<f64>> = (1..=classes)
        .map(|p| match expected_transmission_time(p, sc, q) {
            Ok(z) => Some(z),
            Err(e) => {
                note(e, &mut first_error);
                None
            }
        })
        .collect();

    let lambda: Vec<f64> = sc.sources.iter().map(|s| s.lambda).collect();
    let all_tx: Option<Vec<f64>> = tx_time.iter().copied().collect();
    let mixed_tx_time = all_tx.as_ref().map(|z| weighted_mean(&lambda, z));
    let rho_t = all_tx
        .as_ref()
        .map(|z| lambda.iter().zip(z).map(|(l, z)| l * z).sum::<f64>());
    let queue_len_tx = rho_t.and_then(|r| transmission_queue_length(r).ok());

    let mut mu = vec![None; classes];
    let mut wait_tx = vec![None; classes];
    let all_wp: Option<Vec<f64>> = wait_proc.iter().copied().collect();
    if let (Some(wp), Some(zt)) = (all_wp, all_tx.clone()) {
        let comps = QueueComponents {
            lambda: lambda.clone(),
            busy_probability: loads.busy_probability,
            wait_proc: wp,
            tx_time: zt,
        };
        match mu_ratios(&comps) {
            Ok(mus) => {
                for (slot, m) in mu.iter_mut().zip(&mus) {
                    *slot = Some(*m);
                }
                for p in 1..=classes {
                    match transmission_wait_with(p, &comps, &mus) {
                        Ok(w) => wait_tx[p - 1] = Some(w),
                        Err(e) => {
                            note(e, &mut first_error);
                            break;
                        }
                    }
                }
            }
            Err(e) => note(e, &mut first_error),
        }
    }

    let rows = (0..classes)
        .map(|i| {
            let s = &sc.sources[i];
            let proc_time = loads.per_source_proc_time[i];
            let paoi = match (wait_proc[i], tx_time[i], wait_tx[i]) {
                (Some(wp), Some(zt), Some(wt)) => average_paoi(&PaoiTerms {
                    inter_arrival: 1.0 / s.lambda,
                    proc_time,
                    wait_proc: wp,
                    tx_time: zt,
                    wait_tx: wt,
                })
                .ok(),
                _ => None,
            };
            DraftRow {
                priority: i + 1,
                lambda: s.lambda,
                rho: loads.per_source_rho[i],
                proc_time,
                wait_proc: wait_proc[i],
                tx_time: tx_time[i],
                mu: mu[i],
                wait_tx: wait_tx[i],
                paoi,
            }
        })
        .collect();

    AnalyticDraft {
        label: sc.label.clone(),
        rows,
        busy_probability: loads.busy_probability,
        residual_proc,
        mixed_tx_time,
        rho_t,
        queue_len_tx,
        first_error,
    }
}

impl AnalyticDraft {
    pub fn into_report(self) -> Result<AnalyticReport, AnalysisError> {
        if let Some(e) = self.first_error {
            return Err(e);
        }
        let sources = self
            .rows
            .into_iter()
            .map(|r| SourceAnalysis {
                priority: r.priority,
                lambda: r.lambda,
                rho: r.rho,
                proc_time: r.proc_time,
                wait_proc: r.wait_proc.expect("complete draft"),
                tx_time: r.tx_time.expect("complete draft"),
                mu: r.mu.expect("complete draft"),
                wait_tx: r.wait_tx.expect("complete draft"),
                paoi: r.paoi.expect("complete draft"),
            })
            .collect();
        Ok(AnalyticReport {
            label: self.label,
            sources,
            busy_probability: self.busy_probability,
            residual_proc: self.residual_proc.expect("complete draft"),
            mixed_tx_time: self.mixed_tx_time.expect("complete draft"),
            rho_t: self.rho_t.expect("complete draft"),
            queue_len_tx: self.queue_len_tx.expect("complete draft"),
        })
    }
}

/// Full analytic report; fails with the first instability or numerical
/// error encountered.
pub fn analytic_report(sc: &Scenario, q: &QuadratureSettings) -> Result<AnalyticReport, AnalysisError> {
    analyze(sc, q).into_report()
}
