//! Experiment driver behind the `aoi-tandem` binary: analytic vs simulated
//! comparison, basic-arrival-rate sweeps and CSV output.
//!
//! Exit codes: 0 success, 1 input or I/O error, 2 instability.

pub mod csv;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, analytic_report, AnalysisError, QuadratureSettings};
use crate::des::{self, SimConfig, SimConfigError, TraceRetention};
use crate::model::{validate_scenario, Scenario, ScenarioFileError, ValidationError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNSTABLE: i32 = 2;

/// Caps the number of sweep worker threads.
pub const THREADS_ENV: &str = "AOI_TANDEM_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Scenario(#[from] ScenarioFileError),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
    #[error(transparent)]
    Config(#[from] SimConfigError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Analysis(e) if e.is_instability() => EXIT_UNSTABLE,
            _ => EXIT_INPUT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub priority: usize,
    pub analytic: f64,
    pub simulated: Option<f64>,
    pub ci95: Option<f64>,
    pub rel_error: Option<f64>,
}

/// `|analytic - simulated| / simulated`.
pub fn relative_error(analytic: f64, simulated: f64) -> f64 {
    (analytic - simulated).abs() / simulated
}

/// Analytic PAoI against a simulation of the same scenario. Fails on any
/// analytic instability.
pub fn compare(
    sc: &Scenario,
    cfg: &SimConfig,
    q: &QuadratureSettings,
) -> Result<Vec<ComparisonRow>, HarnessError> {
    let report = analytic_report(sc, q)?;
    let sim = des::run(sc, cfg)?.report;
    Ok(report
        .sources
        .iter()
        .zip(&sim.sources)
        .map(|(a, s)| ComparisonRow {
            priority: a.priority,
            analytic: a.paoi,
            simulated: s.paoi_mean,
            ci95: s.paoi_ci95,
            rel_error: s.paoi_mean.map(|m| relative_error(a.paoi, m)),
        })
        .collect())
}

/// Grid over the basic arrival rate; source `j` gets `multipliers[j] * lambda_b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub multipliers: Vec<f64>,
}

impl SweepSpec {
    /// Multipliers `m_j = j`.
    pub fn linear(from: f64, to: f64, steps: usize, sources: usize) -> Self {
        Self {
            from,
            to,
            steps,
            multipliers: (1..=sources).map(|j| j as f64).collect(),
        }
    }

    pub fn validate(&self, sources: usize) -> Result<(), HarnessError> {
        if !(self.from < self.to) || !(self.from > 0.0) || !self.to.is_finite() {
            return Err(HarnessError::Sweep(format!(
                "need 0 < from < to, got from={} to={}",
                self.from, self.to
            )));
        }
        if self.steps < 2 {
            return Err(HarnessError::Sweep("steps must be >= 2".into()));
        }
        if self.multipliers.len() != sources {
            return Err(HarnessError::Sweep(format!(
                "{} multipliers given for {sources} sources",
                self.multipliers.len()
            )));
        }
        if self.multipliers.iter().any(|m| !(*m > 0.0 && m.is_finite())) {
            return Err(HarnessError::Sweep("multipliers must be > 0".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let n = self.steps;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.to
                } else {
                    self.from + (self.to - self.from) * i as f64 / (n - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda_b: f64,
    /// Analytic average PAoI per source; `None` where unstable.
    pub analytic: Vec<Option<f64>>,
    pub simulated: Vec<Option<f64>>,
    pub ci95: Vec<Option<f64>>,
    pub rel_error: Vec<Option<f64>>,
    pub sim_stability_warning: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub sources: usize,
    pub rows: Vec<SweepRow>,
}

/// Index of the smallest defined value.
pub fn argmin(values: &[Option<f64>]) -> Option<usize> {
    values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
}

/// True when the minimum over the defined values has a defined value on
/// both sides, i.e. the curve falls and then rises.
pub fn has_interior_minimum(values: &[Option<f64>]) -> bool {
    let defined: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    match argmin(values) {
        Some(i) => defined.first() != Some(&i) && defined.last() != Some(&i),
        None => false,
    }
}

impl SweepTable {
    pub fn analytic_curve(&self, source: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.analytic[source]).collect()
    }

    pub fn simulated_curve(&self, source: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r.simulated[source]).collect()
    }

    /// Per-source grid index of the smallest analytic PAoI.
    pub fn argmin_analytic(&self) -> Vec<Option<usize>> {
        (0..self.sources).map(|j| argmin(&self.analytic_curve(j))).collect()
    }

    pub fn argmin_simulated(&self) -> Vec<Option<usize>> {
        (0..self.sources).map(|j| argmin(&self.simulated_curve(j))).collect()
    }

    /// Largest grid index at which every analytic value is finite.
    pub fn largest_stable_index(&self) -> Option<usize> {
        self.rows
            .iter()
            .rposition(|r| r.analytic.iter().all(Option::is_some))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub seed: u64,
    pub n_packets: u64,
    pub warmup_fraction: f64,
    pub analytic_only: bool,
    pub quadrature: QuadratureSettings,
    /// Worker threads; `None` reads `AOI_TANDEM_THREADS` or uses all cores.
    pub threads: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            n_packets: 1_000_000,
            warmup_fraction: 0.05,
            analytic_only: false,
            quadrature: QuadratureSettings::default(),
            threads: None,
        }
    }
}

fn thread_cap(explicit: Option<usize>) -> usize {
    explicit
        .or_else(|| std::env::var(THREADS_ENV).ok()?.trim().parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or(0)
}

fn sweep_point(
    base: &Scenario,
    spec: &SweepSpec,
    opts: &SweepOptions,
    index: usize,
    lambda_b: f64,
) -> Result<SweepRow, HarnessError> {
    let sc = validate_scenario(base.with_base_rate(lambda_b, &spec.multipliers))?;
    let draft = analyze(&sc, &opts.quadrature);
    if let Some(e) = &draft.first_error {
        if !e.is_instability() {
            return Err(e.clone().into());
        }
    }
    let analytic: Vec<Option<f64>> = draft.rows.iter().map(|r| r.paoi).collect();
    let j = sc.num_sources();
    let mut row = SweepRow {
        lambda_b,
        analytic,
        simulated: vec![None; j],
        ci95: vec![None; j],
        rel_error: vec![None; j],
        sim_stability_warning: None,
    };
    if !opts.analytic_only {
        let cfg = SimConfig {
            seed: opts.seed ^ index as u64,
            n_packets: opts.n_packets,
            warmup_fraction: opts.warmup_fraction,
            trace_retention: TraceRetention::None,
        };
        let sim = des::run(&sc, &cfg)?.report;
        for (i, s) in sim.sources.iter().enumerate() {
            row.simulated[i] = s.paoi_mean;
            row.ci95[i] = s.paoi_ci95;
            row.rel_error[i] = match (row.analytic[i], s.paoi_mean) {
                (Some(a), Some(m)) => Some(relative_error(a, m)),
                _ => None,
            };
        }
        row.sim_stability_warning = Some(sim.stability_warning);
    }
    Ok(row)
}

/// Evaluates every grid point (concurrently, each with seed
/// `opts.seed ^ index`) and returns rows sorted by `lambda_b`. Unstable
/// points are recorded, not fatal.
pub fn sweep(base: &Scenario, spec: &SweepSpec, opts: &SweepOptions) -> Result<SweepTable, HarnessError> {
    spec.validate(base.num_sources())?;
    let grid = spec.grid();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_cap(opts.threads))
        .build()
        .map_err(|e| HarnessError::Sweep(e.to_string()))?;
    let mut rows = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &lb)| sweep_point(base, spec, opts, i, lb))
            .collect::<Result<Vec<_>, _>>()
    })?;
    rows.sort_by(|a, b| a.lambda_b.total_cmp(&b.lambda_b));
    Ok(SweepTable {
        sources: base.num_sources(),
        rows,
    })
}

fn report_error(e: &HarnessError) -> i32 {
    eprintln!("error: {e}");
    e.exit_code()
}

/// `analyze`: writes the analytic CSV. Unstable scenarios still get a file,
/// with `UNSTABLE` markers, and exit 2.
pub fn cmd_analyze(scenario_path: &Path, out_path: &Path) -> i32 {
    let run = || -> Result<i32, HarnessError> {
        let sc = Scenario::load(scenario_path)?;
        let draft = analyze(&sc, &QuadratureSettings::default());
        match &draft.first_error {
            Some(e) if !e.is_instability() => return Err(e.clone().into()),
            _ => {}
        }
        csv::write_atomic(out_path, &csv::analytic_csv(&draft))?;
        Ok(match &draft.first_error {
            Some(e) => {
                eprintln!("unstable: {e}");
                EXIT_UNSTABLE
            }
            None => EXIT_OK,
        })
    };
    run().unwrap_or_else(|e| report_error(&e))
}

pub fn cmd_simulate(
    scenario_path: &Path,
    seed: u64,
    n_packets: u64,
    warmup: f64,
    out_path: &Path,
    trace_path: Option<&Path>,
) -> i32 {
    let run = || -> Result<i32, HarnessError> {
        let sc = Scenario::load(scenario_path)?;
        let cfg = SimConfig {
            seed,
            n_packets,
            warmup_fraction: warmup,
            trace_retention: if trace_path.is_some() {
                TraceRetention::Full
            } else {
                TraceRetention::None
            },
        };
        let out = des::run(&sc, &cfg)?;
        if out.report.stability_warning {
            eprintln!("warning: run looks unstable (utilization or backlog growth)");
        }
        if let (Some(path), Some(trace)) = (trace_path, out.trace.as_ref()) {
            csv::write_atomic(path, &csv::trace_csv(trace))?;
        }
        csv::write_atomic(out_path, &csv::sim_csv(&out.report))?;
        Ok(EXIT_OK)
    };
    run().unwrap_or_else(|e| report_error(&e))
}

pub fn cmd_compare(scenario_path: &Path, seed: u64, n_packets: u64, out_path: &Path) -> i32 {
    let run = || -> Result<i32, HarnessError> {
        let sc = Scenario::load(scenario_path)?;
        let cfg = SimConfig {
            seed,
            n_packets,
            ..SimConfig::default()
        };
        let rows = compare(&sc, &cfg, &QuadratureSettings::default())?;
        csv::write_atomic(out_path, &csv::comparison_csv(&rows))?;
        Ok(EXIT_OK)
    };
    run().unwrap_or_else(|e| report_error(&e))
}

pub fn cmd_sweep(scenario_path: &Path, spec: &SweepSpec, opts: &SweepOptions, out_path: &Path) -> i32 {
    let run = || -> Result<i32, HarnessError> {
        let sc = Scenario::load(scenario_path)?;
        let table = sweep(&sc, spec, opts)?;
        csv::write_atomic(out_path, &csv::sweep_csv(&table))?;
        let show = |best: Vec<Option<usize>>| -> String {
            best.iter()
                .map(|b| b.map(|i| csv::fmt_sig(table.rows[i].lambda_b)).unwrap_or_else(|| "-".into()))
                .collect::<Vec<_>>()
                .join(" ")
        };
        println!("argmin analytic:  {}", show(table.argmin_analytic()));
        if !opts.analytic_only {
            println!("argmin simulated: {}", show(table.argmin_simulated()));
        }
        Ok(EXIT_OK)
    };
    run().unwrap_or_else(|e| report_error(&e))
}
