//! Flat CSV renderings of reports. Numbers use 9 significant digits.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use crate::analysis::AnalyticDraft;
use crate::des::{PacketRecord, SimReport};

use super::{ComparisonRow, SweepTable};

pub const UNSTABLE: &str = "UNSTABLE";
pub const NOT_AVAILABLE: &str = "NA";

/// `printf("%.9g")`-style formatting.
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= DIGITS {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>, marker: &str) -> String {
    x.map(fmt_sig).unwrap_or_else(|| marker.to_string())
}

fn kv(key: &str, x: Option<f64>, marker: &str) -> String {
    format!("{key}={}", opt(x, marker))
}

/// One row per source, then a `globals` row of `key=value` cells padded to
/// the header width.
pub fn analytic_csv(d: &AnalyticDraft) -> String {
    let marker = match &d.first_error {
        Some(e) if e.is_instability() => UNSTABLE,
        _ => NOT_AVAILABLE,
    };
    let mut out = String::from("priority,lambda,rho,E_ZP,E_WP,E_ZT,mu,E_WT,paoi\n");
    for r in &d.rows {
        let cells = [
            r.priority.to_string(),
            fmt_sig(r.lambda),
            fmt_sig(r.rho),
            fmt_sig(r.proc_time),
            opt(r.wait_proc, marker),
            opt(r.tx_time, marker),
            opt(r.mu, marker),
            opt(r.wait_tx, marker),
            opt(r.paoi, marker),
        ];
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    let globals = [
        "globals".to_string(),
        kv("busy_probability", Some(d.busy_probability), marker),
        kv("residual_proc", d.residual_proc, marker),
        kv("mixed_tx_time", d.mixed_tx_time, marker),
        kv("rho_t", d.rho_t, marker),
        kv("queue_len_tx", d.queue_len_tx, UNSTABLE),
        String::new(),
        String::new(),
        String::new(),
    ];
    writeln!(out, "{}", globals.join(",")).unwrap();
    out
}

pub fn sim_csv(r: &SimReport) -> String {
    let mut out =
        String::from("priority,delivered,paoi_samples,paoi_mean,paoi_ci95,wait_proc,wait_tx,tx_time\n");
    for s in &r.sources {
        let cells = [
            s.priority.to_string(),
            s.delivered.to_string(),
            s.paoi_samples.to_string(),
            opt(s.paoi_mean, NOT_AVAILABLE),
            opt(s.paoi_ci95, NOT_AVAILABLE),
            opt(s.wait_proc, NOT_AVAILABLE),
            opt(s.wait_tx, NOT_AVAILABLE),
            opt(s.tx_time, NOT_AVAILABLE),
        ];
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    let globals = [
        "globals".to_string(),
        kv("horizon", Some(r.horizon), NOT_AVAILABLE),
        kv("processor_busy_fraction", Some(r.processor_busy_fraction), NOT_AVAILABLE),
        kv("transmitter_utilization", Some(r.transmitter_utilization), NOT_AVAILABLE),
        kv("tx_mean_in_system", Some(r.tx_mean_in_system), NOT_AVAILABLE),
        kv("tx_mean_sojourn", Some(r.tx_mean_sojourn), NOT_AVAILABLE),
        kv("throughput", Some(r.throughput), NOT_AVAILABLE),
        format!("stability_warning={}", r.stability_warning),
    ];
    writeln!(out, "{}", globals.join(",")).unwrap();
    out
}

/// Departure-ordered packet lifecycle rows.
pub fn trace_csv(trace: &[PacketRecord]) -> String {
    let mut out = String::with_capacity(64 * (trace.len() + 1));
    out.push_str("source,seq,t_arrival,t_proc_start,t_proc_end,t_tx_start,t_depart\n");
    for p in trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.source,
            p.seq,
            fmt_sig(p.t_arrival),
            fmt_sig(p.t_proc_start),
            fmt_sig(p.t_proc_end),
            fmt_sig(p.t_tx_start),
            fmt_sig(p.t_depart)
        )
        .unwrap();
    }
    out
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from("priority,analytic_paoi,simulated_paoi,ci95,rel_error\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.priority,
            fmt_sig(r.analytic),
            opt(r.simulated, NOT_AVAILABLE),
            opt(r.ci95, NOT_AVAILABLE),
            opt(r.rel_error, NOT_AVAILABLE)
        )
        .unwrap();
    }
    out
}

/// Grid rows sorted by `lambda_b`, then `argmin_analytic` /
/// `argmin_simulated` rows giving the best `lambda_b` per source.
pub fn sweep_csv(t: &SweepTable) -> String {
    let j = t.sources;
    let mut header = vec!["lambda_b".to_string()];
    for p in 1..=j {
        header.extend([
            format!("analytic_{p}"),
            format!("simulated_{p}"),
            format!("ci95_{p}"),
            format!("rel_error_{p}"),
        ]);
    }
    header.push("sim_stability_warning".into());
    let width = header.len();
    let mut out = header.join(",") + "\n";
    for row in &t.rows {
        let mut cells = vec![fmt_sig(row.lambda_b)];
        for i in 0..j {
            cells.push(opt(row.analytic[i], UNSTABLE));
            cells.push(row.simulated[i].map(fmt_sig).unwrap_or_default());
            cells.push(row.ci95[i].map(fmt_sig).unwrap_or_default());
            cells.push(row.rel_error[i].map(fmt_sig).unwrap_or_default());
        }
        cells.push(row.sim_stability_warning.map(|w| w.to_string()).unwrap_or_default());
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    for (name, best) in [
        ("argmin_analytic", t.argmin_analytic()),
        ("argmin_simulated", t.argmin_simulated()),
    ] {
        let mut cells = vec![name.to_string()];
        cells.extend(best.iter().map(|b| b.map(|i| fmt_sig(t.rows[i].lambda_b)).unwrap_or_default()));
        cells.resize(width, String::new());
        writeln!(out, "{}", cells.join(",")).unwrap();
    }
    out
}

/// Writes `contents` to a temporary file next to `path` and renames it into
/// place, so a failed run never leaves a partial file behind.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1");
        assert_eq!(fmt_sig(12.82), "12.82");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(2.0 / 3.0 * 1e4), "6666.66667");
        assert_eq!(fmt_sig(123456789.4), "123456789");
        assert_eq!(fmt_sig(1234567890.0), "1.23456789e+09");
        assert_eq!(fmt_sig(3.125e6), "3125000");
        assert_eq!(fmt_sig(1e-6), "1e-06");
        assert_eq!(fmt_sig(0.0001), "0.0001");
        assert_eq!(fmt_sig(-0.137291954), "-0.137291954");
        assert_eq!(fmt_sig(f64::NAN), "NaN");
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, "a\n").unwrap();
        write_atomic(&p, "b\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "b\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/out.csv"), "x").is_err());
    }
}
