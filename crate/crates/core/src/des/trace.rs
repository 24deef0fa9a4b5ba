use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Lifecycle timestamps of one delivered packet, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketRecord {
    /// Source priority `j`.
    pub source: usize,
    /// Per-source index, starting at 1.
    pub seq: u64,
    pub t_arrival: f64,
    pub t_proc_start: f64,
    pub t_proc_end: f64,
    pub t_tx_start: f64,
    pub t_depart: f64,
}

impl PacketRecord {
    pub fn is_time_ordered(&self) -> bool {
        self.t_arrival <= self.t_proc_start
            && self.t_proc_start <= self.t_proc_end
            && self.t_proc_end <= self.t_tx_start
            && self.t_tx_start <= self.t_depart
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceError {
    #[error("malformed trace at row {row}: {message}")]
    MalformedTrace { row: usize, message: String },
}

/// Peak-age samples per source: for consecutive deliveries `n - 1, n` of a
/// source the peak is `(t_n - t_{n-1}) + (t^_n - t_n) = t^_n - t_{n-1}`.
/// The first delivery of each source yields no sample.
///
/// Rows may interleave sources, but within a source they must appear with
/// consecutive `seq` and non-decreasing arrival times.
pub fn paoi_from_trace(trace: &[PacketRecord]) -> Result<BTreeMap<usize, Vec<f64>>, TraceError> {
    let mut last: BTreeMap<usize, &PacketRecord> = BTreeMap::new();
    let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (row, rec) in trace.iter().enumerate() {
        let malformed = |message: String| TraceError::MalformedTrace { row, message };
        if !rec.is_time_ordered() {
            return Err(malformed(format!(
                "timestamps out of order for source {} seq {}",
                rec.source, rec.seq
            )));
        }
        let samples = out.entry(rec.source).or_default();
        if let Some(prev) = last.get(&rec.source) {
            if rec.seq != prev.seq + 1 {
                return Err(malformed(format!(
                    "source {} seq {} follows seq {}",
                    rec.source, rec.seq, prev.seq
                )));
            }
            if rec.t_arrival < prev.t_arrival {
                return Err(malformed(format!(
                    "source {} arrival times decrease at seq {}",
                    rec.source, rec.seq
                )));
            }
            samples.push((rec.t_arrival - prev.t_arrival) + (rec.t_depart - rec.t_arrival));
        }
        last.insert(rec.source, rec);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(source: usize, seq: u64, arrival: f64, depart: f64) -> PacketRecord {
        PacketRecord {
            source,
            seq,
            t_arrival: arrival,
            t_proc_start: arrival,
            t_proc_end: arrival,
            t_tx_start: arrival,
            t_depart: depart,
        }
    }

    #[test]
    fn two_packets_one_peak() {
        let samples = paoi_from_trace(&[rec(1, 1, 1.0, 2.0), rec(1, 2, 3.0, 5.0)]).unwrap();
        assert_eq!(samples[&1], vec![4.0]);
    }

    #[test]
    fn single_packet_no_sample() {
        let samples = paoi_from_trace(&[rec(2, 1, 1.0, 2.0)]).unwrap();
        assert!(samples[&2].is_empty());
    }

    #[test]
    fn interleaved_sources() {
        let trace = [
            rec(1, 1, 0.0, 1.0),
            rec(2, 1, 0.5, 1.5),
            rec(1, 2, 2.0, 3.0),
            rec(2, 2, 2.5, 4.0),
        ];
        let s = paoi_from_trace(&trace).unwrap();
        assert_eq!(s[&1], vec![3.0]);
        assert_eq!(s[&2], vec![3.5]);
    }

    #[test]
    fn reordering_is_malformed() {
        let trace = [rec(1, 2, 3.0, 5.0), rec(1, 1, 1.0, 6.0)];
        assert!(matches!(
            paoi_from_trace(&trace),
            Err(TraceError::MalformedTrace { row: 1, .. })
        ));
    }

    #[test]
    fn bad_timestamps_are_malformed() {
        let mut r = rec(1, 1, 1.0, 2.0);
        r.t_proc_end = 0.5;
        assert!(paoi_from_trace(&[r]).is_err());
    }
}
