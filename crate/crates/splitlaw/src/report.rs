//! Structured experiment output: one JSON object per line. Every record
//! carries the seed, stream id, sample count, and tolerance it was produced
//! under, so any line can be reproduced in isolation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::functionals::EstimateWithError;
use crate::stats::{FamilyOutcome, TestReport};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Record {
    /// What kind of quantity this is, e.g. "laplace", "factorization-test".
    pub kind: String,
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reject: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    /// Tolerance or rejection threshold the value was judged against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stream_id: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Record {
    /// A deterministic (non-sampled) quantity judged against a tolerance.
    pub fn exact(kind: &str, name: &str, value: f64, tolerance: f64) -> Self {
        Record {
            kind: kind.to_string(),
            name: name.to_string(),
            value,
            stderr: None,
            z_score: None,
            reject: None,
            n_samples: None,
            tolerance: Some(tolerance),
            seed: None,
            stream_id: None,
            note: None,
        }
    }

    pub fn from_estimate(
        kind: &str,
        name: &str,
        est: &EstimateWithError,
        seed: u64,
        stream_id: u64,
    ) -> Self {
        Record {
            kind: kind.to_string(),
            name: name.to_string(),
            value: est.value,
            stderr: Some(est.stderr),
            z_score: None,
            reject: None,
            n_samples: Some(est.n_samples),
            tolerance: None,
            seed: Some(seed),
            stream_id: Some(stream_id),
            note: None,
        }
    }

    pub fn from_test(kind: &str, report: &TestReport) -> Self {
        Record {
            kind: kind.to_string(),
            name: report.name.clone(),
            value: report.statistic,
            stderr: Some(report.stderr),
            z_score: Some(report.z_score),
            reject: Some(report.reject),
            n_samples: Some(report.n_samples),
            tolerance: Some(report.threshold),
            seed: Some(report.seed),
            stream_id: Some(report.stream_id),
            note: None,
        }
    }

    /// All per-test records of a family outcome, followed by one family
    /// summary record carrying the converse caveat.
    pub fn from_family(kind: &str, outcome: &FamilyOutcome) -> Vec<Self> {
        let mut records: Vec<Record> =
            outcome.reports.iter().map(|r| Record::from_test(kind, r)).collect();
        let (seed, stream_id) = outcome
            .reports
            .first()
            .map(|r| (Some(r.seed), Some(r.stream_id)))
            .unwrap_or((None, None));
        let max_z = outcome
            .reports
            .iter()
            .map(|r| r.z_score.abs())
            .fold(0.0, f64::max);
        records.push(Record {
            kind: format!("{kind}-family"),
            name: "family".to_string(),
            value: max_z,
            stderr: None,
            z_score: None,
            reject: Some(outcome.family_reject),
            n_samples: outcome.reports.first().map(|r| r.n_samples),
            tolerance: Some(outcome.family_threshold),
            seed,
            stream_id,
            note: Some(outcome.caveat.to_string()),
        });
        records
    }
}

/// Serialize records as JSON lines. Output is byte-deterministic for equal
/// inputs: field order is fixed by the struct and floats round-trip.
pub fn write_records<W: Write>(w: &mut W, records: &[Record]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *w, r).map_err(std::io::Error::other)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_records<R: std::io::BufRead>(r: R) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(std::io::Error::other)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let records = vec![
            Record::exact("tv", "splitting-vs-product", 3.2e-13, 1e-12),
            Record {
                kind: "laplace".into(),
                name: "f1".into(),
                value: 0.5,
                stderr: Some(0.001),
                z_score: None,
                reject: None,
                n_samples: Some(1000),
                tolerance: None,
                seed: Some(42),
                stream_id: Some(3),
                note: None,
            },
        ];
        let mut buf = Vec::new();
        write_records(&mut buf, &records).unwrap();
        let parsed = read_records(buf.as_slice()).unwrap();
        assert_eq!(parsed, records);
    }

    #[test]
    fn deterministic_bytes() {
        let r = vec![Record::exact("tv", "x", 0.125, 1e-10)];
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_records(&mut a, &r).unwrap();
        write_records(&mut b, &r).unwrap();
        assert_eq!(a, b);
    }
}
