use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ssm::StepRecord;

/// Per-token, per-layer spectral records, sorted by `(t, layer)` with
/// exactly `n_layers` records per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralTrace {
    pub n_layers: usize,
    pub length: usize,
    pub records: Vec<StepRecord>,
}

impl SpectralTrace {
    pub fn new(n_layers: usize) -> Self {
        Self {
            n_layers,
            length: 0,
            records: Vec::new(),
        }
    }

    pub fn from_records(n_layers: usize, records: Vec<StepRecord>) -> Result<Self> {
        if n_layers == 0 {
            return Err(Error::invalid("trace needs at least one layer"));
        }
        if !records.len().is_multiple_of(n_layers) {
            return Err(Error::invalid(format!(
                "{} records is not a multiple of {n_layers} layers",
                records.len()
            )));
        }
        let mut trace = Self::new(n_layers);
        let mut it = records.into_iter().peekable();
        while it.peek().is_some() {
            trace.push_token(it.by_ref().take(n_layers).collect())?;
        }
        Ok(trace)
    }

    /// Appends one token's records (layers `0..n_layers` in order).
    pub fn push_token(&mut self, records: Vec<StepRecord>) -> Result<()> {
        if records.len() != self.n_layers {
            return Err(Error::DimensionMismatch {
                expected: self.n_layers,
                got: records.len(),
            });
        }
        for (l, r) in records.iter().enumerate() {
            if r.t != self.length || r.layer != l {
                return Err(Error::invalid(format!(
                    "record (t={}, layer={}) out of order, expected (t={}, layer={l})",
                    r.t, r.layer, self.length
                )));
            }
            if !(r.rho_hat >= 0.0) {
                return Err(Error::invalid(format!("negative rho_hat at t={}", r.t)));
            }
        }
        self.records.extend(records);
        self.length += 1;
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn token(&self, t: usize) -> &[StepRecord] {
        &self.records[t * self.n_layers..(t + 1) * self.n_layers]
    }

    /// Minimum `rho_hat` across layers at token `t`.
    pub fn token_min_rho(&self, t: usize) -> f64 {
        self.token(t).iter().map(|r| r.rho_hat).fold(f64::INFINITY, f64::min)
    }

    pub fn min_rho_stream(&self) -> Vec<f64> {
        (0..self.length).map(|t| self.token_min_rho(t)).collect()
    }

    pub fn layer_rho_hat(&self, layer: usize) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.layer == layer)
            .map(|r| r.rho_hat)
            .collect()
    }

    /// Mean exact radius over all records (falls back to `rho_hat`).
    pub fn mean_rho(&self) -> f64 {
        if self.records.is_empty() {
            return 0.0;
        }
        self.records
            .iter()
            .map(|r| r.rho_exact.unwrap_or(r.rho_hat))
            .sum::<f64>()
            / self.records.len() as f64
    }

    /// One [`StepRecord`] per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads [`StepRecord`] lines; blank lines and `_meta` lines are skipped.
    pub fn read_jsonl<R: BufRead>(input: R, n_layers: usize) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with("{\"_meta\"") {
                continue;
            }
            let rec: StepRecord = serde_json::from_str(line).map_err(|e| Error::Schema {
                path: format!("line {}", i + 1),
                message: e.to_string(),
            })?;
            records.push(rec);
        }
        Self::from_records(n_layers, records)
    }
}

#[cfg(test)]
pub(crate) fn synthetic_record(t: usize, layer: usize, rho: f64) -> StepRecord {
    StepRecord {
        t,
        layer,
        delta: 1.0,
        rho_hat: rho,
        rho_exact: None,
        spectral_gap: None,
        h_norm_before: 0.0,
        h_norm_after: 0.0,
        probe_flops: 0,
        abar: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_order() {
        let mut tr = SpectralTrace::new(2);
        let err = tr.push_token(vec![synthetic_record(0, 1, 0.5), synthetic_record(0, 0, 0.5)]);
        assert!(err.is_err());
        assert!(tr.push_token(vec![synthetic_record(0, 0, 0.5)]).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let recs = (0..3)
            .flat_map(|t| (0..2).map(move |l| synthetic_record(t, l, 0.5 + 0.1 * l as f64)))
            .collect();
        let tr = SpectralTrace::from_records(2, recs).unwrap();
        let mut buf = Vec::new();
        tr.write_jsonl(&mut buf).unwrap();
        let back = SpectralTrace::read_jsonl(buf.as_slice(), 2).unwrap();
        assert_eq!(tr, back);
        assert_eq!(back.token_min_rho(1), 0.5);
    }
}
