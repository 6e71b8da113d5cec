use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::DetectionMetrics;
use super::monitor::{monitor_trace, GuardConfig};
use crate::error::{Error, Result};
use crate::spectral::SpectralTrace;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    Benign,
    Clamp,
    Pgd,
    Synthetic,
}

/// One labeled stream; `label` is `true` for adversarial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledTrace {
    pub stream_id: usize,
    pub label: bool,
    pub source: TraceSource,
    /// First token of the injected collapse, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injected_at: Option<usize>,
    pub trace: SpectralTrace,
}

pub fn write_labeled_jsonl<W: Write>(traces: &[LabeledTrace], mut out: W) -> Result<()> {
    for t in traces {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads one [`LabeledTrace`] per line, re-checking each trace's ordering.
pub fn read_labeled_jsonl<R: BufRead>(input: R) -> Result<Vec<LabeledTrace>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with("{\"_meta\"") {
            continue;
        }
        let schema = |message: String| Error::Schema {
            path: format!("line {}", i + 1),
            message,
        };
        let lt: LabeledTrace = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        let checked = SpectralTrace::from_records(lt.trace.n_layers, lt.trace.records.clone())
            .map_err(|e| schema(format!("trace: {e}")))?;
        if checked.length != lt.trace.length {
            return Err(schema(format!(
                "trace.length is {} but records cover {} tokens",
                lt.trace.length, checked.length
            )));
        }
        out.push(lt);
    }
    Ok(out)
}

/// Stratified split: `train_fraction` of each class to train, the rest to
/// test; both index lists are sorted.
pub fn stratified_split(labels: &[bool], train_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in [false, true] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        idx.shuffle(&mut rng);
        let k = (idx.len() as f64 * train_fraction).round() as usize;
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub rho_min: f64,
    pub window: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
}

/// Threshold-only monitor as a detector (block means adversarial), one row
/// per `rho_min`.
pub fn ablate_threshold(traces: &[LabeledTrace], rho_grid: &[f64], config: &GuardConfig) -> Result<Vec<AblationRow>> {
    if traces.is_empty() {
        return Err(Error::Empty("traces"));
    }
    rho_grid
        .iter()
        .map(|&rho_min| {
            let cfg = GuardConfig {
                rho_min,
                ..config.clone()
            };
            cfg.validate()?;
            let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
            for lt in traces {
                match (lt.label, monitor_trace(&lt.trace, &cfg).is_block()) {
                    (true, true) => tp += 1,
                    (true, false) => fn_ += 1,
                    (false, true) => fp += 1,
                    (false, false) => tn += 1,
                }
            }
            let m = DetectionMetrics::from_counts(tn, fp, fn_, tp);
            Ok(AblationRow {
                rho_min,
                window: cfg.window,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
                fpr: m.fpr,
            })
        })
        .collect()
}
