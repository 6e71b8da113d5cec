use serde::{Deserialize, Serialize};

use super::trace::SpectralTrace;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureBlock {
    MeanRho,
    StdRho,
    MeanGap,
}

/// Describes the flat layout `[means | stds | gaps?]`, each block `n_layers` long.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub n_layers: usize,
    pub blocks: Vec<FeatureBlock>,
}

impl FeatureLayout {
    pub fn new(n_layers: usize, include_gaps: bool) -> Self {
        let mut blocks = vec![FeatureBlock::MeanRho, FeatureBlock::StdRho];
        if include_gaps {
            blocks.push(FeatureBlock::MeanGap);
        }
        Self { n_layers, blocks }
    }

    pub fn dim(&self) -> usize {
        self.n_layers * self.blocks.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub layout: FeatureLayout,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn means(&self) -> &[f64] {
        &self.values[..self.layout.n_layers]
    }

    pub fn stds(&self) -> &[f64] {
        &self.values[self.layout.n_layers..2 * self.layout.n_layers]
    }

    pub fn gaps(&self) -> Option<&[f64]> {
        let n = self.layout.n_layers;
        (self.layout.blocks.len() == 3).then(|| &self.values[2 * n..3 * n])
    }

    pub fn distance(&self, other: &FeatureVector) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-layer sample mean and standard deviation of `rho_hat` over tokens,
/// optionally followed by per-layer mean spectral gaps.
pub fn extract_features(trace: &SpectralTrace, include_gaps: bool) -> Result<FeatureVector> {
    if trace.is_empty() {
        return Err(Error::Empty("trace"));
    }
    let n = trace.n_layers;
    let layout = FeatureLayout::new(n, include_gaps);
    let mut means = Vec::with_capacity(n);
    let mut stds = Vec::with_capacity(n);
    let mut gaps = Vec::new();
    for l in 0..n {
        let (m, s) = mean_std(&trace.layer_rho_hat(l));
        means.push(m);
        stds.push(s);
        if include_gaps {
            let layer_gaps: Option<Vec<f64>> = trace
                .records
                .iter()
                .filter(|r| r.layer == l)
                .map(|r| r.spectral_gap)
                .collect();
            let layer_gaps =
                layer_gaps.ok_or_else(|| Error::invalid(format!("layer {l} has records without spectral_gap")))?;
            gaps.push(mean_std(&layer_gaps).0);
        }
    }
    let mut values = means;
    values.extend(stds);
    values.extend(gaps);
    Ok(FeatureVector { layout, values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::trace::synthetic_record;

    fn constant_trace(layers: usize, tokens: usize, rho: f64) -> SpectralTrace {
        let recs = (0..tokens)
            .flat_map(|t| (0..layers).map(move |l| synthetic_record(t, l, rho)))
            .collect();
        SpectralTrace::from_records(layers, recs).unwrap()
    }

    #[test]
    fn constant_trace_features() {
        let f = extract_features(&constant_trace(2, 10, 0.9), false).unwrap();
        assert_eq!(f.dim(), 4);
        for m in f.means() {
            assert!((m - 0.9).abs() < 1e-15);
        }
        assert!(f.stds().iter().all(|&s| s.abs() < 1e-15));
    }

    #[test]
    fn single_token_std_is_zero() {
        let f = extract_features(&constant_trace(3, 1, 0.4), false).unwrap();
        assert_eq!(f.stds(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn empty_and_missing_gap_errors() {
        assert!(matches!(
            extract_features(&SpectralTrace::new(2), false),
            Err(Error::Empty(_))
        ));
        assert!(extract_features(&constant_trace(2, 3, 0.5), true).is_err());
    }

    #[test]
    fn gap_block_present() {
        let mut tr = constant_trace(2, 4, 0.5);
        for r in &mut tr.records {
            r.spectral_gap = Some(0.25);
        }
        let f = extract_features(&tr, true).unwrap();
        assert_eq!(f.dim(), 6);
        assert_eq!(f.gaps().unwrap(), &[0.25, 0.25]);
    }
}
