use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{FeatureLayout, FeatureVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub layout: FeatureLayout,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub seed: u64,
    pub tau: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            learning_rate: 1.0,
            l2: 1e-3,
            seed: 0,
            tau: 0.5,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + exp(z))` without overflow.
fn log1pexp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn loss(x: &[Vec<f64>], y: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = x.len() as f64;
    let ce: f64 = x
        .iter()
        .zip(y)
        .map(|(xi, &yi)| {
            let z = dot(w, xi) + b;
            log1pexp(z) - yi * z
        })
        .sum();
    ce / n + l2 * w.iter().map(|v| v * v).sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss at initialisation and after every epoch.
    pub loss_curve: Vec<f64>,
    pub final_learning_rate: f64,
}

/// Full-batch gradient descent on mean cross-entropy + `l2 * ||w||^2`.
/// A step that would raise the loss is rejected and the learning rate halved.
pub fn train_classifier(
    features: &[FeatureVector],
    labels: &[bool],
    config: &TrainConfig,
) -> Result<(LogisticModel, TrainReport)> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: features.len(),
            got: labels.len(),
        });
    }
    if features.is_empty() {
        return Err(Error::Empty("features"));
    }
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(Error::SingleClass);
    }
    let layout = features[0].layout.clone();
    let dim = layout.dim();
    for f in features {
        if f.layout != layout || f.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.dim(),
            });
        }
    }
    if !(config.learning_rate > 0.0) || !(config.l2 >= 0.0) {
        return Err(Error::invalid("learning_rate must be > 0 and l2 >= 0"));
    }
    let x: Vec<Vec<f64>> = features.iter().map(|f| f.values.clone()).collect();
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    let n = x.len() as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = Normal::new(0.0, 0.01).expect("valid scale");
    let mut w: Vec<f64> = (0..dim).map(|_| init.sample(&mut rng)).collect();
    let mut b = 0.0;
    let mut lr = config.learning_rate;
    let mut current = loss(&x, &y, &w, b, config.l2);
    let mut curve = vec![current];

    for _ in 0..config.epochs {
        let mut gw: Vec<f64> = w.iter().map(|wi| 2.0 * config.l2 * wi).collect();
        let mut gb = 0.0;
        for (xi, &yi) in x.iter().zip(&y) {
            let r = (sigmoid(dot(&w, xi) + b) - yi) / n;
            for (g, v) in gw.iter_mut().zip(xi) {
                *g += r * v;
            }
            gb += r;
        }
        loop {
            let cand_w: Vec<f64> = w.iter().zip(&gw).map(|(wi, g)| wi - lr * g).collect();
            let cand_b = b - lr * gb;
            let cand = loss(&x, &y, &cand_w, cand_b, config.l2);
            if cand <= current {
                w = cand_w;
                b = cand_b;
                current = cand;
                break;
            }
            lr *= 0.5;
            if lr < 1e-12 {
                break;
            }
        }
        curve.push(current);
    }
    Ok((
        LogisticModel {
            layout,
            weights: w,
            bias: b,
            tau: config.tau,
        },
        TrainReport {
            loss_curve: curve,
            final_learning_rate: lr,
        },
    ))
}

impl LogisticModel {
    pub fn score(&self, features: &FeatureVector) -> Result<f64> {
        if features.dim() != self.weights.len() || features.layout != self.layout {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                got: features.dim(),
            });
        }
        Ok(sigmoid(dot(&self.weights, &features.values) + self.bias))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.weights.len() != m.layout.dim() {
            return Err(Error::Schema {
                path: "weights".into(),
                message: format!("expected {} values, got {}", m.layout.dim(), m.weights.len()),
            });
        }
        Ok(m)
    }
}

/// `(s_hazard, s_hazard > tau)`.
pub fn classify(model: &LogisticModel, features: &FeatureVector) -> Result<(f64, bool)> {
    let s = model.score(features)?;
    Ok((s, s > model.tau))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(values: Vec<f64>) -> FeatureVector {
        FeatureVector {
            layout: FeatureLayout::new(values.len() / 2, false),
            values,
        }
    }

    #[test]
    fn zero_model_scores_half_and_boundary_passes() {
        let m = LogisticModel {
            layout: FeatureLayout::new(1, false),
            weights: vec![0.0, 0.0],
            bias: 0.0,
            tau: 0.5,
        };
        assert_eq!(classify(&m, &fv(vec![3.0, -1.0])).unwrap(), (0.5, false));
        assert!(classify(&m, &fv(vec![1.0, 2.0, 3.0, 4.0])).is_err());
    }

    #[test]
    fn separable_set_reaches_full_accuracy() {
        let xs: Vec<FeatureVector> = (0..20)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                fv(vec![s * (1.0 + 0.1 * i as f64), 0.3 * (i as f64).sin()])
            })
            .collect();
        let ys: Vec<bool> = (0..20).map(|i| i % 2 == 0).collect();
        let (m, rep) = train_classifier(&xs, &ys, &TrainConfig::default()).unwrap();
        let acc = xs
            .iter()
            .zip(&ys)
            .filter(|(x, &y)| classify(&m, x).unwrap().1 == y)
            .count();
        assert_eq!(acc, 20);
        assert!(rep.loss_curve.windows(2).all(|w| w[1] <= w[0]));
        let (s, _) = classify(&m, &xs[0]).unwrap();
        let z = m.weights[0] * xs[0].values[0] + m.weights[1] * xs[0].values[1] + m.bias;
        assert!((s - 1.0 / (1.0 + (-z).exp())).abs() < 1e-12);
    }

    #[test]
    fn single_class_rejected() {
        let xs = vec![fv(vec![1.0, 0.0]), fv(vec![0.0, 1.0])];
        assert!(matches!(
            train_classifier(&xs, &[true, true], &TrainConfig::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn identical_features_predict_base_rate() {
        let xs = vec![fv(vec![0.5, 0.1]); 8];
        let ys = [true, true, true, false, false, false, false, false];
        let cfg = TrainConfig {
            epochs: 3000,
            ..Default::default()
        };
        let (m, _) = train_classifier(&xs, &ys, &cfg).unwrap();
        let s = m.score(&xs[0]).unwrap();
        assert!((s - 3.0 / 8.0).abs() < 0.02, "{s}");
    }
}
