use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::SelectiveSsmConfig;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Decay rate of state channel 0, the slow memory channel. Channels
/// `i >= 1` use the integer spread `a_i = -(i + 1)`.
pub const SLOW_CHANNEL_RATE: f64 = 0.002;
/// Spectral radius the delta bias is calibrated to on typical tokens.
pub const CALIBRATION_RHO: f64 = 0.994;

const DELTA_WEIGHT_SCALE: f64 = 0.3;
const B_SCALE: f64 = 0.5;
const C_SCALE: f64 = 0.1;
const RESIDUAL_SCALE: f64 = 0.05;
const OUTPUT_SCALE: f64 = 2.0;
const NEAR_ZERO_RATE: f64 = 1e-12;

/// Toy multi-layer selective SSM. All weight arrays are flat, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectiveSsm {
    pub config: SelectiveSsmConfig,
    /// `n_layers x d_state`; continuous rates are `a = -exp(log_a)`.
    pub log_a: Vec<f64>,
    /// `n_layers x d_state` input column.
    pub b: Vec<f64>,
    /// `n_layers x d_state` read-out row.
    pub c: Vec<f64>,
    /// `n_layers x d_model` delta projection.
    pub w_delta: Vec<f64>,
    /// `n_layers` delta bias.
    pub delta_bias: Vec<f64>,
    /// `n_layers x d_model` projection of the stream onto the scalar SSM input.
    pub w_in: Vec<f64>,
    /// `n_layers x d_model` residual write-back of the scalar read-out.
    pub w_out: Vec<f64>,
    /// `vocab_size x d_model`, unit-norm rows.
    pub embedding: Vec<f64>,
    /// `d_model x vocab_size`.
    pub output_proj: Vec<f64>,
}

/// Per-token, per-layer `(Abar, Bbar)` with the exact spectral radius.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedOperator {
    pub layer: usize,
    pub delta: f64,
    pub abar: Matrix,
    pub bbar: Matrix,
    pub rho: f64,
}

impl DiscretizedOperator {
    pub fn new(layer: usize, delta: f64, abar: Matrix, bbar: Matrix) -> Self {
        let rho = if abar.is_diagonal() {
            abar.max_abs()
        } else {
            crate::linalg::eig_radius_exact(&abar).map_or(f64::NAN, |e| e.rho_hat)
        };
        Self {
            layer,
            delta,
            abar,
            bbar,
            rho,
        }
    }

    pub fn d_state(&self) -> usize {
        self.abar.rows()
    }
}

pub fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

pub fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl SelectiveSsm {
    /// Deterministic initialisation from `config.seed`.
    ///
    /// The delta bias is set so that a zero-projection token gives
    /// `rho = exp(-delta * SLOW_CHANNEL_RATE) = CALIBRATION_RHO`.
    pub fn init(config: SelectiveSsmConfig) -> Result<Self> {
        config.validate()?;
        let SelectiveSsmConfig {
            n_layers: l,
            d_state: ds,
            d_model: dm,
            vocab_size: v,
            ..
        } = config;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut normal = |scale: f64, n: usize| -> Vec<f64> {
            let dist = Normal::new(0.0, scale).expect("positive scale");
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        };

        let log_a = (0..l)
            .flat_map(|_| {
                (0..ds).map(|i| {
                    if i == 0 {
                        SLOW_CHANNEL_RATE.ln()
                    } else {
                        ((i + 1) as f64).ln()
                    }
                })
            })
            .collect();
        let b = normal(B_SCALE, l * ds);
        let c = normal(C_SCALE, l * ds);
        let w_delta = normal(DELTA_WEIGHT_SCALE, l * dm);
        let w_in = normal(1.0, l * dm);
        let w_out = normal(RESIDUAL_SCALE / (dm as f64).sqrt(), l * dm);
        let mut embedding = normal(1.0, v * dm);
        for row in embedding.chunks_exact_mut(dm) {
            let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
            row.iter_mut().for_each(|x| *x /= norm);
        }
        let output_proj = normal(OUTPUT_SCALE, dm * v);

        let target_delta = (1.0 / CALIBRATION_RHO).ln() / SLOW_CHANNEL_RATE;
        let target_delta = target_delta.clamp(config.delta_min, config.delta_max);
        let delta_bias = vec![softplus_inverse(target_delta); l];

        Ok(Self {
            config,
            log_a,
            b,
            c,
            w_delta,
            delta_bias,
            w_in,
            w_out,
            embedding,
            output_proj,
        })
    }

    /// Checks array lengths and embedding normalisation after deserialisation.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let SelectiveSsmConfig {
            n_layers: l,
            d_state: ds,
            d_model: dm,
            vocab_size: v,
            ..
        } = self.config;
        let fields: [(&str, usize, usize); 9] = [
            ("log_a", self.log_a.len(), l * ds),
            ("b", self.b.len(), l * ds),
            ("c", self.c.len(), l * ds),
            ("w_delta", self.w_delta.len(), l * dm),
            ("delta_bias", self.delta_bias.len(), l),
            ("w_in", self.w_in.len(), l * dm),
            ("w_out", self.w_out.len(), l * dm),
            ("embedding", self.embedding.len(), v * dm),
            ("output_proj", self.output_proj.len(), dm * v),
        ];
        for (name, got, expected) in fields {
            if got != expected {
                return Err(Error::Schema {
                    path: name.to_string(),
                    message: format!("expected {expected} values, got {got}"),
                });
            }
        }
        Ok(())
    }

    pub fn n_layers(&self) -> usize {
        self.config.n_layers
    }

    pub fn d_state(&self) -> usize {
        self.config.d_state
    }

    pub fn d_model(&self) -> usize {
        self.config.d_model
    }

    pub fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn layer_slice<'a>(&self, data: &'a [f64], layer: usize, width: usize) -> &'a [f64] {
        &data[layer * width..(layer + 1) * width]
    }

    /// Continuous diagonal rates `a_i = -exp(log_a_i)` of one layer.
    pub fn rates(&self, layer: usize) -> Vec<f64> {
        self.layer_slice(&self.log_a, layer, self.d_state())
            .iter()
            .map(|la| -la.exp())
            .collect()
    }

    pub fn b_col(&self, layer: usize) -> &[f64] {
        self.layer_slice(&self.b, layer, self.d_state())
    }

    pub fn c_row(&self, layer: usize) -> &[f64] {
        self.layer_slice(&self.c, layer, self.d_state())
    }

    pub fn w_delta_row(&self, layer: usize) -> &[f64] {
        self.layer_slice(&self.w_delta, layer, self.d_model())
    }

    pub fn w_in_row(&self, layer: usize) -> &[f64] {
        self.layer_slice(&self.w_in, layer, self.d_model())
    }

    pub fn w_out_row(&self, layer: usize) -> &[f64] {
        self.layer_slice(&self.w_out, layer, self.d_model())
    }

    pub fn embed(&self, token: usize) -> Result<&[f64]> {
        if token >= self.vocab_size() {
            return Err(Error::TokenOutOfRange {
                token,
                vocab: self.vocab_size(),
            });
        }
        Ok(self.layer_slice(&self.embedding, token, self.d_model()))
    }

    /// Largest continuous-rate magnitude over all layers (`||A||_2` for the
    /// diagonal parameterisation).
    pub fn a_norm(&self) -> f64 {
        self.log_a.iter().map(|la| la.exp()).fold(0.0, f64::max)
    }

    /// Pre-activation `w_delta . x + bias`.
    pub fn delta_preactivation(&self, layer: usize, x: &[f64]) -> Result<f64> {
        self.check_layer(layer)?;
        if x.len() != self.d_model() {
            return Err(Error::DimensionMismatch {
                expected: self.d_model(),
                got: x.len(),
            });
        }
        Ok(dot(self.w_delta_row(layer), x) + self.delta_bias[layer])
    }

    /// `clamp(softplus(w_delta . x + bias), delta_min, delta_max)`.
    pub fn compute_delta(&self, layer: usize, x: &[f64]) -> Result<f64> {
        let pre = self.delta_preactivation(layer, x)?;
        Ok(self.delta_from_preactivation(pre))
    }

    pub fn delta_from_preactivation(&self, pre: f64) -> f64 {
        softplus(pre).clamp(self.config.delta_min, self.config.delta_max)
    }

    fn check_layer(&self, layer: usize) -> Result<()> {
        if layer >= self.n_layers() {
            return Err(Error::invalid(format!(
                "layer {layer} out of range for {} layers",
                self.n_layers()
            )));
        }
        Ok(())
    }

    /// Zero-order hold: `Abar = exp(delta A)`, `Bbar = (Abar - I) A^-1 B`.
    pub fn discretize(&self, layer: usize, delta: f64) -> Result<DiscretizedOperator> {
        self.check_layer(layer)?;
        if !(delta > 0.0) {
            return Err(Error::invalid(format!("delta must be positive, got {delta}")));
        }
        let rates = self.rates(layer);
        let abar: Vec<f64> = rates.iter().map(|a| (delta * a).exp()).collect();
        let bbar: Vec<f64> = rates
            .iter()
            .zip(self.b_col(layer))
            .map(|(&a, &b)| {
                if a.abs() < NEAR_ZERO_RATE {
                    delta * b
                } else {
                    (delta * a).exp_m1() / a * b
                }
            })
            .collect();
        Ok(DiscretizedOperator::new(
            layer,
            delta,
            Matrix::diagonal(abar)?,
            Matrix::column(bbar)?,
        ))
    }

    /// Scalar SSM input for a layer: the fixed projection `w_in . x`.
    pub fn input_channel(&self, layer: usize, x: &[f64]) -> f64 {
        dot(self.w_in_row(layer), x)
    }

    /// One recurrence step `h' = Abar h + Bbar u`.
    pub fn step(&self, layer: usize, h: &[f64], x: &[f64]) -> Result<(Vec<f64>, DiscretizedOperator)> {
        if h.len() != self.d_state() {
            return Err(Error::DimensionMismatch {
                expected: self.d_state(),
                got: h.len(),
            });
        }
        let delta = self.compute_delta(layer, x)?;
        let op = self.discretize(layer, delta)?;
        let u = self.input_channel(layer, x);
        Ok((apply_operator(&op, h, u), op))
    }

    /// Logits from the final residual stream.
    pub fn logits(&self, stream: &[f64]) -> Vec<f64> {
        let v = self.vocab_size();
        let mut out = vec![0.0; v];
        for (j, xj) in stream.iter().enumerate() {
            for (o, w) in out.iter_mut().zip(&self.output_proj[j * v..(j + 1) * v]) {
                *o += xj * w;
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// `Abar h + Bbar u` for a diagonal (or dense) operator.
pub fn apply_operator(op: &DiscretizedOperator, h: &[f64], u: f64) -> Vec<f64> {
    let bbar = op.bbar.as_slice();
    if op.abar.is_diagonal() {
        op.abar
            .as_slice()
            .iter()
            .zip(h)
            .zip(bbar)
            .map(|((a, hi), b)| a * hi + b * u)
            .collect()
    } else {
        let (ah, _) = op.abar.matvec(h).expect("state dimension checked by caller");
        ah.iter().zip(bbar).map(|(a, b)| a + b * u).collect()
    }
}
