use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{benign_reference, joint_objective, objective_gradient, output_kl_loss, spectral_loss};
use crate::error::{Error, Result};
use crate::ssm::SelectiveSsm;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    #[default]
    SpectralOnly,
    JointLoss,
    RandomBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub mode: AttackMode,
    /// Sign-gradient step size in embedding space.
    pub alpha: f64,
    pub steps: usize,
    /// Weight of the output-KL term (joint mode only).
    pub lambda: f64,
    pub seed: u64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            mode: AttackMode::SpectralOnly,
            alpha: 0.01,
            steps: 50,
            lambda: 0.0,
            seed: 0,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackResult {
    pub adversarial_tokens: Vec<usize>,
    /// Objective before the first step and after each step (`steps + 1` values).
    pub loss_curve: Vec<f64>,
    pub rho_mean_before: f64,
    pub rho_mean_after: f64,
    /// `rho_mean_before - rho_mean_after`; positive means the attack lowered rho.
    pub delta_rho_mean: f64,
    /// Mean KL of the adversarial outputs against the benign outputs.
    pub kl_to_benign: f64,
    /// Filled in when the result is scored against a benign corpus.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexical_auc: Option<f64>,
}

/// Vocabulary token with the highest cosine similarity to `x` (lowest id on ties).
pub fn project_to_vocab(ssm: &SelectiveSsm, x: &[f64]) -> usize {
    let dm = ssm.d_model();
    let mut best = (0, f64::NEG_INFINITY);
    for (t, row) in ssm.embedding.chunks_exact(dm).enumerate() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        let cos = row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() / norm;
        if cos > best.1 {
            best = (t, cos);
        }
    }
    best.0
}

fn mean_rho(ssm: &SelectiveSsm, tokens: &[usize]) -> Result<f64> {
    Ok(spectral_loss(ssm, tokens)? / (tokens.len() * ssm.n_layers()) as f64)
}

/// Lowers the spectral radius along a prompt by sign-gradient descent on a
/// continuous copy of its embeddings, projecting to the nearest tokens at
/// the end. The random baseline instead substitutes one random position
/// per step with a random token.
pub fn pgd_attack(ssm: &SelectiveSsm, prompt: &[usize], cfg: &AttackConfig) -> Result<AttackResult> {
    cfg.validate()?;
    if prompt.is_empty() {
        return Err(Error::Empty("prompt"));
    }
    let reference = benign_reference(ssm, prompt)?;
    let lambda = match cfg.mode {
        AttackMode::SpectralOnly => 0.0,
        _ => cfg.lambda,
    };
    let mut inputs: Vec<Vec<f64>> = prompt
        .iter()
        .map(|&t| Ok(ssm.embed(t)?.to_vec()))
        .collect::<Result<_>>()?;
    let mut loss_curve = Vec::with_capacity(cfg.steps + 1);

    let adversarial_tokens = match cfg.mode {
        AttackMode::SpectralOnly | AttackMode::JointLoss => {
            for _ in 0..cfg.steps {
                let (value, grad) = objective_gradient(ssm, &inputs, Some(&reference), lambda)?;
                loss_curve.push(value);
                for (x, g) in inputs.iter_mut().zip(&grad) {
                    for (xi, gi) in x.iter_mut().zip(g) {
                        if *gi != 0.0 {
                            *xi -= cfg.alpha * gi.signum();
                        }
                    }
                }
            }
            loss_curve.push(joint_objective(ssm, &inputs, Some(&reference), lambda)?);
            inputs.iter().map(|x| project_to_vocab(ssm, x)).collect()
        }
        AttackMode::RandomBaseline => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut tokens = prompt.to_vec();
            let objective = |toks: &[usize]| -> Result<f64> {
                let mut v = spectral_loss(ssm, toks)?;
                if lambda != 0.0 {
                    v += lambda * output_kl_loss(ssm, toks, &reference)?;
                }
                Ok(v)
            };
            loss_curve.push(objective(&tokens)?);
            for _ in 0..cfg.steps {
                let pos = rng.random_range(0..tokens.len());
                tokens[pos] = rng.random_range(0..ssm.vocab_size());
                loss_curve.push(objective(&tokens)?);
            }
            tokens
        }
    };

    let rho_mean_before = mean_rho(ssm, prompt)?;
    let rho_mean_after = mean_rho(ssm, &adversarial_tokens)?;
    Ok(AttackResult {
        kl_to_benign: output_kl_loss(ssm, &adversarial_tokens, &reference)?,
        adversarial_tokens,
        loss_curve,
        rho_mean_before,
        rho_mean_after,
        delta_rho_mean: rho_mean_before - rho_mean_after,
        lexical_auc: None,
    })
}
