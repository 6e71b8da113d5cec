use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::clamp::{run_with_clamp_from, ClampProtocol};
use crate::attack::{pgd_attack, AttackConfig};
use crate::error::{Error, Result};
use crate::guard::{LabeledTrace, TraceSource};
use crate::spectral::SpectralTrace;
use crate::ssm::{random_tokens, RunOptions, SelectiveSsm, StepRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum AdversarialSource {
    /// All-layer clamp from a random onset in the first half of the stream.
    Clamp { rho_target: f64 },
    /// Traces of PGD-attacked prompts.
    Pgd { attack: AttackConfig },
}

impl Default for AdversarialSource {
    fn default() -> Self {
        Self::Clamp { rho_target: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceGenConfig {
    pub length: usize,
    pub power_iters: usize,
    pub seed: u64,
}

impl Default for TraceGenConfig {
    fn default() -> Self {
        Self {
            length: 32,
            power_iters: 3,
            seed: 0,
        }
    }
}

/// `n_benign` random-stream traces followed by `n_adversarial` traces from
/// `source`; stream ids are positions in the returned list.
pub fn gen_labeled_traces(
    ssm: &SelectiveSsm,
    n_benign: usize,
    n_adversarial: usize,
    source: &AdversarialSource,
    config: &TraceGenConfig,
) -> Result<Vec<LabeledTrace>> {
    if config.length == 0 {
        return Err(Error::invalid("trace length must be >= 1"));
    }
    let opts = RunOptions {
        power_iters: config.power_iters,
        ..RunOptions::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let vocab = ssm.vocab_size();
    let mut out = Vec::with_capacity(n_benign + n_adversarial);
    for _ in 0..n_benign {
        let tokens = random_tokens(vocab, config.length, rng.next_u64());
        let (_, trace) = ssm.run_with(&tokens, &opts, None)?;
        out.push(LabeledTrace {
            stream_id: out.len(),
            label: false,
            source: TraceSource::Benign,
            injected_at: None,
            trace,
        });
    }
    for _ in 0..n_adversarial {
        let tokens = random_tokens(vocab, config.length, rng.next_u64());
        let (source_tag, injected_at, trace) = match source {
            AdversarialSource::Clamp { rho_target } => {
                let onset = rng.random_range(0..=config.length.saturating_sub(1) / 2);
                let protocol = ClampProtocol::all_layer(*rho_target);
                let (_, trace) = run_with_clamp_from(ssm, &tokens, &protocol, onset, &opts)?;
                (TraceSource::Clamp, Some(onset), trace)
            }
            AdversarialSource::Pgd { attack } => {
                let cfg = AttackConfig {
                    seed: rng.next_u64(),
                    ..attack.clone()
                };
                let res = pgd_attack(ssm, &tokens, &cfg)?;
                let (_, trace) = ssm.run_with(&res.adversarial_tokens, &opts, None)?;
                (TraceSource::Pgd, None, trace)
            }
        };
        out.push(LabeledTrace {
            stream_id: out.len(),
            label: true,
            source: source_tag,
            injected_at,
            trace,
        });
    }
    Ok(out)
}

/// Radius-only traces for checking the monitor in isolation. Benign records
/// are drawn from `[rho_min + 1e-6, 1)` (one record per trace sits exactly
/// on `rho_min + 1e-6`); each attack trace has a single record below
/// `rho_min` at a random token and layer.
pub fn synthetic_monitor_traces(
    n_attack: usize,
    n_benign: usize,
    n_layers: usize,
    length: usize,
    rho_min: f64,
    seed: u64,
) -> Result<Vec<LabeledTrace>> {
    if n_layers == 0 || length == 0 {
        return Err(Error::invalid("n_layers and length must be >= 1"));
    }
    if !(rho_min > 0.0 && rho_min + 1e-6 < 1.0) {
        return Err(Error::invalid(format!(
            "rho_min must be in (0, 1 - 1e-6), got {rho_min}"
        )));
    }
    let floor = rho_min + 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_attack + n_benign);
    for i in 0..n_attack + n_benign {
        let attack = i < n_attack;
        let mut rhos: Vec<f64> = (0..length * n_layers).map(|_| rng.random_range(floor..1.0)).collect();
        let edge = rng.random_range(0..rhos.len());
        rhos[edge] = floor;
        let injected_at = if attack {
            let t = rng.random_range(0..length);
            let l = rng.random_range(0..n_layers);
            rhos[t * n_layers + l] = rng.random_range(0.0..rho_min);
            Some(t)
        } else {
            None
        };
        let records: Vec<StepRecord> = rhos
            .iter()
            .enumerate()
            .map(|(k, &r)| StepRecord::from_rho(k / n_layers, k % n_layers, r))
            .collect();
        out.push(LabeledTrace {
            stream_id: i,
            label: attack,
            source: TraceSource::Synthetic,
            injected_at,
            trace: SpectralTrace::from_records(n_layers, records)?,
        });
    }
    Ok(out)
}
