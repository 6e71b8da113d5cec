use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};
use serde::{Deserialize, Serialize};

use super::lexical::lexical_auc;
use super::pgd::{pgd_attack, AttackConfig, AttackMode, AttackResult};
use crate::error::{Error, Result};
use crate::ssm::SelectiveSsm;

pub const DEFAULT_LAMBDAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Prompts whose token frequencies follow a Zipf law over `vocab` ranks
/// (token 0 is the most frequent).
pub fn zipf_prompts(n: usize, len: usize, vocab: usize, exponent: f64, seed: u64) -> Result<Vec<Vec<usize>>> {
    let dist = Zipf::new(vocab as f64, exponent).map_err(|e| Error::invalid(format!("zipf: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| (0..len).map(|_| dist.sample(&mut rng) as usize - 1).collect())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub mode: AttackMode,
    pub lambda: f64,
    pub delta_rho_mean: f64,
    pub lexical_auc: f64,
    pub kl_to_benign: f64,
}

/// Attacks every prompt at one setting and scores the batch.
pub fn attack_batch(
    ssm: &SelectiveSsm,
    prompts: &[Vec<usize>],
    cfg: &AttackConfig,
) -> Result<(ParetoPoint, Vec<AttackResult>)> {
    if prompts.is_empty() {
        return Err(Error::Empty("prompts"));
    }
    let mut results = prompts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let c = AttackConfig {
                seed: cfg.seed.wrapping_add(i as u64),
                ..cfg.clone()
            };
            pgd_attack(ssm, p, &c)
        })
        .collect::<Result<Vec<_>>>()?;
    let adversarial: Vec<Vec<usize>> = results.iter().map(|r| r.adversarial_tokens.clone()).collect();
    let auc = lexical_auc(prompts, &adversarial, ssm.vocab_size())?;
    for r in &mut results {
        r.lexical_auc = Some(auc);
    }
    let n = results.len() as f64;
    let point = ParetoPoint {
        mode: cfg.mode,
        lambda: cfg.lambda,
        delta_rho_mean: results.iter().map(|r| r.delta_rho_mean).sum::<f64>() / n,
        lexical_auc: auc,
        kl_to_benign: results.iter().map(|r| r.kl_to_benign).sum::<f64>() / n,
    };
    Ok((point, results))
}

/// One point per `lambda` in `mode`, all other settings from `base`.
pub fn pareto_sweep(
    ssm: &SelectiveSsm,
    prompts: &[Vec<usize>],
    lambdas: &[f64],
    base: &AttackConfig,
) -> Result<Vec<ParetoPoint>> {
    lambdas
        .iter()
        .map(|&lambda| {
            let cfg = AttackConfig { lambda, ..base.clone() };
            Ok(attack_batch(ssm, prompts, &cfg)?.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zipf_prompts_are_skewed_and_in_range() {
        let p = zipf_prompts(50, 20, 256, 1.1, 0).unwrap();
        let flat: Vec<usize> = p.into_iter().flatten().collect();
        assert!(flat.iter().all(|&t| t < 256));
        let zeros = flat.iter().filter(|&&t| t == 0).count();
        let tail = flat.iter().filter(|&&t| t == 200).count();
        assert!(zeros > 5 * tail.max(1));
    }
}
