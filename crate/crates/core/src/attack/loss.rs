//! Spectral and output-distribution objectives, on plain floats and on the tape.

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::ssm::SelectiveSsm;

const NEAR_ZERO_RATE: f64 = 1e-12;

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// `sum_v p_v ln(p_v / q_v)`; terms with `p_v = 0` contribute 0.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pv, _)| **pv > 0.0)
        .map(|(pv, qv)| pv * (pv / qv).ln())
        .sum()
}

fn embed_all(ssm: &SelectiveSsm, tokens: &[usize]) -> Result<Vec<Vec<f64>>> {
    tokens.iter().map(|&t| Ok(ssm.embed(t)?.to_vec())).collect()
}

/// `sum_t sum_l rho(Abar_l(x_t))` over raw input vectors.
pub fn spectral_loss_embedded(ssm: &SelectiveSsm, inputs: &[Vec<f64>]) -> Result<f64> {
    let (_, ops) = ssm.run_embedded(inputs)?;
    Ok(ops.iter().flatten().map(|op| op.rho).sum())
}

pub fn spectral_loss(ssm: &SelectiveSsm, tokens: &[usize]) -> Result<f64> {
    spectral_loss_embedded(ssm, &embed_all(ssm, tokens)?)
}

/// Output distributions of the model on `tokens`, one per position.
pub fn benign_reference(ssm: &SelectiveSsm, tokens: &[usize]) -> Result<Vec<Vec<f64>>> {
    let (logits, _) = ssm.run_sequence(tokens, false)?;
    Ok(logits.iter().map(|z| softmax(z)).collect())
}

/// Mean over positions of `KL(p_model || reference)`.
pub fn output_kl_embedded(ssm: &SelectiveSsm, inputs: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64> {
    if inputs.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.len(),
            got: reference.len(),
        });
    }
    if inputs.is_empty() {
        return Err(Error::Empty("prompt"));
    }
    let (logits, _) = ssm.run_embedded(inputs)?;
    let total: f64 = logits
        .iter()
        .zip(reference)
        .map(|(z, q)| kl_divergence(&softmax(z), q))
        .sum();
    Ok(total / inputs.len() as f64)
}

pub fn output_kl_loss(ssm: &SelectiveSsm, tokens: &[usize], reference: &[Vec<f64>]) -> Result<f64> {
    output_kl_embedded(ssm, &embed_all(ssm, tokens)?, reference)
}

/// `spectral + lambda * kl`, where the KL term is present only when
/// `reference` is given.
pub fn joint_objective(
    ssm: &SelectiveSsm,
    inputs: &[Vec<f64>],
    reference: Option<&[Vec<f64>]>,
    lambda: f64,
) -> Result<f64> {
    let mut value = spectral_loss_embedded(ssm, inputs)?;
    if let Some(r) = reference {
        if lambda != 0.0 {
            value += lambda * output_kl_embedded(ssm, inputs, r)?;
        }
    }
    Ok(value)
}

struct TapeRun<'t> {
    rhos: Vec<Var<'t>>,
    logits: Vec<Vec<Var<'t>>>,
}

fn tape_forward<'t>(tape: &'t Tape, ssm: &SelectiveSsm, inputs: &[Vec<Var<'t>>], want_logits: bool) -> TapeRun<'t> {
    let (n_layers, ds, dm, vocab) = (ssm.n_layers(), ssm.d_state(), ssm.d_model(), ssm.vocab_size());
    let cfg = &ssm.config;
    let rates: Vec<Vec<f64>> = (0..n_layers).map(|l| ssm.rates(l)).collect();
    let zero = tape.var(0.0);
    let mut states: Vec<Vec<Var<'t>>> = vec![vec![zero; ds]; n_layers];
    let out_cols: Vec<Vec<f64>> = if want_logits {
        (0..vocab)
            .map(|v| (0..dm).map(|j| ssm.output_proj[j * vocab + v]).collect())
            .collect()
    } else {
        Vec::new()
    };
    let mut rhos = Vec::with_capacity(inputs.len() * n_layers);
    let mut logits = Vec::new();
    for x0 in inputs {
        let mut x = x0.clone();
        for l in 0..n_layers {
            let pre = tape.dot_const(&x, ssm.w_delta_row(l)).offset(ssm.delta_bias[l]);
            let delta = pre.softplus().clamp(cfg.delta_min, cfg.delta_max);
            let u = tape.dot_const(&x, ssm.w_in_row(l));
            let mut abar = Vec::with_capacity(ds);
            let mut next = Vec::with_capacity(ds);
            for (i, (&a, &b)) in rates[l].iter().zip(ssm.b_col(l)).enumerate() {
                let da = delta.scale(a);
                let ai = da.exp();
                let bi = if a.abs() < NEAR_ZERO_RATE {
                    delta.scale(b)
                } else {
                    da.exp_m1().scale(b / a)
                };
                next.push(ai * states[l][i] + bi * u);
                abar.push(ai);
            }
            rhos.push(tape.max(&abar));
            let y = tape.dot_const(&next, ssm.c_row(l));
            for (xj, &w) in x.iter_mut().zip(ssm.w_out_row(l)) {
                *xj = *xj + y.scale(w);
            }
            states[l] = next;
        }
        if want_logits {
            logits.push(out_cols.iter().map(|col| tape.dot_const(&x, col)).collect());
        }
    }
    TapeRun { rhos, logits }
}

/// Value and input gradient of [`joint_objective`].
pub fn objective_gradient(
    ssm: &SelectiveSsm,
    inputs: &[Vec<f64>],
    reference: Option<&[Vec<f64>]>,
    lambda: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if inputs.is_empty() {
        return Err(Error::Empty("prompt"));
    }
    for x in inputs {
        if x.len() != ssm.d_model() {
            return Err(Error::DimensionMismatch {
                expected: ssm.d_model(),
                got: x.len(),
            });
        }
    }
    let use_kl = reference.is_some() && lambda != 0.0;
    if let Some(r) = reference {
        if r.len() != inputs.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: r.len(),
            });
        }
    }
    let tape = Tape::new();
    let leaves: Vec<Vec<Var>> = inputs
        .iter()
        .map(|x| x.iter().map(|&v| tape.var(v)).collect())
        .collect();
    let run = tape_forward(&tape, ssm, &leaves, use_kl);
    let mut total = tape.sum(&run.rhos);
    if use_kl {
        let reference = reference.expect("checked above");
        let scale = lambda / inputs.len() as f64;
        let kls: Vec<Var> = run
            .logits
            .iter()
            .zip(reference)
            .map(|(z, q)| {
                let log_q: Vec<f64> = q.iter().map(|v| v.ln()).collect();
                tape.kl_from_logits(z, &log_q)
            })
            .collect();
        total = total + tape.sum(&kls).scale(scale);
    }
    let adj = tape.gradient(total);
    let grad = leaves
        .iter()
        .map(|row| row.iter().map(|v| adj[v.index()]).collect())
        .collect();
    Ok((total.value(), grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssm::{random_tokens, SelectiveSsmConfig};

    fn small() -> SelectiveSsm {
        SelectiveSsm::init(SelectiveSsmConfig {
            n_layers: 2,
            d_state: 4,
            d_model: 6,
            vocab_size: 12,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn kl_zero_for_identical_and_matches_direct_sum() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(kl_divergence(&p, &p), 0.0);
        let q = [0.5, 0.25, 0.25];
        let direct = 0.2 * (0.2f64 / 0.5).ln() + 0.3 * (0.3f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.25).ln();
        assert!((kl_divergence(&p, &q) - direct).abs() < 1e-15);
    }

    #[test]
    fn tape_value_matches_plain_forward() {
        let m = small();
        let toks = random_tokens(12, 7, 5);
        let inputs = embed_all(&m, &toks).unwrap();
        let reference: Vec<Vec<f64>> = vec![vec![1.0 / 12.0; 12]; 7];
        let plain = joint_objective(&m, &inputs, Some(&reference), 0.7).unwrap();
        let (taped, _) = objective_gradient(&m, &inputs, Some(&reference), 0.7).unwrap();
        assert!(
            (plain - taped).abs() < 1e-12 * plain.abs().max(1.0),
            "{plain} vs {taped}"
        );
    }

    #[test]
    fn kl_zero_on_own_outputs() {
        let m = small();
        let toks = random_tokens(12, 5, 9);
        let r = benign_reference(&m, &toks).unwrap();
        assert!(output_kl_loss(&m, &toks, &r).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let m = small();
        let toks = random_tokens(12, 4, 2);
        let inputs = embed_all(&m, &toks).unwrap();
        let reference = benign_reference(&m, &random_tokens(12, 4, 3)).unwrap();
        for lambda in [0.0, 0.5] {
            let (_, g) = objective_gradient(&m, &inputs, Some(&reference), lambda).unwrap();
            let h = 1e-6;
            for (t, j) in [(0, 0), (1, 3), (3, 5), (2, 1)] {
                let mut plus = inputs.clone();
                plus[t][j] += h;
                let mut minus = inputs.clone();
                minus[t][j] -= h;
                let num = (joint_objective(&m, &plus, Some(&reference), lambda).unwrap()
                    - joint_objective(&m, &minus, Some(&reference), lambda).unwrap())
                    / (2.0 * h);
                assert!(
                    (g[t][j] - num).abs() < 1e-6 * num.abs().max(1.0),
                    "lambda={lambda} ({t},{j}): {} vs {num}",
                    g[t][j]
                );
            }
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let m = small();
        assert!(output_kl_loss(&m, &[1, 2], &[vec![1.0 / 12.0; 12]]).is_err());
    }
}
