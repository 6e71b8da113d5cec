use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralTrace;
use crate::ssm::{DiscretizedOperator, RunOptions, SelectiveSsm};

/// Relative slack before a dense operator counts as above target, so that
/// re-clamping an already clamped operator is a no-op.
const DENSE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClampMode {
    SingleLayer,
    AllLayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampProtocol {
    pub mode: ClampMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layer: Option<usize>,
    pub rho_target: f64,
}

impl ClampProtocol {
    pub fn all_layer(rho_target: f64) -> Self {
        Self {
            mode: ClampMode::AllLayer,
            layer: None,
            rho_target,
        }
    }

    pub fn single_layer(layer: usize, rho_target: f64) -> Self {
        Self {
            mode: ClampMode::SingleLayer,
            layer: Some(layer),
            rho_target,
        }
    }

    pub fn validate(&self, n_layers: usize) -> Result<()> {
        check_target(self.rho_target)?;
        match (self.mode, self.layer) {
            (ClampMode::AllLayer, None) => Ok(()),
            (ClampMode::SingleLayer, Some(l)) if l < n_layers => Ok(()),
            (ClampMode::SingleLayer, Some(l)) => Err(Error::invalid(format!(
                "clamp layer {l} out of range for {n_layers} layers"
            ))),
            (ClampMode::SingleLayer, None) => Err(Error::invalid("single_layer clamp needs a layer")),
            (ClampMode::AllLayer, Some(_)) => Err(Error::invalid("all_layer clamp takes no layer")),
        }
    }

    pub fn targets(&self, layer: usize) -> bool {
        match self.mode {
            ClampMode::AllLayer => true,
            ClampMode::SingleLayer => self.layer == Some(layer),
        }
    }
}

fn check_target(rho_target: f64) -> Result<()> {
    if !(rho_target > 0.0 && rho_target <= 1.0) {
        return Err(Error::invalid(format!(
            "rho_target must be in (0, 1], got {rho_target}"
        )));
    }
    Ok(())
}

/// `Abar * (target / rho)` when `rho > target`, otherwise unchanged. `Bbar`
/// is never touched. For diagonal operators the dominant entry is set to
/// exactly `target` so the result is a fixed point of the clamp.
pub fn clamp_operator(op: &DiscretizedOperator, rho_target: f64) -> Result<DiscretizedOperator> {
    check_target(rho_target)?;
    if op.abar.is_diagonal() {
        if !(op.rho > rho_target) {
            return Ok(op.clone());
        }
        let scale = rho_target / op.rho;
        let diag = op.abar.as_slice();
        let top = (0..diag.len()).fold(0, |b, i| if diag[i].abs() > diag[b].abs() { i } else { b });
        let clamped: Vec<f64> = diag
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let s = if i == top {
                    rho_target
                } else {
                    (v.abs() * scale).min(rho_target)
                };
                s.copysign(v)
            })
            .collect();
        return Ok(DiscretizedOperator::new(
            op.layer,
            op.delta,
            crate::linalg::Matrix::diagonal(clamped)?,
            op.bbar.clone(),
        ));
    }
    if !(op.rho > rho_target * (1.0 + DENSE_SLACK)) {
        return Ok(op.clone());
    }
    Ok(DiscretizedOperator::new(
        op.layer,
        op.delta,
        op.abar.scale(rho_target / op.rho),
        op.bbar.clone(),
    ))
}

/// [`SelectiveSsm::run_with`] with the protocol's layers clamped at every
/// token `t >= onset`.
pub fn run_with_clamp_from(
    ssm: &SelectiveSsm,
    tokens: &[usize],
    protocol: &ClampProtocol,
    onset: usize,
    opts: &RunOptions,
) -> Result<(Vec<Vec<f64>>, SpectralTrace)> {
    protocol.validate(ssm.n_layers())?;
    let p = *protocol;
    let hook = move |t: usize, op: &mut DiscretizedOperator| {
        if t >= onset && p.targets(op.layer) {
            *op = clamp_operator(op, p.rho_target).expect("protocol validated");
        }
    };
    ssm.run_with(tokens, opts, Some(&hook))
}

pub fn run_with_clamp(
    ssm: &SelectiveSsm,
    tokens: &[usize],
    protocol: &ClampProtocol,
    opts: &RunOptions,
) -> Result<(Vec<Vec<f64>>, SpectralTrace)> {
    run_with_clamp_from(ssm, tokens, protocol, 0, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn op(diag: Vec<f64>) -> DiscretizedOperator {
        let n = diag.len();
        DiscretizedOperator::new(
            0,
            1.0,
            Matrix::diagonal(diag).unwrap(),
            Matrix::column(vec![1.0; n]).unwrap(),
        )
    }

    #[test]
    fn scales_down_to_target() {
        let c = clamp_operator(&op(vec![0.95, 0.5, -0.2]), 0.9).unwrap();
        assert_eq!(c.rho, 0.9);
        assert!((c.abar.get(1, 1) - 0.5 * 0.9 / 0.95).abs() < 1e-15);
        assert!(c.abar.get(2, 2) < 0.0);
        assert_eq!(c.bbar, op(vec![0.95, 0.5, -0.2]).bbar);
    }

    #[test]
    fn below_target_and_zero_unchanged() {
        let o = op(vec![0.8, 0.1]);
        assert_eq!(clamp_operator(&o, 0.9).unwrap(), o);
        let z = op(vec![0.0, 0.0]);
        assert_eq!(clamp_operator(&z, 0.5).unwrap(), z);
    }

    #[test]
    fn dense_clamp_is_idempotent() {
        let a = Matrix::from_rows(&[&[0.9, 0.3], &[-0.2, 0.7]]).unwrap();
        let o = DiscretizedOperator::new(0, 1.0, a, Matrix::column(vec![1.0, 0.0]).unwrap());
        let once = clamp_operator(&o, 0.5).unwrap();
        assert!((once.rho - 0.5).abs() < 1e-12);
        assert_eq!(clamp_operator(&once, 0.5).unwrap(), once);
    }

    #[test]
    fn protocol_validation() {
        assert!(ClampProtocol::single_layer(4, 0.5).validate(4).is_err());
        assert!(ClampProtocol::all_layer(0.0).validate(4).is_err());
        assert!(ClampProtocol::single_layer(3, 1.0).validate(4).is_ok());
    }
}
