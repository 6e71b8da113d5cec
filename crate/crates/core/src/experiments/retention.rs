use serde::{Deserialize, Serialize};

use super::clamp::{clamp_operator, ClampProtocol};
use crate::error::{Error, Result};
use crate::spectral::{horizon_bound, HorizonInputs};
use crate::ssm::{random_tokens, DiscretizedOperator, SelectiveSsm, StreamState};

pub const DEFAULT_EPSILON: f64 = 1e-5;
pub const DEFAULT_RHO_LEVELS: [f64; 6] = [0.3, 0.7, 0.85, 0.9, 0.95, 0.99];
pub const DEFAULT_DISTANCES: [usize; 6] = [10, 50, 100, 200, 500, 1000];

/// Retention after `0..=max_distance` noise tokens of a unit perturbation
/// along layer 0, channel 0, with every layer clamped to `rho_target`.
///
/// Entry `d` is `||h_d(perturbed) - h_d(unperturbed)||` over the layer-0
/// state.
pub fn retention_curve(ssm: &SelectiveSsm, rho_target: f64, max_distance: usize, seed: u64) -> Result<Vec<f64>> {
    let protocol = ClampProtocol::all_layer(rho_target);
    protocol.validate(ssm.n_layers())?;
    let hook = move |_t: usize, op: &mut DiscretizedOperator| {
        *op = clamp_operator(op, rho_target).expect("target validated");
    };
    let mut clean = StreamState::new(ssm);
    let mut perturbed = StreamState::new(ssm);
    let mut h0 = vec![0.0; ssm.d_state()];
    h0[0] = 1.0;
    perturbed.set_state(0, h0);
    let noise = random_tokens(ssm.vocab_size(), max_distance, seed);
    let mut curve = Vec::with_capacity(max_distance + 1);
    curve.push(1.0);
    for &tok in &noise {
        let a = clean.propose(tok, Some(&hook))?;
        clean.commit(a);
        let b = perturbed.propose(tok, Some(&hook))?;
        perturbed.commit(b);
        let diff = clean.states()[0]
            .iter()
            .zip(&perturbed.states()[0])
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt();
        curve.push(diff);
    }
    Ok(curve)
}

pub fn retention_probe(ssm: &SelectiveSsm, rho_target: f64, distance: usize, seed: u64) -> Result<f64> {
    Ok(retention_curve(ssm, rho_target, distance, seed)?[distance])
}

/// Last distance `d <= curve.len() - 1` such that every step up to `d`
/// keeps retention `>= epsilon`.
pub fn empirical_horizon(curve: &[f64], epsilon: f64) -> usize {
    curve
        .iter()
        .position(|&r| r < epsilon)
        .map_or(curve.len().saturating_sub(1), |t| t.saturating_sub(1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub rho_levels: Vec<f64>,
    pub distances: Vec<usize>,
    pub epsilon: f64,
    /// `rho_levels.len() x distances.len()`.
    pub retention: Vec<Vec<f64>>,
    pub recoverable: Vec<Vec<bool>>,
    /// Per level, the last recoverable step up to the largest grid distance.
    pub empirical_horizon: Vec<usize>,
    /// Per level, whether retention never fell below `epsilon` within the grid.
    pub censored: Vec<bool>,
    /// `horizon_bound` with `kappa = 1`, `||h0|| = 1`, `lambda_max = 1`.
    pub horizon_bound: Vec<f64>,
}

impl PhaseGrid {
    /// Recoverability non-decreasing in rho (levels taken in ascending
    /// order) and non-increasing in distance (ascending order).
    pub fn is_monotone(&self) -> bool {
        let mut rows: Vec<usize> = (0..self.rho_levels.len()).collect();
        rows.sort_by(|&a, &b| self.rho_levels[a].total_cmp(&self.rho_levels[b]));
        let mut cols: Vec<usize> = (0..self.distances.len()).collect();
        cols.sort_by_key(|&j| self.distances[j]);
        let cell = |i: usize, j: usize| self.recoverable[i][j] as u8;
        let in_rho = cols
            .iter()
            .all(|&j| rows.windows(2).all(|w| cell(w[0], j) <= cell(w[1], j)));
        let in_d = rows
            .iter()
            .all(|&i| cols.windows(2).all(|w| cell(i, w[0]) >= cell(i, w[1])));
        in_rho && in_d
    }

    /// Every recoverable cell lies within the analytic horizon.
    pub fn within_bound(&self) -> bool {
        (0..self.rho_levels.len()).all(|i| {
            self.empirical_horizon[i] as f64 <= self.horizon_bound[i]
                && self
                    .distances
                    .iter()
                    .zip(&self.recoverable[i])
                    .all(|(&d, &r)| !r || d as f64 <= self.horizon_bound[i])
        })
    }
}

pub fn phase_transition_grid(
    ssm: &SelectiveSsm,
    rho_levels: &[f64],
    distances: &[usize],
    epsilon: f64,
    seed: u64,
) -> Result<PhaseGrid> {
    if rho_levels.is_empty() || distances.is_empty() {
        return Err(Error::invalid("rho_levels and distances must be non-empty"));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid(format!("epsilon must be in (0, 1), got {epsilon}")));
    }
    if rho_levels.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::invalid("rho levels must be in (0, 1)"));
    }
    let max_d = *distances.iter().max().expect("non-empty");
    let mut grid = PhaseGrid {
        rho_levels: rho_levels.to_vec(),
        distances: distances.to_vec(),
        epsilon,
        retention: Vec::new(),
        recoverable: Vec::new(),
        empirical_horizon: Vec::new(),
        censored: Vec::new(),
        horizon_bound: Vec::new(),
    };
    for &rho in rho_levels {
        let curve = retention_curve(ssm, rho, max_d, seed)?;
        let row: Vec<f64> = distances.iter().map(|&d| curve[d]).collect();
        grid.recoverable.push(row.iter().map(|&r| r >= epsilon).collect());
        grid.retention.push(row);
        let h = empirical_horizon(&curve, epsilon);
        grid.censored.push(h == max_d && curve[max_d] >= epsilon);
        grid.empirical_horizon.push(h);
        let bound = horizon_bound(&HorizonInputs {
            rho,
            kappa: 1.0,
            h0_norm: 1.0,
            epsilon,
            lambda_max_wc: 1.0,
        })?;
        grid.horizon_bound.push(bound.tokens);
    }
    Ok(grid)
}
