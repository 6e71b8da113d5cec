use serde::{Deserialize, Serialize};

use super::model::{apply_operator, DiscretizedOperator, SelectiveSsm};
use crate::error::Result;
use crate::linalg::{power_method, SpectralEstimate, SpectralMethod};
use crate::spectral::{spectral_gap, SpectralTrace};

/// Whether the probe treats `Abar` as diagonal (`k * d` multiply-adds) or
/// forces a dense mat-vec (`k * d^2`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMode {
    #[default]
    Diagonal,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub probe: bool,
    pub power_iters: usize,
    pub probe_mode: ProbeMode,
    /// Start-vector seed of layer `l` is `probe_seed + l`.
    pub probe_seed: u64,
    /// Keep the diagonal of `Abar` in each record.
    pub keep_operators: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            probe: true,
            power_iters: 3,
            probe_mode: ProbeMode::Diagonal,
            probe_seed: 0,
            keep_operators: false,
        }
    }
}

/// One `(t, layer)` step of a probed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub layer: usize,
    pub delta: f64,
    pub rho_hat: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_exact: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectral_gap: Option<f64>,
    #[serde(default)]
    pub h_norm_before: f64,
    #[serde(default)]
    pub h_norm_after: f64,
    #[serde(default)]
    pub probe_flops: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub abar: Vec<f64>,
}

impl StepRecord {
    /// A record carrying only a radius (replays and synthetic traces).
    pub fn from_rho(t: usize, layer: usize, rho: f64) -> Self {
        Self {
            t,
            layer,
            delta: 0.0,
            rho_hat: rho,
            rho_exact: None,
            spectral_gap: None,
            h_norm_before: 0.0,
            h_norm_after: 0.0,
            probe_flops: 0,
            abar: Vec::new(),
        }
    }
}

/// Called on every operator before it touches the state.
/// Per token, one operator per layer.
pub type OperatorsByToken = Vec<Vec<DiscretizedOperator>>;

pub type OperatorHook<'a> = dyn Fn(usize, &mut DiscretizedOperator) + 'a;

/// Estimate `rho(Abar)` the way the monitor does.
pub fn probe_operator(op: &DiscretizedOperator, opts: &RunOptions) -> SpectralEstimate {
    let seed = opts.probe_seed.wrapping_add(op.layer as u64);
    let estimate = match opts.probe_mode {
        ProbeMode::Diagonal => power_method(&op.abar, opts.power_iters, seed),
        ProbeMode::Dense => power_method(&op.abar.to_dense(), opts.power_iters, seed),
    };
    estimate.unwrap_or(SpectralEstimate {
        rho_hat: 0.0,
        iterations_used: 0,
        method: SpectralMethod::Power,
        matvec_flops: 0,
        degenerate: true,
    })
}

/// A proposed (uncommitted) token step across all layers.
#[derive(Debug, Clone)]
pub struct TokenStep {
    pub t: usize,
    pub operators: Vec<DiscretizedOperator>,
    pub next_states: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    norms_before: Vec<f64>,
}

impl TokenStep {
    pub fn records(&self, opts: &RunOptions) -> Vec<StepRecord> {
        self.operators
            .iter()
            .enumerate()
            .map(|(l, op)| {
                let est = probe_operator(op, opts);
                StepRecord {
                    t: self.t,
                    layer: l,
                    delta: op.delta,
                    rho_hat: est.rho_hat,
                    rho_exact: Some(op.rho),
                    spectral_gap: Some(spectral_gap(op)),
                    h_norm_before: self.norms_before[l],
                    h_norm_after: l2(&self.next_states[l]),
                    probe_flops: est.matvec_flops,
                    abar: if opts.keep_operators {
                        op.abar.diag()
                    } else {
                        Vec::new()
                    },
                }
            })
            .collect()
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Recurrent state of one sequence. Layers are wired through a residual
/// stream: `x_{l+1} = x_l + (C_l . h_l) w_out_l`.
#[derive(Debug, Clone)]
pub struct StreamState<'m> {
    model: &'m SelectiveSsm,
    states: Vec<Vec<f64>>,
    t: usize,
}

impl<'m> StreamState<'m> {
    pub fn new(model: &'m SelectiveSsm) -> Self {
        Self {
            model,
            states: vec![vec![0.0; model.d_state()]; model.n_layers()],
            t: 0,
        }
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn set_state(&mut self, layer: usize, h: Vec<f64>) {
        self.states[layer] = h;
    }

    pub fn position(&self) -> usize {
        self.t
    }

    pub fn propose(&self, token: usize, hook: Option<&OperatorHook<'_>>) -> Result<TokenStep> {
        self.propose_embedded(self.model.embed(token)?.to_vec(), hook)
    }

    /// Like [`propose`](Self::propose) but from an arbitrary input vector.
    pub fn propose_embedded(&self, mut x: Vec<f64>, hook: Option<&OperatorHook<'_>>) -> Result<TokenStep> {
        let model = self.model;
        if x.len() != model.d_model() {
            return Err(crate::error::Error::DimensionMismatch {
                expected: model.d_model(),
                got: x.len(),
            });
        }
        let mut operators = Vec::with_capacity(model.n_layers());
        let mut next_states = Vec::with_capacity(model.n_layers());
        let mut norms_before = Vec::with_capacity(model.n_layers());
        for l in 0..model.n_layers() {
            let delta = model.compute_delta(l, &x)?;
            let mut op = model.discretize(l, delta)?;
            if let Some(hook) = hook {
                hook(self.t, &mut op);
            }
            let u = model.input_channel(l, &x);
            let h = apply_operator(&op, &self.states[l], u);
            let y: f64 = model.c_row(l).iter().zip(&h).map(|(c, v)| c * v).sum();
            for (xi, wi) in x.iter_mut().zip(model.w_out_row(l)) {
                *xi += y * wi;
            }
            norms_before.push(l2(&self.states[l]));
            operators.push(op);
            next_states.push(h);
        }
        Ok(TokenStep {
            t: self.t,
            logits: model.logits(&x),
            operators,
            next_states,
            norms_before,
        })
    }

    pub fn commit(&mut self, step: TokenStep) -> Vec<f64> {
        self.states = step.next_states;
        self.t += 1;
        step.logits
    }
}

impl SelectiveSsm {
    /// Logits per token and, when `probe` is set, a trace with one record
    /// per layer per token (power-method estimate with `k = 3`).
    pub fn run_sequence(&self, tokens: &[usize], probe: bool) -> Result<(Vec<Vec<f64>>, SpectralTrace)> {
        let opts = RunOptions {
            probe,
            ..RunOptions::default()
        };
        self.run_with(tokens, &opts, None)
    }

    /// Logits and operators for a sequence of raw input vectors.
    pub fn run_embedded(&self, inputs: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, OperatorsByToken)> {
        let mut stream = StreamState::new(self);
        let mut logits = Vec::with_capacity(inputs.len());
        let mut ops = Vec::with_capacity(inputs.len());
        for x in inputs {
            let step = stream.propose_embedded(x.clone(), None)?;
            ops.push(step.operators.clone());
            logits.push(stream.commit(step));
        }
        Ok((logits, ops))
    }

    /// `n` operators visited while running random token streams of length
    /// 50 (stream `i` uses seed `seed + i`), in `(stream, t, layer)` order.
    pub fn sample_operators(&self, n: usize, seed: u64) -> Result<Vec<DiscretizedOperator>> {
        let mut out = Vec::with_capacity(n);
        let mut stream_seed = seed;
        while out.len() < n {
            let tokens = super::random_tokens(self.vocab_size(), 50, stream_seed);
            stream_seed = stream_seed.wrapping_add(1);
            let mut stream = StreamState::new(self);
            for &tok in &tokens {
                let step = stream.propose(tok, None)?;
                out.extend(step.operators.iter().cloned());
                stream.commit(step);
                if out.len() >= n {
                    break;
                }
            }
        }
        out.truncate(n);
        Ok(out)
    }

    pub fn run_with(
        &self,
        tokens: &[usize],
        opts: &RunOptions,
        hook: Option<&OperatorHook<'_>>,
    ) -> Result<(Vec<Vec<f64>>, SpectralTrace)> {
        let mut stream = StreamState::new(self);
        let mut trace = SpectralTrace::new(self.n_layers());
        let mut logits = Vec::with_capacity(tokens.len());
        for &tok in tokens {
            let step = stream.propose(tok, hook)?;
            if opts.probe {
                trace.push_token(step.records(opts))?;
            }
            logits.push(stream.commit(step));
        }
        Ok((logits, trace))
    }
}
