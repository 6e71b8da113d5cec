use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::SpectralTrace;
use crate::ssm::{OperatorHook, RunOptions, SelectiveSsm, StreamState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuardConfig {
    pub rho_min: f64,
    pub window: usize,
    pub power_iters: usize,
    /// Reported only; never used to block.
    pub rho_critical: f64,
}

impl Default for GuardConfig {
    fn default() -> Self {
        Self {
            rho_min: 0.30,
            window: 10,
            power_iters: 3,
            rho_critical: 0.90,
        }
    }
}

impl GuardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_min > 0.0 && self.rho_min < 1.0) {
            return Err(Error::invalid(format!(
                "rho_min must be in (0, 1), got {}",
                self.rho_min
            )));
        }
        if self.window == 0 || self.power_iters == 0 {
            return Err(Error::invalid("window and power_iters must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Pass,
    Block,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuardVerdict {
    pub decision: Decision,
    pub trigger_token: Option<usize>,
    pub window_min_rho: f64,
}

impl GuardVerdict {
    pub fn is_block(&self) -> bool {
        self.decision == Decision::Block
    }

    fn pass(window_min_rho: f64) -> Self {
        Self {
            decision: Decision::Pass,
            trigger_token: None,
            window_min_rho,
        }
    }
}

/// The last `capacity` monitored values of one stream.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoWindow {
    values: VecDeque<f64>,
    capacity: usize,
    t: usize,
}

impl RhoWindow {
    pub fn new(capacity: usize) -> Self {
        Self {
            values: VecDeque::with_capacity(capacity),
            capacity: capacity.max(1),
            t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Number of values pushed so far.
    pub fn position(&self) -> usize {
        self.t
    }
}

/// Pushes `new_rho` and blocks iff the window minimum is below `rho_min`.
/// The trigger is the index of the value just pushed.
pub fn monitor_step(window: &mut RhoWindow, new_rho: f64, config: &GuardConfig) -> GuardVerdict {
    if window.values.len() == window.capacity {
        window.values.pop_front();
    }
    window.values.push_back(new_rho);
    let t = window.t;
    window.t += 1;
    let m = window.min();
    if m < config.rho_min {
        GuardVerdict {
            decision: Decision::Block,
            trigger_token: Some(t),
            window_min_rho: m,
        }
    } else {
        GuardVerdict::pass(m)
    }
}

/// Replays the per-token minimum across layers; returns the first blocking
/// verdict, or the final pass verdict (`window_min_rho` = +inf when empty).
pub fn monitor_trace(trace: &SpectralTrace, config: &GuardConfig) -> GuardVerdict {
    let mut window = RhoWindow::new(config.window);
    let mut last = GuardVerdict::pass(f64::INFINITY);
    for rho in trace.min_rho_stream() {
        last = monitor_step(&mut window, rho, config);
        if last.is_block() {
            break;
        }
    }
    last
}

/// Per-token verdicts over a whole trace, without halting.
pub fn monitor_all(trace: &SpectralTrace, config: &GuardConfig) -> Vec<GuardVerdict> {
    let mut window = RhoWindow::new(config.window);
    trace
        .min_rho_stream()
        .into_iter()
        .map(|rho| monitor_step(&mut window, rho, config))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuardedRun {
    /// Greedy next-token prediction for every committed position.
    pub emitted: Vec<usize>,
    pub verdict: GuardVerdict,
    /// Includes the records of the blocked token, if any.
    pub trace: SpectralTrace,
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Gated run: per token, probe every layer, monitor the minimum `rho_hat`
/// and, on a block, stop without emitting or updating the state.
pub fn guarded_generate(
    ssm: &SelectiveSsm,
    tokens: &[usize],
    config: &GuardConfig,
    hook: Option<&OperatorHook<'_>>,
) -> Result<GuardedRun> {
    config.validate()?;
    let opts = RunOptions {
        power_iters: config.power_iters,
        ..RunOptions::default()
    };
    let mut stream = StreamState::new(ssm);
    let mut window = RhoWindow::new(config.window);
    let mut trace = SpectralTrace::new(ssm.n_layers());
    let mut emitted = Vec::with_capacity(tokens.len());
    let mut verdict = GuardVerdict::pass(f64::INFINITY);
    for &tok in tokens {
        let step = stream.propose(tok, hook)?;
        let records = step.records(&opts);
        let min_rho = records.iter().map(|r| r.rho_hat).fold(f64::INFINITY, f64::min);
        trace.push_token(records)?;
        verdict = monitor_step(&mut window, min_rho, config);
        if verdict.is_block() {
            break;
        }
        emitted.push(argmax(&stream.commit(step)));
    }
    Ok(GuardedRun {
        emitted,
        verdict,
        trace,
    })
}
