//! Minimal scalar reverse-mode differentiation.
//!
//! Every node stores its value and the local partials to its parents in a
//! flat arena; [`Tape::gradient`] sweeps the arena backwards once.

use std::cell::RefCell;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Default)]
pub struct Tape {
    inner: RefCell<Arena>,
}

#[derive(Default)]
struct Arena {
    values: Vec<f64>,
    /// `(start, len)` into `edges` per node.
    spans: Vec<(usize, usize)>,
    edges: Vec<(usize, f64)>,
}

#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}({})", self.idx, self.value())
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.borrow().values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: f64, parents: &[(usize, f64)]) -> Var<'_> {
        let mut a = self.inner.borrow_mut();
        let start = a.edges.len();
        a.edges.extend_from_slice(parents);
        a.spans.push((start, parents.len()));
        a.values.push(value);
        Var {
            tape: self,
            idx: a.values.len() - 1,
        }
    }

    /// A leaf (input or constant).
    pub fn var(&self, value: f64) -> Var<'_> {
        self.push(value, &[])
    }

    /// `sum_i w_i x_i` with constant weights, as a single node.
    pub fn dot_const<'t>(&'t self, xs: &[Var<'t>], weights: &[f64]) -> Var<'t> {
        debug_assert_eq!(xs.len(), weights.len());
        let value = xs.iter().zip(weights).map(|(x, w)| x.value() * w).sum();
        let parents: Vec<(usize, f64)> = xs.iter().zip(weights).map(|(x, &w)| (x.idx, w)).collect();
        self.push(value, &parents)
    }

    pub fn sum<'t>(&'t self, xs: &[Var<'t>]) -> Var<'t> {
        let value = xs.iter().map(|x| x.value()).sum();
        let parents: Vec<(usize, f64)> = xs.iter().map(|x| (x.idx, 1.0)).collect();
        self.push(value, &parents)
    }

    /// Maximum; the subgradient goes to the lowest index among ties.
    pub fn max<'t>(&'t self, xs: &[Var<'t>]) -> Var<'t> {
        let mut best = 0;
        for (i, x) in xs.iter().enumerate() {
            if x.value() > xs[best].value() {
                best = i;
            }
        }
        self.push(xs[best].value(), &[(xs[best].idx, 1.0)])
    }

    /// `KL(softmax(z) || q)` for constant `log q`, as a single node.
    pub fn kl_from_logits<'t>(&'t self, logits: &[Var<'t>], log_q: &[f64]) -> Var<'t> {
        let z: Vec<f64> = logits.iter().map(|v| v.value()).collect();
        let zmax = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = zmax + z.iter().map(|v| (v - zmax).exp()).sum::<f64>().ln();
        let log_p: Vec<f64> = z.iter().map(|v| v - lse).collect();
        let kl: f64 = log_p.iter().zip(log_q).map(|(lp, lq)| lp.exp() * (lp - lq)).sum();
        let parents: Vec<(usize, f64)> = logits
            .iter()
            .zip(log_p.iter().zip(log_q))
            .map(|(v, (lp, lq))| (v.idx, lp.exp() * (lp - lq - kl)))
            .collect();
        self.push(kl, &parents)
    }

    /// Adjoints of `output` with respect to every node, indexed by node.
    pub fn gradient(&self, output: Var<'_>) -> Vec<f64> {
        let a = self.inner.borrow();
        let mut adj = vec![0.0; a.values.len()];
        adj[output.idx] = 1.0;
        for i in (0..=output.idx).rev() {
            let g = adj[i];
            if g == 0.0 {
                continue;
            }
            let (start, len) = a.spans[i];
            for &(p, w) in &a.edges[start..start + len] {
                adj[p] += g * w;
            }
        }
        adj
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.tape.inner.borrow().values[self.idx]
    }

    pub fn index(&self) -> usize {
        self.idx
    }

    pub fn exp(self) -> Var<'t> {
        let v = self.value().exp();
        self.tape.push(v, &[(self.idx, v)])
    }

    pub fn exp_m1(self) -> Var<'t> {
        let x = self.value();
        self.tape.push(x.exp_m1(), &[(self.idx, x.exp())])
    }

    pub fn ln(self) -> Var<'t> {
        let x = self.value();
        self.tape.push(x.ln(), &[(self.idx, 1.0 / x)])
    }

    pub fn softplus(self) -> Var<'t> {
        let x = self.value();
        let sig = 1.0 / (1.0 + (-x).exp());
        self.tape.push(crate::ssm::softplus(x), &[(self.idx, sig)])
    }

    /// Clamp with zero gradient outside `[lo, hi]`.
    pub fn clamp(self, lo: f64, hi: f64) -> Var<'t> {
        let x = self.value();
        if x < lo {
            self.tape.var(lo)
        } else if x > hi {
            self.tape.var(hi)
        } else {
            self
        }
    }

    pub fn scale(self, c: f64) -> Var<'t> {
        self.tape.push(self.value() * c, &[(self.idx, c)])
    }

    pub fn offset(self, c: f64) -> Var<'t> {
        self.tape.push(self.value() + c, &[(self.idx, 1.0)])
    }
}

impl<'t> Add for Var<'t> {
    type Output = Var<'t>;
    fn add(self, rhs: Var<'t>) -> Var<'t> {
        self.tape
            .push(self.value() + rhs.value(), &[(self.idx, 1.0), (rhs.idx, 1.0)])
    }
}

impl<'t> Sub for Var<'t> {
    type Output = Var<'t>;
    fn sub(self, rhs: Var<'t>) -> Var<'t> {
        self.tape
            .push(self.value() - rhs.value(), &[(self.idx, 1.0), (rhs.idx, -1.0)])
    }
}

impl<'t> Mul for Var<'t> {
    type Output = Var<'t>;
    fn mul(self, rhs: Var<'t>) -> Var<'t> {
        let (a, b) = (self.value(), rhs.value());
        self.tape.push(a * b, &[(self.idx, b), (rhs.idx, a)])
    }
}

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn composite_expression() {
        // f(x, y) = exp(x) * y - softplus(x * y)
        let f = |x: f64, y: f64| x.exp() * y - crate::ssm::softplus(x * y);
        let tape = Tape::new();
        let x = tape.var(0.3);
        let y = tape.var(-1.2);
        let out = x.exp() * y - (x * y).softplus();
        assert!((out.value() - f(0.3, -1.2)).abs() < 1e-15);
        let g = tape.gradient(out);
        assert!((g[x.index()] - fd(|v| f(v, -1.2), 0.3)).abs() < 1e-8);
        assert!((g[y.index()] - fd(|v| f(0.3, v), -1.2)).abs() < 1e-8);
    }

    #[test]
    fn max_prefers_lowest_index_on_ties() {
        let tape = Tape::new();
        let a = tape.var(1.0);
        let b = tape.var(1.0);
        let m = tape.max(&[a, b]);
        let g = tape.gradient(m);
        assert_eq!((g[a.index()], g[b.index()]), (1.0, 0.0));
    }

    #[test]
    fn kl_node_gradient() {
        let log_q: Vec<f64> = [0.1f64, 0.2, 0.7].iter().map(|v| v.ln()).collect();
        let kl = |z: &[f64]| {
            let lse = z.iter().map(|v| v.exp()).sum::<f64>().ln();
            z.iter()
                .zip(&log_q)
                .map(|(v, lq)| (v - lse).exp() * (v - lse - lq))
                .sum::<f64>()
        };
        let z0 = [0.5, -0.3, 1.1];
        let tape = Tape::new();
        let zs: Vec<Var> = z0.iter().map(|&v| tape.var(v)).collect();
        let out = tape.kl_from_logits(&zs, &log_q);
        assert!((out.value() - kl(&z0)).abs() < 1e-14);
        let g = tape.gradient(out);
        for i in 0..3 {
            let num = fd(
                |v| {
                    let mut z = z0;
                    z[i] = v;
                    kl(&z)
                },
                z0[i],
            );
            assert!((g[zs[i].index()] - num).abs() < 1e-8);
        }
    }

    #[test]
    fn clamp_blocks_gradient_outside() {
        let tape = Tape::new();
        let x = tape.var(5.0);
        let y = x.scale(2.0).clamp(0.0, 3.0);
        assert_eq!(tape.gradient(y)[x.index()], 0.0);
    }
}
