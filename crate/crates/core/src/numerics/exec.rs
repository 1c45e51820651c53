//! Execution backends for model arithmetic.
//!
//! Model step functions are written once against the [`Exec`] trait and run
//! on two backends: [`Tape`](super::tape::Tape) records every operation for
//! reverse-mode gradient accumulation, while [`ValueExec`] computes values
//! only and is used for evaluation, sampling and rollouts where no gradients
//! are needed. Keeping a single source of truth for the forward equations
//! means the two paths cannot drift apart.
//!
//! An executor session must be fed parameters from a single `ParamSet`;
//! handles are memoized per parameter id.

use std::collections::HashMap;

use super::params::{ParamId, ParamSet};
use super::tensor::{log_sum_exp, matvec, Tensor};

pub trait Exec {
    /// Handle to a computed value. Cheap to copy; only valid for the
    /// executor that produced it.
    type V: Copy + std::fmt::Debug;

    /// A value with no gradient.
    fn constant(&mut self, t: Tensor) -> Self::V;
    /// A whole parameter tensor. Memoized per id.
    fn param(&mut self, ps: &ParamSet, id: ParamId) -> Self::V;
    /// One row of a parameter matrix (embedding lookup).
    fn row(&mut self, ps: &ParamSet, id: ParamId, row: usize) -> Self::V;
    /// `W x + b` for a matrix W, vector x, vector b.
    fn affine(&mut self, w: Self::V, x: Self::V, b: Self::V) -> Self::V;
    /// Elementwise sum, shapes must match.
    fn add(&mut self, a: Self::V, b: Self::V) -> Self::V;
    /// Elementwise product, shapes must match.
    fn mul(&mut self, a: Self::V, b: Self::V) -> Self::V;
    fn sigmoid(&mut self, x: Self::V) -> Self::V;
    fn tanh(&mut self, x: Self::V) -> Self::V;
    /// Flattens the inputs into one vector, in order.
    fn concat(&mut self, parts: &[Self::V]) -> Self::V;
    fn scale(&mut self, x: Self::V, c: f64) -> Self::V;
    /// Sum of all entries, as a scalar.
    fn sum_all(&mut self, x: Self::V) -> Self::V;
    /// `-log softmax(logits)[target]`, computed with max subtraction.
    fn nll(&mut self, logits: Self::V, target: usize) -> Self::V;
    /// NLL under the softmax with one coordinate excluded and the rest
    /// renormalized: the exact log probability of a draw made after masking
    /// that coordinate away. The masked coordinate receives no gradient.
    fn nll_masked(&mut self, logits: Self::V, target: usize, masked: usize) -> Self::V;
    /// Binary cross-entropy of a sigmoid output against a 0/1 label,
    /// computed from the raw logit for stability.
    fn bce_with_logit(&mut self, logit: Self::V, label: f64) -> Self::V;

    fn value(&self, v: Self::V) -> &Tensor;

    fn zeros(&mut self, n: usize) -> Self::V {
        self.constant(Tensor::zeros(&[n]))
    }

    fn item(&self, v: Self::V) -> f64 {
        self.value(v).item()
    }
}

pub(crate) fn sigmoid_scalar(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub(crate) fn forward_sigmoid(x: &Tensor) -> Tensor {
    Tensor::from_vec(x.shape(), x.data().iter().map(|v| sigmoid_scalar(*v)).collect())
}

pub(crate) fn forward_tanh(x: &Tensor) -> Tensor {
    Tensor::from_vec(x.shape(), x.data().iter().map(|v| v.tanh()).collect())
}

pub(crate) fn forward_affine(w: &Tensor, x: &Tensor, b: &Tensor) -> Tensor {
    let mut y = matvec(w, x.data());
    assert_eq!(y.len(), b.len(), "affine: bias of {} for output of {}", b.len(), y.len());
    for (yi, bi) in y.iter_mut().zip(b.data()) {
        *yi += bi;
    }
    Tensor::vector(y)
}

pub(crate) fn forward_nll(logits: &Tensor, target: usize) -> f64 {
    assert!(
        target < logits.len(),
        "nll target {} out of range for {} logits",
        target,
        logits.len()
    );
    log_sum_exp(logits.data()) - logits.data()[target]
}

pub(crate) fn forward_nll_masked(logits: &Tensor, target: usize, masked: usize) -> f64 {
    let z = logits.data();
    assert!(
        target < z.len() && masked < z.len(),
        "nll_masked indices {target}/{masked} out of range for {} logits",
        z.len()
    );
    assert_ne!(target, masked, "nll_masked target is the masked coordinate");
    let kept: Vec<f64> = z
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != masked)
        .map(|(_, v)| *v)
        .collect();
    log_sum_exp(&kept) - z[target]
}

/// Softmax over all coordinates except `masked`, which gets exactly zero.
pub(crate) fn masked_softmax(z: &[f64], masked: usize) -> Vec<f64> {
    let m = z
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != masked)
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![0.0; z.len()];
    let mut denom = 0.0;
    for (i, v) in z.iter().enumerate() {
        if i != masked {
            let e = (v - m).exp();
            out[i] = e;
            denom += e;
        }
    }
    for v in out.iter_mut() {
        *v /= denom;
    }
    out
}

pub(crate) fn forward_bce_with_logit(z: f64, label: f64) -> f64 {
    debug_assert!(label == 0.0 || label == 1.0, "bce label must be 0 or 1");
    z.max(0.0) - z * label + (-z.abs()).exp().ln_1p()
}

/// Values-only executor. Results live in an internal arena; `reset` frees
/// per-step scratch while keeping memoized parameter handles alive, so a
/// long sampling loop does not grow without bound.
pub struct ValueExec {
    persist: Vec<Tensor>,
    scratch: Vec<Tensor>,
    param_memo: HashMap<usize, Val>,
}

#[derive(Clone, Copy, Debug)]
pub struct Val {
    idx: u32,
    persist: bool,
}

impl ValueExec {
    pub fn new() -> Self {
        ValueExec {
            persist: Vec::new(),
            scratch: Vec::new(),
            param_memo: HashMap::new(),
        }
    }

    /// Drops all scratch values. Parameter handles stay valid.
    pub fn reset(&mut self) {
        self.scratch.clear();
    }

    fn push(&mut self, t: Tensor) -> Val {
        self.scratch.push(t);
        Val {
            idx: (self.scratch.len() - 1) as u32,
            persist: false,
        }
    }

    fn tensor(&self, v: Val) -> &Tensor {
        if v.persist {
            &self.persist[v.idx as usize]
        } else {
            &self.scratch[v.idx as usize]
        }
    }
}

impl Default for ValueExec {
    fn default() -> Self {
        Self::new()
    }
}

impl Exec for ValueExec {
    type V = Val;

    fn constant(&mut self, t: Tensor) -> Val {
        self.push(t)
    }

    fn param(&mut self, ps: &ParamSet, id: ParamId) -> Val {
        if let Some(v) = self.param_memo.get(&id.0) {
            return *v;
        }
        self.persist.push(ps.value(id).clone());
        let v = Val {
            idx: (self.persist.len() - 1) as u32,
            persist: true,
        };
        self.param_memo.insert(id.0, v);
        v
    }

    fn row(&mut self, ps: &ParamSet, id: ParamId, row: usize) -> Val {
        self.push(Tensor::vector(ps.value(id).row(row).to_vec()))
    }

    fn affine(&mut self, w: Val, x: Val, b: Val) -> Val {
        let y = forward_affine(self.tensor(w), self.tensor(x), self.tensor(b));
        self.push(y)
    }

    fn add(&mut self, a: Val, b: Val) -> Val {
        let (ta, tb) = (self.tensor(a), self.tensor(b));
        assert_eq!(ta.shape(), tb.shape(), "add shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let t = Tensor::from_vec(ta.shape(), data);
        self.push(t)
    }

    fn mul(&mut self, a: Val, b: Val) -> Val {
        let (ta, tb) = (self.tensor(a), self.tensor(b));
        assert_eq!(ta.shape(), tb.shape(), "mul shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let t = Tensor::from_vec(ta.shape(), data);
        self.push(t)
    }

    fn sigmoid(&mut self, x: Val) -> Val {
        let t = forward_sigmoid(self.tensor(x));
        self.push(t)
    }

    fn tanh(&mut self, x: Val) -> Val {
        let t = forward_tanh(self.tensor(x));
        self.push(t)
    }

    fn concat(&mut self, parts: &[Val]) -> Val {
        let mut data = Vec::new();
        for p in parts {
            data.extend_from_slice(self.tensor(*p).data());
        }
        self.push(Tensor::vector(data))
    }

    fn scale(&mut self, x: Val, c: f64) -> Val {
        let t = self.tensor(x);
        let out = Tensor::from_vec(t.shape(), t.data().iter().map(|v| v * c).collect());
        self.push(out)
    }

    fn sum_all(&mut self, x: Val) -> Val {
        let s: f64 = self.tensor(x).data().iter().sum();
        self.push(Tensor::scalar(s))
    }

    fn nll(&mut self, logits: Val, target: usize) -> Val {
        let loss = forward_nll(self.tensor(logits), target);
        self.push(Tensor::scalar(loss))
    }

    fn nll_masked(&mut self, logits: Val, target: usize, masked: usize) -> Val {
        let loss = forward_nll_masked(self.tensor(logits), target, masked);
        self.push(Tensor::scalar(loss))
    }

    fn bce_with_logit(&mut self, logit: Val, label: f64) -> Val {
        let z = self.tensor(logit).item();
        self.push(Tensor::scalar(forward_bce_with_logit(z, label)))
    }

    fn value(&self, v: Val) -> &Tensor {
        self.tensor(v)
    }
}
