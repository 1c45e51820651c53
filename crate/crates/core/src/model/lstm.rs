//! Single LSTM cell over [input; hidden] with standard gate equations.

use crate::numerics::{Exec, ParamId, ParamSet, RngState, Tensor};

/// Gate parameters. All four gates map [x; h] of width D+H to H.
#[derive(Clone, Debug)]
pub struct LstmCell {
    pub w_i: ParamId,
    pub b_i: ParamId,
    pub w_f: ParamId,
    pub b_f: ParamId,
    pub w_o: ParamId,
    pub b_o: ParamId,
    pub w_g: ParamId,
    pub b_g: ParamId,
    pub input_size: usize,
    pub hidden_size: usize,
}

/// Hidden and memory vectors as executor handles, alive within one
/// executor session.
#[derive(Clone, Copy, Debug)]
pub struct CellState<V> {
    pub h: V,
    pub c: V,
}

/// Owned copy of a cell state, used to carry state across executor
/// sessions (rollouts restart from mid-sequence snapshots).
#[derive(Clone, Debug)]
pub struct CellSnapshot {
    pub h: Tensor,
    pub c: Tensor,
}

impl CellSnapshot {
    pub fn zero(hidden_size: usize) -> Self {
        CellSnapshot {
            h: Tensor::zeros(&[hidden_size]),
            c: Tensor::zeros(&[hidden_size]),
        }
    }
}

const WEIGHT_SCALE: f64 = 0.05;

impl LstmCell {
    /// Weights uniform in [-0.05, 0.05]; biases zero except the forget
    /// gate's, which starts at 1.0 so memory persists early in training.
    pub fn init(
        ps: &mut ParamSet,
        prefix: &str,
        input_size: usize,
        hidden_size: usize,
        rng: &mut RngState,
    ) -> Self {
        let shape = [hidden_size, input_size + hidden_size];
        let gate = |ps: &mut ParamSet, rng: &mut RngState, name: &str, bias: f64| {
            let w = ps.add_uniform(format!("{prefix}.w_{name}"), &shape, WEIGHT_SCALE, rng);
            let b = ps.add(
                format!("{prefix}.b_{name}"),
                Tensor::filled(&[hidden_size], bias),
            );
            (w, b)
        };
        let (w_i, b_i) = gate(ps, rng, "i", 0.0);
        let (w_f, b_f) = gate(ps, rng, "f", 1.0);
        let (w_o, b_o) = gate(ps, rng, "o", 0.0);
        let (w_g, b_g) = gate(ps, rng, "g", 0.0);
        LstmCell {
            w_i,
            b_i,
            w_f,
            b_f,
            w_o,
            b_o,
            w_g,
            b_g,
            input_size,
            hidden_size,
        }
    }

    /// One step: i,f,o = σ(W[x;h]+b), g = tanh(W[x;h]+b),
    /// c' = f⊙c + i⊙g, h' = o⊙tanh(c').
    pub fn step<E: Exec>(
        &self,
        ex: &mut E,
        ps: &ParamSet,
        x: E::V,
        s: &CellState<E::V>,
    ) -> CellState<E::V> {
        let xh = ex.concat(&[x, s.h]);
        let gate_lin = |ex: &mut E, w: ParamId, b: ParamId| {
            let w = ex.param(ps, w);
            let b = ex.param(ps, b);
            ex.affine(w, xh, b)
        };
        let i_lin = gate_lin(ex, self.w_i, self.b_i);
        let i = ex.sigmoid(i_lin);
        let f_lin = gate_lin(ex, self.w_f, self.b_f);
        let f = ex.sigmoid(f_lin);
        let o_lin = gate_lin(ex, self.w_o, self.b_o);
        let o = ex.sigmoid(o_lin);
        let g_lin = gate_lin(ex, self.w_g, self.b_g);
        let g = ex.tanh(g_lin);

        let keep = ex.mul(f, s.c);
        let write = ex.mul(i, g);
        let c = ex.add(keep, write);
        let ct = ex.tanh(c);
        let h = ex.mul(o, ct);
        CellState { h, c }
    }

    pub fn zero_state<E: Exec>(&self, ex: &mut E) -> CellState<E::V> {
        CellState {
            h: ex.zeros(self.hidden_size),
            c: ex.zeros(self.hidden_size),
        }
    }
}

pub fn snapshot<E: Exec>(ex: &E, s: &CellState<E::V>) -> CellSnapshot {
    CellSnapshot {
        h: ex.value(s.h).clone(),
        c: ex.value(s.c).clone(),
    }
}

pub fn inject<E: Exec>(ex: &mut E, snap: &CellSnapshot) -> CellState<E::V> {
    CellState {
        h: ex.constant(snap.h.clone()),
        c: ex.constant(snap.c.clone()),
    }
}
