//! Recording executor with reverse-mode differentiation.
//!
//! Every operation appends a node holding its inputs and computed value.
//! `backward` sweeps the nodes in reverse creation order, which is a valid
//! reverse topological order because inputs always precede their consumers,
//! and accumulates parameter gradients into the owning `ParamSet`.

use std::collections::HashMap;

use super::exec::{
    forward_affine, forward_bce_with_logit, forward_nll, forward_nll_masked, forward_sigmoid,
    forward_tanh, masked_softmax, sigmoid_scalar, Exec,
};
use super::params::{ParamId, ParamSet};
use super::tensor::{matvec_transposed, softmax, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(usize);

enum Op {
    Constant,
    Param(ParamId),
    Row { param: ParamId, row: usize },
    Affine { w: NodeId, x: NodeId, b: NodeId },
    Add { a: NodeId, b: NodeId },
    Mul { a: NodeId, b: NodeId },
    Sigmoid { x: NodeId },
    Tanh { x: NodeId },
    Concat { parts: Vec<NodeId> },
    Scale { x: NodeId, c: f64 },
    SumAll { x: NodeId },
    Nll { logits: NodeId, target: usize },
    NllMasked { logits: NodeId, target: usize, masked: usize },
    BceWithLogit { logit: NodeId, label: f64 },
}

struct Node {
    op: Op,
    value: Tensor,
    grad: Option<Tensor>,
}

pub struct Tape {
    nodes: Vec<Node>,
    param_memo: HashMap<usize, NodeId>,
    swept: bool,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            param_memo: HashMap::new(),
            swept: false,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            grad: None,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn val(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Adds `g` into the gradient buffer of node `id`, allocating it on
    /// first touch.
    fn add_grad(&mut self, id: NodeId, g: &[f64]) {
        let node = &mut self.nodes[id.0];
        let buf = node
            .grad
            .get_or_insert_with(|| Tensor::zeros(node.value.shape()));
        debug_assert_eq!(buf.len(), g.len());
        for (b, v) in buf.data_mut().iter_mut().zip(g) {
            *b += v;
        }
    }

    /// Accumulates d(loss)/d(param) into `ps` for every parameter reachable
    /// from `loss`, scaled so that the loss node itself has gradient 1.
    /// Existing gradients in `ps` are added to, not replaced. A tape can be
    /// swept once; record a fresh tape for another pass.
    pub fn backward(&mut self, loss: NodeId, ps: &mut ParamSet) {
        assert!(!self.swept, "tape already swept; record a new one");
        self.swept = true;
        assert_eq!(
            self.nodes[loss.0].value.len(),
            1,
            "backward needs a scalar loss"
        );
        self.nodes[loss.0].grad = Some(Tensor::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let g = match self.nodes[i].grad.take() {
                Some(g) => g,
                None => continue,
            };
            match &self.nodes[i].op {
                Op::Constant => {}
                Op::Param(id) => {
                    ps.accumulate_grad(*id, &g);
                }
                Op::Row { param, row } => {
                    ps.accumulate_grad_row(*param, *row, g.data());
                }
                Op::Affine { w, x, b } => {
                    let (w, x, b) = (*w, *x, *b);
                    let dx = matvec_transposed(self.val(w), g.data());
                    // dW[i][j] = g[i] * x[j]
                    let xv = self.val(x).data().to_vec();
                    let (m, n) = (self.val(w).rows(), self.val(w).cols());
                    let mut dw = vec![0.0; m * n];
                    for r in 0..m {
                        let gr = g.data()[r];
                        for c in 0..n {
                            dw[r * n + c] = gr * xv[c];
                        }
                    }
                    self.add_grad(w, &dw);
                    self.add_grad(x, &dx);
                    self.add_grad(b, g.data());
                }
                Op::Add { a, b } => {
                    let (a, b) = (*a, *b);
                    self.add_grad(a, g.data());
                    self.add_grad(b, g.data());
                }
                Op::Mul { a, b } => {
                    let (a, b) = (*a, *b);
                    let da: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(self.val(b).data())
                        .map(|(g, bv)| g * bv)
                        .collect();
                    let db: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(self.val(a).data())
                        .map(|(g, av)| g * av)
                        .collect();
                    self.add_grad(a, &da);
                    self.add_grad(b, &db);
                }
                Op::Sigmoid { x } => {
                    let x = *x;
                    let dx: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(self.nodes[i].value.data())
                        .map(|(g, s)| g * s * (1.0 - s))
                        .collect();
                    self.add_grad(x, &dx);
                }
                Op::Tanh { x } => {
                    let x = *x;
                    let dx: Vec<f64> = g
                        .data()
                        .iter()
                        .zip(self.nodes[i].value.data())
                        .map(|(g, t)| g * (1.0 - t * t))
                        .collect();
                    self.add_grad(x, &dx);
                }
                Op::Concat { parts } => {
                    let parts = parts.clone();
                    let mut off = 0;
                    for p in parts {
                        let n = self.val(p).len();
                        let slice = g.data()[off..off + n].to_vec();
                        self.add_grad(p, &slice);
                        off += n;
                    }
                }
                Op::Scale { x, c } => {
                    let (x, c) = (*x, *c);
                    let dx: Vec<f64> = g.data().iter().map(|g| g * c).collect();
                    self.add_grad(x, &dx);
                }
                Op::SumAll { x } => {
                    let x = *x;
                    let dx = vec![g.item(); self.val(x).len()];
                    self.add_grad(x, &dx);
                }
                Op::Nll { logits, target } => {
                    let (logits, target) = (*logits, *target);
                    let mut dl = softmax(self.val(logits).data());
                    dl[target] -= 1.0;
                    let gs = g.item();
                    for v in dl.iter_mut() {
                        *v *= gs;
                    }
                    self.add_grad(logits, &dl);
                }
                Op::NllMasked {
                    logits,
                    target,
                    masked,
                } => {
                    let (logits, target, masked) = (*logits, *target, *masked);
                    let mut dl = masked_softmax(self.val(logits).data(), masked);
                    dl[target] -= 1.0;
                    debug_assert_eq!(dl[masked], 0.0);
                    let gs = g.item();
                    for v in dl.iter_mut() {
                        *v *= gs;
                    }
                    self.add_grad(logits, &dl);
                }
                Op::BceWithLogit { logit, label } => {
                    let (logit, label) = (*logit, *label);
                    let z = self.val(logit).item();
                    let dz = g.item() * (sigmoid_scalar(z) - label);
                    self.add_grad(logit, &[dz]);
                }
            }
        }
    }
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

impl Exec for Tape {
    type V = NodeId;

    fn constant(&mut self, t: Tensor) -> NodeId {
        self.push(Op::Constant, t)
    }

    fn param(&mut self, ps: &ParamSet, id: ParamId) -> NodeId {
        if let Some(n) = self.param_memo.get(&id.0) {
            return *n;
        }
        let n = self.push(Op::Param(id), ps.value(id).clone());
        self.param_memo.insert(id.0, n);
        n
    }

    fn row(&mut self, ps: &ParamSet, id: ParamId, row: usize) -> NodeId {
        let t = Tensor::vector(ps.value(id).row(row).to_vec());
        self.push(Op::Row { param: id, row }, t)
    }

    fn affine(&mut self, w: NodeId, x: NodeId, b: NodeId) -> NodeId {
        let y = forward_affine(self.val(w), self.val(x), self.val(b));
        self.push(Op::Affine { w, x, b }, y)
    }

    fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.val(a), self.val(b));
        assert_eq!(ta.shape(), tb.shape(), "add shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x + y).collect();
        let t = Tensor::from_vec(ta.shape(), data);
        self.push(Op::Add { a, b }, t)
    }

    fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ta, tb) = (self.val(a), self.val(b));
        assert_eq!(ta.shape(), tb.shape(), "mul shape mismatch");
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let t = Tensor::from_vec(ta.shape(), data);
        self.push(Op::Mul { a, b }, t)
    }

    fn sigmoid(&mut self, x: NodeId) -> NodeId {
        let t = forward_sigmoid(self.val(x));
        self.push(Op::Sigmoid { x }, t)
    }

    fn tanh(&mut self, x: NodeId) -> NodeId {
        let t = forward_tanh(self.val(x));
        self.push(Op::Tanh { x }, t)
    }

    fn concat(&mut self, parts: &[NodeId]) -> NodeId {
        let mut data = Vec::new();
        for p in parts {
            data.extend_from_slice(self.val(*p).data());
        }
        self.push(
            Op::Concat {
                parts: parts.to_vec(),
            },
            Tensor::vector(data),
        )
    }

    fn scale(&mut self, x: NodeId, c: f64) -> NodeId {
        let t = self.val(x);
        let out = Tensor::from_vec(t.shape(), t.data().iter().map(|v| v * c).collect());
        self.push(Op::Scale { x, c }, out)
    }

    fn sum_all(&mut self, x: NodeId) -> NodeId {
        let s: f64 = self.val(x).data().iter().sum();
        self.push(Op::SumAll { x }, Tensor::scalar(s))
    }

    fn nll(&mut self, logits: NodeId, target: usize) -> NodeId {
        let loss = forward_nll(self.val(logits), target);
        self.push(Op::Nll { logits, target }, Tensor::scalar(loss))
    }

    fn nll_masked(&mut self, logits: NodeId, target: usize, masked: usize) -> NodeId {
        let loss = forward_nll_masked(self.val(logits), target, masked);
        self.push(
            Op::NllMasked {
                logits,
                target,
                masked,
            },
            Tensor::scalar(loss),
        )
    }

    fn bce_with_logit(&mut self, logit: NodeId, label: f64) -> NodeId {
        let z = self.val(logit).item();
        self.push(
            Op::BceWithLogit { logit, label },
            Tensor::scalar(forward_bce_with_logit(z, label)),
        )
    }

    fn value(&self, v: NodeId) -> &Tensor {
        self.val(v)
    }
}
