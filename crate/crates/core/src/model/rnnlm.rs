//! Baseline language model: one LSTM over the merged vocabulary.

use crate::corpus::{FeatureVector, Layout};
use crate::numerics::{Exec, ParamId, ParamSet, RngState, Tensor};

use super::features::FeatureChannel;
use super::lstm::{CellSnapshot, CellState, LstmCell};
use super::ModelDims;

#[derive(Clone, Debug)]
pub struct Rnnlm {
    pub ps: ParamSet,
    pub layout: Layout,
    pub dims: ModelDims,
    emb: ParamId,
    cell: LstmCell,
    out_w: ParamId,
    out_b: ParamId,
    pub features: Vec<FeatureChannel>,
}

const EMBED_SCALE: f64 = 0.1;
const WEIGHT_SCALE: f64 = 0.05;

impl Rnnlm {
    pub fn new(
        layout: Layout,
        dims: ModelDims,
        feature_decls: &[crate::corpus::FeatureDecl],
        rng: &mut RngState,
    ) -> Self {
        let mut ps = ParamSet::new();
        let (d, h) = (dims.embed, dims.hidden);
        // One row per global index. The EOS and dummy rows are never read
        // (EOS is only ever a target, dummies belong to the dual model) but
        // keeping the table dense makes indexing trivial.
        let emb = ps.add_uniform("emb", &[layout.total(), d], EMBED_SCALE, rng);
        let features = FeatureChannel::init_all(&mut ps, feature_decls, EMBED_SCALE, rng);
        let input_size = d + features.iter().map(|f| f.width).sum::<usize>();
        let cell = LstmCell::init(&mut ps, "cell", input_size, h, rng);
        let out_w = ps.add_uniform("out.w", &[layout.scorable_count(), h], WEIGHT_SCALE, rng);
        let out_b = ps.add("out.b", Tensor::zeros(&[layout.scorable_count()]));
        Rnnlm {
            ps,
            layout,
            dims,
            emb,
            cell,
            out_w,
            out_b,
            features,
        }
    }

    pub fn encode_input<E: Exec>(
        &self,
        ex: &mut E,
        index: usize,
        features: Option<&FeatureVector>,
    ) -> E::V {
        let emb = ex.row(&self.ps, self.emb, index);
        if self.features.is_empty() {
            return emb;
        }
        let mut parts = vec![emb];
        for (i, ch) in self.features.iter().enumerate() {
            parts.push(ch.encode(ex, &self.ps, i, features));
        }
        ex.concat(&parts)
    }

    pub fn zero_state<E: Exec>(&self, ex: &mut E) -> CellState<E::V> {
        self.cell.zero_state(ex)
    }

    /// One step: consume global index, emit scorable-union logits.
    pub fn step<E: Exec>(
        &self,
        ex: &mut E,
        index: usize,
        features: Option<&FeatureVector>,
        state: &CellState<E::V>,
    ) -> (CellState<E::V>, E::V) {
        assert!(index < self.layout.total(), "token index out of vocabulary");
        let x = self.encode_input(ex, index, features);
        let next = self.cell.step(ex, &self.ps, x, state);
        let w = ex.param(&self.ps, self.out_w);
        let b = ex.param(&self.ps, self.out_b);
        let logits = ex.affine(w, next.h, b);
        (next, logits)
    }

    pub fn snapshot<E: Exec>(&self, ex: &E, s: &CellState<E::V>) -> CellSnapshot {
        super::lstm::snapshot(ex, s)
    }

    pub fn inject<E: Exec>(&self, ex: &mut E, snap: &CellSnapshot) -> CellState<E::V> {
        super::lstm::inject(ex, snap)
    }
}
