//! Binary classifier over token sequences: real corpus text vs generator
//! output.

use crate::corpus::{Layout, Token};
use crate::model::{LstmCell, ModelDims};
use crate::numerics::{Exec, ParamId, ParamSet, RngState, Tape, ValueExec};
use crate::training::{sgd_step, TrainError};

const EMBED_SCALE: f64 = 0.1;
const WEIGHT_SCALE: f64 = 0.05;
const CLIP: f64 = 5.0;

/// LSTM encoder over the union vocabulary with a sigmoid head. The output
/// is the probability that the input sequence is real text.
#[derive(Clone, Debug)]
pub struct Discriminator {
    pub ps: ParamSet,
    pub layout: Layout,
    pub dims: ModelDims,
    emb: ParamId,
    cell: LstmCell,
    out_w: ParamId,
    out_b: ParamId,
}

impl Discriminator {
    pub fn new(layout: Layout, dims: ModelDims, rng: &mut RngState) -> Self {
        let mut ps = ParamSet::new();
        let emb = ps.add_uniform("disc.emb", &[layout.total(), dims.embed], EMBED_SCALE, rng);
        let cell = LstmCell::init(&mut ps, "disc.cell", dims.embed, dims.hidden, rng);
        let out_w = ps.add_uniform("disc.out.w", &[1, dims.hidden], WEIGHT_SCALE, rng);
        let out_b = ps.add(
            "disc.out.b",
            crate::numerics::Tensor::zeros(&[1]),
        );
        Discriminator {
            ps,
            layout,
            dims,
            emb,
            cell,
            out_w,
            out_b,
        }
    }

    /// Raw classification logit; sigmoid of this is P(real).
    pub fn logit<E: Exec>(&self, ex: &mut E, seq: &[Token]) -> E::V {
        assert!(!seq.is_empty(), "cannot classify an empty sequence");
        let mut state = self.cell.zero_state(ex);
        for t in seq {
            assert!(t.index < self.layout.total(), "token outside vocabulary");
            let x = ex.row(&self.ps, self.emb, t.index);
            state = self.cell.step(ex, &self.ps, x, &state);
        }
        let w = ex.param(&self.ps, self.out_w);
        let b = ex.param(&self.ps, self.out_b);
        ex.affine(w, state.h, b)
    }

    /// P(real) through a caller-owned executor. The executor is reset on
    /// entry and must be discarded whenever the parameters change, since
    /// executors memoize parameter values.
    pub fn prob_with(&self, ex: &mut ValueExec, seq: &[Token]) -> f64 {
        ex.reset();
        let z = self.logit(ex, seq);
        let p = ex.sigmoid(z);
        ex.item(p)
    }

    /// P(real) with a throwaway executor.
    pub fn prob(&self, seq: &[Token]) -> f64 {
        self.prob_with(&mut ValueExec::new(), seq)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DiscOptions {
    pub lr: f64,
    pub batch: usize,
    pub holdout_frac: f64,
}

impl Default for DiscOptions {
    fn default() -> Self {
        DiscOptions {
            lr: 0.1,
            batch: 32,
            holdout_frac: 0.2,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DiscReport {
    /// Accuracy on the held-out fraction (or on the training pools when the
    /// holdout rounds down to empty).
    pub holdout_accuracy: f64,
    /// Mean minibatch BCE per step, in step order.
    pub losses: Vec<f64>,
}

/// Runs `steps` balanced minibatches of binary cross-entropy. Each batch
/// draws half real, half fake, uniformly with replacement from the training
/// portion of each pool; the held-out portions never receive gradients.
pub fn train_discriminator(
    disc: &mut Discriminator,
    real: &[Vec<Token>],
    fake: &[Vec<Token>],
    steps: usize,
    opts: &DiscOptions,
    rng: &mut RngState,
) -> Result<DiscReport, TrainError> {
    if real.is_empty() || fake.is_empty() {
        return Err(TrainError::SingleClass);
    }
    assert!(opts.batch >= 2, "need at least one example per class");
    assert!(
        (0.0..1.0).contains(&opts.holdout_frac),
        "holdout fraction must be in [0, 1)"
    );
    let split_pool = |pool: &[Vec<Token>], rng: &mut RngState| {
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        rng.shuffle(&mut idx);
        let hold = (opts.holdout_frac * pool.len() as f64).floor() as usize;
        let held: Vec<Vec<Token>> = idx[..hold].iter().map(|&i| pool[i].clone()).collect();
        let train: Vec<Vec<Token>> = idx[hold..].iter().map(|&i| pool[i].clone()).collect();
        (held, train)
    };
    let (real_held, real_train) = split_pool(real, rng);
    let (fake_held, fake_train) = split_pool(fake, rng);

    let half = opts.batch / 2;
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let mut tape = Tape::new();
        let mut terms = Vec::with_capacity(half * 2);
        for _ in 0..half {
            let r = &real_train[rng.below(real_train.len())];
            let z = disc.logit(&mut tape, r);
            terms.push(tape.bce_with_logit(z, 1.0));
            let f = &fake_train[rng.below(fake_train.len())];
            let z = disc.logit(&mut tape, f);
            terms.push(tape.bce_with_logit(z, 0.0));
        }
        let mut acc = terms[0];
        for t in &terms[1..] {
            acc = tape.add(acc, *t);
        }
        let loss = tape.scale(acc, 1.0 / terms.len() as f64);
        let loss_v = tape.item(loss);
        if !loss_v.is_finite() {
            return Err(TrainError::NonFinite(format!(
                "discriminator loss at step {step}"
            )));
        }
        losses.push(loss_v);
        tape.backward(loss, &mut disc.ps);
        sgd_step(&mut disc.ps, opts.lr, CLIP)?;
    }

    let (eval_real, eval_fake) = if real_held.is_empty() || fake_held.is_empty() {
        (&real_train, &fake_train)
    } else {
        (&real_held, &fake_held)
    };
    let mut ex = ValueExec::new();
    let mut correct = 0usize;
    for s in eval_real {
        if disc.prob_with(&mut ex, s) > 0.5 {
            correct += 1;
        }
    }
    for s in eval_fake {
        if disc.prob_with(&mut ex, s) <= 0.5 {
            correct += 1;
        }
    }
    let holdout_accuracy = correct as f64 / (eval_real.len() + eval_fake.len()) as f64;
    Ok(DiscReport {
        holdout_accuracy,
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Lang;

    fn layout() -> Layout {
        Layout { n0: 5, n1: 5 }
    }

    fn dims() -> ModelDims {
        ModelDims { embed: 4, hidden: 6 }
    }

    fn seq_of(layout: &Layout, index: usize, len: usize) -> Vec<Token> {
        let lang = layout.lang_of(index).unwrap();
        vec![Token { lang, index }; len]
    }

    #[test]
    fn probabilities_are_valid() {
        let mut rng = RngState::seeded(1);
        let disc = Discriminator::new(layout(), dims(), &mut rng);
        let s = seq_of(&layout(), 4, 6);
        let p = disc.prob(&s);
        assert!(p > 0.0 && p < 1.0);
    }

    #[test]
    fn zero_weights_sit_on_the_fence() {
        let mut rng = RngState::seeded(2);
        let mut disc = Discriminator::new(layout(), dims(), &mut rng);
        for (_, p) in disc.ps.iter_mut() {
            p.value.fill(0.0);
        }
        let s = seq_of(&layout(), 3, 5);
        assert!((disc.prob(&s) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_class_is_rejected() {
        let mut rng = RngState::seeded(3);
        let mut disc = Discriminator::new(layout(), dims(), &mut rng);
        let real = vec![seq_of(&layout(), 4, 4)];
        let err = train_discriminator(
            &mut disc,
            &real,
            &[],
            1,
            &DiscOptions::default(),
            &mut rng,
        )
        .unwrap_err();
        assert!(matches!(err, TrainError::SingleClass));
    }

    // Real sequences use one token, fake another: perfectly separable, so
    // training must drive accuracy high and loss down.
    #[test]
    fn separable_classes_are_learned() {
        let lay = layout();
        let mut rng = RngState::seeded(4);
        let mut disc = Discriminator::new(lay, dims(), &mut rng);
        let real: Vec<_> = (0..40).map(|_| seq_of(&lay, 4, 5)).collect();
        let fake: Vec<_> = (0..40).map(|_| seq_of(&lay, 4 + lay.n0, 5)).collect();
        let opts = DiscOptions {
            lr: 0.5,
            batch: 8,
            holdout_frac: 0.2,
        };
        let report =
            train_discriminator(&mut disc, &real, &fake, 120, &opts, &mut rng).unwrap();
        assert!(
            report.holdout_accuracy > 0.95,
            "accuracy {}",
            report.holdout_accuracy
        );
        let head: f64 = report.losses[..10].iter().sum::<f64>() / 10.0;
        let tail: f64 = report.losses[report.losses.len() - 10..].iter().sum::<f64>() / 10.0;
        assert!(tail < head, "loss did not decrease: {head} -> {tail}");
    }

    // When the two classes are the same multiset no classifier can beat
    // chance; held-out accuracy must sit near one half. The pool is made
    // of diverse random sequences so quantization effects wash out.
    #[test]
    fn identical_classes_hover_at_chance() {
        let lay = layout();
        let mut rng = RngState::seeded(5);
        let mut disc = Discriminator::new(lay, dims(), &mut rng);
        let reals = [4, 5, 6, 4 + lay.n0, 5 + lay.n0, 6 + lay.n0];
        let mut pool = Vec::new();
        for _ in 0..1000 {
            let seq: Vec<Token> = (0..4)
                .map(|_| {
                    let index = reals[rng.below(reals.len())];
                    Token {
                        lang: lay.lang_of(index).unwrap(),
                        index,
                    }
                })
                .collect();
            pool.push(seq);
        }
        let opts = DiscOptions {
            lr: 0.2,
            batch: 16,
            holdout_frac: 0.2,
        };
        let report =
            train_discriminator(&mut disc, &pool, &pool.clone(), 60, &opts, &mut rng).unwrap();
        assert!(
            (report.holdout_accuracy - 0.5).abs() <= 0.05,
            "accuracy {}",
            report.holdout_accuracy
        );
    }
}
