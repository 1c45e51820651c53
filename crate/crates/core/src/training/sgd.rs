//! SGD with global-norm gradient clipping.

use crate::numerics::ParamSet;

use super::TrainError;

/// Applies one update: clip the global gradient norm to `clip_norm`, then
/// θ ← θ − lr·g for every parameter. Gradients are zeroed afterwards.
/// Clipping rescales all gradients by one shared factor, so the update
/// direction is preserved exactly.
pub fn sgd_step(ps: &mut ParamSet, lr: f64, clip_norm: f64) -> Result<(), TrainError> {
    if !ps.grads_all_finite() {
        let bad = ps
            .iter()
            .find(|(_, p)| !p.grad.all_finite())
            .map(|(_, p)| p.name.clone())
            .unwrap_or_default();
        return Err(TrainError::NonFinite(format!("gradient of {bad}")));
    }
    let norm = ps.grad_norm();
    let scale = if norm > clip_norm { clip_norm / norm } else { 1.0 };
    for (_, p) in ps.iter_mut() {
        let step = lr * scale;
        let grad = p.grad.data_mut();
        let value = p.value.data_mut();
        for (v, g) in value.iter_mut().zip(grad.iter_mut()) {
            *v -= step * *g;
            *g = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Tensor;

    fn one_param(value: Vec<f64>, grad: Vec<f64>) -> ParamSet {
        let mut ps = ParamSet::new();
        let id = ps.add("w", Tensor::vector(value));
        let n = ps.get(id).value.len();
        assert_eq!(n, grad.len());
        ps.get_mut(id).grad = Tensor::vector(grad);
        ps
    }

    #[test]
    fn zero_lr_leaves_params_unchanged() {
        let mut ps = one_param(vec![1.0, -2.0], vec![5.0, 5.0]);
        sgd_step(&mut ps, 0.0, 1.0).unwrap();
        let id = ps.by_name("w").unwrap();
        assert_eq!(ps.value(id).data(), &[1.0, -2.0]);
    }

    #[test]
    fn plain_step_subtracts_scaled_gradient() {
        let mut ps = one_param(vec![1.0], vec![0.5]);
        sgd_step(&mut ps, 1.0, 100.0).unwrap();
        let id = ps.by_name("w").unwrap();
        assert_eq!(ps.value(id).data(), &[0.5]);
        assert_eq!(ps.get(id).grad.data(), &[0.0]);
    }

    #[test]
    fn clipping_halves_an_oversized_gradient() {
        // |g| = 10, clip 5 → effective gradient g/2.
        let mut ps = one_param(vec![0.0, 0.0], vec![6.0, 8.0]);
        sgd_step(&mut ps, 1.0, 5.0).unwrap();
        let id = ps.by_name("w").unwrap();
        assert_eq!(ps.value(id).data(), &[-3.0, -4.0]);
    }

    #[test]
    fn clipping_preserves_direction() {
        let grad = vec![3.0, -4.0, 12.0];
        let mut ps = one_param(vec![0.0; 3], grad.clone());
        sgd_step(&mut ps, 1.0, 1.0).unwrap();
        let id = ps.by_name("w").unwrap();
        let stepped = ps.value(id).data();
        // The update is anti-parallel to g: cross-ratios match.
        for k in 0..3 {
            let ratio = stepped[k] / grad[k];
            assert!((ratio - stepped[0] / grad[0]).abs() < 1e-12);
            assert!(ratio < 0.0);
        }
    }

    #[test]
    fn non_finite_gradient_aborts() {
        let mut ps = one_param(vec![1.0], vec![f64::NAN]);
        let err = sgd_step(&mut ps, 1.0, 5.0).unwrap_err();
        assert!(matches!(err, TrainError::NonFinite(_)));
        // Parameter untouched by the aborted step.
        let id = ps.by_name("w").unwrap();
        assert_eq!(ps.value(id).data(), &[1.0]);
    }
}
