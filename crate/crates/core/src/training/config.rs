//! Training hyperparameters and the learning-rate schedule.

use super::TrainError;

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub initial_lr: f64,
    pub decay_rate: f64,
    /// Decay multiplies in strictly after this epoch (1-indexed).
    pub decay_start_epoch: usize,
    pub total_epochs: usize,
    pub batch_size: usize,
    pub grad_clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            initial_lr: 1.0,
            decay_rate: 0.98,
            decay_start_epoch: 80,
            total_epochs: 100,
            batch_size: 32,
            grad_clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(TrainError::BadConfig(format!(
                "decay_rate {} outside (0, 1]",
                self.decay_rate
            )));
        }
        if self.decay_start_epoch > self.total_epochs {
            return Err(TrainError::BadConfig(format!(
                "decay_start_epoch {} exceeds total_epochs {}",
                self.decay_start_epoch, self.total_epochs
            )));
        }
        if self.total_epochs == 0 || self.batch_size == 0 {
            return Err(TrainError::BadConfig(
                "total_epochs and batch_size must be positive".into(),
            ));
        }
        if !(self.grad_clip_norm > 0.0) || !(self.initial_lr >= 0.0) {
            return Err(TrainError::BadConfig(
                "grad_clip_norm must be positive and initial_lr non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Constant until `decay_start_epoch`, then exponential per epoch.
pub fn lr_at_epoch(cfg: &TrainConfig, e: usize) -> f64 {
    assert!(
        (1..=cfg.total_epochs).contains(&e),
        "epoch {e} outside 1..={}",
        cfg.total_epochs
    );
    if e <= cfg.decay_start_epoch {
        cfg.initial_lr
    } else {
        cfg.initial_lr * cfg.decay_rate.powi((e - cfg.decay_start_epoch) as i32)
    }
}

/// Teacher-forcing probability schedule: linear from 1.0 at epoch 1 down to
/// `floor` at the final epoch.
#[derive(Clone, Copy, Debug)]
pub struct SsSchedule {
    pub floor: f64,
}

impl SsSchedule {
    pub fn p_teacher(&self, epoch: usize, total_epochs: usize) -> f64 {
        assert!((1..=total_epochs).contains(&epoch));
        assert!((0.0..=1.0).contains(&self.floor));
        if total_epochs == 1 {
            return self.floor;
        }
        let frac = (epoch - 1) as f64 / (total_epochs - 1) as f64;
        1.0 - (1.0 - self.floor) * frac
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lr_schedule_endpoints() {
        let cfg = TrainConfig::default();
        assert_eq!(lr_at_epoch(&cfg, 1), 1.0);
        assert_eq!(lr_at_epoch(&cfg, 80), 1.0);
        assert_eq!(lr_at_epoch(&cfg, 81), 0.98);
        let e90 = lr_at_epoch(&cfg, 90);
        assert!((e90 - 0.98f64.powi(10)).abs() < 1e-15);
        assert!((e90 - 0.81707).abs() < 1e-5);
    }

    #[test]
    fn lr_is_non_increasing() {
        let cfg = TrainConfig::default();
        let mut prev = f64::INFINITY;
        for e in 1..=cfg.total_epochs {
            let lr = lr_at_epoch(&cfg, e);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = TrainConfig::default();
        cfg.decay_rate = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.decay_start_epoch = 101;
        assert!(cfg.validate().is_err());
        let mut cfg = TrainConfig::default();
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn teacher_schedule_is_linear_with_endpoints() {
        let s = SsSchedule { floor: 0.2 };
        assert_eq!(s.p_teacher(1, 11), 1.0);
        assert!((s.p_teacher(6, 11) - 0.6).abs() < 1e-12);
        assert!((s.p_teacher(11, 11) - 0.2).abs() < 1e-12);
        let hold = SsSchedule { floor: 1.0 };
        for e in 1..=5 {
            assert_eq!(hold.p_teacher(e, 5), 1.0);
        }
    }
}
