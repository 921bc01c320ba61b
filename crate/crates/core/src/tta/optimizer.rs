//! SGD with momentum over two parameter groups, with the feature extractor
//! running at a fraction of the classifier learning rate.

use serde::{Deserialize, Serialize};

use super::{ParamGroups, TtaError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    /// Classifier learning rate.
    pub lr_c: f64,
    /// Feature-extractor learning rate as a fraction of `lr_c`, in (0, 1].
    pub lr_ratio: f64,
    /// In [0, 1).
    pub momentum: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr_c: 1e-3,
            lr_ratio: 0.5,
            momentum: 0.7,
        }
    }
}

impl OptimizerConfig {
    pub fn lr_fe(&self) -> f64 {
        self.lr_ratio * self.lr_c
    }

    pub fn validate(&self) -> Result<(), TtaError> {
        if !(self.lr_c > 0.0 && self.lr_c.is_finite()) {
            return Err(TtaError::Config(format!("lr_c {} must be positive", self.lr_c)));
        }
        if !(self.lr_ratio > 0.0 && self.lr_ratio <= 1.0) {
            return Err(TtaError::Config(format!("lr_ratio {} must be in (0, 1]", self.lr_ratio)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(TtaError::Config(format!("momentum {} must be in [0, 1)", self.momentum)));
        }
        Ok(())
    }
}

/// `v ← m·v + g; p ← p − lr·v` per group.
#[derive(Debug, Clone, PartialEq)]
pub struct BlrOptimizer {
    cfg: OptimizerConfig,
    velocity: ParamGroups,
}

impl BlrOptimizer {
    pub fn new(cfg: OptimizerConfig, params: &ParamGroups) -> Result<Self, TtaError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            velocity: ParamGroups::zeros_like(params),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.cfg
    }

    pub fn velocity(&self) -> &ParamGroups {
        &self.velocity
    }

    /// Applies one update. Nothing changes if any gradient is non-finite.
    pub fn step(&mut self, params: &mut ParamGroups, grads: &ParamGroups) -> Result<(), TtaError> {
        if grads.feature_extractor.len() != params.feature_extractor.len()
            || grads.classifier.len() != params.classifier.len()
            || self.velocity.feature_extractor.len() != params.feature_extractor.len()
            || self.velocity.classifier.len() != params.classifier.len()
        {
            return Err(TtaError::Shape("gradient, velocity and parameter groups differ in size".into()));
        }
        if grads.feature_extractor.iter().any(|g| !g.is_finite()) {
            return Err(TtaError::NonFiniteGradient("feature extractor"));
        }
        if grads.classifier.iter().any(|g| !g.is_finite()) {
            return Err(TtaError::NonFiniteGradient("classifier"));
        }
        let m = self.cfg.momentum;
        let update = |p: &mut [f64], v: &mut [f64], g: &[f64], lr: f64| {
            for ((p, v), g) in p.iter_mut().zip(v.iter_mut()).zip(g) {
                *v = m * *v + g;
                *p -= lr * *v;
            }
        };
        update(
            &mut params.feature_extractor,
            &mut self.velocity.feature_extractor,
            &grads.feature_extractor,
            self.cfg.lr_fe(),
        );
        update(&mut params.classifier, &mut self.velocity.classifier, &grads.classifier, self.cfg.lr_c);
        Ok(())
    }
}
