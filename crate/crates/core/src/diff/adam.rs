//! Adam with bias correction.

use super::{DiffError, Param, ParamGroup, ParamStore, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Default::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Per-parameter moment estimates.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: Tensor,
    pub v: Tensor,
    pub step: u64,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(shape: (usize, usize), config: AdamConfig) -> Self {
        AdamState { m: Tensor::zeros(shape.0, shape.1), v: Tensor::zeros(shape.0, shape.1), step: 0, config }
    }

    /// One bias-corrected Adam update. The gradient is left untouched.
    pub fn step(&mut self, param: &mut Param) -> Result<(), DiffError> {
        let grad = param.grad.as_ref().ok_or_else(|| DiffError::MissingGrad(param.name.clone()))?;
        if grad.shape() != self.m.shape() {
            return Err(DiffError::Layout(format!(
                "adam state {:?} does not match parameter {} {:?}",
                self.m.shape(),
                param.name,
                grad.shape()
            )));
        }
        let AdamConfig { lr, beta1, beta2, epsilon } = self.config;
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let values = param.value.data_mut();
        let (m, v) = (self.m.data_mut(), self.v.data_mut());
        for i in 0..values.len() {
            let g = grad.data()[i];
            m[i] = beta1 * m[i] + (1.0 - beta1) * g;
            v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            values[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Adam over every trainable parameter of a store, with a separate
/// learning rate for the embedding group.
#[derive(Clone, Debug)]
pub struct Adam {
    states: Vec<Option<AdamState>>,
}

impl Adam {
    pub fn new(store: &ParamStore, model: AdamConfig, embedding: AdamConfig) -> Self {
        let states = store
            .iter()
            .map(|(_, p)| {
                p.trainable().then(|| {
                    let cfg = match p.group {
                        ParamGroup::Model => model,
                        ParamGroup::Embedding => embedding,
                    };
                    AdamState::new(p.value.shape(), cfg)
                })
            })
            .collect();
        Adam { states }
    }

    pub fn step(&mut self, store: &mut ParamStore) -> Result<(), DiffError> {
        for (state, id) in self.states.iter_mut().zip(store.ids().collect::<Vec<_>>()) {
            if let Some(state) = state {
                state.step(store.get_mut(id))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_param(x: f64, g: f64) -> Param {
        Param { name: "x".into(), value: Tensor::scalar(x), grad: Some(Tensor::scalar(g)), group: ParamGroup::Model }
    }

    #[test]
    fn zero_grad_is_a_null_update() {
        let mut p = scalar_param(1.5, 0.0);
        let mut s = AdamState::new((1, 1), AdamConfig::with_lr(0.1));
        s.step(&mut p).unwrap();
        assert_eq!(p.value.item(), 1.5);
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_is_lr_times_sign() {
        for g in [0.3, -2.0, 1e-3] {
            let mut p = scalar_param(0.0, g);
            let cfg = AdamConfig::with_lr(0.01);
            let mut s = AdamState::new((1, 1), cfg);
            s.step(&mut p).unwrap();
            // m̂ = g, v̂ = g²
            let expected = -cfg.lr * g / (g.abs() + cfg.epsilon);
            assert!((p.value.item() - expected).abs() < 1e-15, "{} vs {}", p.value.item(), expected);
            assert!((p.value.item().abs() - 0.01).abs() < 1e-6);
            assert_eq!(p.grad.as_ref().unwrap().item(), g, "grad must be left intact");
        }
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut p = scalar_param(0.0, 0.0);
        let mut s = AdamState::new((1, 1), AdamConfig::with_lr(0.1));
        let mut reached = None;
        for i in 0..500 {
            let x = p.value.item();
            p.grad = Some(Tensor::scalar(2.0 * (x - 3.0)));
            s.step(&mut p).unwrap();
            if (p.value.item() - 3.0).abs() < 1e-3 && reached.is_none() {
                reached = Some(i);
            }
        }
        assert!(reached.is_some());
        assert!((p.value.item() - 3.0).abs() < 1e-3, "x = {}", p.value.item());
        assert_eq!(s.step, 500);
    }

    #[test]
    fn frozen_param_errors() {
        let mut p = scalar_param(0.0, 0.0);
        p.grad = None;
        let mut s = AdamState::new((1, 1), AdamConfig::default());
        assert!(matches!(s.step(&mut p), Err(DiffError::MissingGrad(_))));
    }
}
