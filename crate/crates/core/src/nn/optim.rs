use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::tensor::Parameter;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adaptive-moment optimizer state for a fixed, ordered parameter list.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    shapes: Vec<Vec<usize>>,
}

impl OptimizerState {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Parameter>) -> Self {
        let shapes: Vec<Vec<usize>> = params
            .into_iter()
            .map(|p| p.tensor.shape().to_vec())
            .collect();
        let zeros = |s: &Vec<usize>| vec![0.0; s.iter().product()];
        Self {
            config,
            step: 0,
            first: shapes.iter().map(zeros).collect(),
            second: shapes.iter().map(zeros).collect(),
            shapes,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update using each parameter's accumulated gradient.
    ///
    /// `params` must be given in the same order as at construction. Gradients
    /// are left in place; the caller clears them.
    pub fn step(&mut self, params: &mut [&mut Parameter]) -> Result<()> {
        if params.len() != self.shapes.len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} parameters, got {}",
                self.shapes.len(),
                params.len()
            )));
        }
        for (p, shape) in params.iter().zip(&self.shapes) {
            if p.tensor.shape() != shape.as_slice() {
                return Err(Error::dim("optimizer_step", shape, p.tensor.shape()));
            }
            if p.tensor.grad().is_none() {
                return Err(Error::Contract(format!("parameter `{}` has no gradient", p.name)));
            }
        }

        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let grad = p.tensor.grad().unwrap().to_vec();
            for (((w, g), m), v) in p
                .tensor
                .data_mut()
                .iter_mut()
                .zip(&grad)
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            }
            if !p.tensor.all_finite() {
                return Err(Error::Contract(format!(
                    "parameter `{}` became non-finite after update",
                    p.name
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::tensor::Tensor;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Parameter::new("w", Tensor::vector(vec![1.0, -2.0]).unwrap());
        let mut opt = OptimizerState::new(AdamConfig::default(), [&p]);
        p.tensor.accumulate_grad(&[0.0, 0.0]).unwrap();
        opt.step(&mut [&mut p]).unwrap();
        assert_eq!(p.tensor.data(), &[1.0, -2.0]);
        assert_eq!(opt.step_count(), 1);
    }

    #[test]
    fn missing_grad_names_parameter() {
        let mut p = Parameter::new("lstm0.w", Tensor::scalar(1.0));
        let mut opt = OptimizerState::new(AdamConfig::default(), [&p]);
        let err = opt.step(&mut [&mut p]).unwrap_err().to_string();
        assert!(err.contains("lstm0.w"));
        assert_eq!(opt.step_count(), 0);
    }

    #[test]
    fn quadratic_converges() {
        let mut p = Parameter::new("w", Tensor::scalar(0.0));
        let cfg = AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        };
        let mut opt = OptimizerState::new(cfg, [&p]);
        for _ in 0..500 {
            let w = p.tensor.data()[0];
            p.tensor.zero_grad();
            p.tensor.accumulate_grad(&[2.0 * (w - 3.0)]).unwrap();
            opt.step(&mut [&mut p]).unwrap();
        }
        assert!((p.tensor.data()[0] - 3.0).abs() < 1e-2);
        assert_eq!(opt.step_count(), 500);
    }
}
