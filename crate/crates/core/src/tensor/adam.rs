use serde::{Deserialize, Serialize};

use super::array::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    /// Zeroed moments shaped like `params`.
    pub fn new<'t>(config: AdamConfig, params: impl IntoIterator<Item = &'t Tensor>) -> Self {
        let (first_moment, second_moment) = params
            .into_iter()
            .map(|p| (vec![0.0; p.len()], vec![0.0; p.len()]))
            .unzip();
        Self {
            config,
            step_count: 0,
            first_moment,
            second_moment,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.second_moment
    }

    /// One update. `grads[i]` belongs to `params[i]`; a `None` entry is an
    /// error because every trainable tensor must receive a gradient.
    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Option<Tensor>]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.first_moment.len(),
                got: params.len().min(grads.len()),
                context: "adam parameter count".into(),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            match g {
                None => return Err(Error::MissingGradient(format!("#{i}"))),
                Some(g) if g.shape() != p.shape() => {
                    return Err(Error::ShapeMismatch {
                        op: "adam",
                        lhs: p.shape().to_vec(),
                        rhs: g.shape().to_vec(),
                    })
                }
                Some(_) => {}
            }
        }

        self.step_count += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            eps,
        } = self.config;
        let t = self.step_count as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);

        for (((param, grad), m), v) in params
            .into_iter()
            .zip(grads.iter().flatten())
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            for (((w, &g), mi), vi) in param
                .data_mut()
                .iter_mut()
                .zip(grad.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * g;
                *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                *w -= learning_rate * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
