//! Layers shared by the downstream and fusion models.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Tape, Tensor, Var};

/// Named access to a model's trainable tensors. Both methods must list the
/// tensors in the same order.
pub trait Parameters {
    fn parameters(&self) -> Vec<(String, &Tensor)>;
    fn parameters_mut(&mut self) -> Vec<&mut Tensor>;

    fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(_, t)| t.len()).sum()
    }

    /// Gradients from `tape` in [`Parameters::parameters`] order.
    fn gradients(&self, tape: &Tape<'_>) -> Vec<Option<Tensor>> {
        self.parameters()
            .into_iter()
            .map(|(_, t)| tape.param_grad(t).cloned())
            .collect()
    }
}

pub(crate) fn prefixed<'t>(prefix: &str, items: Vec<(String, &'t Tensor)>) -> Vec<(String, &'t Tensor)> {
    items.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}

/// Dense layer `x·W + b` with `W: [in×out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        Self {
            weight: Tensor::glorot(&[inputs, outputs], inputs, outputs, rng),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, x: Var) -> Result<Var> {
        let w = tape.param(&self.weight);
        let b = tape.param(&self.bias);
        let y = tape.matmul(x, w)?;
        tape.add_bias(y, b)
    }
}

impl Parameters for Linear {
    fn parameters(&self) -> Vec<(String, &Tensor)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weight, &mut self.bias]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Conv1d {
    pub kernels: Tensor,
    pub bias: Tensor,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(c_in: usize, c_out: usize, width: usize, rng: &mut R) -> Self {
        Self {
            kernels: Tensor::glorot(&[c_out, c_in, width], c_in * width, c_out * width, rng),
            bias: Tensor::zeros(&[c_out]),
        }
    }

    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, x: Var) -> Result<Var> {
        let k = tape.param(&self.kernels);
        let b = tape.param(&self.bias);
        tape.conv1d(x, k, b)
    }
}

impl Parameters for Conv1d {
    fn parameters(&self) -> Vec<(String, &Tensor)> {
        vec![("kernels".into(), &self.kernels), ("bias".into(), &self.bias)]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.kernels, &mut self.bias]
    }
}

pub const KERNEL_WIDTH: usize = 3;
pub const POOL_WINDOW: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStackConfig {
    pub conv1_channels: usize,
    pub conv2_channels: usize,
}

impl Default for ConvStackConfig {
    fn default() -> Self {
        Self {
            conv1_channels: 64,
            conv2_channels: 128,
        }
    }
}

/// conv → ReLU → pool → conv → ReLU → pool over a single-channel vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvStack {
    pub conv1: Conv1d,
    pub conv2: Conv1d,
}

impl ConvStack {
    pub fn new<R: Rng + ?Sized>(cfg: ConvStackConfig, rng: &mut R) -> Self {
        Self {
            conv1: Conv1d::new(1, cfg.conv1_channels, KERNEL_WIDTH, rng),
            conv2: Conv1d::new(cfg.conv1_channels, cfg.conv2_channels, KERNEL_WIDTH, rng),
        }
    }

    pub fn out_channels(&self) -> usize {
        self.conv2.kernels.shape()[0]
    }

    /// Sequence length after both pools.
    pub fn output_len(input_dim: usize) -> usize {
        input_dim / POOL_WINDOW / POOL_WINDOW
    }

    pub fn check_input(input_dim: usize) -> Result<()> {
        if Self::output_len(input_dim) == 0 {
            return Err(Error::InvalidShape {
                op: "conv stack",
                shape: vec![input_dim],
                reason: format!("input too short, need at least {}", POOL_WINDOW * POOL_WINDOW),
            });
        }
        Ok(())
    }

    /// `[batch×d] → [batch×channels×L]`.
    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, x: Var) -> Result<Var> {
        let shape = tape.shape(x).to_vec();
        let [batch, d] = shape[..] else {
            return Err(Error::InvalidShape {
                op: "conv stack",
                shape,
                reason: "expected [batch×features]".into(),
            });
        };
        Self::check_input(d)?;
        let x = tape.reshape(x, &[batch, 1, d])?;
        let h = self.conv1.forward(tape, x)?;
        let h = tape.relu(h);
        let h = tape.maxpool1d(h, POOL_WINDOW)?;
        let h = self.conv2.forward(tape, h)?;
        let h = tape.relu(h);
        tape.maxpool1d(h, POOL_WINDOW)
    }
}

impl Parameters for ConvStack {
    fn parameters(&self) -> Vec<(String, &Tensor)> {
        let mut p = prefixed("conv1", self.conv1.parameters());
        p.extend(prefixed("conv2", self.conv2.parameters()));
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.conv1.parameters_mut();
        p.extend(self.conv2.parameters_mut());
        p
    }
}

/// Stacks equal-length feature vectors into a `[batch×d]` tensor.
pub fn batch_tensor(rows: &[&[f64]]) -> Result<Tensor> {
    let d = rows.first().map_or(0, |r| r.len());
    let mut data = Vec::with_capacity(rows.len() * d);
    for r in rows {
        if r.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: r.len(),
                context: "batch row".into(),
            });
        }
        data.extend_from_slice(r);
    }
    Tensor::new(vec![rows.len(), d], data)
}
