//! Single-representation classifiers: a fully connected network and a 1-D CNN.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{prefixed, ConvStack, ConvStackConfig, Linear, Parameters};
use crate::tensor::{Tape, Tensor, Var};

pub const N_CLASSES: usize = 2;

/// Logits plus the activations of the last hidden layer.
#[derive(Clone, Copy, Debug)]
pub struct Forward {
    pub logits: Var,
    pub penultimate: Var,
}

fn check_batch(tape: &Tape<'_>, x: Var, dim: usize) -> Result<usize> {
    match *tape.shape(x) {
        [b, d] if d == dim => Ok(b),
        [_, d] => Err(Error::DimensionMismatch {
            expected: dim,
            got: d,
            context: "model input".into(),
        }),
        ref s => Err(Error::InvalidShape {
            op: "model input",
            shape: s.to_vec(),
            reason: "expected [batch×features]".into(),
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FcnConfig {
    pub hidden: usize,
}

impl Default for FcnConfig {
    fn default() -> Self {
        Self { hidden: 256 }
    }
}

/// `out(ReLU(dense(x)))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Fcn {
    pub dense: Linear,
    pub output: Linear,
}

impl Fcn {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, cfg: FcnConfig, rng: &mut R) -> Self {
        Self {
            dense: Linear::new(input_dim, cfg.hidden, rng),
            output: Linear::new(cfg.hidden, N_CLASSES, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.dense.inputs()
    }

    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, x: Var) -> Result<Forward> {
        check_batch(tape, x, self.input_dim())?;
        let h = self.dense.forward(tape, x)?;
        let penultimate = tape.relu(h);
        let logits = self.output.forward(tape, penultimate)?;
        Ok(Forward { logits, penultimate })
    }
}

impl Parameters for Fcn {
    fn parameters(&self) -> Vec<(String, &Tensor)> {
        let mut p = prefixed("dense", self.dense.parameters());
        p.extend(prefixed("output", self.output.parameters()));
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.dense.parameters_mut();
        p.extend(self.output.parameters_mut());
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnnConfig {
    pub conv: ConvStackConfig,
    pub hidden: usize,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            conv: ConvStackConfig::default(),
            hidden: 128,
        }
    }
}

/// Conv stack, flatten (channel-major), dense + ReLU, output layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Cnn {
    pub convs: ConvStack,
    pub dense: Linear,
    pub output: Linear,
    input_dim: usize,
}

impl Cnn {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, cfg: CnnConfig, rng: &mut R) -> Result<Self> {
        ConvStack::check_input(input_dim)?;
        let convs = ConvStack::new(cfg.conv, rng);
        let flat = Self::flatten_dim(input_dim, cfg.conv.conv2_channels);
        Ok(Self {
            convs,
            dense: Linear::new(flat, cfg.hidden, rng),
            output: Linear::new(cfg.hidden, N_CLASSES, rng),
            input_dim,
        })
    }

    pub fn flatten_dim(input_dim: usize, channels: usize) -> usize {
        channels * ConvStack::output_len(input_dim)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, x: Var) -> Result<Forward> {
        let batch = check_batch(tape, x, self.input_dim)?;
        let maps = self.convs.forward(tape, x)?;
        let flat = tape.reshape(maps, &[batch, self.dense.inputs()])?;
        let h = self.dense.forward(tape, flat)?;
        let penultimate = tape.relu(h);
        let logits = self.output.forward(tape, penultimate)?;
        Ok(Forward { logits, penultimate })
    }
}

impl Parameters for Cnn {
    fn parameters(&self) -> Vec<(String, &Tensor)> {
        let mut p = prefixed("convs", self.convs.parameters());
        p.extend(prefixed("dense", self.dense.parameters()));
        p.extend(prefixed("output", self.output.parameters()));
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.convs.parameters_mut();
        p.extend(self.dense.parameters_mut());
        p.extend(self.output.parameters_mut());
        p
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn zero_all(p: &mut impl Parameters) {
        p.parameters_mut().into_iter().for_each(|t| t.fill(0.0));
    }

    #[test]
    fn fcn_with_zero_weights_gives_zero_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut fcn = Fcn::new(5, FcnConfig::default(), &mut rng);
        zero_all(&mut fcn);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::uniform(&[3, 5], 2.0, &mut rng));
        let out = fcn.forward(&mut tape, x).unwrap();
        assert_eq!(tape.shape(out.logits), &[3, 2]);
        assert!(tape.value(out.logits).data().iter().all(|&v| v == 0.0));
        assert_eq!(tape.shape(out.penultimate), &[3, 256]);
    }

    #[test]
    fn fcn_identical_rows_identical_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fcn = Fcn::new(4, FcnConfig::default(), &mut rng);
        let row = [0.3, -1.2, 0.8, 2.0];
        let x = Tensor::from_rows(&[row.to_vec(), row.to_vec()]).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(x);
        let out = fcn.forward(&mut tape, x).unwrap();
        let l = tape.value(out.logits);
        assert_eq!(l.row(0), l.row(1));
    }

    #[test]
    fn fcn_rejects_wrong_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let fcn = Fcn::new(4, FcnConfig::default(), &mut rng);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[2, 5]));
        assert!(matches!(fcn.forward(&mut tape, x), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn cnn_flatten_dims() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(Cnn::flatten_dim(14, 128), 384);
        assert_eq!(Cnn::flatten_dim(40, 128), 1280);
        let cnn = Cnn::new(14, CnnConfig::default(), &mut rng).unwrap();
        assert_eq!(cnn.dense.weight.shape(), &[384, 128]);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::uniform(&[2, 14], 1.0, &mut rng));
        let maps = cnn.convs.forward(&mut tape, x).unwrap();
        assert_eq!(tape.shape(maps), &[2, 128, 3]);
    }

    #[test]
    fn cnn_zero_input_zero_bias_gives_zero_logits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cnn = Cnn::new(40, CnnConfig::default(), &mut rng).unwrap();
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::zeros(&[2, 40]));
        let out = cnn.forward(&mut tape, x).unwrap();
        assert_eq!(tape.shape(out.penultimate), &[2, 128]);
        assert!(tape.value(out.logits).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cnn_rejects_short_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(Cnn::new(3, CnnConfig::default(), &mut rng).is_err());
        assert!(Cnn::new(4, CnnConfig::default(), &mut rng).is_ok());
    }
}
