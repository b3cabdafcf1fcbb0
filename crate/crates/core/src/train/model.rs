use rand::Rng;

use super::config::{ModelKind, TrainConfig};
use super::data::{Dataset, Scaling};
use crate::error::{Error, Result};
use crate::fusion::{BanditState, FusionForward, FusionModel};
use crate::models::{Cnn, Fcn, Forward};
use crate::nn::Parameters;
use crate::tensor::{Tape, Tensor, Var};

/// Any of the trainable classifiers.
#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    Fcn(Fcn),
    Cnn(Cnn),
    Fusion(FusionModel),
}

impl Model {
    /// Freshly initialised model for `config.model`. `dim_b` is required for
    /// fusion kinds and rejected otherwise.
    pub fn new<R: Rng + ?Sized>(config: &TrainConfig, dim_a: usize, dim_b: Option<usize>, rng: &mut R) -> Result<Self> {
        config.validate()?;
        match (config.model.is_fusion(), dim_b) {
            (true, None) => {
                return Err(Error::Config(format!("model {} needs two feature sets", config.model)));
            }
            (false, Some(_)) => {
                return Err(Error::Config(format!("model {} takes a single feature set", config.model)));
            }
            _ => {}
        }
        Ok(match config.model {
            ModelKind::Fcn => Model::Fcn(Fcn::new(dim_a, config.fcn, rng)),
            ModelKind::Cnn => Model::Cnn(Cnn::new(dim_a, config.cnn, rng)?),
            ModelKind::CrossAttention | ModelKind::Baomi => {
                Model::Fusion(FusionModel::new(dim_a, dim_b.unwrap(), config.effective_fusion(), rng)?)
            }
        })
    }

    pub fn input_dims(&self) -> (usize, Option<usize>) {
        match self {
            Model::Fcn(m) => (m.input_dim(), None),
            Model::Cnn(m) => (m.input_dim(), None),
            Model::Fusion(m) => {
                let (a, b) = m.input_dims();
                (a, Some(b))
            }
        }
    }

    /// `bandit` sets the fusion head weights; `None` means uniform.
    pub fn forward<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        xa: Var,
        xb: Option<Var>,
        bandit: Option<&BanditState>,
    ) -> Result<(Forward, Option<FusionForward>)> {
        match (self, xb) {
            (Model::Fcn(m), None) => Ok((m.forward(tape, xa)?, None)),
            (Model::Cnn(m), None) => Ok((m.forward(tape, xa)?, None)),
            (Model::Fusion(m), Some(xb)) => {
                let h = m.config.n_heads;
                let weights = match bandit {
                    Some(s) => s.all_head_weights(),
                    None => [vec![1.0 / h as f64; h], vec![1.0 / h as f64; h]],
                };
                let fwd = m.forward_weighted(tape, xa, xb, &weights)?;
                Ok((fwd.as_forward(), Some(fwd)))
            }
            (Model::Fusion(_), None) => Err(Error::Config("fusion model needs branch B input".into())),
            (_, Some(_)) => Err(Error::Config("single-branch model given branch B input".into())),
        }
    }
}

impl Parameters for Model {
    fn parameters(&self) -> Vec<(String, &Tensor)> {
        match self {
            Model::Fcn(m) => m.parameters(),
            Model::Cnn(m) => m.parameters(),
            Model::Fusion(m) => m.parameters(),
        }
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        match self {
            Model::Fcn(m) => m.parameters_mut(),
            Model::Cnn(m) => m.parameters_mut(),
            Model::Fusion(m) => m.parameters_mut(),
        }
    }
}

/// A model together with everything needed to run it on raw features.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub model: Model,
    /// Present for BAOMI; the baseline and single-branch models have none.
    pub bandit: Option<BanditState>,
    pub scaling: Scaling,
}

/// Logits and penultimate activations for a set of rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Outputs {
    pub logits: Vec<Vec<f64>>,
    pub penultimate: Vec<Vec<f64>>,
}

const EVAL_CHUNK: usize = 64;

impl TrainedModel {
    pub fn outputs(&self, data: &Dataset, idx: &[usize]) -> Result<Outputs> {
        let mut out = Outputs {
            logits: Vec::with_capacity(idx.len()),
            penultimate: Vec::with_capacity(idx.len()),
        };
        for chunk in idx.chunks(EVAL_CHUNK) {
            let (xa, xb) = self.scaling.batch(data, chunk)?;
            let mut tape = Tape::new();
            let a = tape.constant(xa);
            let b = xb.map(|t| tape.constant(t));
            let (fwd, _) = self.model.forward(&mut tape, a, b, self.bandit.as_ref())?;
            let rows = |v: Var| {
                let t = tape.value(v);
                (0..chunk.len()).map(|i| t.row(i).to_vec()).collect::<Vec<_>>()
            };
            out.logits.extend(rows(fwd.logits));
            out.penultimate.extend(rows(fwd.penultimate));
        }
        Ok(out)
    }
}
