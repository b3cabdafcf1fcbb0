use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelKind, TrainConfig};
use super::data::{Dataset, Scaling};
use super::metrics::{argmax, confusion, Confusion, Metrics};
use super::model::{Model, TrainedModel};
use crate::error::{Error, Result};
use crate::fusion::{head_values, Direction};
use crate::nn::Parameters;
use crate::tensor::{AdamState, Tape};

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;

/// Generator for one purpose within one fold, derived from the run seed.
pub fn fold_rng(seed: u64, fold: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((fold as u64) << 8) | stream);
    rng
}

/// One head weight at the end of an epoch; epoch 0 is the initial state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeadWeightRow {
    pub epoch: usize,
    pub direction: Direction,
    pub head: usize,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldTraining {
    pub trained: TrainedModel,
    /// Sample-weighted mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Empty unless the model is BAOMI.
    pub head_weights: Vec<HeadWeightRow>,
}

fn snapshot(epoch: usize, trained: &TrainedModel, out: &mut Vec<HeadWeightRow>) {
    let Some(state) = &trained.bandit else { return };
    for dir in Direction::BOTH {
        for (head, weight) in state.head_weights(dir).into_iter().enumerate() {
            out.push(HeadWeightRow {
                epoch,
                direction: dir,
                head,
                weight,
            });
        }
    }
}

/// Trains one model on the rows `train_idx` of `data`.
pub fn train_fold(config: &TrainConfig, data: &Dataset, train_idx: &[usize], fold: usize) -> Result<FoldTraining> {
    config.validate()?;
    if train_idx.is_empty() {
        return Err(Error::Empty("training fold"));
    }
    let (dim_a, dim_b) = data.dims();
    let mut init_rng = fold_rng(config.seed, fold, STREAM_INIT);
    let model = Model::new(config, dim_a, dim_b, &mut init_rng)?;
    let bandit = match (&model, config.model) {
        (Model::Fusion(m), ModelKind::Baomi) => Some(m.config.new_bandit()?),
        _ => None,
    };
    let update_every = match &model {
        Model::Fusion(m) if bandit.is_some() => m.config.bandit_update_every,
        _ => None,
    };
    let mut trained = TrainedModel {
        config: config.clone(),
        model,
        bandit,
        scaling: Scaling::fit(data, train_idx, config.standardize)?,
    };
    let mut adam = AdamState::new(config.adam, trained.model.parameters().into_iter().map(|(_, t)| t));
    let mut shuffle_rng = fold_rng(config.seed, fold, STREAM_SHUFFLE);
    let mut order = train_idx.to_vec();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut head_weights = Vec::new();
    snapshot(0, &trained, &mut head_weights);
    let mut batch_no = 0usize;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(config.batch_size) {
            let labels = data.label_indices(batch);
            let (xa, xb) = trained.scaling.batch(data, batch)?;
            let (loss, grads, heads) = {
                let mut tape = Tape::new();
                let a = tape.constant(xa);
                let b = xb.map(|t| tape.constant(t));
                let (fwd, fusion) = trained.model.forward(&mut tape, a, b, trained.bandit.as_ref())?;
                let loss_var = tape.cross_entropy(fwd.logits, &labels)?;
                let loss = tape.value(loss_var).item();
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss(loss));
                }
                tape.backward(loss_var)?;
                let heads = fusion.map(|f| head_values(&tape, &f));
                (loss, trained.model.gradients(&tape), heads)
            };
            batch_no += 1;
            // The bandit sees the pre-update parameters; pooled head outputs do
            // not depend on the head weights, so this pass's values are reused.
            if let (Some(k), Some(state), Model::Fusion(m), Some(heads)) =
                (update_every, trained.bandit.as_mut(), &trained.model, heads)
            {
                if batch_no.is_multiple_of(k) {
                    m.bandit_update(state, &heads, &labels)?;
                }
            }
            adam.step(trained.model.parameters_mut(), &grads)?;
            loss_sum += loss * batch.len() as f64;
        }
        let mean = loss_sum / order.len() as f64;
        log::debug!("fold {fold} epoch {epoch}: loss {mean:.5}");
        epoch_losses.push(mean);
        snapshot(epoch, &trained, &mut head_weights);
    }
    Ok(FoldTraining {
        trained,
        epoch_losses,
        head_weights,
    })
}

/// Predictions and metrics on the rows `test_idx`.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub predictions: Vec<usize>,
    pub confusion: Confusion,
    pub metrics: Metrics,
}

pub fn evaluate(trained: &TrainedModel, data: &Dataset, test_idx: &[usize]) -> Result<Evaluation> {
    if test_idx.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let out = trained.outputs(data, test_idx)?;
    let predictions: Vec<usize> = out.logits.iter().map(|l| argmax(l)).collect();
    let confusion = confusion(&data.label_indices(test_idx), &predictions)?;
    let metrics = Metrics::from_confusion(&confusion)?;
    Ok(Evaluation {
        predictions,
        confusion,
        metrics,
    })
}
