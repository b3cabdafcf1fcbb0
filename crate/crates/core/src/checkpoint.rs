//! Trained-model persistence: a flat little-endian `f32` parameter file plus
//! a JSON sidecar describing every tensor and the run that produced it.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::BanditState;
use crate::nn::Parameters;
use crate::train::{Model, Scaling, TrainConfig, TrainedModel};

pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the parameter file, in `f32` elements.
    pub offset: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format: u32,
    pub config: TrainConfig,
    pub input_dims: (usize, Option<usize>),
    pub tensors: Vec<TensorEntry>,
    pub bandit: Option<BanditState>,
    pub scaling: Scaling,
}

/// `(parameters.bin, sidecar.json)` paths for a checkpoint stem.
pub fn checkpoint_paths(stem: impl AsRef<Path>) -> (PathBuf, PathBuf) {
    let stem = stem.as_ref();
    (stem.with_extension("bin"), stem.with_extension("json"))
}

pub fn save_checkpoint(trained: &TrainedModel, stem: impl AsRef<Path>) -> Result<()> {
    let (bin_path, json_path) = checkpoint_paths(stem);
    let mut bytes = Vec::new();
    let mut tensors = Vec::new();
    let mut offset = 0;
    for (name, t) in trained.model.parameters() {
        tensors.push(TensorEntry {
            name,
            shape: t.shape().to_vec(),
            offset,
        });
        offset += t.len();
        for &v in t.data() {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let meta = CheckpointMeta {
        format: CHECKPOINT_FORMAT,
        config: trained.config.clone(),
        input_dims: trained.model.input_dims(),
        tensors,
        bandit: trained.bandit.clone(),
        scaling: trained.scaling.clone(),
    };
    std::fs::write(&bin_path, bytes).map_err(|e| Error::io(&bin_path, e))?;
    let json = serde_json::to_string_pretty(&meta)?;
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))
}

pub fn load_checkpoint(stem: impl AsRef<Path>) -> Result<TrainedModel> {
    let (bin_path, json_path) = checkpoint_paths(stem);
    let text = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let meta: CheckpointMeta = serde_json::from_str(&text)?;
    if meta.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!("unsupported checkpoint format {}", meta.format)));
    }
    let bytes = std::fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::Checkpoint(format!("{} is not a whole number of f32 values", bin_path.display())));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();

    // Initialisation values are overwritten below; the generator only has to exist.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (dim_a, dim_b) = meta.input_dims;
    let mut model = Model::new(&meta.config, dim_a, dim_b, &mut rng)?;
    let names: Vec<(String, Vec<usize>)> = model
        .parameters()
        .into_iter()
        .map(|(n, t)| (n, t.shape().to_vec()))
        .collect();
    if names.len() != meta.tensors.len() {
        return Err(Error::Checkpoint(format!(
            "expected {} tensors, sidecar lists {}",
            names.len(),
            meta.tensors.len()
        )));
    }
    for (((name, shape), entry), param) in names.iter().zip(&meta.tensors).zip(model.parameters_mut()) {
        if *name != entry.name || *shape != entry.shape {
            return Err(Error::Checkpoint(format!(
                "tensor {:?} {:?} does not match model tensor {name:?} {shape:?}",
                entry.name, entry.shape
            )));
        }
        let end = entry.offset + param.len();
        let Some(src) = values.get(entry.offset..end) else {
            return Err(Error::Checkpoint(format!("tensor {name:?} runs past the end of the parameter file")));
        };
        param.data_mut().iter_mut().zip(src).for_each(|(d, &s)| *d = s as f64);
    }
    if let Some(b) = &meta.bandit {
        if Some(b.n_heads()) != meta.config.model.is_fusion().then_some(meta.config.fusion.n_heads) {
            return Err(Error::Checkpoint("bandit state does not match the model".into()));
        }
    }
    Ok(TrainedModel {
        config: meta.config,
        model,
        bandit: meta.bandit,
        scaling: meta.scaling,
    })
}
