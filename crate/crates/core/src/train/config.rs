use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::FusionConfig;
use crate::models::{CnnConfig, FcnConfig};
use crate::tensor::AdamConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Fcn,
    Cnn,
    /// Fusion with fixed, uniform head weights.
    CrossAttention,
    /// Fusion with bandit-learned head weights.
    Baomi,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Fcn, ModelKind::Cnn, ModelKind::CrossAttention, ModelKind::Baomi];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Fcn => "fcn",
            ModelKind::Cnn => "cnn",
            ModelKind::CrossAttention => "cross_attention",
            ModelKind::Baomi => "baomi",
        }
    }

    /// Whether the model consumes two feature sets.
    pub fn is_fusion(self) -> bool {
        matches!(self, ModelKind::CrossAttention | ModelKind::Baomi)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| Error::Config(format!("unknown model kind {s:?}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Standardise each feature dimension with training-fold statistics.
    pub standardize: bool,
    pub adam: AdamConfig,
    pub fcn: FcnConfig,
    pub cnn: CnnConfig,
    pub fusion: FusionConfig,
}

impl TrainConfig {
    pub fn new(model: ModelKind, seed: u64) -> Self {
        Self {
            model,
            batch_size: 32,
            epochs: 50,
            seed,
            standardize: true,
            adam: AdamConfig::default(),
            fcn: FcnConfig::default(),
            cnn: CnnConfig::default(),
            fusion: FusionConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        let a = &self.adam;
        let ok = a.learning_rate > 0.0
            && (0.0..1.0).contains(&a.beta1)
            && (0.0..1.0).contains(&a.beta2)
            && a.eps > 0.0;
        if !ok {
            return Err(Error::Config(format!("invalid Adam settings {a:?}")));
        }
        if self.fcn.hidden == 0 || self.cnn.hidden == 0 {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if self.cnn.conv.conv1_channels == 0 || self.cnn.conv.conv2_channels == 0 {
            return Err(Error::Config("conv channel counts must be positive".into()));
        }
        if self.model.is_fusion() {
            self.fusion.validate()?;
        }
        Ok(())
    }

    /// Fusion settings as used by this run; the baseline never updates Q.
    pub fn effective_fusion(&self) -> FusionConfig {
        let mut f = self.fusion;
        if self.model == ModelKind::CrossAttention {
            f.bandit_update_every = None;
        }
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_kinds() {
        assert_eq!("baomi".parse::<ModelKind>().unwrap(), ModelKind::Baomi);
        assert_eq!("cross-attention".parse::<ModelKind>().unwrap(), ModelKind::CrossAttention);
        assert!("rnn".parse::<ModelKind>().is_err());
    }

    #[test]
    fn defaults_and_validation() {
        let c = TrainConfig::new(ModelKind::Cnn, 1);
        assert_eq!((c.batch_size, c.epochs), (32, 50));
        c.validate().unwrap();
        let bad = TrainConfig { batch_size: 0, ..c.clone() };
        assert!(bad.validate().is_err());
        let json = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), c);
    }

    #[test]
    fn baseline_never_updates_bandit() {
        let c = TrainConfig::new(ModelKind::CrossAttention, 1);
        assert_eq!(c.effective_fusion().bandit_update_every, None);
        let c = TrainConfig::new(ModelKind::Baomi, 1);
        assert_eq!(c.effective_fusion().bandit_update_every, Some(1));
    }
}
