//! Bidirectional multi-head cross-attention fusion of two feature vectors,
//! with head weights learned by a bandit over per-head loss contributions.

mod bandit;
mod model;

pub use bandit::{compute_rewards, masked_weights, weights_from_q, BanditState, Direction};
pub use model::{
    cross_attention_head, head_values, BanditUpdate, FusionConfig, FusionForward, FusionModel, HeadProjection,
};
