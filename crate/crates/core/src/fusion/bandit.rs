//! Per-head Q-values and the soft head weights derived from them.
//!
//! Each attention direction keeps one Q-value per head. After a bandit
//! update the Q-values follow `Q ← γ·Q + (1−γ)·R`, where the reward `R_h`
//! is head `h`'s share of the total loss reduction it is responsible for.
//! Head weights are `softmax(Q)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::softmax_in_place;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    /// Queries from branch A, keys and values from branch B.
    #[serde(rename = "a_to_b")]
    AToB,
    #[serde(rename = "b_to_a")]
    BToA,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::AToB, Direction::BToA];

    pub fn index(self) -> usize {
        match self {
            Direction::AToB => 0,
            Direction::BToA => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::AToB => "a_to_b",
            Direction::BToA => "b_to_a",
        }
    }
}

/// `exp(Q_h) / Σ exp(Q_h')`, computed with max subtraction.
pub fn weights_from_q(q: &[f64]) -> Vec<f64> {
    let mut w = q.to_vec();
    softmax_in_place(&mut w);
    w
}

/// Weights with head `h` removed and the rest rescaled to sum to one.
/// With nothing left to rescale, every weight is zero.
pub fn masked_weights(weights: &[f64], h: usize) -> Vec<f64> {
    let rest: f64 = weights.iter().enumerate().filter(|&(i, _)| i != h).map(|(_, w)| w).sum();
    weights
        .iter()
        .enumerate()
        .map(|(i, &w)| if i == h || rest <= 0.0 { 0.0 } else { w / rest })
        .collect()
}

/// `R_h = ΔL_h / (Σ ΔL + ε)` with `ΔL_h = max(0, L_without_h − L_full)`.
pub fn compute_rewards(losses_without_head: &[f64], loss_full: f64, eps: f64) -> Result<Vec<f64>> {
    if let Some(&bad) = losses_without_head
        .iter()
        .chain(std::iter::once(&loss_full))
        .find(|l| !l.is_finite())
    {
        return Err(Error::NonFiniteLoss(bad));
    }
    let deltas: Vec<f64> = losses_without_head
        .iter()
        .map(|l| (l - loss_full).max(0.0))
        .collect();
    let total: f64 = deltas.iter().sum();
    Ok(deltas.iter().map(|d| d / (total + eps)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditState {
    /// Indexed by [`Direction::index`], then head.
    pub q_values: [Vec<f64>; 2],
    pub gamma: f64,
    pub eps: f64,
    pub last_loss: Option<f64>,
    pub update_count: u64,
    /// One weight vector for both directions.
    #[serde(default)]
    pub shared: bool,
}

impl BanditState {
    pub fn new(n_heads: usize, gamma: f64, eps: f64, shared: bool) -> Result<Self> {
        if n_heads == 0 {
            return Err(Error::Config("at least one head is required".into()));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::Config(format!("gamma {gamma} outside [0, 1)")));
        }
        if eps.is_nan() || eps <= 0.0 {
            return Err(Error::Config(format!("eps {eps} must be positive")));
        }
        Ok(Self {
            q_values: [vec![0.0; n_heads], vec![0.0; n_heads]],
            gamma,
            eps,
            last_loss: None,
            update_count: 0,
            shared,
        })
    }

    pub fn n_heads(&self) -> usize {
        self.q_values[0].len()
    }

    pub fn q(&self, dir: Direction) -> &[f64] {
        &self.q_values[dir.index()]
    }

    pub fn head_weights(&self, dir: Direction) -> Vec<f64> {
        weights_from_q(self.q(dir))
    }

    pub fn all_head_weights(&self) -> [Vec<f64>; 2] {
        [self.head_weights(Direction::AToB), self.head_weights(Direction::BToA)]
    }

    /// `Q ← γ·Q + (1−γ)·R` for both directions.
    pub fn update_q(&mut self, rewards: &[Vec<f64>; 2]) -> Result<()> {
        for (q, r) in self.q_values.iter_mut().zip(rewards) {
            if r.len() != q.len() {
                return Err(Error::DimensionMismatch {
                    expected: q.len(),
                    got: r.len(),
                    context: "reward vector".into(),
                });
            }
            for (qh, rh) in q.iter_mut().zip(r) {
                *qh = self.gamma * *qh + (1.0 - self.gamma) * rh;
            }
        }
        self.update_count += 1;
        Ok(())
    }
}
