use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bandit::{compute_rewards, masked_weights, BanditState, Direction};
use crate::error::{Error, Result};
use crate::models::{Forward, N_CLASSES};
use crate::nn::{prefixed, ConvStack, ConvStackConfig, Linear, Parameters};
use crate::tensor::{Tape, Tensor, Var};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub n_heads: usize,
    pub head_dim: usize,
    pub conv1_channels: usize,
    /// Width of each time token, i.e. the second conv layer's channel count.
    pub token_channels: usize,
    pub hidden: usize,
    pub gamma: f64,
    pub eps: f64,
    /// Run a bandit update every this many training batches; `None` never
    /// updates, which leaves the heads uniformly weighted.
    pub bandit_update_every: Option<usize>,
    pub shared_head_weights: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            n_heads: 4,
            head_dim: 32,
            conv1_channels: 64,
            token_channels: 128,
            hidden: 128,
            gamma: 0.9,
            eps: 1e-8,
            bandit_update_every: Some(1),
            shared_head_weights: false,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_heads == 0 || self.head_dim == 0 {
            return Err(Error::Config("n_heads and head_dim must be at least 1".into()));
        }
        if self.conv1_channels == 0 || self.token_channels == 0 || self.hidden == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.bandit_update_every == Some(0) {
            return Err(Error::Config("bandit_update_every must be at least 1".into()));
        }
        BanditState::new(self.n_heads, self.gamma, self.eps, self.shared_head_weights).map(|_| ())
    }

    pub fn conv(&self) -> ConvStackConfig {
        ConvStackConfig {
            conv1_channels: self.conv1_channels,
            conv2_channels: self.token_channels,
        }
    }

    pub fn new_bandit(&self) -> Result<BanditState> {
        BanditState::new(self.n_heads, self.gamma, self.eps, self.shared_head_weights)
    }
}

/// Query, key and value projections of one head, each `[channels×d_h]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadProjection {
    pub query: Tensor,
    pub key: Tensor,
    pub value: Tensor,
}

impl HeadProjection {
    fn new<R: Rng + ?Sized>(channels: usize, head_dim: usize, rng: &mut R) -> Self {
        let mut make = || Tensor::glorot(&[channels, head_dim], channels, head_dim, rng);
        Self {
            query: make(),
            key: make(),
            value: make(),
        }
    }
}

impl Parameters for HeadProjection {
    fn parameters(&self) -> Vec<(String, &Tensor)> {
        vec![
            ("query".into(), &self.query),
            ("key".into(), &self.key),
            ("value".into(), &self.value),
        ]
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.query, &mut self.key, &mut self.value]
    }
}

/// `[batch×L×C] · [C×d] → [batch×L×d]`.
fn project(tape: &mut Tape<'_>, tokens: Var, weight: Var) -> Result<Var> {
    let s = tape.shape(tokens).to_vec();
    let (b, l, c) = (s[0], s[1], s[2]);
    let d = tape.shape(weight)[1];
    let flat = tape.reshape(tokens, &[b * l, c])?;
    let out = tape.matmul(flat, weight)?;
    tape.reshape(out, &[b, l, d])
}

/// One head of scaled dot-product cross-attention on projected tokens:
/// `softmax(Q·Kᵀ/√d_h)·V`. Returns the output and the attention matrix.
pub fn cross_attention_head(tape: &mut Tape<'_>, q: Var, k: Var, v: Var, head_dim: usize) -> Result<(Var, Var)> {
    let (sq, sk, sv) = (tape.shape(q), tape.shape(k), tape.shape(v));
    let ok = sq.len() == 3
        && sk.len() == 3
        && sv.len() == 3
        && sq[0] == sk[0]
        && sk[0] == sv[0]
        && sq[2] == head_dim
        && sk[2] == head_dim
        && sk[1] == sv[1];
    if !ok {
        return Err(Error::ShapeMismatch {
            op: "cross attention",
            lhs: sq.to_vec(),
            rhs: sk.to_vec(),
        });
    }
    let kt = tape.transpose_last2(k)?;
    let scores = tape.bmm(q, kt)?;
    let scores = tape.scale(scores, 1.0 / (head_dim as f64).sqrt());
    let attn = tape.softmax(scores)?;
    let out = tape.bmm(attn, v)?;
    Ok((out, attn))
}

/// Everything a fusion forward pass exposes.
#[derive(Clone, Debug)]
pub struct FusionForward {
    pub logits: Var,
    pub penultimate: Var,
    /// `[batch×2·d_h]`, the concatenated weighted attention outputs.
    pub z_fused: Var,
    /// Per direction and head, the token-averaged attention output `[batch×d_h]`.
    pub head_outputs: [Vec<Var>; 2],
    /// Per direction and head, the attention matrices `[batch×Lq×Lk]`.
    pub attention: [Vec<Var>; 2],
}

impl FusionForward {
    pub fn as_forward(&self) -> Forward {
        Forward {
            logits: self.logits,
            penultimate: self.penultimate,
        }
    }
}

/// Two conv branches, bidirectional multi-head cross-attention, per-direction
/// head weighting, and a dense classifier on the concatenated result.
#[derive(Clone, Debug, PartialEq)]
pub struct FusionModel {
    pub config: FusionConfig,
    pub branch_a: ConvStack,
    pub branch_b: ConvStack,
    /// Indexed by [`Direction::index`], then head.
    pub heads: [Vec<HeadProjection>; 2],
    pub classifier: Linear,
    pub output: Linear,
    input_dims: (usize, usize),
}

impl FusionModel {
    pub fn new<R: Rng + ?Sized>(dim_a: usize, dim_b: usize, config: FusionConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        ConvStack::check_input(dim_a)?;
        ConvStack::check_input(dim_b)?;
        let branch_a = ConvStack::new(config.conv(), rng);
        let branch_b = ConvStack::new(config.conv(), rng);
        let mut make_heads = || {
            (0..config.n_heads)
                .map(|_| HeadProjection::new(config.token_channels, config.head_dim, rng))
                .collect::<Vec<_>>()
        };
        let heads = [make_heads(), make_heads()];
        let classifier = Linear::new(2 * config.head_dim, config.hidden, rng);
        let output = Linear::new(config.hidden, N_CLASSES, rng);
        Ok(Self {
            config,
            branch_a,
            branch_b,
            heads,
            classifier,
            output,
            input_dims: (dim_a, dim_b),
        })
    }

    pub fn input_dims(&self) -> (usize, usize) {
        self.input_dims
    }

    /// Conv features of one branch as `[batch×L×channels]` time tokens.
    pub fn branch_tokens<'a>(&'a self, tape: &mut Tape<'a>, branch: &'a ConvStack, x: Var) -> Result<Var> {
        let maps = branch.forward(tape, x)?;
        tape.transpose_last2(maps)
    }

    fn check_inputs(&self, tape: &Tape<'_>, xa: Var, xb: Var) -> Result<()> {
        let (sa, sb) = (tape.shape(xa), tape.shape(xb));
        let ok = sa.len() == 2 && sb.len() == 2 && sa[0] == sb[0];
        if !ok || sa[1] != self.input_dims.0 || sb[1] != self.input_dims.1 {
            return Err(Error::ShapeMismatch {
                op: "fusion input",
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            });
        }
        Ok(())
    }

    /// Forward pass with head weights taken from `state`.
    pub fn forward<'a>(&'a self, tape: &mut Tape<'a>, xa: Var, xb: Var, state: &BanditState) -> Result<FusionForward> {
        self.forward_weighted(tape, xa, xb, &state.all_head_weights())
    }

    /// Forward pass with explicit per-direction head weights.
    pub fn forward_weighted<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        xa: Var,
        xb: Var,
        weights: &[Vec<f64>; 2],
    ) -> Result<FusionForward> {
        self.check_inputs(tape, xa, xb)?;
        for w in weights {
            if w.len() != self.config.n_heads {
                return Err(Error::DimensionMismatch {
                    expected: self.config.n_heads,
                    got: w.len(),
                    context: "head weights".into(),
                });
            }
        }
        let tokens_a = self.branch_tokens(tape, &self.branch_a, xa)?;
        let tokens_b = self.branch_tokens(tape, &self.branch_b, xb)?;

        let mut head_outputs: [Vec<Var>; 2] = Default::default();
        let mut attention: [Vec<Var>; 2] = Default::default();
        let mut mixed = Vec::with_capacity(2);
        for dir in Direction::BOTH {
            let (q_src, kv_src) = match dir {
                Direction::AToB => (tokens_a, tokens_b),
                Direction::BToA => (tokens_b, tokens_a),
            };
            let d = dir.index();
            for head in &self.heads[d] {
                let wq = tape.param(&head.query);
                let wk = tape.param(&head.key);
                let wv = tape.param(&head.value);
                let q = project(tape, q_src, wq)?;
                let k = project(tape, kv_src, wk)?;
                let v = project(tape, kv_src, wv)?;
                let (out, attn) = cross_attention_head(tape, q, k, v, self.config.head_dim)?;
                // Token averaging is linear, so pooling each head before the
                // weighted sum equals pooling the weighted sum.
                head_outputs[d].push(tape.mean_tokens(out)?);
                attention[d].push(attn);
            }
            mixed.push(weighted_sum(tape, &head_outputs[d], &weights[d])?);
        }
        let z_fused = tape.concat(&mixed)?;
        let (penultimate, logits) = self.classify(tape, z_fused)?;
        Ok(FusionForward {
            logits,
            penultimate,
            z_fused,
            head_outputs,
            attention,
        })
    }

    fn classify<'a>(&'a self, tape: &mut Tape<'a>, z_fused: Var) -> Result<(Var, Var)> {
        let h = self.classifier.forward(tape, z_fused)?;
        let penultimate = tape.relu(h);
        let logits = self.output.forward(tape, penultimate)?;
        Ok((penultimate, logits))
    }

    /// Classifier loss for already-pooled head outputs under `weights`.
    /// Builds its own tape; nothing here is differentiated.
    pub fn loss_from_heads(&self, heads: &[Vec<Tensor>; 2], weights: &[Vec<f64>; 2], labels: &[usize]) -> Result<f64> {
        let mut tape = Tape::new();
        let mut mixed = Vec::with_capacity(2);
        for d in 0..2 {
            let vars: Vec<Var> = heads[d].iter().map(|t| tape.constant(t.clone())).collect();
            mixed.push(weighted_sum(&mut tape, &vars, &weights[d])?);
        }
        let z = tape.concat(&mixed)?;
        let (_, logits) = self.classify(&mut tape, z)?;
        let loss = tape.cross_entropy(logits, labels)?;
        Ok(tape.value(loss).item())
    }

    /// Counterfactual head masking on one batch of pooled head outputs:
    /// for every head, the loss with that head's weight zeroed and the rest
    /// renormalised, turned into rewards and folded into the Q-values.
    pub fn bandit_update(&self, state: &mut BanditState, heads: &[Vec<Tensor>; 2], labels: &[usize]) -> Result<BanditUpdate> {
        let weights = state.all_head_weights();
        let loss_full = self.loss_from_heads(heads, &weights, labels)?;
        let n = self.config.n_heads;
        let mut masked_losses: [Vec<f64>; 2] = [Vec::with_capacity(n), Vec::with_capacity(n)];
        if state.shared {
            for h in 0..n {
                let w = [masked_weights(&weights[0], h), masked_weights(&weights[1], h)];
                let loss = self.loss_from_heads(heads, &w, labels)?;
                masked_losses[0].push(loss);
                masked_losses[1].push(loss);
            }
        } else {
            for dir in Direction::BOTH {
                let d = dir.index();
                for h in 0..n {
                    let mut w = weights.clone();
                    w[d] = masked_weights(&weights[d], h);
                    masked_losses[d].push(self.loss_from_heads(heads, &w, labels)?);
                }
            }
        }
        let rewards = [
            compute_rewards(&masked_losses[0], loss_full, state.eps)?,
            compute_rewards(&masked_losses[1], loss_full, state.eps)?,
        ];
        state.update_q(&rewards)?;
        state.last_loss = Some(loss_full);
        Ok(BanditUpdate {
            loss_full,
            masked_losses,
            rewards,
        })
    }

    /// Stand-alone bandit step: forward pass on `(xa, xb)` without gradients,
    /// then [`FusionModel::bandit_update`].
    pub fn bandit_step(&self, state: &mut BanditState, xa: &Tensor, xb: &Tensor, labels: &[usize]) -> Result<BanditUpdate> {
        let heads = {
            let mut tape = Tape::new();
            let a = tape.constant(xa.clone());
            let b = tape.constant(xb.clone());
            let fwd = self.forward(&mut tape, a, b, state)?;
            head_values(&tape, &fwd)
        };
        self.bandit_update(state, &heads, labels)
    }
}

/// Snapshot of the pooled per-head outputs of a forward pass.
pub fn head_values(tape: &Tape<'_>, fwd: &FusionForward) -> [Vec<Tensor>; 2] {
    let grab = |vars: &[Var]| vars.iter().map(|&v| tape.value(v).clone()).collect();
    [grab(&fwd.head_outputs[0]), grab(&fwd.head_outputs[1])]
}

fn weighted_sum(tape: &mut Tape<'_>, parts: &[Var], weights: &[f64]) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for (&p, &w) in parts.iter().zip(weights) {
        let term = tape.scale(p, w);
        acc = Some(match acc {
            Some(a) => tape.add(a, term)?,
            None => term,
        });
    }
    acc.ok_or(Error::Empty("head list"))
}

/// Outcome of one bandit update.
#[derive(Clone, Debug, PartialEq)]
pub struct BanditUpdate {
    pub loss_full: f64,
    pub masked_losses: [Vec<f64>; 2],
    pub rewards: [Vec<f64>; 2],
}

impl Parameters for FusionModel {
    fn parameters(&self) -> Vec<(String, &Tensor)> {
        let mut p = prefixed("branch_a", self.branch_a.parameters());
        p.extend(prefixed("branch_b", self.branch_b.parameters()));
        for dir in Direction::BOTH {
            for (h, head) in self.heads[dir.index()].iter().enumerate() {
                p.extend(prefixed(&format!("heads.{}.{h}", dir.name()), head.parameters()));
            }
        }
        p.extend(prefixed("classifier", self.classifier.parameters()));
        p.extend(prefixed("output", self.output.parameters()));
        p
    }

    fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.branch_a.parameters_mut();
        p.extend(self.branch_b.parameters_mut());
        for heads in &mut self.heads {
            for head in heads {
                p.extend(head.parameters_mut());
            }
        }
        p.extend(self.classifier.parameters_mut());
        p.extend(self.output.parameters_mut());
        p
    }
}
