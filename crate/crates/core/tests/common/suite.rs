use baomi::fusion::{FusionConfig, FusionModel};
use baomi::models::{Cnn, CnnConfig, Fcn, FcnConfig};
use baomi::nn::ConvStackConfig;
use baomi::tensor::{Tape, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_inputs, check_parameters, probe, rand_tensor, random_labels};

fn op(name: &str, inputs: Vec<Tensor>, f: impl Fn(&mut Tape<'_>, &[Var]) -> Var) -> (String, f64) {
    (name.to_owned(), check_inputs(&inputs, f))
}

/// Worst relative finite-difference error for every differentiable op.
pub fn op_errors(seed: u64) -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = |shape: &[usize]| rand_tensor(shape, &mut rng);
    let labels = [1, 0, 1];
    vec![
        op("matmul", vec![r(&[3, 4]), r(&[4, 5])], |t, v| {
            let y = t.matmul(v[0], v[1]).unwrap();
            probe(t, y, 1)
        }),
        op("bmm", vec![r(&[2, 3, 4]), r(&[2, 4, 3])], |t, v| {
            let y = t.bmm(v[0], v[1]).unwrap();
            probe(t, y, 2)
        }),
        op("transpose_last2", vec![r(&[2, 3, 4])], |t, v| {
            let y = t.transpose_last2(v[0]).unwrap();
            probe(t, y, 3)
        }),
        op("reshape", vec![r(&[2, 6])], |t, v| {
            let y = t.reshape(v[0], &[3, 4]).unwrap();
            probe(t, y, 4)
        }),
        op("add_bias", vec![r(&[2, 3, 4]), r(&[4])], |t, v| {
            let y = t.add_bias(v[0], v[1]).unwrap();
            probe(t, y, 5)
        }),
        op("add", vec![r(&[3, 4]), r(&[3, 4])], |t, v| {
            let y = t.add(v[0], v[1]).unwrap();
            probe(t, y, 6)
        }),
        op("mul", vec![r(&[3, 4]), r(&[3, 4])], |t, v| {
            let y = t.mul(v[0], v[1]).unwrap();
            probe(t, y, 7)
        }),
        op("scale", vec![r(&[3, 4])], |t, v| {
            let y = t.scale(v[0], -1.7);
            probe(t, y, 8)
        }),
        op("relu", vec![r(&[4, 5])], |t, v| {
            let y = t.relu(v[0]);
            probe(t, y, 9)
        }),
        op("conv1d", vec![r(&[2, 3, 7]), r(&[4, 3, 3]), r(&[4])], |t, v| {
            let y = t.conv1d(v[0], v[1], v[2]).unwrap();
            probe(t, y, 10)
        }),
        op("conv1d_unbatched_k5", vec![r(&[2, 6]), r(&[3, 2, 5]), r(&[3])], |t, v| {
            let y = t.conv1d(v[0], v[1], v[2]).unwrap();
            probe(t, y, 11)
        }),
        op("conv1d_kernel_wider_than_input", vec![r(&[1, 2, 2]), r(&[2, 2, 5]), r(&[2])], |t, v| {
            let y = t.conv1d(v[0], v[1], v[2]).unwrap();
            probe(t, y, 16)
        }),
        op("maxpool1d", vec![r(&[2, 3, 9])], |t, v| {
            let y = t.maxpool1d(v[0], 2).unwrap();
            probe(t, y, 12)
        }),
        op("softmax", vec![r(&[3, 5])], |t, v| {
            let y = t.softmax(v[0]).unwrap();
            probe(t, y, 13)
        }),
        op("mean_tokens", vec![r(&[2, 5, 3])], |t, v| {
            let y = t.mean_tokens(v[0]).unwrap();
            probe(t, y, 14)
        }),
        op("concat", vec![r(&[2, 3]), r(&[2, 1]), r(&[2, 4])], |t, v| {
            let y = t.concat(v).unwrap();
            probe(t, y, 15)
        }),
        op("sum", vec![r(&[3, 4])], |t, v| t.sum(v[0])),
        op("cross_entropy", vec![r(&[3, 2])], move |t, v| t.cross_entropy(v[0], &labels).unwrap()),
    ]
}

pub fn small_fusion_config() -> FusionConfig {
    FusionConfig {
        n_heads: 2,
        head_dim: 2,
        conv1_channels: 3,
        token_channels: 4,
        hidden: 5,
        ..FusionConfig::default()
    }
}

/// Worst relative error over all parameters of the FCN, the CNN (d = 8) and
/// the fusion model (d = 8 and 12, two heads of width two).
pub fn model_errors(seed: u64) -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let batch = 3;
    let labels = random_labels(batch, &mut rng);
    let mut out = Vec::new();

    let mut fcn = Fcn::new(8, FcnConfig { hidden: 6 }, &mut rng);
    let x = rand_tensor(&[batch, 8], &mut rng);
    let err = check_parameters(&mut fcn, |m, tape| {
        let x = tape.constant(x.clone());
        let f = m.forward(tape, x).unwrap();
        tape.cross_entropy(f.logits, &labels).unwrap()
    });
    out.push(("fcn".to_owned(), err));

    let cfg = CnnConfig {
        conv: ConvStackConfig {
            conv1_channels: 3,
            conv2_channels: 4,
        },
        hidden: 5,
    };
    let mut cnn = Cnn::new(8, cfg, &mut rng).unwrap();
    let x = rand_tensor(&[batch, 8], &mut rng);
    let err = check_parameters(&mut cnn, |m, tape| {
        let x = tape.constant(x.clone());
        let f = m.forward(tape, x).unwrap();
        tape.cross_entropy(f.logits, &labels).unwrap()
    });
    out.push(("cnn".to_owned(), err));

    let mut fusion = FusionModel::new(8, 12, small_fusion_config(), &mut rng).unwrap();
    let xa = rand_tensor(&[batch, 8], &mut rng);
    let xb = rand_tensor(&[batch, 12], &mut rng);
    let weights = [vec![0.7, 0.3], vec![0.4, 0.6]];
    let err = check_parameters(&mut fusion, |m, tape| {
        let a = tape.constant(xa.clone());
        let b = tape.constant(xb.clone());
        let f = m.forward_weighted(tape, a, b, &weights).unwrap();
        tape.cross_entropy(f.logits, &labels).unwrap()
    });
    out.push(("baomi".to_owned(), err));
    out
}

/// Largest absolute difference from the loop oracles over `cases` random
/// shapes for each op.
pub fn oracle_errors(seed: u64, cases: usize) -> Vec<(String, f64)> {
    use super::{oracle_conv1d, oracle_cross_entropy, oracle_matmul, oracle_maxpool, oracle_softmax};
    use rand::Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_diff = |a: &[f64], b: &[f64]| {
        assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    };
    let mut worst = [0.0f64; 5];
    for _ in 0..cases {
        let (m, k, n) = (rng.random_range(1..9), rng.random_range(1..9), rng.random_range(1..9));
        let a = rand_tensor(&[m, k], &mut rng);
        let b = rand_tensor(&[k, n], &mut rng);
        let mut tape = Tape::new();
        let (va, vb) = (tape.constant(a.clone()), tape.constant(b.clone()));
        let y = tape.matmul(va, vb).unwrap();
        worst[0] = worst[0].max(max_diff(tape.value(y).data(), &oracle_matmul(a.data(), b.data(), m, k, n)));

        let (bs, ci, co, len) = (
            rng.random_range(1..4),
            rng.random_range(1..5),
            rng.random_range(1..5),
            rng.random_range(1..12),
        );
        let width = [1, 3, 5][rng.random_range(0..3)];
        let x = rand_tensor(&[bs, ci, len], &mut rng);
        let w = rand_tensor(&[co, ci, width], &mut rng);
        let bias = rand_tensor(&[co], &mut rng);
        let mut tape = Tape::new();
        let (vx, vw, vb) = (tape.constant(x.clone()), tape.constant(w.clone()), tape.constant(bias.clone()));
        let y = tape.conv1d(vx, vw, vb).unwrap();
        let expect = oracle_conv1d(x.data(), w.data(), bias.data(), bs, ci, co, len, width);
        worst[1] = worst[1].max(max_diff(tape.value(y).data(), &expect));

        let (rows, window) = (rng.random_range(1..6), rng.random_range(1..4));
        let len = window * rng.random_range(1..6) + rng.random_range(0..window);
        let x = rand_tensor(&[rows, len], &mut rng);
        let mut tape = Tape::new();
        let vx = tape.constant(x.clone());
        let y = tape.maxpool1d(vx, window).unwrap();
        worst[2] = worst[2].max(max_diff(tape.value(y).data(), &oracle_maxpool(x.data(), rows, len, window)));

        let (rows, n) = (rng.random_range(1..6), rng.random_range(1..9));
        let x = Tensor::uniform(&[rows, n], 5.0, &mut rng);
        let mut tape = Tape::new();
        let vx = tape.constant(x.clone());
        let y = tape.softmax(vx).unwrap();
        worst[3] = worst[3].max(max_diff(tape.value(y).data(), &oracle_softmax(x.data(), n)));

        let rows = rng.random_range(1..9);
        let logits = Tensor::uniform(&[rows, 2], 5.0, &mut rng);
        let labels = random_labels(rows, &mut rng);
        let mut tape = Tape::new();
        let vl = tape.constant(logits.clone());
        let y = tape.cross_entropy(vl, &labels).unwrap();
        let expect = oracle_cross_entropy(logits.data(), 2, &labels);
        worst[4] = worst[4].max((tape.value(y).item() - expect).abs());
    }
    ["matmul", "conv1d", "maxpool1d", "softmax", "cross_entropy"]
        .iter()
        .zip(worst)
        .map(|(n, e)| (n.to_string(), e))
        .collect()
}

/// Logits of the fusion model with every head weighted equally, computed
/// with plain loops from the model's weights. Only the conv branches run on
/// the tape.
pub fn reference_uniform_logits(model: &FusionModel, xa: &Tensor, xb: &Tensor) -> Vec<Vec<f64>> {
    let tokens = |branch, x: &Tensor| {
        let mut tape = Tape::new();
        let v = tape.constant(x.clone());
        let t = model.branch_tokens(&mut tape, branch, v).unwrap();
        let s = tape.shape(t).to_vec();
        (tape.value(t).data().to_vec(), s[1], s[2])
    };
    let (ta, la, c) = tokens(&model.branch_a, xa);
    let (tb, lb, _) = tokens(&model.branch_b, xb);
    let batch = xa.shape()[0];
    let cfg = model.config;
    let dh = cfg.head_dim;
    let proj = |src: &[f64], n: usize, b: usize, w: &Tensor| -> Vec<Vec<f64>> {
        (0..n)
            .map(|t| {
                (0..dh)
                    .map(|j| (0..c).map(|i| src[(b * n + t) * c + i] * w.data()[i * dh + j]).sum())
                    .collect()
            })
            .collect()
    };
    let dense = |x: &[f64], w: &Tensor, bias: &Tensor| -> Vec<f64> {
        let (n_in, n_out) = (w.shape()[0], w.shape()[1]);
        (0..n_out)
            .map(|j| bias.data()[j] + (0..n_in).map(|i| x[i] * w.data()[i * n_out + j]).sum::<f64>())
            .collect()
    };
    (0..batch)
        .map(|b| {
            let mut fused = Vec::new();
            for (d, (qs, lq, kvs, lk)) in [(&ta, la, &tb, lb), (&tb, lb, &ta, la)].into_iter().enumerate() {
                let mut mix = vec![0.0; dh];
                for head in &model.heads[d] {
                    let q = proj(qs, lq, b, &head.query);
                    let k = proj(kvs, lk, b, &head.key);
                    let v = proj(kvs, lk, b, &head.value);
                    for qi in &q {
                        let scores: Vec<f64> = k
                            .iter()
                            .map(|kj| qi.iter().zip(kj).map(|(x, y)| x * y).sum::<f64>() / (dh as f64).sqrt())
                            .collect();
                        let mx = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                        let e: Vec<f64> = scores.iter().map(|s| (s - mx).exp()).collect();
                        let z: f64 = e.iter().sum();
                        for (p, vj) in e.iter().zip(&v) {
                            for (m, x) in mix.iter_mut().zip(vj) {
                                *m += p / z * x / (lq as f64 * cfg.n_heads as f64);
                            }
                        }
                    }
                }
                fused.extend(mix);
            }
            let h: Vec<f64> = dense(&fused, &model.classifier.weight, &model.classifier.bias)
                .into_iter()
                .map(|v| v.max(0.0))
                .collect();
            dense(&h, &model.output.weight, &model.output.bias)
        })
        .collect()
}

/// Largest gap between the fusion forward pass under a constant Q vector and
/// the uniform-weight loop reference, over `trials` random models and inputs.
pub fn uniform_q_gap(seed: u64, trials: usize) -> f64 {
    use rand::Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let cfg = FusionConfig {
            n_heads: rng.random_range(1..5),
            head_dim: rng.random_range(1..6),
            conv1_channels: 3,
            token_channels: rng.random_range(2..7),
            hidden: 6,
            ..FusionConfig::default()
        };
        let (da, db) = (rng.random_range(4..20), rng.random_range(4..20));
        let model = FusionModel::new(da, db, cfg, &mut rng).unwrap();
        let mut state = cfg.new_bandit().unwrap();
        let q = rng.random_range(-3.0..3.0);
        state.q_values = [vec![q; cfg.n_heads], vec![q; cfg.n_heads]];
        let batch = rng.random_range(1..4);
        let xa = rand_tensor(&[batch, da], &mut rng);
        let xb = rand_tensor(&[batch, db], &mut rng);
        let mut tape = Tape::new();
        let a = tape.constant(xa.clone());
        let b = tape.constant(xb.clone());
        let fwd = model.forward(&mut tape, a, b, &state).unwrap();
        let logits = tape.value(fwd.logits);
        for (i, row) in reference_uniform_logits(&model, &xa, &xb).iter().enumerate() {
            for (x, y) in logits.row(i).iter().zip(row) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    worst
}

/// Live-head weights `[a_to_b, b_to_a]` after the planted-head scenario.
///
/// Every head but head 0 has its value projection held at zero. The model is
/// first trained with uniform head weights, then trained for `updates` more
/// batches with a bandit update before each optimiser step, as in training.
pub fn planted_head_weights(seed: u64, updates: usize) -> [f64; 2] {
    use baomi::fusion::{head_values, BanditState, Direction};
    use baomi::nn::Parameters;
    use baomi::tensor::{AdamConfig, AdamState};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = FusionConfig {
        n_heads: 4,
        head_dim: 4,
        conv1_channels: 4,
        token_channels: 8,
        hidden: 8,
        ..FusionConfig::default()
    };
    let (da, db, batch) = (8, 12, 32);
    let mut model = FusionModel::new(da, db, cfg, &mut rng).unwrap();
    let labels = random_labels(batch, &mut rng);
    // Class 1 rows are shifted up in both branches.
    let shifted = |d: usize, rng: &mut ChaCha8Rng| {
        let mut x = rand_tensor(&[batch, d], rng);
        for (i, &y) in labels.iter().enumerate() {
            for j in 0..d {
                x.data_mut()[i * d + j] += y as f64;
            }
        }
        x
    };
    let xa = shifted(da, &mut rng);
    let xb = shifted(db, &mut rng);
    let kill = |m: &mut FusionModel| {
        for dir in &mut m.heads {
            for head in dir.iter_mut().skip(1) {
                head.value.fill(0.0);
            }
        }
    };
    kill(&mut model);

    let mut adam = AdamState::new(AdamConfig::default(), model.parameters().into_iter().map(|(_, t)| t));
    let mut step = |model: &mut FusionModel, state: Option<&mut BanditState>| {
        let uniform = cfg.new_bandit().unwrap();
        let (grads, heads) = {
            let mut tape = Tape::new();
            let a = tape.constant(xa.clone());
            let b = tape.constant(xb.clone());
            let weights = state.as_deref().unwrap_or(&uniform);
            let f = model.forward(&mut tape, a, b, weights).unwrap();
            let loss = tape.cross_entropy(f.logits, &labels).unwrap();
            tape.backward(loss).unwrap();
            (model.gradients(&tape), head_values(&tape, &f))
        };
        if let Some(state) = state {
            model.bandit_update(state, &heads, &labels).unwrap();
        }
        adam.step(model.parameters_mut(), &grads).unwrap();
        kill(model);
    };
    for _ in 0..150 {
        step(&mut model, None);
    }
    let mut state = cfg.new_bandit().unwrap();
    for _ in 0..updates {
        step(&mut model, Some(&mut state));
    }
    assert_eq!(state.update_count, updates as u64);
    [state.head_weights(Direction::AToB)[0], state.head_weights(Direction::BToA)[0]]
}
