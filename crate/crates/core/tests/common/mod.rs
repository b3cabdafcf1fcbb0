#![allow(dead_code)]

pub mod suite;

use baomi::dsp::synthetic::{synthetic_dataset, SyntheticPcgConfig};
use baomi::dsp::{CepstralExtractor, CepstralKind, SpectralConfig};
use baomi::io::FeatureRecord;
use baomi::nn::Parameters;
use baomi::tensor::{Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
/// Gradients smaller than this are compared absolutely rather than relatively.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Random tensor with entries in `(-1, 1)`.
pub fn rand_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::uniform(shape, 1.0, rng)
}

/// `Σ v ⊙ R` with a fixed random `R`, turning any output into a scalar with
/// a non-trivial upstream gradient.
pub fn probe(tape: &mut Tape<'_>, v: Var, seed: u64) -> Var {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = Tensor::uniform(tape.shape(v), 1.0, &mut rng);
    let r = tape.constant(r);
    let prod = tape.mul(v, r).unwrap();
    tape.sum(prod)
}

/// Largest relative error between backprop and central differences over
/// every element of every input.
pub fn check_inputs<F>(inputs: &[Tensor], f: F) -> f64
where
    F: Fn(&mut Tape<'_>, &[Var]) -> Var,
{
    let eval = |xs: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|x| tape.leaf(x.clone(), true)).collect();
        let out = f(&mut tape, &vars);
        tape.value(out).item()
    };
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|x| tape.leaf(x.clone(), true)).collect();
    let out = f(&mut tape, &vars);
    tape.backward(out).unwrap();
    let analytic: Vec<Tensor> = vars.iter().map(|&v| tape.grad(v).expect("input gradient").clone()).collect();

    let mut worst: f64 = 0.0;
    let mut xs = inputs.to_vec();
    for (k, g) in analytic.iter().enumerate() {
        for j in 0..xs[k].len() {
            let orig = xs[k].data()[j];
            xs[k].data_mut()[j] = orig + FD_STEP;
            let up = eval(&xs);
            xs[k].data_mut()[j] = orig - FD_STEP;
            let down = eval(&xs);
            xs[k].data_mut()[j] = orig;
            worst = worst.max(rel_error(g.data()[j], (up - down) / (2.0 * FD_STEP)));
        }
    }
    worst
}

/// Same as [`check_inputs`] but over every trainable tensor of a model.
pub fn check_parameters<M, F>(model: &mut M, loss: F) -> f64
where
    M: Parameters,
    F: for<'a> Fn(&'a M, &mut Tape<'a>) -> Var,
{
    let analytic = {
        let mut tape = Tape::new();
        let out = loss(model, &mut tape);
        tape.backward(out).unwrap();
        model.gradients(&tape)
    };
    let eval = |m: &M| {
        let mut tape = Tape::new();
        let out = loss(m, &mut tape);
        tape.value(out).item()
    };
    let mut worst: f64 = 0.0;
    for (k, g) in analytic.iter().enumerate() {
        let g = g.as_ref().expect("every parameter has a gradient");
        for j in 0..g.len() {
            let orig = model.parameters_mut()[k].data()[j];
            model.parameters_mut()[k].data_mut()[j] = orig + FD_STEP;
            let up = eval(model);
            model.parameters_mut()[k].data_mut()[j] = orig - FD_STEP;
            let down = eval(model);
            model.parameters_mut()[k].data_mut()[j] = orig;
            worst = worst.max(rel_error(g.data()[j], (up - down) / (2.0 * FD_STEP)));
        }
    }
    worst
}

pub fn random_labels(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..2)).collect()
}

// Brute-force reference implementations on plain nested loops.

pub fn oracle_matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            let mut s = 0.0;
            for p in 0..k {
                s += a[i * k + p] * b[p * n + j];
            }
            out[i * n + j] = s;
        }
    }
    out
}

/// Zero-padded `same` correlation, `x: [B×Cin×L]`, `w: [Cout×Cin×K]`.
#[allow(clippy::too_many_arguments)]
pub fn oracle_conv1d(x: &[f64], w: &[f64], bias: &[f64], b: usize, c_in: usize, c_out: usize, len: usize, k: usize) -> Vec<f64> {
    let pad = (k / 2) as isize;
    let mut out = vec![0.0; b * c_out * len];
    for n in 0..b {
        for o in 0..c_out {
            for t in 0..len {
                let mut s = bias[o];
                for i in 0..c_in {
                    for q in 0..k {
                        let src = t as isize + q as isize - pad;
                        if src >= 0 && (src as usize) < len {
                            s += w[(o * c_in + i) * k + q] * x[(n * c_in + i) * len + src as usize];
                        }
                    }
                }
                out[(n * c_out + o) * len + t] = s;
            }
        }
    }
    out
}

pub fn oracle_maxpool(x: &[f64], rows: usize, len: usize, window: usize) -> Vec<f64> {
    let out_len = len / window;
    let mut out = Vec::new();
    for r in 0..rows {
        for j in 0..out_len {
            let mut m = f64::NEG_INFINITY;
            for i in 0..window {
                m = m.max(x[r * len + j * window + i]);
            }
            out.push(m);
        }
    }
    out
}

pub fn oracle_softmax(x: &[f64], n: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for row in x.chunks(n) {
        let denom: f64 = row.iter().map(|v| v.exp()).sum();
        out.extend(row.iter().map(|v| v.exp() / denom));
    }
    out
}

pub fn oracle_cross_entropy(logits: &[f64], n: usize, labels: &[usize]) -> f64 {
    let mut total = 0.0;
    for (row, &y) in logits.chunks(n).zip(labels) {
        let lse = row.iter().map(|v| v.exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    total / labels.len() as f64
}

/// MFCC (branch A) and LFCC (branch B) records of synthetic recordings.
pub fn synthetic_features(n: usize, seed: u64) -> (Vec<FeatureRecord>, Vec<FeatureRecord>) {
    let clips = synthetic_dataset(n, &SyntheticPcgConfig::default(), seed);
    let cfg = SpectralConfig::default();
    let extract = |kind| {
        let ex = CepstralExtractor::new(kind, &cfg, 4000).unwrap();
        clips
            .iter()
            .map(|(c, l)| {
                let v = ex.extract(c).unwrap();
                FeatureRecord::new(c.recording_id.clone(), *l, v.into_iter().map(|x| x as f32).collect())
            })
            .collect()
    };
    (extract(CepstralKind::Mfcc), extract(CepstralKind::Lfcc))
}
