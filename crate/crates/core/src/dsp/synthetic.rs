//! Synthetic phonocardiogram-like clips for end-to-end checks.
//!
//! Every clip is a train of heart cycles. Each cycle has two short tone
//! bursts (S1 and S2 stand-ins) over a faint noise floor. Murmur clips also
//! carry band-limited noise in the systolic gap between S1 and S2.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::audio::AudioClip;
use crate::io::Label;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticPcgConfig {
    pub sample_rate_hz: u32,
    pub duration_secs: f64,
    pub burst_hz: f64,
    pub burst_secs: f64,
    /// Band of the murmur noise, Hz.
    pub murmur_band: (f64, f64),
    pub murmur_level: f64,
    pub noise_floor: f64,
}

impl Default for SyntheticPcgConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 4000,
            duration_secs: 3.0,
            burst_hz: 100.0,
            burst_secs: 0.06,
            murmur_band: (150.0, 450.0),
            murmur_level: 0.12,
            noise_floor: 0.005,
        }
    }
}

/// One clip. Cycle length, burst amplitude and murmur strength are jittered
/// by `rng`.
pub fn synthetic_pcg<R: Rng + ?Sized>(id: &str, label: Label, cfg: &SyntheticPcgConfig, rng: &mut R) -> AudioClip {
    let rate = cfg.sample_rate_hz as f64;
    let n = (cfg.duration_secs * rate).round() as usize;
    let mut x = vec![0.0f64; n];

    let cycle: f64 = rng.random_range(0.7..1.0);
    let s2_at = cycle * rng.random_range(0.32..0.4);
    let amp = rng.random_range(0.3..0.5);
    let burst_hz = cfg.burst_hz * rng.random_range(0.95..1.05);
    let burst_len = (cfg.burst_secs * rate) as usize;

    // Murmur: a bank of random-phase sinusoids inside the band.
    let partials: Vec<(f64, f64)> = (0..24)
        .map(|_| {
            (
                rng.random_range(cfg.murmur_band.0..cfg.murmur_band.1),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    let murmur_amp = cfg.murmur_level * rng.random_range(0.7..1.3) / (partials.len() as f64).sqrt();

    let mut onset = rng.random_range(0.0..cycle) - cycle;
    while onset < cfg.duration_secs {
        for (at, gain) in [(onset, 1.0), (onset + s2_at, 0.8)] {
            let first = (at * rate).round() as isize;
            for j in 0..burst_len {
                let i = first + j as isize;
                if i < 0 || i as usize >= n {
                    continue;
                }
                let env = (PI * j as f64 / burst_len as f64).sin();
                let t = j as f64 / rate;
                x[i as usize] += gain * amp * env * (2.0 * PI * burst_hz * t).sin();
            }
        }
        if label == Label::Present {
            let lo = ((onset + cfg.burst_secs) * rate).round() as isize;
            let hi = ((onset + s2_at) * rate).round() as isize;
            let width = (hi - lo).max(1) as f64;
            for i in lo.max(0)..hi.min(n as isize) {
                let t = i as f64 / rate;
                let env = (PI * (i - lo) as f64 / width).sin();
                let s: f64 = partials.iter().map(|(f, ph)| (2.0 * PI * f * t + ph).sin()).sum();
                x[i as usize] += murmur_amp * env * s;
            }
        }
        onset += cycle;
    }

    for v in x.iter_mut() {
        *v += cfg.noise_floor * rng.random_range(-1.0..1.0);
    }
    let samples = x.iter().map(|v| v.clamp(-1.0, 1.0) as f32).collect();
    AudioClip::new(id, cfg.sample_rate_hz, samples).expect("synthetic clip is valid")
}

/// `n` clips alternating Absent/Present, reproducible from `seed`.
pub fn synthetic_dataset(n: usize, cfg: &SyntheticPcgConfig, seed: u64) -> Vec<(AudioClip, Label)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let label = if i % 2 == 0 { Label::Absent } else { Label::Present };
            let clip = synthetic_pcg(&format!("syn{i:04}"), label, cfg, &mut rng);
            (clip, label)
        })
        .collect()
}
