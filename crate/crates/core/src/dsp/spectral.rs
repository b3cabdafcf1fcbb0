//! MFCC and LFCC extraction.
//!
//! Per frame: periodic Hann window, zero-padded FFT, magnitude spectrum,
//! triangular filterbank (HTK mel or linear, spanning 0 Hz to Nyquist),
//! `ln(energy + floor)`, orthonormal DCT-II, truncation. The per-frame
//! coefficients are then averaged over all full frames of the clip.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::audio::AudioClip;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub frame_length_ms: f64,
    pub hop_ms: f64,
    pub n_mel_filters: usize,
    pub n_linear_filters: usize,
    pub n_mfcc: usize,
    pub n_lfcc: usize,
    pub log_floor: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            frame_length_ms: 25.0,
            hop_ms: 10.0,
            n_mel_filters: 128,
            n_linear_filters: 24,
            n_mfcc: 40,
            n_lfcc: 14,
            log_floor: 1e-10,
        }
    }
}

impl SpectralConfig {
    pub fn frame_samples(&self, sample_rate: u32) -> usize {
        (sample_rate as f64 * self.frame_length_ms / 1000.0).round() as usize
    }

    pub fn hop_samples(&self, sample_rate: u32) -> usize {
        (sample_rate as f64 * self.hop_ms / 1000.0).round() as usize
    }

    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if self.n_mfcc > self.n_mel_filters || self.n_lfcc > self.n_linear_filters {
            return Err(Error::Config(
                "cannot keep more cepstral coefficients than filters".into(),
            ));
        }
        if self.n_mfcc == 0 || self.n_lfcc == 0 {
            return Err(Error::Config("coefficient counts must be positive".into()));
        }
        if self.frame_samples(sample_rate) == 0 || self.hop_samples(sample_rate) == 0 {
            return Err(Error::Config(format!(
                "frame or hop is shorter than one sample at {sample_rate} Hz"
            )));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return Err(Error::Config("log floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CepstralKind {
    Mfcc,
    Lfcc,
}

impl CepstralKind {
    pub fn scale(self) -> FilterScale {
        match self {
            CepstralKind::Mfcc => FilterScale::Mel,
            CepstralKind::Lfcc => FilterScale::Linear,
        }
    }

    pub fn n_filters(self, cfg: &SpectralConfig) -> usize {
        match self {
            CepstralKind::Mfcc => cfg.n_mel_filters,
            CepstralKind::Lfcc => cfg.n_linear_filters,
        }
    }

    pub fn n_coefficients(self, cfg: &SpectralConfig) -> usize {
        match self {
            CepstralKind::Mfcc => cfg.n_mfcc,
            CepstralKind::Lfcc => cfg.n_lfcc,
        }
    }
}

impl std::str::FromStr for CepstralKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mfcc" => Ok(CepstralKind::Mfcc),
            "lfcc" => Ok(CepstralKind::Lfcc),
            other => Err(Error::Config(format!("unknown spectral feature {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterScale {
    /// HTK mel scale, `2595·log10(1 + f/700)`.
    Mel,
    Linear,
}

impl FilterScale {
    fn forward(self, hz: f64) -> f64 {
        match self {
            FilterScale::Mel => hz_to_mel(hz),
            FilterScale::Linear => hz,
        }
    }

    fn inverse(self, v: f64) -> f64 {
        match self {
            FilterScale::Mel => mel_to_hz(v),
            FilterScale::Linear => v,
        }
    }
}

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters over the one-sided spectrum of an `fft_size` FFT.
#[derive(Clone, Debug)]
pub struct Filterbank {
    weights: Vec<Vec<f64>>,
    edges_hz: Vec<f64>,
    bin_hz: f64,
}

impl Filterbank {
    pub fn new(scale: FilterScale, n_filters: usize, fft_size: usize, sample_rate: u32) -> Self {
        let nyquist = sample_rate as f64 / 2.0;
        let top = scale.forward(nyquist);
        let edges_hz: Vec<f64> = (0..n_filters + 2)
            .map(|i| scale.inverse(top * i as f64 / (n_filters + 1) as f64))
            .collect();
        let n_bins = fft_size / 2 + 1;
        let bin_hz = sample_rate as f64 / fft_size as f64;
        let weights = (0..n_filters)
            .map(|m| {
                let (lo, center, hi) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
                (0..n_bins)
                    .map(|k| {
                        let f = k as f64 * bin_hz;
                        if f > lo && f <= center {
                            (f - lo) / (center - lo)
                        } else if f > center && f < hi {
                            (hi - f) / (hi - center)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            weights,
            edges_hz,
            bin_hz,
        }
    }

    pub fn n_filters(&self) -> usize {
        self.weights.len()
    }

    pub fn n_bins(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn bin_hz(&self) -> f64 {
        self.bin_hz
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// `(lower, center, upper)` edge frequencies of filter `m` in Hz.
    pub fn edges(&self, m: usize) -> (f64, f64, f64) {
        (self.edges_hz[m], self.edges_hz[m + 1], self.edges_hz[m + 2])
    }

    pub fn has_empty_filter(&self) -> bool {
        self.weights.iter().any(|row| row.iter().all(|&w| w <= 0.0))
    }

    pub fn apply(&self, spectrum: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .map(|row| row.iter().zip(spectrum).map(|(w, s)| w * s).sum())
            .collect()
    }
}

/// Smallest power-of-two FFT length that holds one frame and leaves no
/// filter of the bank without a positive-weight bin.
pub fn fft_size_for(frame_samples: usize, scale: FilterScale, n_filters: usize, sample_rate: u32) -> Result<usize> {
    let mut size = frame_samples.max(2).next_power_of_two();
    while Filterbank::new(scale, n_filters, size, sample_rate).has_empty_filter() {
        size *= 2;
        if size > 1 << 22 {
            return Err(Error::Config(format!(
                "{n_filters} filters cannot all be resolved at {sample_rate} Hz"
            )));
        }
    }
    Ok(size)
}

/// Orthonormal DCT-II basis, `n_keep` rows of length `n`.
pub fn dct2_matrix(n: usize, n_keep: usize) -> Vec<Vec<f64>> {
    (0..n_keep)
        .map(|k| {
            let s = if k == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            (0..n)
                .map(|i| s * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                .collect()
        })
        .collect()
}

/// First `n_keep` orthonormal DCT-II coefficients of `x`.
pub fn dct2_ortho(x: &[f64], n_keep: usize) -> Vec<f64> {
    dct2_matrix(x.len(), n_keep)
        .iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Inverse of the full orthonormal DCT-II (a DCT-III).
pub fn idct2_ortho(coeffs: &[f64]) -> Vec<f64> {
    let n = coeffs.len();
    let basis = dct2_matrix(n, n);
    (0..n)
        .map(|i| basis.iter().zip(coeffs).map(|(row, c)| row[i] * c).sum())
        .collect()
}

fn periodic_hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / len as f64).cos())
        .collect()
}

/// Precomputed MFCC or LFCC pipeline for one sample rate.
pub struct CepstralExtractor {
    kind: CepstralKind,
    sample_rate: u32,
    frame: usize,
    hop: usize,
    fft_size: usize,
    log_floor: f64,
    window: Vec<f64>,
    filterbank: Filterbank,
    dct: Vec<Vec<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl CepstralExtractor {
    pub fn new(kind: CepstralKind, cfg: &SpectralConfig, sample_rate: u32) -> Result<Self> {
        cfg.validate(sample_rate)?;
        let frame = cfg.frame_samples(sample_rate);
        let n_filters = kind.n_filters(cfg);
        let fft_size = fft_size_for(frame, kind.scale(), n_filters, sample_rate)?;
        let filterbank = Filterbank::new(kind.scale(), n_filters, fft_size, sample_rate);
        Ok(Self {
            kind,
            sample_rate,
            frame,
            hop: cfg.hop_samples(sample_rate),
            fft_size,
            log_floor: cfg.log_floor,
            window: periodic_hann(frame),
            dct: dct2_matrix(n_filters, kind.n_coefficients(cfg)),
            filterbank,
            fft: FftPlanner::new().plan_fft_forward(fft_size),
        })
    }

    pub fn kind(&self) -> CepstralKind {
        self.kind
    }

    pub fn frame_samples(&self) -> usize {
        self.frame
    }

    pub fn hop_samples(&self) -> usize {
        self.hop
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn filterbank(&self) -> &Filterbank {
        &self.filterbank
    }

    pub fn n_coefficients(&self) -> usize {
        self.dct.len()
    }

    pub fn frame_count(&self, n_samples: usize) -> usize {
        if n_samples < self.frame {
            0
        } else {
            1 + (n_samples - self.frame) / self.hop
        }
    }

    /// Magnitude spectrum (bins 0..=N/2) of one windowed frame.
    pub fn magnitude_spectrum(&self, frame: &[f32]) -> Vec<f64> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.fft_size];
        for ((b, &s), w) in buf.iter_mut().zip(frame).zip(&self.window) {
            b.re = s as f64 * w;
        }
        self.fft.process(&mut buf);
        buf[..self.fft_size / 2 + 1].iter().map(|c| c.norm()).collect()
    }

    /// Filterbank energies of one frame, before the log.
    pub fn filterbank_energies(&self, frame: &[f32]) -> Vec<f64> {
        self.filterbank.apply(&self.magnitude_spectrum(frame))
    }

    pub fn frame_coefficients(&self, frame: &[f32]) -> Vec<f64> {
        let log_e: Vec<f64> = self
            .filterbank_energies(frame)
            .iter()
            .map(|e| (e + self.log_floor).ln())
            .collect();
        self.dct
            .iter()
            .map(|row| row.iter().zip(&log_e).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// Frame-averaged cepstral vector of a clip.
    pub fn extract(&self, clip: &AudioClip) -> Result<Vec<f64>> {
        if clip.sample_rate_hz != self.sample_rate {
            return Err(Error::MixedSampleRate(self.sample_rate, clip.sample_rate_hz));
        }
        let n_frames = self.frame_count(clip.len());
        if n_frames == 0 {
            return Err(Error::ClipTooShort {
                id: clip.recording_id.clone(),
                len: clip.len(),
                need: self.frame,
            });
        }
        let mut mean = vec![0.0; self.n_coefficients()];
        for f in 0..n_frames {
            let start = f * self.hop;
            let coeffs = self.frame_coefficients(&clip.samples[start..start + self.frame]);
            mean.iter_mut().zip(&coeffs).for_each(|(m, c)| *m += c);
        }
        mean.iter_mut().for_each(|m| *m /= n_frames as f64);
        Ok(mean)
    }

    pub fn extract_all(&self, clips: &[AudioClip]) -> Vec<Result<Vec<f64>>> {
        clips.par_iter().map(|c| self.extract(c)).collect()
    }
}

pub fn mfcc(clip: &AudioClip, cfg: &SpectralConfig) -> Result<Vec<f64>> {
    CepstralExtractor::new(CepstralKind::Mfcc, cfg, clip.sample_rate_hz)?.extract(clip)
}

pub fn lfcc(clip: &AudioClip, cfg: &SpectralConfig) -> Result<Vec<f64>> {
    CepstralExtractor::new(CepstralKind::Lfcc, cfg, clip.sample_rate_hz)?.extract(clip)
}
