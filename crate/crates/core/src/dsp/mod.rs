//! Audio ingestion and spectral features.

mod audio;
mod spectral;
pub mod synthetic;

pub use audio::{load_wav, pad_to_max, write_wav, AudioClip};
pub use spectral::{
    dct2_matrix, dct2_ortho, fft_size_for, hz_to_mel, idct2_ortho, lfcc, mel_to_hz, mfcc, CepstralExtractor,
    CepstralKind, FilterScale, Filterbank, SpectralConfig,
};
