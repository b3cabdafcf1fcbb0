use std::path::Path;

use hound::{SampleFormat, WavSpec};

use crate::error::{Error, Result};

/// Mono audio with samples in `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub recording_id: String,
    pub sample_rate_hz: u32,
    pub samples: Vec<f32>,
}

impl AudioClip {
    pub fn new(recording_id: impl Into<String>, sample_rate_hz: u32, samples: Vec<f32>) -> Result<Self> {
        let recording_id = recording_id.into();
        if sample_rate_hz == 0 {
            return Err(Error::Config(format!("{recording_id}: sample rate must be positive")));
        }
        if samples.is_empty() {
            return Err(Error::Empty("audio clip"));
        }
        if let Some(s) = samples.iter().find(|s| s.is_nan() || s.abs() > 1.0) {
            return Err(Error::InvalidRecord(format!(
                "{recording_id}: sample {s} outside [-1, 1]"
            )));
        }
        Ok(Self {
            recording_id,
            sample_rate_hz,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }
}

/// Reads a 16-bit PCM mono WAV file. The recording id is the file stem.
pub fn load_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::UnsupportedEncoding {
            path: path.into(),
            detail: format!("{} channels, expected mono", spec.channels),
        });
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::UnsupportedEncoding {
            path: path.into(),
            detail: format!("{:?} {}-bit, expected 16-bit PCM", spec.sample_format, spec.bits_per_sample),
        });
    }
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| v as f32 / 32768.0))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| wav_error(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    AudioClip::new(id, spec.sample_rate, samples)
}

/// Writes a clip as 16-bit PCM mono, clamping to the int16 range.
pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let path = path.as_ref();
    let spec = WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
    for &s in &clip.samples {
        let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| wav_error(path, e))?;
    }
    writer.finalize().map_err(|e| wav_error(path, e))
}

fn wav_error(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::Unsupported => Error::UnsupportedEncoding {
            path: path.into(),
            detail: "unsupported WAV format".into(),
        },
        other => Error::MalformedWav {
            path: path.into(),
            detail: other.to_string(),
        },
    }
}

/// Zero-pads every clip at the end to the longest clip's length.
pub fn pad_to_max(clips: &[AudioClip]) -> Result<Vec<AudioClip>> {
    let first = clips.first().ok_or(Error::NoClips)?;
    if let Some(other) = clips.iter().find(|c| c.sample_rate_hz != first.sample_rate_hz) {
        return Err(Error::MixedSampleRate(first.sample_rate_hz, other.sample_rate_hz));
    }
    let max_len = clips.iter().map(AudioClip::len).max().unwrap_or(0);
    Ok(clips
        .iter()
        .map(|c| {
            let mut padded = c.clone();
            padded.samples.resize(max_len, 0.0);
            padded
        })
        .collect())
}
