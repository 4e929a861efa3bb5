//! Mono audio clips: WAV I/O, resampling and fixed-length segmentation.
//!
//! Everything downstream works on one-second [`Segment`]s cut from a clip
//! resampled to [`CANONICAL_SAMPLE_RATE`].

mod manifest;
mod wav;

pub use manifest::{read_manifest, write_manifest, Label, ManifestEntry};
pub use wav::{parse_wav, read_wav_file, write_wav, write_wav_file};

use thiserror::Error;

/// 22050 Hz with a 512-sample hop gives exactly 44 frames per second.
pub const CANONICAL_SAMPLE_RATE: u32 = 22_050;

#[derive(Debug, Error)]
pub enum AudioError {
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("unsupported WAV encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("invalid clip: {0}")]
    InvalidClip(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("I/O failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// A mono waveform with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    samples: Vec<f64>,
    sample_rate: u32,
}

impl AudioClip {
    /// Builds a clip, clipping every sample into `[-1, 1]`.
    ///
    /// Non-finite samples are rejected rather than clipped.
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self, AudioError> {
        if sample_rate == 0 {
            return Err(AudioError::InvalidClip(
                "sample rate must be positive".into(),
            ));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(AudioError::InvalidClip(format!(
                "non-finite sample at index {i}"
            )));
        }
        let samples = samples.into_iter().map(|s| s.clamp(-1.0, 1.0)).collect();
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn silence(len: usize, sample_rate: u32) -> Result<Self, AudioError> {
        Self::new(vec![0.0; len], sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

/// Exactly one second of audio cut from a clip.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    samples: Vec<f64>,
    sample_rate: u32,
    origin_offset: usize,
}

impl Segment {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    /// Index of the first sample in the source clip.
    pub fn origin_offset(&self) -> usize {
        self.origin_offset
    }

    pub fn offset_secs(&self) -> f64 {
        self.origin_offset as f64 / self.sample_rate as f64
    }
}

/// Linear-interpolation resampler.
///
/// Output length is `round(len * target / source)`. Output sample `j` sits at
/// source position `j * source / target`; positions past the last input
/// sample hold the last value.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::InvalidClip(
            "target rate must be positive".into(),
        ));
    }
    if target_rate == clip.sample_rate || clip.is_empty() {
        return Ok(AudioClip {
            samples: clip.samples.clone(),
            sample_rate: target_rate,
        });
    }
    let src = &clip.samples;
    let ratio = clip.sample_rate as f64 / target_rate as f64;
    let out_len =
        (src.len() as f64 * target_rate as f64 / clip.sample_rate as f64).round() as usize;
    let last = src.len() - 1;
    let samples = (0..out_len)
        .map(|j| {
            let pos = j as f64 * ratio;
            let i = pos.floor() as usize;
            if i >= last {
                return src[last];
            }
            let frac = pos - i as f64;
            src[i] + (src[i + 1] - src[i]) * frac
        })
        .collect();
    Ok(AudioClip {
        samples,
        sample_rate: target_rate,
    })
}

/// Cuts a clip into non-overlapping one-second segments.
///
/// A trailing partial window of at least half a second is zero-padded and
/// kept; a shorter one is dropped.
pub fn segment(clip: &AudioClip) -> Vec<Segment> {
    let width = clip.sample_rate as usize;
    clip.samples
        .chunks(width)
        .enumerate()
        .filter(|(_, chunk)| chunk.len() == width || 2 * chunk.len() >= width)
        .map(|(i, chunk)| {
            let mut samples = chunk.to_vec();
            samples.resize(width, 0.0);
            Segment {
                samples,
                sample_rate: clip.sample_rate,
                origin_offset: i * width,
            }
        })
        .collect()
}

/// Builds a segment directly from samples, zero-padding or truncating to one second.
pub fn segment_from_samples(samples: &[f64], sample_rate: u32) -> Segment {
    let width = sample_rate as usize;
    let mut samples = samples[..samples.len().min(width)].to_vec();
    samples.resize(width, 0.0);
    Segment {
        samples,
        sample_rate,
        origin_offset: 0,
    }
}
