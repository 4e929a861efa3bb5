//! MFCC front end: power STFT, mel filterbank, log compression and DCT.

mod dct;
mod mel;
mod mfcc;
mod stft;

pub use dct::{dct2_ortho, dct3_ortho};
pub use mel::{hz_to_mel, mel_filterbank, mel_to_hz, MelFilterbank};
pub use mfcc::{mfcc, select_coefficients, MfccExtractor, MfccMatrix, PROLONGATION_COEFFS};
pub use stft::{hann_window, stft_power, Spectrogram};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::audio::CANONICAL_SAMPLE_RATE;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("segment too short: {len} samples cannot produce a frame with n_fft {n_fft}")]
    SegmentTooShort { len: usize, n_fft: usize },
    #[error(
        "bad frequency band: f_min {f_min} Hz, f_max {f_max} Hz, sample rate {sample_rate} Hz"
    )]
    BadBand {
        f_min: f64,
        f_max: f64,
        sample_rate: u32,
    },
    #[error("coefficient index {index} out of range for {n_coeffs} coefficients")]
    IndexOutOfRange { index: usize, n_coeffs: usize },
    #[error("invalid feature configuration: {0}")]
    InvalidConfig(String),
}

/// Every knob of the MFCC front end. Stored next to trained models so
/// inference extracts features exactly as training did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub n_fft: usize,
    pub hop: usize,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub f_min: f64,
    pub f_max: f64,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: CANONICAL_SAMPLE_RATE,
            n_fft: 2048,
            hop: 512,
            n_mels: 40,
            n_mfcc: 13,
            f_min: 0.0,
            f_max: CANONICAL_SAMPLE_RATE as f64 / 2.0,
            log_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let bad = |msg: String| Err(FeatureError::InvalidConfig(msg));
        if self.sample_rate == 0 {
            return bad("sample_rate must be positive".into());
        }
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return bad(format!("n_fft must be a power of two, got {}", self.n_fft));
        }
        if self.hop == 0 {
            return bad("hop must be positive".into());
        }
        if self.n_mels < 13 {
            return bad(format!("n_mels must be at least 13, got {}", self.n_mels));
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return bad(format!(
                "n_mfcc must be in 1..={}, got {}",
                self.n_mels, self.n_mfcc
            ));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return bad("log_floor must be positive".into());
        }
        Ok(())
    }

    /// Frames produced for one second of audio with centered framing.
    pub fn frames_per_second(&self) -> usize {
        self.sample_rate as usize / self.hop + 1
    }
}
