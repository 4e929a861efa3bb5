//! Signal statistics used to check the generated archetypes.

use crate::audio::AudioClip;
use crate::features::stft_power;

/// Mean L1 change of the power spectrum between consecutive frames, divided
/// by the mean total power per frame. Edge frames are excluded.
pub fn spectral_flux(clip: &AudioClip) -> f64 {
    let Ok(spec) = stft_power(clip.samples(), 2048, 512, true) else {
        return 0.0;
    };
    let frames: Vec<Vec<f64>> = (0..spec.n_frames()).map(|t| spec.frame(t)).collect();
    if frames.len() < 4 {
        return 0.0;
    }
    let interior = &frames[1..frames.len() - 1];
    let delta: f64 = interior
        .windows(2)
        .map(|w| {
            w[1].iter()
                .zip(&w[0])
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
        })
        .sum::<f64>()
        / (interior.len() - 1) as f64;
    let power: f64 =
        interior.iter().map(|f| f.iter().sum::<f64>()).sum::<f64>() / interior.len() as f64;
    if power > 0.0 {
        delta / power
    } else {
        0.0
    }
}

/// RMS of consecutive non-overlapping frames of `frame` samples.
pub fn rms_envelope(samples: &[f64], frame: usize) -> Vec<f64> {
    samples
        .chunks_exact(frame.max(1))
        .map(|c| (c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64).sqrt())
        .collect()
}

/// Autocorrelation of the mean-removed envelope, normalized so lag 0 is 1.
pub fn envelope_autocorrelation(envelope: &[f64]) -> Vec<f64> {
    let n = envelope.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = envelope.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = envelope.iter().map(|v| v - mean).collect();
    let r0: f64 = x.iter().map(|v| v * v).sum();
    (0..n)
        .map(|lag| {
            if r0 == 0.0 {
                return 0.0;
            }
            x[..n - lag]
                .iter()
                .zip(&x[lag..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / r0
        })
        .collect()
}

/// Envelope frame length: 10 ms.
pub const ENVELOPE_FRAME_SECS: f64 = 0.01;
/// Shortest lag considered a repetition period: 50 ms.
pub const MIN_PERIOD_SECS: f64 = 0.05;

/// Highest local maximum of the envelope autocorrelation between 50 ms and
/// half the clip, as `(lag in seconds, value)`. `(0, 0)` when there is none.
pub fn envelope_peak(clip: &AudioClip) -> (f64, f64) {
    let frame = (clip.sample_rate() as f64 * ENVELOPE_FRAME_SECS).round() as usize;
    let ac = envelope_autocorrelation(&rms_envelope(clip.samples(), frame));
    let min_lag = (MIN_PERIOD_SECS / ENVELOPE_FRAME_SECS).round() as usize;
    let max_lag = ac.len() / 2;
    let mut best = (0, 0.0);
    for lag in min_lag.max(1)..max_lag {
        if ac[lag] > ac[lag - 1] && ac[lag] >= ac[lag + 1] && ac[lag] > best.1 {
            best = (lag, ac[lag]);
        }
    }
    (best.0 as f64 * ENVELOPE_FRAME_SECS, best.1)
}

pub fn zero_crossings(samples: &[f64]) -> usize {
    samples
        .windows(2)
        .filter(|w| (w[0] < 0.0 && w[1] >= 0.0) || (w[0] >= 0.0 && w[1] < 0.0))
        .count()
}

pub fn rms(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    (samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64).sqrt()
}
