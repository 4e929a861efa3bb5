use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{AudioClip, CANONICAL_SAMPLE_RATE};

const RATE: f64 = CANONICAL_SAMPLE_RATE as f64;
/// Raised-cosine ramp applied at every voiced onset and offset.
const RAMP_SECS: f64 = 0.005;

fn n_samples(seconds: f64) -> usize {
    (seconds.max(0.0) * RATE).round() as usize
}

/// Rounds to the 16-bit grid so the clip survives a WAV round trip unchanged.
fn finish(samples: Vec<f64>) -> AudioClip {
    let q = samples
        .into_iter()
        .map(|x| (x * 32768.0).round().clamp(-32768.0, 32767.0) / 32768.0)
        .collect();
    AudioClip::new(q, CANONICAL_SAMPLE_RATE).expect("generated samples are finite")
}

fn ramp(i: usize, len: usize, ramp_len: usize) -> f64 {
    let edge = i.min(len.saturating_sub(1 + i));
    if edge >= ramp_len {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / ramp_len as f64).cos()
    }
}

/// Harmonic weights peaked around a formant-like frequency, plus a gentle 1/h tilt.
fn formant_weights(f0: f64, formant: f64, bandwidth: f64) -> Vec<f64> {
    let n = ((4000.0 / f0).floor() as usize).clamp(3, 20);
    (1..=n)
        .map(|h| {
            let f = h as f64 * f0;
            (-((f - formant) / bandwidth).powi(2)).exp() + 0.3 / h as f64
        })
        .collect()
}

/// A voiced event whose pitch glides linearly from `f0_start` to `f0_end`,
/// normalized to peak near `amplitude`.
fn voiced(len: usize, f0_start: f64, f0_end: f64, weights: &[f64], amplitude: f64) -> Vec<f64> {
    let norm: f64 = weights.iter().sum();
    let ramp_len = n_samples(RAMP_SECS);
    let mut phase = 0.0;
    (0..len)
        .map(|i| {
            let frac = if len > 1 {
                i as f64 / (len - 1) as f64
            } else {
                0.0
            };
            let f0 = f0_start + (f0_end - f0_start) * frac;
            phase += 2.0 * PI * f0 / RATE;
            let s: f64 = weights
                .iter()
                .enumerate()
                .map(|(h, w)| w * ((h + 1) as f64 * phase).sin())
                .sum();
            amplitude * s / norm * ramp(i, len, ramp_len)
        })
        .collect()
}

/// A sustained three-harmonic tone with slow, shallow amplitude wobble,
/// held for the whole clip apart from short fades.
pub fn gen_prolongation_clip(seed: u64, seconds: f64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_samples(seconds);
    let f0 = rng.gen_range(90.0..250.0);
    let weights = [1.0, rng.gen_range(0.3..0.7), rng.gen_range(0.1..0.4)];
    let norm: f64 = weights.iter().sum();
    let amplitude = rng.gen_range(0.2..0.5);
    let jitter_hz = rng.gen_range(0.5..3.0);
    let jitter_depth = rng.gen_range(0.03..0.08);
    let jitter_phase = rng.gen_range(0.0..2.0 * PI);
    let fade = n_samples(0.02);
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / RATE;
            let env = 1.0 + jitter_depth * (2.0 * PI * jitter_hz * t + jitter_phase).sin();
            let s: f64 = weights
                .iter()
                .enumerate()
                .map(|(h, w)| w * (2.0 * PI * (h + 1) as f64 * f0 * t).sin())
                .sum();
            amplitude * env * s / norm * ramp(i, n, fade)
        })
        .collect();
    finish(samples)
}

/// One voiced burst repeated verbatim at a fixed period of at most 240 ms.
pub fn gen_repetition_clip(seed: u64, seconds: f64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_samples(seconds);
    let burst_secs: f64 = rng.gen_range(0.060..0.130);
    let gap_secs = rng.gen_range(0.050..(0.240 - burst_secs).min(0.120));
    let f0 = rng.gen_range(100.0..220.0);
    let weights = formant_weights(
        f0,
        rng.gen_range(300.0..2500.0),
        rng.gen_range(200.0..600.0),
    );
    let burst = voiced(
        n_samples(burst_secs),
        f0,
        f0 * rng.gen_range(0.92..1.08),
        &weights,
        rng.gen_range(0.2..0.5),
    );
    let period = burst.len() + n_samples(gap_secs);
    let mut samples = vec![0.0; n];
    let mut start = rng.gen_range(0..n_samples(gap_secs).max(1));
    while start < n {
        let end = (start + burst.len()).min(n);
        samples[start..end].copy_from_slice(&burst[..end - start]);
        start += period;
    }
    finish(samples)
}

/// Syllable-like voiced events of varying length, pitch and formant, with
/// irregular pauses between them.
pub fn gen_fluent_clip(seed: u64, seconds: f64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_samples(seconds);
    let base_amp = rng.gen_range(0.2..0.5);
    let mut samples = vec![0.0; n];
    let mut pos = n_samples(rng.gen_range(0.0..0.1));
    while pos < n {
        let len = n_samples(rng.gen_range(0.120..0.300));
        let f0 = rng.gen_range(100.0..220.0);
        let f0_end = f0 * rng.gen_range(0.8..1.2);
        let weights = formant_weights(
            f0,
            rng.gen_range(300.0..2500.0),
            rng.gen_range(200.0..600.0),
        );
        let syllable = voiced(
            len,
            f0,
            f0_end,
            &weights,
            base_amp * rng.gen_range(0.5..1.0),
        );
        let end = (pos + len).min(n);
        samples[pos..end].copy_from_slice(&syllable[..end - pos]);
        let pause: f64 = match rng.gen_range(0..10) {
            0..=4 => rng.gen_range(0.020..0.060),
            5..=7 => rng.gen_range(0.100..0.250),
            _ => 0.0,
        };
        pos = end + n_samples(pause);
    }
    finish(samples)
}

/// Uniform white noise through a one-pole low-pass of random strength.
pub fn gen_noise_clip(seed: u64, seconds: f64) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_samples(seconds);
    let pole = rng.gen_range(0.0..0.9);
    let target_rms = rng.gen_range(0.02..0.1);
    let mut y = 0.0;
    let raw: Vec<f64> = (0..n)
        .map(|_| {
            y = pole * y + (1.0 - pole) * rng.gen_range(-1.0..1.0);
            y
        })
        .collect();
    let rms = (raw.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    let scale = if rms > 0.0 { target_rms / rms } else { 0.0 };
    finish(raw.into_iter().map(|v| v * scale).collect())
}
