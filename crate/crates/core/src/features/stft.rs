use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::FeatureError;

/// Power spectrogram, `n_bins × n_frames`, stored bin-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    n_bins: usize,
    n_frames: usize,
    data: Vec<f64>,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn get(&self, bin: usize, frame: usize) -> f64 {
        self.data[bin * self.n_frames + frame]
    }

    /// Power values of one frame across all bins.
    pub fn frame(&self, frame: usize) -> Vec<f64> {
        (0..self.n_bins).map(|b| self.get(b, frame)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Periodic Hann window.
pub fn hann_window(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

fn reflect_pad(x: &[f64], pad: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len() + 2 * pad);
    out.extend((1..=pad).rev().map(|i| x[i]));
    out.extend_from_slice(x);
    let n = x.len();
    out.extend((1..=pad).map(|i| x[n - 1 - i]));
    out
}

/// Hann-windowed short-time power spectrum `|DFT|²`.
///
/// With `centered`, the signal is reflection-padded by `n_fft / 2` on both
/// sides and yields `len / hop + 1` frames.
pub fn stft_power(
    samples: &[f64],
    n_fft: usize,
    hop: usize,
    centered: bool,
) -> Result<Spectrogram, FeatureError> {
    if !n_fft.is_power_of_two() || n_fft < 2 {
        return Err(FeatureError::InvalidConfig(format!(
            "n_fft {n_fft} is not a power of two"
        )));
    }
    if hop == 0 {
        return Err(FeatureError::InvalidConfig("hop must be positive".into()));
    }
    let too_short = FeatureError::SegmentTooShort {
        len: samples.len(),
        n_fft,
    };
    let padded;
    let signal: &[f64] = if centered {
        // Reflection needs at least pad + 1 samples.
        if samples.len() <= n_fft / 2 {
            return Err(too_short);
        }
        padded = reflect_pad(samples, n_fft / 2);
        &padded
    } else {
        if samples.len() < n_fft {
            return Err(too_short);
        }
        samples
    };

    let n_frames = (signal.len() - n_fft) / hop + 1;
    let n_bins = n_fft / 2 + 1;
    let window = hann_window(n_fft);
    let fft = FftPlanner::new().plan_fft_forward(n_fft);
    let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
    let mut data = vec![0.0; n_bins * n_frames];
    for t in 0..n_frames {
        let start = t * hop;
        for (slot, (&x, &w)) in buf
            .iter_mut()
            .zip(signal[start..start + n_fft].iter().zip(&window))
        {
            *slot = Complex::new(x * w, 0.0);
        }
        fft.process(&mut buf);
        for (k, c) in buf.iter().take(n_bins).enumerate() {
            data[k * n_frames + t] = c.norm_sqr();
        }
    }
    Ok(Spectrogram {
        n_bins,
        n_frames,
        data,
    })
}
