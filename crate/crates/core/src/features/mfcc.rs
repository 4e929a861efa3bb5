use std::f64::consts::PI;

use super::{mel_filterbank, stft_power, FeatureConfig, FeatureError, MelFilterbank};
use crate::audio::Segment;

/// First and thirteenth coefficient, the subset the prolongation detector sees.
pub const PROLONGATION_COEFFS: [usize; 2] = [0, 12];

/// Coefficients × frames feature array.
#[derive(Debug, Clone, PartialEq)]
pub struct MfccMatrix {
    values: Vec<f64>,
    n_frames: usize,
    coeff_indices: Vec<usize>,
}

impl MfccMatrix {
    /// `values` is coefficient-major: row `i` holds coefficient `coeff_indices[i]`.
    pub fn new(
        values: Vec<f64>,
        n_frames: usize,
        coeff_indices: Vec<usize>,
    ) -> Result<Self, FeatureError> {
        if values.len() != n_frames * coeff_indices.len() {
            return Err(FeatureError::InvalidConfig(format!(
                "{} values do not fill {} × {}",
                values.len(),
                coeff_indices.len(),
                n_frames
            )));
        }
        Ok(Self {
            values,
            n_frames,
            coeff_indices,
        })
    }

    pub fn n_coeffs(&self) -> usize {
        self.coeff_indices.len()
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_coeffs(), self.n_frames)
    }

    /// Original (0-based) coefficient index of each row.
    pub fn coeff_indices(&self) -> &[usize] {
        &self.coeff_indices
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_frames..(i + 1) * self.n_frames]
    }

    pub fn get(&self, row: usize, frame: usize) -> f64 {
        self.values[row * self.n_frames + frame]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Reusable extractor; builds the filterbank and DCT basis once.
#[derive(Debug, Clone)]
pub struct MfccExtractor {
    config: FeatureConfig,
    filterbank: MelFilterbank,
    dct_basis: Vec<f64>,
}

impl MfccExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self, FeatureError> {
        config.validate()?;
        let filterbank = mel_filterbank(
            config.sample_rate,
            config.n_fft,
            config.n_mels,
            config.f_min,
            config.f_max,
        )?;
        let n = config.n_mels as f64;
        let mut dct_basis = Vec::with_capacity(config.n_mfcc * config.n_mels);
        for k in 0..config.n_mfcc {
            let scale = if k == 0 {
                (1.0 / n).sqrt()
            } else {
                (2.0 / n).sqrt()
            };
            for i in 0..config.n_mels {
                dct_basis.push(scale * (PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos());
            }
        }
        Ok(Self {
            config,
            filterbank,
            dct_basis,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Log mel energies per frame, `frames × n_mels`.
    pub fn log_mel(&self, samples: &[f64]) -> Result<Vec<Vec<f64>>, FeatureError> {
        let power = stft_power(samples, self.config.n_fft, self.config.hop, true)?;
        Ok((0..power.n_frames())
            .map(|t| {
                self.filterbank
                    .apply(&power.frame(t))
                    .into_iter()
                    .map(|e| (e + self.config.log_floor).ln())
                    .collect()
            })
            .collect())
    }

    pub fn extract(&self, segment: &Segment) -> Result<MfccMatrix, FeatureError> {
        if segment.sample_rate() != self.config.sample_rate {
            return Err(FeatureError::InvalidConfig(format!(
                "segment is at {} Hz, extractor expects {} Hz",
                segment.sample_rate(),
                self.config.sample_rate
            )));
        }
        self.extract_samples(segment.samples())
    }

    /// Same as [`extract`](Self::extract) on raw samples at the configured rate.
    pub fn extract_samples(&self, samples: &[f64]) -> Result<MfccMatrix, FeatureError> {
        let log_mel = self.log_mel(samples)?;
        let n_frames = log_mel.len();
        let n_mels = self.config.n_mels;
        let n_mfcc = self.config.n_mfcc;
        let mut values = vec![0.0; n_mfcc * n_frames];
        for (t, frame) in log_mel.iter().enumerate() {
            for k in 0..n_mfcc {
                let basis = &self.dct_basis[k * n_mels..(k + 1) * n_mels];
                values[k * n_frames + t] = basis.iter().zip(frame).map(|(b, v)| b * v).sum();
            }
        }
        MfccMatrix::new(values, n_frames, (0..n_mfcc).collect())
    }
}

pub fn mfcc(segment: &Segment, config: &FeatureConfig) -> Result<MfccMatrix, FeatureError> {
    MfccExtractor::new(config.clone())?.extract(segment)
}

/// Copies the listed rows; indices refer to the matrix's current rows.
pub fn select_coefficients(m: &MfccMatrix, indices: &[usize]) -> Result<MfccMatrix, FeatureError> {
    if indices.is_empty() {
        return Err(FeatureError::InvalidConfig(
            "coefficient selection is empty".into(),
        ));
    }
    if let Some(&index) = indices.iter().find(|&&i| i >= m.n_coeffs()) {
        return Err(FeatureError::IndexOutOfRange {
            index,
            n_coeffs: m.n_coeffs(),
        });
    }
    if indices.windows(2).any(|w| w[0] >= w[1]) {
        return Err(FeatureError::InvalidConfig(format!(
            "coefficient selection {indices:?} is not strictly increasing"
        )));
    }
    let values = indices
        .iter()
        .flat_map(|&i| m.row(i).iter().copied())
        .collect();
    let coeff_indices = indices.iter().map(|&i| m.coeff_indices[i]).collect();
    MfccMatrix::new(values, m.n_frames, coeff_indices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::segment_from_samples;
    use crate::features::{dct2_ortho, dct3_ortho};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_segment(seed: u64) -> Segment {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..22_050).map(|_| rng.gen_range(-0.4..0.4)).collect();
        segment_from_samples(&samples, 22_050)
    }

    #[test]
    fn canonical_segment_gives_13_by_44() {
        let m = mfcc(&random_segment(1), &FeatureConfig::default()).unwrap();
        assert_eq!(m.shape(), (13, 44));
        assert_eq!(m.coeff_indices(), (0..13).collect::<Vec<_>>().as_slice());
        assert!(m.values().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn silence_is_finite_and_time_invariant() {
        let seg = segment_from_samples(&[], 22_050);
        let m = mfcc(&seg, &FeatureConfig::default()).unwrap();
        assert!(m.values().iter().all(|v| v.is_finite()));
        for k in 0..13 {
            let row = m.row(k);
            assert!(row.iter().all(|&v| v == row[0]));
        }
        let expected_c0 = 40f64.sqrt() * 1e-10f64.ln();
        assert!((m.get(0, 0) - expected_c0).abs() < 1e-9);
    }

    #[test]
    fn scaling_moves_only_c0() {
        let seg = random_segment(7);
        let doubled = segment_from_samples(
            &seg.samples().iter().map(|s| 2.0 * s).collect::<Vec<_>>(),
            22_050,
        );
        let cfg = FeatureConfig::default();
        let a = mfcc(&seg, &cfg).unwrap();
        let b = mfcc(&doubled, &cfg).unwrap();
        let shift = 40f64.sqrt() * 4f64.ln();
        for t in 1..43 {
            assert!((b.get(0, t) - a.get(0, t) - shift).abs() < 1e-6);
            for k in 1..13 {
                assert!(
                    (b.get(k, t) - a.get(k, t)).abs() < 1e-6,
                    "coeff {k} frame {t}"
                );
            }
        }
    }

    #[test]
    fn full_dct_inverts_to_log_mel() {
        let cfg = FeatureConfig {
            n_mfcc: 40,
            ..FeatureConfig::default()
        };
        let ex = MfccExtractor::new(cfg).unwrap();
        let seg = random_segment(3);
        let log_mel = ex.log_mel(seg.samples()).unwrap();
        let m = ex.extract(&seg).unwrap();
        for t in [0, 20, 43] {
            let coeffs: Vec<f64> = (0..40).map(|k| m.get(k, t)).collect();
            let direct = dct2_ortho(&log_mel[t]);
            for (a, b) in coeffs.iter().zip(&direct) {
                assert!((a - b).abs() < 1e-9);
            }
            for (a, b) in dct3_ortho(&coeffs).iter().zip(&log_mel[t]) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rate_mismatch_is_rejected() {
        let seg = segment_from_samples(&[0.0; 16_000], 16_000);
        assert!(mfcc(&seg, &FeatureConfig::default()).is_err());
    }

    #[test]
    fn prolongation_selection_shape() {
        let m = mfcc(&random_segment(2), &FeatureConfig::default()).unwrap();
        let s = select_coefficients(&m, &PROLONGATION_COEFFS).unwrap();
        assert_eq!(s.shape(), (2, 44));
        assert_eq!(s.coeff_indices(), &[0, 12]);
        assert_eq!(s.row(0), m.row(0));
        assert_eq!(s.row(1), m.row(12));
    }

    #[test]
    fn identity_selection_is_equal() {
        let m = mfcc(&random_segment(4), &FeatureConfig::default()).unwrap();
        let all: Vec<usize> = (0..13).collect();
        assert_eq!(select_coefficients(&m, &all).unwrap(), m);
    }

    #[test]
    fn bad_selections_error() {
        let m = mfcc(&random_segment(5), &FeatureConfig::default()).unwrap();
        assert_eq!(
            select_coefficients(&m, &[0, 13]),
            Err(FeatureError::IndexOutOfRange {
                index: 13,
                n_coeffs: 13
            })
        );
        assert!(select_coefficients(&m, &[]).is_err());
        assert!(select_coefficients(&m, &[3, 3]).is_err());
        assert!(select_coefficients(&m, &[4, 2]).is_err());
    }
}
