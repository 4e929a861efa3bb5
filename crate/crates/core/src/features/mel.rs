use super::FeatureError;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters on the mel scale, `n_mels × (n_fft/2 + 1)`.
///
/// Filter `i` rises from edge `i` to a unit peak at edge `i + 1` and falls
/// back to zero at edge `i + 2`, where the `n_mels + 2` edges are equally
/// spaced in mel between `f_min` and `f_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    weights: Vec<f64>,
    n_mels: usize,
    n_bins: usize,
    edges_hz: Vec<f64>,
    f_min: f64,
    f_max: f64,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn f_min(&self) -> f64 {
        self.f_min
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn row(&self, mel: usize) -> &[f64] {
        &self.weights[mel * self.n_bins..(mel + 1) * self.n_bins]
    }

    /// Peak frequency of each filter.
    pub fn centers_hz(&self) -> &[f64] {
        &self.edges_hz[1..=self.n_mels]
    }

    /// Lower and upper support edge of filter `mel`.
    pub fn support_hz(&self, mel: usize) -> (f64, f64) {
        (self.edges_hz[mel], self.edges_hz[mel + 2])
    }

    /// Applies the bank to one power-spectrum frame.
    pub fn apply(&self, power: &[f64]) -> Vec<f64> {
        assert_eq!(power.len(), self.n_bins, "power frame has wrong bin count");
        (0..self.n_mels)
            .map(|m| self.row(m).iter().zip(power).map(|(w, p)| w * p).sum())
            .collect()
    }
}

pub fn mel_filterbank(
    sample_rate: u32,
    n_fft: usize,
    n_mels: usize,
    f_min: f64,
    f_max: f64,
) -> Result<MelFilterbank, FeatureError> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(f_min >= 0.0 && f_min < f_max && f_max <= nyquist) {
        return Err(FeatureError::BadBand {
            f_min,
            f_max,
            sample_rate,
        });
    }
    if n_mels < 13 {
        return Err(FeatureError::InvalidConfig(format!(
            "n_mels must be at least 13, got {n_mels}"
        )));
    }
    if !n_fft.is_power_of_two() || n_fft < 2 {
        return Err(FeatureError::InvalidConfig(format!(
            "n_fft {n_fft} is not a power of two"
        )));
    }

    let n_bins = n_fft / 2 + 1;
    let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
    let step = (hi - lo) / (n_mels + 1) as f64;
    let edges_hz: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(lo + step * i as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * sample_rate as f64 / n_fft as f64;

    let mut weights = vec![0.0; n_mels * n_bins];
    for m in 0..n_mels {
        let (left, center, right) = (edges_hz[m], edges_hz[m + 1], edges_hz[m + 2]);
        for k in 0..n_bins {
            let f = bin_hz(k);
            let rising = (f - left) / (center - left);
            let falling = (right - f) / (right - center);
            weights[m * n_bins + k] = rising.min(falling).max(0.0);
        }
    }
    Ok(MelFilterbank {
        weights,
        n_mels,
        n_bins,
        edges_hz,
        f_min,
        f_max,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_bank() -> MelFilterbank {
        mel_filterbank(22_050, 2048, 40, 0.0, 11_025.0).unwrap()
    }

    #[test]
    fn mel_of_700_hz() {
        assert!((hz_to_mel(700.0) - 2595.0 * 2f64.log10()).abs() < 1e-12);
        assert!((hz_to_mel(700.0) - 781.17).abs() < 0.01);
        assert!((mel_to_hz(hz_to_mel(1234.5)) - 1234.5).abs() < 1e-9);
    }

    #[test]
    fn rows_positive_and_band_limited() {
        let bank = mel_filterbank(22_050, 2048, 40, 300.0, 8000.0).unwrap();
        for m in 0..bank.n_mels() {
            let row = bank.row(m);
            assert!(row.iter().sum::<f64>() > 0.0, "filter {m} is empty");
            assert!(row.iter().all(|&w| w >= 0.0));
            for (k, &w) in row.iter().enumerate() {
                let f = k as f64 * 22_050.0 / 2048.0;
                if !(300.0..=8000.0).contains(&f) {
                    assert_eq!(w, 0.0, "bin {k} at {f} Hz");
                }
            }
        }
    }

    #[test]
    fn centers_increase() {
        let bank = default_bank();
        assert_eq!(bank.centers_hz().len(), 40);
        assert!(bank.centers_hz().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn interior_filters_overlap_only_neighbors() {
        let bank = default_bank();
        for m in 1..bank.n_mels() - 1 {
            let (lo, hi) = bank.support_hz(m);
            for other in 0..bank.n_mels() {
                let (olo, ohi) = bank.support_hz(other);
                let overlaps = olo < hi && lo < ohi;
                let neighbor = other + 1 == m || m + 1 == other || other == m;
                assert_eq!(overlaps, neighbor, "filters {m} and {other}");
            }
        }
    }

    #[test]
    fn column_sums_positive_between_outer_centers() {
        let bank = default_bank();
        let centers = bank.centers_hz();
        let (first, last) = (centers[0], centers[centers.len() - 1]);
        for k in 0..bank.n_bins() {
            let f = k as f64 * 22_050.0 / 2048.0;
            if f > first && f < last {
                let col: f64 = (0..bank.n_mels()).map(|m| bank.row(m)[k]).sum();
                assert!(col > 0.0, "bin {k} at {f} Hz");
            }
        }
    }

    #[test]
    fn bad_band_is_rejected() {
        assert!(matches!(
            mel_filterbank(22_050, 2048, 40, 500.0, 500.0),
            Err(FeatureError::BadBand { .. })
        ));
        assert!(matches!(
            mel_filterbank(22_050, 2048, 40, 0.0, 12_000.0),
            Err(FeatureError::BadBand { .. })
        ));
        assert!(mel_filterbank(22_050, 2048, 12, 0.0, 8000.0).is_err());
    }
}
