//! The two reference detectors and the detector-level workflow: training from
//! a labeled manifest, persistence, and per-segment diagnosis of a clip.

mod builders;
mod report;
mod train;

pub use builders::{build_prolongation_model, build_repetition_model, Widths, DEFAULT_DROPOUT};
pub use report::{diagnose, DiagnosisReport, SegmentScore, SeverityPair};
pub use train::{train_detector, train_detector_on_clips, DetectorMetrics};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::audio::{self, AudioClip, AudioError};
use crate::features::{
    select_coefficients, FeatureConfig, FeatureError, MfccExtractor, MfccMatrix,
    PROLONGATION_COEFFS,
};
use crate::nn::{self, ModelGraph, NnError, Tensor};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("no {class} examples for the {kind} detector")]
    EmptyClass {
        kind: DetectorKind,
        class: &'static str,
    },
    #[error("detectors disagree on feature configuration")]
    FeatureConfigMismatch,
    #[error("expected a {expected} detector, got {found}")]
    KindMismatch {
        expected: DetectorKind,
        found: DetectorKind,
    },
    #[error("bad detector metadata: {0}")]
    Metadata(String),
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Prolongation,
    Repetition,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 2] = [DetectorKind::Prolongation, DetectorKind::Repetition];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Prolongation => "prolongation",
            DetectorKind::Repetition => "repetition",
        }
    }

    /// MFCC rows the detector consumes: the first and last of 13 for
    /// prolongation, all of them for repetition.
    pub fn coeff_indices(self, n_mfcc: usize) -> Vec<usize> {
        match self {
            DetectorKind::Prolongation => PROLONGATION_COEFFS.to_vec(),
            DetectorKind::Repetition => (0..n_mfcc).collect(),
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "prolongation" => Ok(DetectorKind::Prolongation),
            "repetition" => Ok(DetectorKind::Repetition),
            other => Err(format!(
                "unknown detector kind {other:?}, expected prolongation or repetition"
            )),
        }
    }
}

/// Per-row standardization fitted on training features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity(rows: usize) -> Self {
        Self {
            mean: vec![0.0; rows],
            std: vec![1.0; rows],
        }
    }

    /// Mean and population standard deviation of every row over all frames of all matrices.
    pub fn fit(features: &[&MfccMatrix]) -> Self {
        let rows = features.first().map_or(0, |m| m.n_coeffs());
        let mut mean = vec![0.0; rows];
        let mut sq = vec![0.0; rows];
        let mut count = 0usize;
        for m in features {
            for r in 0..rows {
                for &v in m.row(r) {
                    mean[r] += v;
                    sq[r] += v * v;
                }
            }
            count += m.n_frames();
        }
        let n = count.max(1) as f64;
        let std = mean
            .iter_mut()
            .zip(&sq)
            .map(|(mu, s)| {
                *mu /= n;
                let var = (s / n - *mu * *mu).max(0.0);
                if var.sqrt() > 1e-8 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }
}

/// A trained detector together with everything needed to reproduce its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Detector {
    pub kind: DetectorKind,
    pub model: ModelGraph,
    pub feature_config: FeatureConfig,
    pub coeff_indices: Vec<usize>,
    pub threshold: f64,
    pub normalization: Normalization,
}

#[derive(Serialize, Deserialize)]
struct DetectorMeta {
    kind: DetectorKind,
    feature_config: FeatureConfig,
    coeff_indices: Vec<usize>,
    threshold: f64,
    normalization: Normalization,
}

impl Detector {
    pub fn new(
        kind: DetectorKind,
        model: ModelGraph,
        feature_config: FeatureConfig,
        threshold: f64,
        normalization: Normalization,
    ) -> Result<Self, DetectorError> {
        let coeff_indices = kind.coeff_indices(feature_config.n_mfcc);
        let detector = Self {
            kind,
            model,
            feature_config,
            coeff_indices,
            threshold,
            normalization,
        };
        detector.check()?;
        Ok(detector)
    }

    fn check(&self) -> Result<(), DetectorError> {
        let rows = self.coeff_indices.len();
        let want = [rows, self.feature_config.frames_per_second(), 1];
        if self.model.input_shape() != want {
            return Err(DetectorError::Metadata(format!(
                "model input {:?} does not match features {:?}",
                self.model.input_shape(),
                want
            )));
        }
        if self.model.output_shape() != [1] {
            return Err(DetectorError::Metadata(format!(
                "model output {:?} is not a single probability",
                self.model.output_shape()
            )));
        }
        if self.normalization.mean.len() != rows || self.normalization.std.len() != rows {
            return Err(DetectorError::Metadata(
                "normalization size does not match coefficient rows".into(),
            ));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(DetectorError::Metadata(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        Ok(())
    }

    /// Selected, standardized features as a `(rows, frames, 1)` tensor.
    pub fn input_tensor(&self, full: &MfccMatrix) -> Result<Tensor, DetectorError> {
        let selected = select_coefficients(full, &self.coeff_indices)?;
        Ok(standardize(&selected, &self.normalization)?)
    }

    pub fn probability(&self, full: &MfccMatrix) -> Result<f64, DetectorError> {
        Ok(self.model.predict(&self.input_tensor(full)?)?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = DetectorMeta {
            kind: self.kind,
            feature_config: self.feature_config.clone(),
            coeff_indices: self.coeff_indices.clone(),
            threshold: self.threshold,
            normalization: self.normalization.clone(),
        };
        nn::serialize(&self.model, &json!(meta))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DetectorError> {
        let (model, extra) = nn::deserialize(bytes)?;
        let meta: DetectorMeta =
            serde_json::from_value(extra).map_err(|e| DetectorError::Metadata(e.to_string()))?;
        if meta.coeff_indices != meta.kind.coeff_indices(meta.feature_config.n_mfcc) {
            return Err(DetectorError::Metadata(format!(
                "coefficient selection {:?} is not the {} selection",
                meta.coeff_indices, meta.kind
            )));
        }
        meta.feature_config.validate()?;
        let detector = Self {
            kind: meta.kind,
            model,
            feature_config: meta.feature_config,
            coeff_indices: meta.coeff_indices,
            threshold: meta.threshold,
            normalization: meta.normalization,
        };
        detector.check()?;
        Ok(detector)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), DetectorError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|source| DetectorError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, DetectorError> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|source| DetectorError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    /// The detector's extra metadata as JSON, for inspection.
    pub fn metadata(&self) -> Value {
        json!({
            "kind": self.kind,
            "feature_config": self.feature_config,
            "coeff_indices": self.coeff_indices,
            "threshold": self.threshold,
        })
    }
}

fn standardize(m: &MfccMatrix, norm: &Normalization) -> Result<Tensor, NnError> {
    let (rows, frames) = m.shape();
    let mut data = Vec::with_capacity(rows * frames);
    for r in 0..rows {
        let (mu, sd) = (norm.mean[r], norm.std[r]);
        data.extend(m.row(r).iter().map(|v| (v - mu) / sd));
    }
    Tensor::new(vec![rows, frames, 1], data)
}

/// Resamples to the configured rate, cuts one-second segments and extracts
/// full MFCC matrices. Returns each segment's offset in seconds with its features.
pub fn clip_features(
    clip: &AudioClip,
    extractor: &MfccExtractor,
) -> Result<Vec<(f64, MfccMatrix)>, DetectorError> {
    let clip = audio::resample(clip, extractor.config().sample_rate)?;
    audio::segment(&clip)
        .iter()
        .map(|seg| Ok((seg.offset_secs(), extractor.extract(seg)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn marked_matrix() -> MfccMatrix {
        // Row k holds the constant k, so a selection is visible in the values.
        let values = (0..13)
            .flat_map(|k| std::iter::repeat_n(k as f64, 44))
            .collect();
        MfccMatrix::new(values, 44, (0..13).collect()).unwrap()
    }

    fn untrained(kind: DetectorKind) -> Detector {
        let config = FeatureConfig::default();
        let rows = kind.coeff_indices(config.n_mfcc).len();
        let mut model = kind.build_reference_model();
        model.init_params(5);
        Detector::new(kind, model, config, 0.5, Normalization::identity(rows)).unwrap()
    }

    #[test]
    fn prolongation_reads_rows_zero_and_twelve() {
        let d = untrained(DetectorKind::Prolongation);
        let x = d.input_tensor(&marked_matrix()).unwrap();
        assert_eq!(x.shape(), &[2, 44, 1]);
        assert!(x.data()[..44].iter().all(|&v| v == 0.0));
        assert!(x.data()[44..].iter().all(|&v| v == 12.0));
    }

    #[test]
    fn repetition_reads_every_row() {
        let d = untrained(DetectorKind::Repetition);
        let x = d.input_tensor(&marked_matrix()).unwrap();
        assert_eq!(x.shape(), &[13, 44, 1]);
        for k in 0..13 {
            assert!(x.data()[k * 44..(k + 1) * 44]
                .iter()
                .all(|&v| v == k as f64));
        }
    }

    #[test]
    fn bytes_round_trip() {
        for kind in DetectorKind::ALL {
            let d = untrained(kind);
            let back = Detector::from_bytes(&d.to_bytes()).unwrap();
            assert_eq!(back, d);
            let m = marked_matrix();
            assert_eq!(back.probability(&m).unwrap(), d.probability(&m).unwrap());
        }
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let model = DetectorKind::Repetition.build_reference_model();
        let err = Detector::new(
            DetectorKind::Prolongation,
            model,
            FeatureConfig::default(),
            0.5,
            Normalization::identity(2),
        );
        assert!(matches!(err, Err(DetectorError::Metadata(_))));
    }

    #[test]
    fn normalization_standardizes_rows() {
        let a = MfccMatrix::new(vec![1.0, 3.0, 5.0, 5.0], 2, vec![0, 1]).unwrap();
        let b = MfccMatrix::new(vec![1.0, 3.0, 5.0, 5.0], 2, vec![0, 1]).unwrap();
        let n = Normalization::fit(&[&a, &b]);
        assert_eq!(n.mean, vec![2.0, 5.0]);
        assert_eq!(n.std, vec![1.0, 1.0]);
        let t = standardize(&a, &n).unwrap();
        assert_eq!(t.data(), &[-1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn kind_parses_case_insensitively() {
        assert_eq!(
            "Prolongation".parse::<DetectorKind>().unwrap(),
            DetectorKind::Prolongation
        );
        assert_eq!(
            "repetition".parse::<DetectorKind>().unwrap(),
            DetectorKind::Repetition
        );
        assert!("blockage".parse::<DetectorKind>().is_err());
        assert_eq!(
            serde_json::to_string(&DetectorKind::Repetition).unwrap(),
            "\"repetition\""
        );
    }
}
