use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{read_manifest, read_wav_file, AudioClip};
use crate::features::{select_coefficients, FeatureConfig, MfccExtractor, MfccMatrix};
use crate::nn::{self, EpochStats, Tensor, TrainConfig};

use super::{clip_features, standardize, Detector, DetectorError, DetectorKind, Normalization};

/// Fraction of each class's clips held out for validation.
const VALIDATION_FRACTION: f64 = 0.2;

/// Validation metrics are computed on one-second segments of held-out clips.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorMetrics {
    pub kind: DetectorKind,
    pub accuracy: f64,
    /// `None` when nothing in the validation set was called positive.
    pub precision: Option<f64>,
    /// `None` when the validation set has no positive segments.
    pub recall: Option<f64>,
    pub train_accuracy: f64,
    pub final_loss: f64,
    pub n_train_clips: usize,
    pub n_validation_clips: usize,
    pub n_train_segments: usize,
    pub n_validation_segments: usize,
    pub history: Vec<EpochStats>,
}

/// Trains a detector on every manifest row labeled for `kind`.
pub fn train_detector(
    kind: DetectorKind,
    manifest: impl AsRef<Path>,
    cfg: &TrainConfig,
    features: &FeatureConfig,
) -> Result<(Detector, DetectorMetrics), DetectorError> {
    let manifest = manifest.as_ref();
    let dir = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut clips = Vec::new();
    for entry in read_manifest(manifest)? {
        let label = match kind {
            DetectorKind::Prolongation => entry.prolongation,
            DetectorKind::Repetition => entry.repetition,
        };
        if let Some(target) = label.as_target() {
            clips.push((read_wav_file(entry.resolve(dir))?, target));
        }
    }
    train_detector_on_clips(kind, &clips, cfg, features)
}

struct Example {
    clip: usize,
    features: MfccMatrix,
    label: f64,
}

/// Same as [`train_detector`] on clips already in memory, each with a 0/1 label.
///
/// Clips, not segments, are split 80/20 per class so no clip contributes to both sides.
pub fn train_detector_on_clips(
    kind: DetectorKind,
    clips: &[(AudioClip, f64)],
    cfg: &TrainConfig,
    features: &FeatureConfig,
) -> Result<(Detector, DetectorMetrics), DetectorError> {
    cfg.validate()?;
    let extractor = MfccExtractor::new(features.clone())?;
    let indices = kind.coeff_indices(features.n_mfcc);

    let mut examples = Vec::new();
    for (i, (clip, label)) in clips.iter().enumerate() {
        for (_, full) in clip_features(clip, &extractor)? {
            examples.push(Example {
                clip: i,
                features: select_coefficients(&full, &indices)?,
                label: *label,
            });
        }
    }

    let mut positive: Vec<usize> = Vec::new();
    let mut negative: Vec<usize> = Vec::new();
    for (i, (_, label)) in clips.iter().enumerate() {
        if examples.iter().any(|e| e.clip == i) {
            if *label == 1.0 {
                positive.push(i);
            } else {
                negative.push(i);
            }
        }
    }
    if positive.is_empty() {
        return Err(DetectorError::EmptyClass {
            kind,
            class: "stutter",
        });
    }
    if negative.is_empty() {
        return Err(DetectorError::EmptyClass {
            kind,
            class: "non-stutter",
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut is_validation = vec![false; clips.len()];
    for class in [&mut positive, &mut negative] {
        class.shuffle(&mut rng);
        let n_val = if class.len() < 2 {
            0
        } else {
            ((class.len() as f64 * VALIDATION_FRACTION).round() as usize).max(1)
        };
        for &i in &class[..n_val] {
            is_validation[i] = true;
        }
    }

    let (val, train): (Vec<&Example>, Vec<&Example>) =
        examples.iter().partition(|e| is_validation[e.clip]);
    let normalization = Normalization::fit(&train.iter().map(|e| &e.features).collect::<Vec<_>>());
    let to_data = |set: &[&Example]| -> Result<Vec<(Tensor, f64)>, DetectorError> {
        set.iter()
            .map(|e| Ok((standardize(&e.features, &normalization)?, e.label)))
            .collect()
    };
    let train_data = to_data(&train)?;
    let val_data = to_data(&val)?;

    let rows = indices.len();
    let mut model =
        kind.build_model(&kind.reference_widths(), rows, features.frames_per_second())?;
    model.init_params(cfg.seed);
    log::info!(
        "training {kind} detector: {} train / {} validation segments, {} parameters",
        train_data.len(),
        val_data.len(),
        model.param_count()
    );
    let report = nn::train(&mut model, &train_data, cfg)?;

    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    let mut correct = 0usize;
    for (x, y) in &val_data {
        let called = model.predict(x)? >= cfg.threshold;
        let actual = *y == 1.0;
        match (called, actual) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
        if called == actual {
            correct += 1;
        }
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    let metrics = DetectorMetrics {
        kind,
        accuracy: ratio(correct, val_data.len()).unwrap_or(0.0),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        train_accuracy: nn::accuracy(&model, &train_data, cfg.threshold)?,
        final_loss: report.final_loss().unwrap_or(f64::NAN),
        n_train_clips: is_validation
            .iter()
            .enumerate()
            .filter(|(i, v)| !**v && examples.iter().any(|e| e.clip == *i))
            .count(),
        n_validation_clips: is_validation.iter().filter(|v| **v).count(),
        n_train_segments: train_data.len(),
        n_validation_segments: val_data.len(),
        history: report.epochs,
    };
    let detector = Detector::new(kind, model, features.clone(), cfg.threshold, normalization)?;
    Ok((detector, metrics))
}
