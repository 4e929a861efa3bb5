use serde::{Deserialize, Serialize};

use crate::assessment::{self, SeverityIndex};
use crate::audio::AudioClip;
use crate::features::MfccExtractor;

use super::{clip_features, Detector, DetectorError, DetectorKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    pub offset_s: f64,
    pub p_prolongation: f64,
    pub p_repetition: f64,
    pub call_prolongation: bool,
    pub call_repetition: bool,
}

/// Severity percentages; `None` when the clip yielded no segments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityPair {
    pub prolongation: Option<f64>,
    pub repetition: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisReport {
    pub clip_id: String,
    pub n_segments: usize,
    pub per_segment: Vec<SegmentScore>,
    pub severity: SeverityPair,
}

impl DiagnosisReport {
    pub fn calls(&self, kind: DetectorKind) -> Vec<bool> {
        self.per_segment
            .iter()
            .map(|s| match kind {
                DetectorKind::Prolongation => s.call_prolongation,
                DetectorKind::Repetition => s.call_repetition,
            })
            .collect()
    }

    pub fn severity_index(
        &self,
        kind: DetectorKind,
    ) -> Result<SeverityIndex, assessment::AssessmentError> {
        assessment::severity_index(&self.calls(kind), kind)
    }
}

/// Scores every one-second segment of `clip` with both detectors.
pub fn diagnose(
    prolongation: &Detector,
    repetition: &Detector,
    clip: &AudioClip,
    clip_id: &str,
) -> Result<DiagnosisReport, DetectorError> {
    for (d, expected) in [
        (prolongation, DetectorKind::Prolongation),
        (repetition, DetectorKind::Repetition),
    ] {
        if d.kind != expected {
            return Err(DetectorError::KindMismatch {
                expected,
                found: d.kind,
            });
        }
    }
    if prolongation.feature_config != repetition.feature_config {
        return Err(DetectorError::FeatureConfigMismatch);
    }
    let extractor = MfccExtractor::new(prolongation.feature_config.clone())?;
    let per_segment = clip_features(clip, &extractor)?
        .into_iter()
        .map(|(offset_s, full)| {
            let p_prolongation = prolongation.probability(&full)?;
            let p_repetition = repetition.probability(&full)?;
            Ok(SegmentScore {
                offset_s,
                p_prolongation,
                p_repetition,
                call_prolongation: p_prolongation >= prolongation.threshold,
                call_repetition: p_repetition >= repetition.threshold,
            })
        })
        .collect::<Result<Vec<_>, DetectorError>>()?;

    let mut report = DiagnosisReport {
        clip_id: clip_id.to_string(),
        n_segments: per_segment.len(),
        per_segment,
        severity: SeverityPair {
            prolongation: None,
            repetition: None,
        },
    };
    report.severity = SeverityPair {
        prolongation: report
            .severity_index(DetectorKind::Prolongation)
            .ok()
            .map(|s| s.value),
        repetition: report
            .severity_index(DetectorKind::Repetition)
            .ok()
            .map(|s| s.value),
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::CANONICAL_SAMPLE_RATE;
    use crate::detector::Normalization;
    use crate::features::FeatureConfig;

    fn detector(kind: DetectorKind, seed: u64) -> Detector {
        let config = FeatureConfig::default();
        let rows = kind.coeff_indices(config.n_mfcc).len();
        let mut model = kind.build_reference_model();
        model.init_params(seed);
        Detector::new(kind, model, config, 0.5, Normalization::identity(rows)).unwrap()
    }

    #[test]
    fn silence_gives_one_finite_score_per_second() {
        let (p, r) = (
            detector(DetectorKind::Prolongation, 1),
            detector(DetectorKind::Repetition, 2),
        );
        let clip =
            AudioClip::silence(5 * CANONICAL_SAMPLE_RATE as usize, CANONICAL_SAMPLE_RATE).unwrap();
        let report = diagnose(&p, &r, &clip, "silence").unwrap();
        assert_eq!(report.n_segments, 5);
        for (i, s) in report.per_segment.iter().enumerate() {
            assert_eq!(s.offset_s, i as f64);
            assert!(s.p_prolongation.is_finite() && s.p_repetition.is_finite());
        }
        assert!(report.severity.prolongation.is_some());
    }

    #[test]
    fn empty_clip_has_undefined_severity() {
        let (p, r) = (
            detector(DetectorKind::Prolongation, 1),
            detector(DetectorKind::Repetition, 2),
        );
        let clip = AudioClip::new(Vec::new(), CANONICAL_SAMPLE_RATE).unwrap();
        let report = diagnose(&p, &r, &clip, "empty").unwrap();
        assert_eq!(report.n_segments, 0);
        assert_eq!(report.severity.prolongation, None);
        let json = serde_json::to_value(&report).unwrap();
        assert!(json["severity"]["repetition"].is_null());
    }

    #[test]
    fn swapped_detectors_are_rejected() {
        let (p, r) = (
            detector(DetectorKind::Prolongation, 1),
            detector(DetectorKind::Repetition, 2),
        );
        let clip =
            AudioClip::silence(CANONICAL_SAMPLE_RATE as usize, CANONICAL_SAMPLE_RATE).unwrap();
        assert!(matches!(
            diagnose(&r, &p, &clip, "x"),
            Err(DetectorError::KindMismatch { .. })
        ));
    }

    #[test]
    fn severity_counts_calls() {
        let per_segment = (0..10)
            .map(|i| SegmentScore {
                offset_s: i as f64,
                p_prolongation: 0.1,
                p_repetition: if i < 3 { 0.9 } else { 0.1 },
                call_prolongation: false,
                call_repetition: i < 3,
            })
            .collect();
        let report = DiagnosisReport {
            clip_id: "c".into(),
            n_segments: 10,
            per_segment,
            severity: SeverityPair {
                prolongation: None,
                repetition: None,
            },
        };
        assert_eq!(
            report
                .severity_index(DetectorKind::Repetition)
                .unwrap()
                .value,
            30.0
        );
    }
}
