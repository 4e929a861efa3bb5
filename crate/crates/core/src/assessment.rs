//! Severity indices, quartile buckets and the longitudinal improvement level.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::DetectorKind;

#[derive(Debug, Error, PartialEq)]
pub enum AssessmentError {
    #[error("no segments to score")]
    NoSegments,
    #[error("{what} = {value} is outside [0, 100]")]
    OutOfRange { what: &'static str, value: f64 },
    #[error("bucket level {0} is not in 1..=4")]
    BadLevel(u8),
}

/// Percentage of one-second segments called as stutter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityIndex {
    pub value: f64,
    pub kind: DetectorKind,
    pub n_segments: usize,
}

/// `100 · stutter segments / total segments`.
pub fn severity_index(
    calls: &[bool],
    kind: DetectorKind,
) -> Result<SeverityIndex, AssessmentError> {
    if calls.is_empty() {
        return Err(AssessmentError::NoSegments);
    }
    let stutter = calls.iter().filter(|&&c| c).count();
    Ok(SeverityIndex {
        value: 100.0 * stutter as f64 / calls.len() as f64,
        kind,
        n_segments: calls.len(),
    })
}

/// Quartile level 1..=4. Level `k` covers `((k-1)·25, k·25]` percent, with 0 in level 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct QuartileBucket(u8);

impl QuartileBucket {
    pub fn new(level: u8) -> Result<Self, AssessmentError> {
        if (1..=4).contains(&level) {
            Ok(Self(level))
        } else {
            Err(AssessmentError::BadLevel(level))
        }
    }

    pub fn level(self) -> u8 {
        self.0
    }

    pub fn all() -> [QuartileBucket; 4] {
        [Self(1), Self(2), Self(3), Self(4)]
    }

    fn from_ceil(quarters: f64) -> Self {
        Self(quarters.ceil().clamp(1.0, 4.0) as u8)
    }
}

impl TryFrom<u8> for QuartileBucket {
    type Error = AssessmentError;

    fn try_from(level: u8) -> Result<Self, Self::Error> {
        Self::new(level)
    }
}

impl From<QuartileBucket> for u8 {
    fn from(b: QuartileBucket) -> u8 {
        b.0
    }
}

fn check_percent(what: &'static str, value: f64) -> Result<f64, AssessmentError> {
    if (0.0..=100.0).contains(&value) {
        Ok(value)
    } else {
        Err(AssessmentError::OutOfRange { what, value })
    }
}

pub fn bucketize(percent: f64) -> Result<QuartileBucket, AssessmentError> {
    let p = check_percent("percent", percent)?;
    Ok(QuartileBucket::from_ceil(p / 25.0))
}

/// Mean severity reduction over the two dysfluency kinds, in percentage points.
pub fn improvement_raw(
    initial_prolongation: f64,
    current_prolongation: f64,
    initial_repetition: f64,
    current_repetition: f64,
) -> Result<f64, AssessmentError> {
    let ip = check_percent("initial prolongation", initial_prolongation)?;
    let cp = check_percent("current prolongation", current_prolongation)?;
    let ir = check_percent("initial repetition", initial_repetition)?;
    let cr = check_percent("current repetition", current_repetition)?;
    Ok(((ip - cp) + (ir - cr)) / 2.0)
}

/// `ceil(mean reduction / 25)` clamped to 1..=4; no change or regression is level 1.
pub fn improvement_bucket(
    initial_prolongation: f64,
    current_prolongation: f64,
    initial_repetition: f64,
    current_repetition: f64,
) -> Result<QuartileBucket, AssessmentError> {
    let raw = improvement_raw(
        initial_prolongation,
        current_prolongation,
        initial_repetition,
        current_repetition,
    )?;
    Ok(QuartileBucket::from_ceil(raw / 25.0))
}

/// Quartile description fed to the therapy recommender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StutterProfile {
    pub prolongation: QuartileBucket,
    pub repetition: QuartileBucket,
    pub improvement: QuartileBucket,
}

impl StutterProfile {
    pub fn new(prolongation: u8, repetition: u8, improvement: u8) -> Result<Self, AssessmentError> {
        Ok(Self {
            prolongation: QuartileBucket::new(prolongation)?,
            repetition: QuartileBucket::new(repetition)?,
            improvement: QuartileBucket::new(improvement)?,
        })
    }

    /// `[prolongation, repetition, improvement]` as recommender features.
    pub fn features(&self) -> [f64; 3] {
        [
            f64::from(self.prolongation.level()),
            f64::from(self.repetition.level()),
            f64::from(self.improvement.level()),
        ]
    }

    /// Profile from the latest severities and the improvement since the first session.
    pub fn from_severities(
        initial_prolongation: f64,
        current_prolongation: f64,
        initial_repetition: f64,
        current_repetition: f64,
    ) -> Result<Self, AssessmentError> {
        Ok(Self {
            prolongation: bucketize(current_prolongation)?,
            repetition: bucketize(current_repetition)?,
            improvement: improvement_bucket(
                initial_prolongation,
                current_prolongation,
                initial_repetition,
                current_repetition,
            )?,
        })
    }
}
