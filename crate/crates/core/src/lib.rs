//! Speech dysfluency analysis: one-second segmentation, MFCC features, two
//! gated recurrent convolutional detectors (prolongation and repetition),
//! severity and improvement indices, and polynomial-kernel SVM therapy
//! recommendation.

pub mod assessment;
pub mod audio;
pub mod detector;
mod error;
pub mod features;
pub mod nn;
pub mod session;
pub mod synth;
pub mod therapy;

pub use assessment::{QuartileBucket, SeverityIndex, StutterProfile};
pub use audio::{AudioClip, Segment};
pub use detector::{DetectorKind, DiagnosisReport};
pub use error::Error;
pub use features::{FeatureConfig, MfccMatrix};
pub use nn::{ModelGraph, Tensor, TrainConfig};
pub use therapy::{TherapyAssignment, TherapyCatalog};
