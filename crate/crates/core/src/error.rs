use thiserror::Error;

use crate::assessment::AssessmentError;
use crate::audio::AudioError;
use crate::detector::DetectorError;
use crate::features::FeatureError;
use crate::nn::NnError;
use crate::session::SessionError;
use crate::synth::SynthError;
use crate::therapy::TherapyError;

/// Any error raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Detector(#[from] DetectorError),
    #[error(transparent)]
    Assessment(#[from] AssessmentError),
    #[error(transparent)]
    Therapy(#[from] TherapyError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Session(#[from] SessionError),
}

impl Error {
    /// True when the error stems from the caller's input (files, flags,
    /// data) rather than a fault inside the library.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::Nn(NnError::NaNDetected(_))
                | Error::Detector(DetectorError::Nn(NnError::NaNDetected(_)))
                | Error::Therapy(TherapyError::NoConvergence { .. })
        )
    }
}
