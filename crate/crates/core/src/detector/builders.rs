use crate::nn::{Activation, LayerSpec, ModelGraph, NnError};

use super::DetectorKind;

/// Layer widths of a detector network. The reference widths give the full-size
/// detectors; narrower ones keep the same topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Widths {
    /// Filters of each convolution, in order.
    pub filters: Vec<usize>,
    pub gru_units: usize,
    pub dropout: f64,
}

pub const DEFAULT_DROPOUT: f64 = 0.2;

impl DetectorKind {
    pub fn reference_widths(self) -> Widths {
        let filters = match self {
            DetectorKind::Prolongation => vec![32, 32],
            DetectorKind::Repetition => vec![32, 32, 48, 48, 64],
        };
        Widths {
            filters,
            gru_units: 32,
            dropout: DEFAULT_DROPOUT,
        }
    }

    /// `(kernel, stride)` of each convolution.
    fn conv_geometry(self) -> Vec<([usize; 2], [usize; 2])> {
        match self {
            DetectorKind::Prolongation => vec![([1, 5], [1, 2]); 2],
            DetectorKind::Repetition => {
                let mut g = vec![([1, 8], [5, 1])];
                g.extend(std::iter::repeat_n(([1, 8], [1, 1]), 4));
                g
            }
        }
    }

    /// Conv stack, reshape to `(h·w, c)`, two GRUs, dropout and a sigmoid unit.
    /// Parameters are zero; call [`ModelGraph::init_params`] before training.
    pub fn build_model(
        self,
        widths: &Widths,
        n_rows: usize,
        n_frames: usize,
    ) -> Result<ModelGraph, NnError> {
        let geometry = self.conv_geometry();
        if widths.filters.len() != geometry.len() {
            return Err(NnError::InvalidLayer(format!(
                "{self:?} detector has {} convolutions, got {} filter widths",
                geometry.len(),
                widths.filters.len()
            )));
        }
        let mut model = ModelGraph::new(vec![n_rows, n_frames, 1])?;
        for (&filters, (kernel, stride)) in widths.filters.iter().zip(geometry) {
            model.push(LayerSpec::conv2d(filters, kernel, stride))?;
            model.push(LayerSpec::activation(Activation::Relu))?;
        }
        let conv_out = model.output_shape().to_vec();
        model.push(LayerSpec::reshape(&[
            conv_out[0] * conv_out[1],
            conv_out[2],
        ]))?;
        model.push(LayerSpec::gru(widths.gru_units, true))?;
        model.push(LayerSpec::gru(widths.gru_units, false))?;
        model.push(LayerSpec::dropout(widths.dropout))?;
        model.push(LayerSpec::dense(1))?;
        model.push(LayerSpec::activation(Activation::Sigmoid))?;
        Ok(model)
    }

    pub fn build_reference_model(self) -> ModelGraph {
        self.build_model(&self.reference_widths(), self.reference_rows(), 44)
            .expect("reference architecture type-checks")
    }

    fn reference_rows(self) -> usize {
        match self {
            DetectorKind::Prolongation => 2,
            DetectorKind::Repetition => 13,
        }
    }
}

/// Prolongation detector on `(2, 44, 1)` inputs; 17,857 parameters.
pub fn build_prolongation_model() -> ModelGraph {
    DetectorKind::Prolongation.build_reference_model()
}

/// Repetition detector on `(13, 44, 1)` inputs; 79,553 parameters.
pub fn build_repetition_model() -> ModelGraph {
    DetectorKind::Repetition.build_reference_model()
}
