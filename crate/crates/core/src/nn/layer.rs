use serde::{Deserialize, Serialize};

use super::ops::{conv_out_dim, Activation};
use super::NnError;

/// One layer of a sequential model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum LayerSpec {
    Conv2D {
        filters: usize,
        kernel: [usize; 2],
        stride: [usize; 2],
    },
    Activation {
        activation: Activation,
    },
    Reshape {
        target: Vec<usize>,
    },
    #[serde(rename = "GRU")]
    Gru {
        units: usize,
        return_sequences: bool,
    },
    Dropout {
        rate: f64,
    },
    Dense {
        units: usize,
    },
}

impl LayerSpec {
    pub fn conv2d(filters: usize, kernel: [usize; 2], stride: [usize; 2]) -> Self {
        LayerSpec::Conv2D {
            filters,
            kernel,
            stride,
        }
    }

    pub fn activation(activation: Activation) -> Self {
        LayerSpec::Activation { activation }
    }

    pub fn reshape(target: &[usize]) -> Self {
        LayerSpec::Reshape {
            target: target.to_vec(),
        }
    }

    pub fn gru(units: usize, return_sequences: bool) -> Self {
        LayerSpec::Gru {
            units,
            return_sequences,
        }
    }

    pub fn dropout(rate: f64) -> Self {
        LayerSpec::Dropout { rate }
    }

    pub fn dense(units: usize) -> Self {
        LayerSpec::Dense { units }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2D { .. } => "Conv2D",
            LayerSpec::Activation { .. } => "Activation",
            LayerSpec::Reshape { .. } => "Reshape",
            LayerSpec::Gru { .. } => "GRU",
            LayerSpec::Dropout { .. } => "Dropout",
            LayerSpec::Dense { .. } => "Dense",
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |msg: String| Err(NnError::InvalidLayer(msg));
        match self {
            LayerSpec::Conv2D {
                filters,
                kernel,
                stride,
            } => {
                if *filters == 0 || kernel.contains(&0) || stride.contains(&0) {
                    return bad(format!(
                        "Conv2D needs positive filters/kernel/stride, got {filters} {kernel:?} {stride:?}"
                    ));
                }
            }
            LayerSpec::Reshape { target } => {
                if target.is_empty() || target.contains(&0) {
                    return bad(format!(
                        "Reshape target {target:?} must be non-empty and positive"
                    ));
                }
            }
            LayerSpec::Gru { units, .. } | LayerSpec::Dense { units } => {
                if *units == 0 {
                    return bad(format!("{} needs at least one unit", self.kind_name()));
                }
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return bad(format!("Dropout rate must be in [0, 1), got {rate}"));
                }
            }
            LayerSpec::Activation { .. } => {}
        }
        Ok(())
    }

    /// Static shape inference (batch dimension excluded).
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        self.validate()?;
        let mismatch = |why: &str| {
            Err(NnError::ShapeMismatch(format!(
                "{} cannot accept input {input:?}: {why}",
                self.kind_name()
            )))
        };
        match self {
            LayerSpec::Conv2D {
                filters,
                kernel,
                stride,
            } => {
                if input.len() != 3 {
                    return mismatch("expected h × w × c");
                }
                match (
                    conv_out_dim(input[0], kernel[0], stride[0]),
                    conv_out_dim(input[1], kernel[1], stride[1]),
                ) {
                    (Some(h), Some(w)) => Ok(vec![h, w, *filters]),
                    _ => mismatch("kernel larger than input"),
                }
            }
            LayerSpec::Activation { .. } | LayerSpec::Dropout { .. } => Ok(input.to_vec()),
            LayerSpec::Reshape { target } => {
                if target.iter().product::<usize>() != input.iter().product::<usize>() {
                    return mismatch(&format!("element count differs from target {target:?}"));
                }
                Ok(target.clone())
            }
            LayerSpec::Gru {
                units,
                return_sequences,
            } => {
                if input.len() != 2 {
                    return mismatch("expected steps × features");
                }
                Ok(if *return_sequences {
                    vec![input[0], *units]
                } else {
                    vec![*units]
                })
            }
            LayerSpec::Dense { units } => {
                if input.len() != 1 {
                    return mismatch("expected a feature vector");
                }
                Ok(vec![*units])
            }
        }
    }

    /// Named parameter tensors and their shapes for the given input shape.
    pub fn param_shapes(
        &self,
        input: &[usize],
    ) -> Result<Vec<(&'static str, Vec<usize>)>, NnError> {
        self.output_shape(input)?;
        Ok(match self {
            LayerSpec::Conv2D {
                filters, kernel, ..
            } => vec![
                ("kernel", vec![kernel[0], kernel[1], input[2], *filters]),
                ("bias", vec![*filters]),
            ],
            LayerSpec::Gru { units, .. } => vec![
                ("kernel", vec![input[1], 3 * units]),
                ("recurrent_kernel", vec![*units, 3 * units]),
                ("bias", vec![3 * units]),
            ],
            LayerSpec::Dense { units } => {
                vec![("kernel", vec![input[0], *units]), ("bias", vec![*units])]
            }
            _ => vec![],
        })
    }

    pub fn param_count(&self, input: &[usize]) -> Result<usize, NnError> {
        Ok(self
            .param_shapes(input)?
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_count_formulas() {
        assert_eq!(
            LayerSpec::conv2d(32, [1, 5], [1, 2])
                .param_count(&[2, 44, 1])
                .unwrap(),
            192
        );
        assert_eq!(
            LayerSpec::conv2d(48, [1, 8], [1, 1])
                .param_count(&[3, 23, 48])
                .unwrap(),
            18_480
        );
        assert_eq!(
            LayerSpec::gru(32, true).param_count(&[16, 32]).unwrap(),
            6240
        );
        assert_eq!(
            LayerSpec::gru(32, true).param_count(&[27, 64]).unwrap(),
            9312
        );
        assert_eq!(LayerSpec::dense(1).param_count(&[32]).unwrap(), 33);
        assert_eq!(LayerSpec::dropout(0.2).param_count(&[32]).unwrap(), 0);
    }

    #[test]
    fn invalid_hyperparameters() {
        assert!(LayerSpec::dropout(1.0).validate().is_err());
        assert!(LayerSpec::dropout(-0.1).validate().is_err());
        assert!(LayerSpec::conv2d(0, [1, 1], [1, 1]).validate().is_err());
        assert!(LayerSpec::conv2d(4, [1, 1], [0, 1]).validate().is_err());
        assert!(LayerSpec::gru(0, false).validate().is_err());
        assert!(LayerSpec::reshape(&[]).validate().is_err());
    }

    #[test]
    fn shape_errors() {
        assert!(LayerSpec::dense(3).output_shape(&[2, 2]).is_err());
        assert!(LayerSpec::gru(3, false).output_shape(&[5]).is_err());
        assert!(LayerSpec::reshape(&[7]).output_shape(&[2, 3]).is_err());
        assert!(LayerSpec::conv2d(2, [3, 1], [1, 1])
            .output_shape(&[2, 5, 1])
            .is_err());
    }

    #[test]
    fn spec_json_shape() {
        let json = serde_json::to_string(&LayerSpec::gru(32, false)).unwrap();
        assert_eq!(
            json,
            r#"{"kind":"GRU","units":32,"return_sequences":false}"#
        );
        let act: LayerSpec =
            serde_json::from_str(r#"{"kind":"Activation","activation":"relu"}"#).unwrap();
        assert_eq!(act, LayerSpec::activation(Activation::Relu));
    }
}
