use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layer::LayerSpec;
use super::ops::{
    bce_grad, bce_loss, conv2d_backward, conv2d_forward, dense_backward, dense_forward,
    gru_backward, gru_forward_traced, GruTrace,
};
use super::{NnError, Tensor};

/// A layer together with its parameters and resolved shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    spec: LayerSpec,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
    params: Vec<Tensor>,
}

impl Layer {
    pub fn spec(&self) -> &LayerSpec {
        &self.spec
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn param_names(&self) -> Vec<&'static str> {
        self.spec
            .param_shapes(&self.input_shape)
            .expect("shapes validated on construction")
            .into_iter()
            .map(|(n, _)| n)
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }
}

/// One row of a model summary table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSummary {
    pub kind: &'static str,
    pub output_shape: Vec<usize>,
    pub params: usize,
}

/// Static shape inference over a layer list. The first entry is the input shape.
pub fn shape_trace(input_shape: &[usize], specs: &[LayerSpec]) -> Result<Vec<Vec<usize>>, NnError> {
    let mut trace = vec![input_shape.to_vec()];
    for spec in specs {
        let next = spec.output_shape(trace.last().expect("non-empty"))?;
        trace.push(next);
    }
    Ok(trace)
}

/// Gradients laid out like a model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    per_layer: Vec<Vec<Tensor>>,
}

impl Gradients {
    pub fn zeros_like(model: &ModelGraph) -> Self {
        Self {
            per_layer: model
                .layers
                .iter()
                .map(|l| l.params.iter().map(|p| Tensor::zeros(p.shape())).collect())
                .collect(),
        }
    }

    pub fn layer(&self, i: usize) -> &[Tensor] {
        &self.per_layer[i]
    }

    pub fn layers(&self) -> &[Vec<Tensor>] {
        &self.per_layer
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.per_layer.iter_mut().zip(&other.per_layer) {
            for (ta, tb) in a.iter_mut().zip(b) {
                ta.add_assign(tb);
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.per_layer.iter_mut().flatten() {
            t.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.per_layer.iter().flatten().all(Tensor::is_finite)
    }

    fn reset(&mut self) {
        self.per_layer
            .iter_mut()
            .flatten()
            .for_each(Tensor::fill_zero);
    }
}

enum Cache {
    Conv { input: Tensor },
    Act { output: Tensor },
    Reshape,
    Gru { input: Tensor, trace: GruTrace },
    Dropout { mask: Option<Vec<f64>> },
    Dense { input: Tensor },
}

/// Sequential model over single examples (no batch axis).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGraph {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
}

impl ModelGraph {
    pub fn new(input_shape: Vec<usize>) -> Result<Self, NnError> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(NnError::ShapeMismatch(format!(
                "invalid input shape {input_shape:?}"
            )));
        }
        Ok(Self {
            input_shape,
            layers: Vec::new(),
        })
    }

    /// Builds a model with zero parameters.
    pub fn from_specs(input_shape: Vec<usize>, specs: &[LayerSpec]) -> Result<Self, NnError> {
        let mut model = Self::new(input_shape)?;
        for spec in specs {
            model.push(spec.clone())?;
        }
        Ok(model)
    }

    /// Appends a layer with zero-filled parameters.
    pub fn push(&mut self, spec: LayerSpec) -> Result<&mut Self, NnError> {
        let input_shape = self.output_shape().to_vec();
        let output_shape = spec.output_shape(&input_shape)?;
        let params = spec
            .param_shapes(&input_shape)?
            .iter()
            .map(|(_, s)| Tensor::zeros(s))
            .collect();
        self.layers.push(Layer {
            spec,
            input_shape,
            output_shape,
            params,
        });
        Ok(self)
    }

    /// Seeded uniform initialization. Input-side weights use the
    /// `sqrt(6 / (fan_in + fan_out))` limit, recurrent weights `1 / sqrt(units)`,
    /// biases start at zero.
    pub fn init_params(&mut self, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &mut self.layers {
            let limits: Vec<f64> = match &layer.spec {
                LayerSpec::Conv2D {
                    filters, kernel, ..
                } => {
                    let area = (kernel[0] * kernel[1]) as f64;
                    let fan_in = area * layer.input_shape[2] as f64;
                    let fan_out = area * *filters as f64;
                    vec![(6.0 / (fan_in + fan_out)).sqrt(), 0.0]
                }
                LayerSpec::Dense { units } => {
                    vec![(6.0 / (layer.input_shape[0] + units) as f64).sqrt(), 0.0]
                }
                LayerSpec::Gru { units, .. } => vec![
                    (6.0 / (layer.input_shape[1] + 3 * units) as f64).sqrt(),
                    1.0 / (*units as f64).sqrt(),
                    0.0,
                ],
                _ => vec![],
            };
            for (param, limit) in layer.params.iter_mut().zip(limits) {
                for v in param.data_mut() {
                    *v = if limit > 0.0 {
                        rng.gen_range(-limit..limit)
                    } else {
                        0.0
                    };
                }
            }
        }
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.layers
            .last()
            .map_or(&self.input_shape, |l| &l.output_shape)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Input shape followed by each layer's output shape.
    pub fn shape_trace(&self) -> Vec<Vec<usize>> {
        std::iter::once(self.input_shape.clone())
            .chain(self.layers.iter().map(|l| l.output_shape.clone()))
            .collect()
    }

    pub fn summary(&self) -> Vec<LayerSummary> {
        self.layers
            .iter()
            .map(|l| LayerSummary {
                kind: l.spec.kind_name(),
                output_shape: l.output_shape.clone(),
                params: l.param_count(),
            })
            .collect()
    }

    /// Sets the rate of every dropout layer.
    pub fn set_dropout_rate(&mut self, rate: f64) -> Result<(), NnError> {
        LayerSpec::dropout(rate).validate()?;
        for layer in &mut self.layers {
            if let LayerSpec::Dropout { rate: r } = &mut layer.spec {
                *r = rate;
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NnError> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(NnError::ShapeMismatch(format!(
                "model expects input {:?}, got {:?}",
                self.input_shape,
                x.shape()
            )));
        }
        Ok(())
    }

    fn forward_cached(
        &self,
        x: &Tensor,
        mut dropout_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Tensor, Vec<Cache>), NnError> {
        self.check_input(x)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut cur = x.clone();
        for layer in &self.layers {
            let p = &layer.params;
            let (next, cache) = match &layer.spec {
                LayerSpec::Conv2D { stride, .. } => {
                    let y = conv2d_forward(&cur, &p[0], &p[1], (stride[0], stride[1]))?;
                    (y, Cache::Conv { input: cur })
                }
                LayerSpec::Activation { activation } => {
                    let mut y = cur;
                    y.data_mut()
                        .iter_mut()
                        .for_each(|v| *v = activation.apply(*v));
                    (y.clone(), Cache::Act { output: y })
                }
                LayerSpec::Reshape { target } => (cur.reshape(target.clone())?, Cache::Reshape),
                LayerSpec::Gru {
                    return_sequences, ..
                } => {
                    let (y, trace) =
                        gru_forward_traced(&cur, &p[0], &p[1], &p[2], *return_sequences)?;
                    (y, Cache::Gru { input: cur, trace })
                }
                LayerSpec::Dropout { rate } => match dropout_rng.as_deref_mut() {
                    Some(rng) if *rate > 0.0 => {
                        let keep = 1.0 / (1.0 - rate);
                        let mask: Vec<f64> = (0..cur.len())
                            .map(|_| if rng.gen::<f64>() < *rate { 0.0 } else { keep })
                            .collect();
                        let mut y = cur;
                        y.data_mut()
                            .iter_mut()
                            .zip(&mask)
                            .for_each(|(v, m)| *v *= m);
                        (y, Cache::Dropout { mask: Some(mask) })
                    }
                    _ => (cur, Cache::Dropout { mask: None }),
                },
                LayerSpec::Dense { .. } => {
                    let y = dense_forward(&cur, &p[0], &p[1], None)?;
                    (y, Cache::Dense { input: cur })
                }
            };
            caches.push(cache);
            cur = next;
        }
        if !cur.is_finite() {
            return Err(NnError::NaNDetected("non-finite model output".into()));
        }
        Ok((cur, caches))
    }

    /// Inference forward pass; dropout is the identity.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NnError> {
        self.forward_cached(x, None).map(|(y, _)| y)
    }

    /// Probability from a model whose output is a single sigmoid unit.
    pub fn predict(&self, x: &Tensor) -> Result<f64, NnError> {
        let y = self.forward(x)?;
        if y.len() != 1 {
            return Err(NnError::ShapeMismatch(format!(
                "predict needs a single output unit, model produces {:?}",
                y.shape()
            )));
        }
        Ok(y.data()[0])
    }

    fn backward(
        &self,
        caches: Vec<Cache>,
        grad_out: Tensor,
        grads: &mut Gradients,
    ) -> Result<(), NnError> {
        let mut g = grad_out;
        for ((layer, cache), lg) in self
            .layers
            .iter()
            .zip(caches)
            .zip(grads.per_layer.iter_mut())
            .rev()
        {
            let p = &layer.params;
            g = match (&layer.spec, cache) {
                (LayerSpec::Conv2D { stride, .. }, Cache::Conv { input }) => {
                    let (gk, gb) = lg.split_at_mut(1);
                    conv2d_backward(
                        &input,
                        &p[0],
                        (stride[0], stride[1]),
                        &g,
                        &mut gk[0],
                        &mut gb[0],
                    )
                }
                (LayerSpec::Activation { activation }, Cache::Act { output }) => {
                    let mut g = g;
                    g.data_mut()
                        .iter_mut()
                        .zip(output.data())
                        .for_each(|(gv, &y)| *gv *= activation.derivative_from_output(y));
                    g
                }
                (LayerSpec::Reshape { .. }, Cache::Reshape) => {
                    g.reshape(layer.input_shape.clone())?
                }
                (
                    LayerSpec::Gru {
                        return_sequences, ..
                    },
                    Cache::Gru { input, trace },
                ) => {
                    let (gw, rest) = lg.split_at_mut(1);
                    let (gu, gb) = rest.split_at_mut(1);
                    gru_backward(
                        &input,
                        &p[0],
                        &p[1],
                        &trace,
                        *return_sequences,
                        &g,
                        &mut gw[0],
                        &mut gu[0],
                        &mut gb[0],
                    )
                }
                (LayerSpec::Dropout { .. }, Cache::Dropout { mask }) => {
                    let mut g = g;
                    if let Some(mask) = mask {
                        g.data_mut()
                            .iter_mut()
                            .zip(&mask)
                            .for_each(|(v, m)| *v *= m);
                    }
                    g
                }
                (LayerSpec::Dense { .. }, Cache::Dense { input }) => {
                    let (gw, gb) = lg.split_at_mut(1);
                    dense_backward(&input, &p[0], &g, &mut gw[0], &mut gb[0])
                }
                _ => unreachable!("cache does not match layer kind"),
            };
        }
        Ok(())
    }

    fn example_rng(seed: u64, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        rng
    }

    fn scalar_output(y: &Tensor) -> Result<f64, NnError> {
        if y.len() != 1 {
            return Err(NnError::ShapeMismatch(format!(
                "binary cross-entropy needs a single output unit, got {:?}",
                y.shape()
            )));
        }
        Ok(y.data()[0])
    }

    /// Mean BCE over a batch. With `dropout_seed`, dropout runs in training
    /// mode using the same masks [`loss_and_gradients`](Self::loss_and_gradients) would draw.
    pub fn loss(
        &self,
        batch: &[(&Tensor, f64)],
        dropout_seed: Option<u64>,
    ) -> Result<f64, NnError> {
        let mut p = Vec::with_capacity(batch.len());
        let mut y = Vec::with_capacity(batch.len());
        for (i, (x, target)) in batch.iter().enumerate() {
            let mut rng = dropout_seed.map(|s| Self::example_rng(s, i));
            let (out, _) = self.forward_cached(x, rng.as_mut())?;
            p.push(Self::scalar_output(&out)?);
            y.push(*target);
        }
        Ok(bce_loss(&p, &y))
    }

    /// Mean BCE over the batch, its exact gradient, and each example's prediction.
    pub fn loss_and_gradients(
        &self,
        batch: &[(&Tensor, f64)],
        dropout_seed: Option<u64>,
    ) -> Result<(f64, Gradients, Vec<f64>), NnError> {
        if batch.is_empty() {
            return Err(NnError::EmptyDataset);
        }
        let n = batch.len() as f64;
        let mut total = Gradients::zeros_like(self);
        let mut scratch = total.clone();
        let mut preds = Vec::with_capacity(batch.len());
        let mut targets = Vec::with_capacity(batch.len());
        for (i, (x, target)) in batch.iter().enumerate() {
            let mut rng = dropout_seed.map(|s| Self::example_rng(s, i));
            let (out, caches) = self.forward_cached(x, rng.as_mut())?;
            let p = Self::scalar_output(&out)?;
            let g = Tensor::new(out.shape().to_vec(), vec![bce_grad(p, *target) / n])?;
            scratch.reset();
            self.backward(caches, g, &mut scratch)?;
            total.add_assign(&scratch);
            preds.push(p);
            targets.push(*target);
        }
        if !total.is_finite() {
            return Err(NnError::NaNDetected("non-finite gradient".into()));
        }
        Ok((bce_loss(&preds, &targets), total, preds))
    }

    pub(crate) fn apply_update<F: FnMut(usize, usize, &mut Tensor)>(&mut self, mut f: F) {
        for (li, layer) in self.layers.iter_mut().enumerate() {
            for (pi, param) in layer.params.iter_mut().enumerate() {
                f(li, pi, param);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Activation;

    fn tiny() -> ModelGraph {
        let mut m = ModelGraph::from_specs(
            vec![2, 6, 1],
            &[
                LayerSpec::conv2d(3, [1, 2], [1, 2]),
                LayerSpec::activation(Activation::Tanh),
                LayerSpec::reshape(&[6, 3]),
                LayerSpec::gru(4, false),
                LayerSpec::dropout(0.3),
                LayerSpec::dense(1),
                LayerSpec::activation(Activation::Sigmoid),
            ],
        )
        .unwrap();
        m.init_params(1);
        m
    }

    #[test]
    fn empty_model_trace_is_input() {
        let m = ModelGraph::new(vec![2, 44, 1]).unwrap();
        assert_eq!(m.param_count(), 0);
        assert_eq!(m.shape_trace(), vec![vec![2, 44, 1]]);
    }

    #[test]
    fn bad_stack_is_shape_mismatch() {
        let err = ModelGraph::from_specs(vec![4, 4, 1], &[LayerSpec::dense(2)]).unwrap_err();
        assert!(matches!(err, NnError::ShapeMismatch(_)));
        assert!(shape_trace(&[4], &[LayerSpec::gru(2, true)]).is_err());
    }

    #[test]
    fn zero_final_layer_predicts_half() {
        let mut m = tiny();
        let last_dense = m.layers().len() - 2;
        for p in m.layers_mut()[last_dense].params_mut() {
            p.fill_zero();
        }
        let x = Tensor::new(vec![2, 6, 1], vec![0.3; 12]).unwrap();
        assert_eq!(m.predict(&x).unwrap(), 0.5);
    }

    #[test]
    fn predict_ignores_dropout_rate() {
        let mut m = tiny();
        let x = Tensor::new(vec![2, 6, 1], (0..12).map(|i| i as f64 / 12.0).collect()).unwrap();
        let before = m.predict(&x).unwrap();
        m.set_dropout_rate(0.9).unwrap();
        assert_eq!(m.predict(&x).unwrap(), before);
    }

    #[test]
    fn predict_rejects_wrong_shape() {
        let m = tiny();
        assert!(matches!(
            m.predict(&Tensor::zeros(&[2, 5, 1])),
            Err(NnError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn same_dropout_seed_same_loss() {
        let m = tiny();
        let x = Tensor::new(vec![2, 6, 1], (0..12).map(|i| (i as f64).sin()).collect()).unwrap();
        let batch = [(&x, 1.0)];
        let a = m.loss(&batch, Some(42)).unwrap();
        let (b, _, _) = m.loss_and_gradients(&batch, Some(42)).unwrap();
        assert_eq!(a, b);
    }
}
