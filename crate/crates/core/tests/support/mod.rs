//! Shared oracles for the integration tests.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stutter_core::detector::{DetectorKind, Widths};
use stutter_core::nn::{conv2d_forward, dense_forward, gru_forward, Activation, LayerSpec};
use stutter_core::{ModelGraph, Tensor};

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-4;
pub const GRADIENT_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

/// `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn random_tensor(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let len = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

/// A two-example batch (one per class) of random inputs for `model`.
pub fn random_batch(model: &ModelGraph, seed: u64) -> Vec<(Tensor, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    vec![
        (random_tensor(model.input_shape(), &mut rng), 1.0),
        (random_tensor(model.input_shape(), &mut rng), 0.0),
    ]
}

/// Signs of every ReLU input, in forward order. Dropout is treated as the
/// identity, which is exact as long as no ReLU follows a dropout layer.
pub fn relu_pattern(model: &ModelGraph, x: &Tensor) -> Vec<bool> {
    let mut pattern = Vec::new();
    let mut cur = x.clone();
    for layer in model.layers() {
        let p = layer.params();
        cur = match layer.spec() {
            LayerSpec::Conv2D { stride, .. } => {
                conv2d_forward(&cur, &p[0], &p[1], (stride[0], stride[1])).unwrap()
            }
            LayerSpec::Dense { .. } => dense_forward(&cur, &p[0], &p[1], None).unwrap(),
            LayerSpec::Gru {
                return_sequences, ..
            } => gru_forward(&cur, &p[0], &p[1], &p[2], *return_sequences).unwrap(),
            LayerSpec::Reshape { target } => cur.reshape(target.clone()).unwrap(),
            LayerSpec::Dropout { .. } => cur,
            LayerSpec::Activation { activation } => {
                if *activation == Activation::Relu {
                    pattern.extend(cur.data().iter().map(|&v| v > 0.0));
                }
                let mut y = cur;
                y.data_mut()
                    .iter_mut()
                    .for_each(|v| *v = activation.apply(*v));
                y
            }
        };
    }
    pattern
}

/// Result of comparing analytic gradients against central differences.
#[derive(Debug, Clone)]
pub struct GradientCheck {
    pub max_error: f64,
    pub worst: String,
    pub checked: usize,
    /// Coordinates whose ±step probe straddles a ReLU kink; the central
    /// difference does not estimate a derivative there.
    pub kinked: usize,
}

/// Compares every parameter's analytic gradient with a central finite
/// difference, with dropout masks fixed by `seed`.
pub fn check_gradients(model: &ModelGraph, batch: &[(Tensor, f64)], seed: u64) -> GradientCheck {
    let refs: Vec<(&Tensor, f64)> = batch.iter().map(|(x, y)| (x, *y)).collect();
    let (_, grads, _) = model.loss_and_gradients(&refs, Some(seed)).unwrap();
    let mut probe = model.clone();
    let mut out = GradientCheck {
        max_error: 0.0,
        worst: String::new(),
        checked: 0,
        kinked: 0,
    };
    for li in 0..model.layers().len() {
        for pi in 0..model.layers()[li].params().len() {
            for k in 0..model.layers()[li].params()[pi].len() {
                let original = model.layers()[li].params()[pi].data()[k];
                let mut eval_at = |v: f64| {
                    probe.layers_mut()[li].params_mut()[pi].data_mut()[k] = v;
                    let loss = probe.loss(&refs, Some(seed)).unwrap();
                    let pattern: Vec<Vec<bool>> =
                        batch.iter().map(|(x, _)| relu_pattern(&probe, x)).collect();
                    (loss, pattern)
                };
                let (plus, pattern_plus) = eval_at(original + FD_STEP);
                let (minus, pattern_minus) = eval_at(original - FD_STEP);
                probe.layers_mut()[li].params_mut()[pi].data_mut()[k] = original;
                if pattern_plus != pattern_minus {
                    out.kinked += 1;
                    continue;
                }
                out.checked += 1;
                let numeric = (plus - minus) / (2.0 * FD_STEP);
                let analytic = grads.layer(li)[pi].data()[k];
                let err = relative_error(analytic, numeric);
                if err > out.max_error {
                    out.max_error = err;
                    out.worst = format!(
                        "layer {li} ({}) param {pi} index {k}: analytic {analytic:e} numeric {numeric:e}",
                        model.layers()[li].spec().kind_name()
                    );
                }
            }
        }
    }
    out
}

/// Gives every bias a small random value. Zero biases put ReLU units fed by
/// dead inputs exactly on the kink, where finite differences are meaningless.
pub fn randomize_biases(model: &mut ModelGraph, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb1a5);
    for layer in model.layers_mut() {
        let names = layer.param_names();
        for (name, param) in names.into_iter().zip(layer.params_mut()) {
            if name == "bias" {
                param
                    .data_mut()
                    .iter_mut()
                    .for_each(|v| *v = rng.gen_range(-0.1..0.1));
            }
        }
    }
}

fn model(input: &[usize], specs: &[LayerSpec], seed: u64) -> ModelGraph {
    let mut m = ModelGraph::from_specs(input.to_vec(), specs).unwrap();
    m.init_params(seed);
    randomize_biases(&mut m, seed);
    m
}

/// One small network per layer kind, each ending in a sigmoid unit.
pub fn layer_kind_cases(seed: u64) -> Vec<(&'static str, ModelGraph)> {
    let head = [
        LayerSpec::dense(1),
        LayerSpec::activation(Activation::Sigmoid),
    ];
    let with_head =
        |body: Vec<LayerSpec>| -> Vec<LayerSpec> { body.into_iter().chain(head.clone()).collect() };
    vec![
        (
            "Conv2D",
            model(
                &[3, 7, 2],
                &with_head(vec![
                    LayerSpec::conv2d(3, [2, 3], [1, 2]),
                    LayerSpec::reshape(&[2 * 3 * 3]),
                ]),
                seed,
            ),
        ),
        (
            "Dense",
            model(&[5], &with_head(vec![LayerSpec::dense(4)]), seed),
        ),
        (
            "Activation",
            model(
                &[4],
                &with_head(vec![
                    LayerSpec::dense(6),
                    LayerSpec::activation(Activation::Tanh),
                    LayerSpec::dense(6),
                    LayerSpec::activation(Activation::Relu),
                    LayerSpec::dense(3),
                    LayerSpec::activation(Activation::Sigmoid),
                ]),
                seed,
            ),
        ),
        (
            "Reshape",
            model(
                &[2, 3, 2],
                &with_head(vec![LayerSpec::reshape(&[6, 2]), LayerSpec::gru(2, false)]),
                seed,
            ),
        ),
        (
            "GRU",
            model(
                &[6, 3],
                &with_head(vec![LayerSpec::gru(4, true), LayerSpec::gru(3, false)]),
                seed,
            ),
        ),
        (
            "Dropout",
            model(
                &[6],
                &with_head(vec![LayerSpec::dense(8), LayerSpec::dropout(0.4)]),
                seed,
            ),
        ),
    ]
}

/// The reference topologies with every width cut to a handful of units.
pub fn reduced_reference(kind: DetectorKind, seed: u64) -> ModelGraph {
    let widths = Widths {
        filters: match kind {
            DetectorKind::Prolongation => vec![2, 3],
            DetectorKind::Repetition => vec![2, 2, 3, 3, 4],
        },
        gru_units: 3,
        dropout: 0.2,
    };
    let rows = match kind {
        DetectorKind::Prolongation => 2,
        DetectorKind::Repetition => 13,
    };
    let mut m = kind.build_model(&widths, rows, 44).unwrap();
    m.init_params(seed);
    randomize_biases(&mut m, seed);
    m
}
