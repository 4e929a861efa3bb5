use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::Gradients;
use super::{ModelGraph, NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    /// Probability at or above which an example counts as positive.
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            epochs: 30,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            seed: 0,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.batch_size == 0 {
            return Err(NnError::InvalidConfig(
                "batch_size must be at least 1".into(),
            ));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(NnError::InvalidConfig(format!(
                "learning_rate must be a non-negative finite number, got {}",
                self.learning_rate
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(NnError::InvalidConfig(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

/// First-order optimizer with per-parameter state.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        step: i32,
        m: Vec<Vec<Vec<f64>>>,
        v: Vec<Vec<Vec<f64>>>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, model: &ModelGraph) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => {
                let zeros: Vec<Vec<Vec<f64>>> = model
                    .layers()
                    .iter()
                    .map(|l| l.params().iter().map(|p| vec![0.0; p.len()]).collect())
                    .collect();
                Optimizer::Adam {
                    lr,
                    beta1: 0.9,
                    beta2: 0.999,
                    eps: 1e-8,
                    step: 0,
                    m: zeros.clone(),
                    v: zeros,
                }
            }
        }
    }

    pub fn step(&mut self, model: &mut ModelGraph, grads: &Gradients) {
        match self {
            Optimizer::Sgd { lr } => {
                let lr = *lr;
                model.apply_update(|li, pi, param| {
                    for (w, g) in param.data_mut().iter_mut().zip(grads.layer(li)[pi].data()) {
                        *w -= lr * g;
                    }
                });
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                step,
                m,
                v,
            } => {
                *step += 1;
                let (lr, b1, b2, eps) = (*lr, *beta1, *beta2, *eps);
                let c1 = 1.0 - b1.powi(*step);
                let c2 = 1.0 - b2.powi(*step);
                model.apply_update(|li, pi, param| {
                    let g = grads.layer(li)[pi].data();
                    let (ms, vs) = (&mut m[li][pi], &mut v[li][pi]);
                    for (k, w) in param.data_mut().iter_mut().enumerate() {
                        ms[k] = b1 * ms[k] + (1.0 - b1) * g[k];
                        vs[k] = b2 * vs[k] + (1.0 - b2) * g[k] * g[k];
                        let m_hat = ms[k] / c1;
                        let v_hat = vs[k] / c2;
                        *w -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                });
            }
        }
    }
}

/// Mini-batch training on mean binary cross-entropy.
///
/// The example order is reshuffled every epoch from `cfg.seed`; dropout is
/// active only here. Identical inputs and seed give bit-identical weights.
pub fn train(
    model: &mut ModelGraph,
    data: &[(Tensor, f64)],
    cfg: &TrainConfig,
) -> Result<TrainReport, NnError> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    if let Some((_, y)) = data.iter().find(|(_, y)| *y != 0.0 && *y != 1.0) {
        return Err(NnError::InvalidConfig(format!(
            "labels must be 0 or 1, got {y}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut optimizer = Optimizer::new(cfg.optimizer, cfg.learning_rate, model);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&Tensor, f64)> =
                chunk.iter().map(|&i| (&data[i].0, data[i].1)).collect();
            let dropout_seed = rng.gen::<u64>();
            let (loss, grads, preds) = model.loss_and_gradients(&batch, Some(dropout_seed))?;
            loss_sum += loss * batch.len() as f64;
            correct += preds
                .iter()
                .zip(&batch)
                .filter(|(p, (_, y))| (**p >= cfg.threshold) == (*y == 1.0))
                .count();
            optimizer.step(model, &grads);
        }
        let stats = EpochStats {
            epoch: epoch + 1,
            loss: loss_sum / data.len() as f64,
            accuracy: correct as f64 / data.len() as f64,
        };
        log::debug!(
            "epoch {} loss {:.5} accuracy {:.4}",
            stats.epoch,
            stats.loss,
            stats.accuracy
        );
        epochs.push(stats);
    }
    Ok(TrainReport { epochs })
}

/// Fraction of examples whose thresholded prediction matches the label.
pub fn accuracy(
    model: &ModelGraph,
    data: &[(Tensor, f64)],
    threshold: f64,
) -> Result<f64, NnError> {
    if data.is_empty() {
        return Err(NnError::EmptyDataset);
    }
    let mut correct = 0;
    for (x, y) in data {
        if (model.predict(x)? >= threshold) == (*y == 1.0) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}
