//! Soft-margin binary SVM trained by sequential minimal optimization.
//!
//! The solver works on the dual `min ½αᵀQα − Σα` subject to `0 ≤ α ≤ C` and
//! `Σ yα = 0`, with `Q_ij = y_i y_j k(x_i, x_j)`. Each step updates the
//! maximal violating pair chosen with second-order information and stops once
//! the KKT gap falls below the tolerance.

use serde::{Deserialize, Serialize};

use super::TherapyError;

/// `k(x, y) = (γ⟨x, y⟩ + r)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyKernel {
    pub d: u32,
    pub gamma: f64,
    pub r: f64,
}

impl Default for PolyKernel {
    fn default() -> Self {
        Self {
            d: 3,
            gamma: 1.0 / 3.0,
            r: 1.0,
        }
    }
}

impl PolyKernel {
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        (self.gamma * dot + self.r).powi(self.d as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoParams {
    pub c: f64,
    pub tol: f64,
    /// The solver gives up after `max_passes × n` pair updates.
    pub max_passes: usize,
}

impl Default for SmoParams {
    fn default() -> Self {
        Self {
            c: 10.0,
            tol: 1e-3,
            max_passes: 200,
        }
    }
}

/// A trained binary classifier; labels are ±1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub kernel: PolyKernel,
    pub support_vectors: Vec<Vec<f64>>,
    pub alphas: Vec<f64>,
    pub labels: Vec<f64>,
    pub bias: f64,
    /// Positions of the support vectors in the training set.
    pub support_indices: Vec<usize>,
}

impl BinarySvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(self.alphas.iter().zip(&self.labels))
            .map(|(sv, (a, y))| a * y * self.kernel.eval(sv, x))
            .sum::<f64>()
            + self.bias
    }

    pub fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }
}

/// Full dual solution, kept for feasibility checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoSolution {
    pub svm: BinarySvm,
    /// One multiplier per training point.
    pub alphas: Vec<f64>,
    pub iterations: usize,
}

const TAU: f64 = 1e-12;

/// Trains on `xs` with boolean labels (`true` is the positive class).
pub fn smo_train(
    xs: &[Vec<f64>],
    labels: &[bool],
    kernel: PolyKernel,
    params: SmoParams,
) -> Result<SmoSolution, TherapyError> {
    if xs.len() != labels.len() {
        return Err(TherapyError::InvalidInput(format!(
            "{} points but {} labels",
            xs.len(),
            labels.len()
        )));
    }
    if params.c.is_nan() || params.c <= 0.0 || params.tol.is_nan() || params.tol <= 0.0 {
        return Err(TherapyError::InvalidInput(
            "C and tol must be positive".into(),
        ));
    }
    if !labels.iter().any(|&l| l) || labels.iter().all(|&l| l) {
        return Err(TherapyError::SingleClass);
    }
    let n = xs.len();
    let c = params.c;
    let y: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect();
    let k: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| kernel.eval(&xs[i], &xs[j]))
        .collect();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = params.max_passes.saturating_mul(n).max(1);
    let mut iterations = 0;

    loop {
        let in_up = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] < c) || (y[t] < 0.0 && a[t] > 0.0);
        let in_low = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < c);

        let mut i = usize::MAX;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            if in_up(t, &alpha) && -y[t] * grad[t] > g_max {
                g_max = -y[t] * grad[t];
                i = t;
            }
        }
        let mut g_min = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(t, &alpha) {
                continue;
            }
            let v = -y[t] * grad[t];
            g_min = g_min.min(v);
            if i != usize::MAX && v < g_max {
                let b = g_max - v;
                let a = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
                let a = if a > 0.0 { a } else { TAU };
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || g_max - g_min < params.tol {
            break;
        }
        if iterations >= max_iter {
            return Err(TherapyError::NoConvergence {
                iterations,
                gap: g_max - g_min,
            });
        }
        iterations += 1;

        let (old_ai, old_aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            let delta = (-grad[i] - grad[j]) / if quad > 0.0 { quad } else { TAU };
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            let delta = (grad[i] - grad[j]) / if quad > 0.0 { quad } else { TAU };
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_ai, alpha[j] - old_aj);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    }

    // Threshold from free multipliers, or the midpoint of the feasible interval.
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut n_free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            free_sum += yg;
        }
    }
    let rho = if n_free > 0 {
        free_sum / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    let support_indices: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let svm = BinarySvm {
        kernel,
        support_vectors: support_indices.iter().map(|&t| xs[t].clone()).collect(),
        alphas: support_indices.iter().map(|&t| alpha[t]).collect(),
        labels: support_indices.iter().map(|&t| y[t]).collect(),
        bias: -rho,
        support_indices,
    };
    Ok(SmoSolution {
        svm,
        alphas: alpha,
        iterations,
    })
}
