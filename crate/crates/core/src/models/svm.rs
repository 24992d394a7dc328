//! One-vs-rest linear SVM trained in the primal with Pegasos.
//!
//! Each class c gets a binary problem `min 0.5 * ||w||^2 + C * sum_i hinge_i`
//! with an unregularised bias. For fixed `b` this has the same minimiser in
//! `w` as Pegasos' `lambda/2 ||w||^2 + mean hinge` with `lambda = 1 / (C n)`.
//!
//! Training alternates two blocks. An epoch of Pegasos steps `1 / (lambda t)`
//! over a seeded shuffle updates `w` with `b` held fixed; then `b` is set to
//! the exact minimiser of the hinge sum for that `w`. The primal objective is
//! evaluated after every epoch and the best iterate so far is kept, so the
//! objective history never increases.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_training_set, LinearKind, LinearModel, ModelError, TrainConfig};
use crate::features::SparseVector;
use crate::label::Label;

/// Epochs without a relative improvement above `tolerance` before stopping.
const PATIENCE: usize = 5;

/// Primal objective of one binary problem with labels in {-1, +1}.
pub fn binary_objective(w: &[f64], b: f64, x: &[SparseVector], y: &[f64], c_value: f64) -> f64 {
    let hinge: f64 = x
        .iter()
        .zip(y)
        .map(|(v, yi)| (1.0 - yi * (v.dot_dense(w) + b)).max(0.0))
        .sum();
    0.5 * w.iter().map(|v| v * v).sum::<f64>() + c_value * hinge
}

/// Total hinge loss of one binary problem.
pub fn binary_hinge(w: &[f64], b: f64, x: &[SparseVector], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(v, yi)| (1.0 - yi * (v.dot_dense(w) + b)).max(0.0))
        .sum()
}

/// Exact minimiser over `b` of `sum_i max(0, 1 - y_i (m_i + b))`.
///
/// The sum is convex and piecewise linear with a kink per sample. Its slope
/// starts at `-P` (P = number of positives) and rises by one at each kink,
/// so the minimum is the flat stretch between the P-th and (P+1)-th smallest
/// kinks. The midpoint is returned; if one side is unbounded, the finite end.
pub fn optimal_bias(margins: &[f64], y: &[f64]) -> f64 {
    let mut kinks: Vec<f64> = margins
        .iter()
        .zip(y)
        .map(|(m, yi)| if *yi > 0.0 { 1.0 - m } else { -1.0 - m })
        .collect();
    if kinks.is_empty() {
        return 0.0;
    }
    kinks.sort_by(f64::total_cmp);
    let p = y.iter().filter(|yi| **yi > 0.0).count();
    match p {
        0 => kinks[0],
        p if p == kinks.len() => kinks[p - 1],
        p => 0.5 * (kinks[p - 1] + kinks[p]),
    }
}

/// Result of training one binary problem.
#[derive(Debug, Clone)]
pub struct BinaryFit {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
    /// Best objective after each epoch.
    pub history: Vec<f64>,
}

/// `w = scale * v`, with `||v||^2` tracked so projection is O(1).
struct ScaledVector {
    v: Vec<f64>,
    scale: f64,
    sq_norm: f64,
}

impl ScaledVector {
    fn new(dim: usize) -> Self {
        ScaledVector {
            v: vec![0.0; dim],
            scale: 1.0,
            sq_norm: 0.0,
        }
    }

    fn dot(&self, x: &SparseVector) -> f64 {
        self.scale * x.dot_dense(&self.v)
    }

    fn shrink(&mut self, factor: f64) {
        if factor <= 0.0 {
            self.v.iter_mut().for_each(|v| *v = 0.0);
            self.scale = 1.0;
            self.sq_norm = 0.0;
            return;
        }
        self.scale *= factor;
        if self.scale < 1e-9 {
            self.rescale();
        }
    }

    fn rescale(&mut self) {
        let s = self.scale;
        self.v.iter_mut().for_each(|v| *v *= s);
        self.sq_norm *= s * s;
        self.scale = 1.0;
    }

    /// `w += step * x`.
    fn add(&mut self, x: &SparseVector, step: f64) {
        let a = step / self.scale;
        let mut dot = 0.0;
        let mut xx = 0.0;
        for (i, xi) in x.iter() {
            dot += self.v[i] * xi;
            xx += xi * xi;
            self.v[i] += a * xi;
        }
        self.sq_norm += 2.0 * a * dot + a * a * xx;
    }

    fn norm(&self) -> f64 {
        self.scale * self.sq_norm.max(0.0).sqrt()
    }

    fn materialize(&self) -> Vec<f64> {
        self.v.iter().map(|v| v * self.scale).collect()
    }
}

/// Pegasos on one binary problem (`y` in {-1, +1}).
pub fn train_binary(
    x: &[SparseVector],
    y: &[f64],
    dim: usize,
    config: &TrainConfig,
) -> Result<BinaryFit, ModelError> {
    let n = x.len();
    let c = config.c_value;
    let lambda = 1.0 / (c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();

    let mut w = ScaledVector::new(dim);
    let mut best_w = vec![0.0; dim];
    let mut best_b = optimal_bias(&vec![0.0; n], y);
    let mut best = binary_objective(&best_w, best_b, x, y, c);
    let mut b = best_b;
    let mut history = Vec::new();
    let mut stale = 0;
    let mut t = 0u64;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin = w.dot(&x[i]) + b;
            w.shrink(1.0 - eta * lambda);
            if y[i] * margin < 1.0 {
                w.add(&x[i], eta * y[i]);
            }
            let norm = w.norm();
            if norm > radius {
                w.shrink(radius / norm);
            }
        }
        w.rescale();

        let cw = w.materialize();
        let margins: Vec<f64> = x.iter().map(|v| v.dot_dense(&cw)).collect();
        b = optimal_bias(&margins, y);
        let obj = binary_objective(&cw, b, x, y, c);
        if !obj.is_finite() {
            return Err(ModelError::NonFinite { epoch });
        }
        if obj < best {
            if best - obj > config.tolerance * best.abs().max(1.0) {
                stale = 0;
            } else {
                stale += 1;
            }
            best = obj;
            best_w = cw;
            best_b = b;
        } else {
            stale += 1;
        }
        history.push(best);
        if stale >= PATIENCE {
            break;
        }
    }

    Ok(BinaryFit {
        weights: best_w,
        bias: best_b,
        objective: best,
        history,
    })
}

fn one_vs_rest(y: &[Label], class: Label) -> Vec<f64> {
    y.iter()
        .map(|&l| if l == class { 1.0 } else { -1.0 })
        .collect()
}

pub fn train_svm(
    x: &[SparseVector],
    y: &[Label],
    config: &TrainConfig,
) -> Result<LinearModel, ModelError> {
    config.validate()?;
    let dim = check_training_set(x, y)?;
    let mut model = LinearModel::zeros(dim, LinearKind::Svm, config.c_value);
    for class in Label::ALL {
        let fit = train_binary(x, &one_vs_rest(y, class), dim, config)?;
        model.weights[class.index()] = fit.weights;
        model.bias[class.index()] = fit.bias;
        model.objective += fit.objective;
        model.epochs = model.epochs.max(fit.history.len());
    }
    Ok(model)
}
