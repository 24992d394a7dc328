//! Multinomial (softmax) logistic regression.
//!
//! Minimises `J(W, b) = C * sum_i CE_i + 0.5 * ||W||^2` (bias unregularised)
//! with full-batch accelerated gradient descent: Nesterov momentum,
//! backtracking on the step size and a restart whenever the objective rises.
//! Starts from zero and stops once `||grad J||_inf < tolerance` or after
//! `max_epochs` iterations.
//!
//! Parameters are handled as one flat vector laid out as
//! `[W_neg (V), W_neu (V), W_pos (V), b_neg, b_neu, b_pos]`.

use super::{check_training_set, LinearKind, LinearModel, ModelError, TrainConfig};
use crate::features::SparseVector;
use crate::label::{Label, NUM_CLASSES};

pub fn softmax(z: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: [f64; NUM_CLASSES] = std::array::from_fn(|c| (z[c] - max).exp());
    let sum: f64 = exps.iter().sum();
    std::array::from_fn(|c| exps[c] / sum)
}

fn log_sum_exp(z: &[f64; NUM_CLASSES]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn param_len(dim: usize) -> usize {
    NUM_CLASSES * dim + NUM_CLASSES
}

fn margins(theta: &[f64], dim: usize, x: &SparseVector) -> [f64; NUM_CLASSES] {
    std::array::from_fn(|c| {
        let row = &theta[c * dim..(c + 1) * dim];
        x.dot_dense(row) + theta[NUM_CLASSES * dim + c]
    })
}

/// Objective value at `theta`.
pub fn objective(x: &[SparseVector], y: &[Label], c_value: f64, dim: usize, theta: &[f64]) -> f64 {
    let loss: f64 = x
        .iter()
        .zip(y)
        .map(|(v, label)| {
            let z = margins(theta, dim, v);
            log_sum_exp(&z) - z[label.index()]
        })
        .sum();
    let reg: f64 = theta[..NUM_CLASSES * dim].iter().map(|w| w * w).sum();
    c_value * loss + 0.5 * reg
}

/// Objective value and analytic gradient at `theta`.
pub fn objective_and_gradient(
    x: &[SparseVector],
    y: &[Label],
    c_value: f64,
    dim: usize,
    theta: &[f64],
) -> (f64, Vec<f64>) {
    let n_w = NUM_CLASSES * dim;
    let mut grad = vec![0.0; param_len(dim)];
    let mut loss = 0.0;
    for (v, label) in x.iter().zip(y) {
        let z = margins(theta, dim, v);
        loss += log_sum_exp(&z) - z[label.index()];
        let p = softmax(&z);
        for c in 0..NUM_CLASSES {
            let residual = c_value * (p[c] - if c == label.index() { 1.0 } else { 0.0 });
            if residual == 0.0 {
                continue;
            }
            let row = &mut grad[c * dim..(c + 1) * dim];
            for (i, w) in v.iter() {
                row[i] += residual * w;
            }
            grad[n_w + c] += residual;
        }
    }
    let mut reg = 0.0;
    for (g, w) in grad[..n_w].iter_mut().zip(&theta[..n_w]) {
        *g += w;
        reg += w * w;
    }
    (c_value * loss + 0.5 * reg, grad)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn into_model(theta: Vec<f64>, dim: usize, c_value: f64, objective: f64, epochs: usize) -> LinearModel {
    let n_w = NUM_CLASSES * dim;
    LinearModel {
        weights: std::array::from_fn(|c| theta[c * dim..(c + 1) * dim].to_vec()),
        bias: std::array::from_fn(|c| theta[n_w + c]),
        kind: LinearKind::Logistic,
        c_value,
        objective,
        epochs,
    }
}

pub fn train_logreg(
    x: &[SparseVector],
    y: &[Label],
    config: &TrainConfig,
) -> Result<LinearModel, ModelError> {
    config.validate()?;
    let dim = check_training_set(x, y)?;
    let c = config.c_value;
    let n = param_len(dim);

    let mut theta = vec![0.0; n];
    let (mut f_theta, mut g_theta) = objective_and_gradient(x, y, c, dim, &theta);
    let mut prev = theta.clone();
    let mut momentum = 1.0f64;
    let mut step = config.learning_rate;
    let mut epochs = 0;

    while epochs < config.max_epochs && inf_norm(&g_theta) >= config.tolerance {
        epochs += 1;
        let next_momentum = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / next_momentum;
        let look: Vec<f64> = theta
            .iter()
            .zip(&prev)
            .map(|(t, p)| t + beta * (t - p))
            .collect();
        let (f_look, g_look) = if beta == 0.0 {
            (f_theta, g_theta.clone())
        } else {
            objective_and_gradient(x, y, c, dim, &look)
        };
        if !f_look.is_finite() {
            return Err(ModelError::NonFinite { epoch: epochs });
        }

        // Backtrack until the sufficient-decrease condition holds.
        let g_sq = sq_norm(&g_look);
        step *= 2.0;
        let mut candidate;
        let mut f_candidate;
        loop {
            candidate = look
                .iter()
                .zip(&g_look)
                .map(|(t, g)| t - step * g)
                .collect::<Vec<_>>();
            f_candidate = objective(x, y, c, dim, &candidate);
            if f_candidate.is_finite() && f_candidate <= f_look - 0.5 * step * g_sq {
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return Err(ModelError::NonFinite { epoch: epochs });
            }
        }

        if f_candidate > f_theta {
            // Momentum overshot: restart from the current iterate.
            momentum = 1.0;
            prev = theta.clone();
            continue;
        }
        prev = std::mem::replace(&mut theta, candidate);
        momentum = next_momentum;
        let (f, g) = objective_and_gradient(x, y, c, dim, &theta);
        if !f.is_finite() {
            return Err(ModelError::NonFinite { epoch: epochs });
        }
        f_theta = f;
        g_theta = g;
    }

    Ok(into_model(theta, dim, c, f_theta, epochs))
}
