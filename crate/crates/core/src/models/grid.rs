//! Stratified k-fold cross-validation over `C`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{logistic, svm, LinearKind, LinearModel, ModelError, TrainConfig};
use crate::eval::weighted_f1;
use crate::features::SparseVector;
use crate::label::{Label, NUM_CLASSES};

pub const DEFAULT_GRID: [f64; 3] = [0.1, 1.0, 10.0];
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub c_value: f64,
    pub mean: f64,
    /// Population standard deviation across folds.
    pub std: f64,
    pub fold_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_c: f64,
    pub folds: usize,
    /// One row per grid value, in the order given.
    pub rows: Vec<CvRow>,
}

/// Assign each sample to one of `k` folds so that every class is spread as
/// evenly as possible. Within a class the order is a seeded shuffle; fold
/// numbering continues across classes so fold sizes stay balanced.
pub fn stratified_folds(y: &[Label], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of = vec![0; y.len()];
    let mut next = 0;
    for class in Label::ALL {
        let mut members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            fold_of[i] = next % k;
            next += 1;
        }
    }
    fold_of
}

fn train(kind: LinearKind, x: &[SparseVector], y: &[Label], config: &TrainConfig) -> Result<LinearModel, ModelError> {
    match kind {
        LinearKind::Logistic => logistic::train_logreg(x, y, config),
        LinearKind::Svm => svm::train_svm(x, y, config),
    }
}

fn fold_score(
    kind: LinearKind,
    x: &[SparseVector],
    y: &[Label],
    fold_of: &[usize],
    fold: usize,
    config: &TrainConfig,
) -> Result<f64, ModelError> {
    let (mut tx, mut ty, mut vx, mut vy) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for i in 0..x.len() {
        if fold_of[i] == fold {
            vx.push(x[i].clone());
            vy.push(y[i]);
        } else {
            tx.push(x[i].clone());
            ty.push(y[i]);
        }
    }
    let model = train(kind, &tx, &ty, config)?;
    let pred = vx
        .iter()
        .map(|v| model.predict(v).map(|p| p.label))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(weighted_f1(&vy, &pred).expect("validation fold is non-empty"))
}

/// Cross-validate every grid value and pick the best mean weighted F1,
/// ties going to the smaller `C`. `base` supplies every other setting.
pub fn grid_search(
    kind: LinearKind,
    x: &[SparseVector],
    y: &[Label],
    grid: &[f64],
    k: usize,
    base: &TrainConfig,
) -> Result<GridSearchResult, ModelError> {
    if grid.is_empty() || grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(ModelError::InvalidGrid);
    }
    if k < 2 {
        return Err(ModelError::InvalidConfig("at least 2 folds are required".into()));
    }
    super::check_training_set(x, y)?;
    base.validate()?;

    let fold_of = stratified_folds(y, k, base.seed);
    let mut present = [false; NUM_CLASSES];
    let mut seen = vec![[false; NUM_CLASSES]; k];
    for (i, label) in y.iter().enumerate() {
        present[label.index()] = true;
        seen[fold_of[i]][label.index()] = true;
    }
    for (fold, s) in seen.iter().enumerate() {
        for label in Label::ALL {
            if present[label.index()] && !s[label.index()] {
                return Err(ModelError::TooFewSamples { fold, label });
            }
        }
    }

    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|g| (0..k).map(move |f| (g, f)))
        .collect();
    let scores = jobs
        .par_iter()
        .map(|&(g, f)| fold_score(kind, x, y, &fold_of, f, &base.clone().with_c(grid[g])))
        .collect::<Result<Vec<_>, _>>()?;

    let rows: Vec<CvRow> = grid
        .iter()
        .enumerate()
        .map(|(g, &c_value)| {
            let fold_scores = scores[g * k..(g + 1) * k].to_vec();
            let mean = fold_scores.iter().sum::<f64>() / k as f64;
            let var = fold_scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / k as f64;
            CvRow {
                c_value,
                mean,
                std: var.sqrt(),
                fold_scores,
            }
        })
        .collect();

    let best = rows
        .iter()
        .max_by(|a, b| {
            a.mean
                .total_cmp(&b.mean)
                .then_with(|| b.c_value.total_cmp(&a.c_value))
        })
        .expect("grid is non-empty");
    Ok(GridSearchResult {
        best_c: best.c_value,
        folds: k,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n_per_class: usize) -> (Vec<SparseVector>, Vec<Label>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for label in Label::ALL {
            for j in 0..n_per_class {
                let mut dense = vec![0.0; 4];
                dense[label.index()] = 1.0;
                dense[3] = j as f64 * 0.1;
                x.push(SparseVector::from_dense(&dense));
                y.push(label);
            }
        }
        (x, y)
    }

    #[test]
    fn folds_are_stratified_and_balanced() {
        let (_, y) = toy(7);
        let folds = stratified_folds(&y, 3, 1);
        for f in 0..3 {
            for label in Label::ALL {
                let n = (0..y.len()).filter(|&i| folds[i] == f && y[i] == label).count();
                assert!((2..=3).contains(&n));
            }
        }
        assert_eq!(folds, stratified_folds(&y, 3, 1));
    }

    #[test]
    fn singleton_grid_wins() {
        let (x, y) = toy(5);
        let r = grid_search(LinearKind::Logistic, &x, &y, &[1.0], 5, &TrainConfig::default()).unwrap();
        assert_eq!(r.best_c, 1.0);
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].fold_scores.len(), 5);
    }

    #[test]
    fn ties_go_to_smaller_c() {
        // Perfectly separable: every C scores 1.0.
        let (x, y) = toy(5);
        let r = grid_search(LinearKind::Svm, &x, &y, &[10.0, 1.0, 3.0], 5, &TrainConfig::default()).unwrap();
        assert!(r.rows.iter().all(|row| row.mean == 1.0));
        assert_eq!(r.best_c, 1.0);
    }

    #[test]
    fn too_few_samples() {
        let (x, y) = toy(3);
        assert!(matches!(
            grid_search(LinearKind::Logistic, &x, &y, &DEFAULT_GRID, 5, &TrainConfig::default()),
            Err(ModelError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn invalid_grid() {
        let (x, y) = toy(5);
        let cfg = TrainConfig::default();
        assert_eq!(
            grid_search(LinearKind::Svm, &x, &y, &[], 5, &cfg).unwrap_err(),
            ModelError::InvalidGrid
        );
        assert_eq!(
            grid_search(LinearKind::Svm, &x, &y, &[-1.0], 5, &cfg).unwrap_err(),
            ModelError::InvalidGrid
        );
    }
}
