//! Multinomial naive Bayes.
//!
//! Feature values are accumulated as (possibly fractional) counts, so the
//! same trainer works on raw term counts and on TF-IDF weights.

use serde::{Deserialize, Serialize};

use super::{check_dim, check_training_set, ModelError, Prediction};
use crate::features::SparseVector;
use crate::label::{Label, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    /// `ln P(c)`; a class absent from training gets `-inf` and is never predicted.
    pub class_log_prior: [f64; NUM_CLASSES],
    /// `ln P(t | c)`, one row per class.
    pub feature_log_prob: [Vec<f64>; NUM_CLASSES],
    pub alpha: f64,
}

impl NaiveBayesModel {
    pub fn dim(&self) -> usize {
        self.feature_log_prob[0].len()
    }

    /// Joint log-likelihood `ln P(c) + sum_t x_t ln P(t|c)` per class.
    pub fn log_posteriors(&self, x: &SparseVector) -> [f64; NUM_CLASSES] {
        std::array::from_fn(|c| {
            let prior = self.class_log_prior[c];
            if prior == f64::NEG_INFINITY {
                return prior;
            }
            prior + x.dot_dense(&self.feature_log_prob[c])
        })
    }

    pub fn predict(&self, x: &SparseVector) -> Result<Prediction, ModelError> {
        check_dim(self.dim(), x)?;
        Ok(Prediction::from_scores(self.log_posteriors(x)))
    }
}

/// `P(t|c) = (count(t,c) + alpha) / (count(.,c) + alpha * V)`, priors are
/// empirical class frequencies.
pub fn train_nb(x: &[SparseVector], y: &[Label], alpha: f64) -> Result<NaiveBayesModel, ModelError> {
    let dim = check_training_set(x, y)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(ModelError::InvalidConfig("alpha must be positive".into()));
    }

    let mut class_docs = [0usize; NUM_CLASSES];
    let mut counts: [Vec<f64>; NUM_CLASSES] = std::array::from_fn(|_| vec![0.0; dim]);
    for (v, label) in x.iter().zip(y) {
        let c = label.index();
        class_docs[c] += 1;
        for (i, w) in v.iter() {
            counts[c][i] += w;
        }
    }

    let n = x.len() as f64;
    let class_log_prior = std::array::from_fn(|c| {
        if class_docs[c] == 0 {
            f64::NEG_INFINITY
        } else {
            (class_docs[c] as f64 / n).ln()
        }
    });
    let feature_log_prob = std::array::from_fn(|c| {
        let total: f64 = counts[c].iter().sum();
        let denom = (total + alpha * dim as f64).ln();
        counts[c].iter().map(|&k| (k + alpha).ln() - denom).collect()
    });

    Ok(NaiveBayesModel {
        class_log_prior,
        feature_log_prob,
        alpha,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // vocabulary: bad=0, good=1; raw counts
    fn bad_good() -> (Vec<SparseVector>, Vec<Label>) {
        (
            vec![
                SparseVector::from_dense(&[2.0, 0.0]),
                SparseVector::from_dense(&[0.0, 1.0]),
            ],
            vec![Label::Negative, Label::Positive],
        )
    }

    #[test]
    fn hand_computed_laplace_smoothing() {
        let (x, y) = bad_good();
        let m = train_nb(&x, &y, 1.0).unwrap();
        let p = |c: Label, t: usize| m.feature_log_prob[c.index()][t].exp();
        assert!((p(Label::Negative, 0) - 0.75).abs() < 1e-15);
        assert!((p(Label::Negative, 1) - 0.25).abs() < 1e-15);
        assert!((p(Label::Positive, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p(Label::Positive, 1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.class_log_prior[0].exp() - 0.5).abs() < 1e-15);
        assert!((m.class_log_prior[2].exp() - 0.5).abs() < 1e-15);
        assert_eq!(m.class_log_prior[1], f64::NEG_INFINITY);

        let pred = m.predict(&SparseVector::from_dense(&[1.0, 0.0])).unwrap();
        assert_eq!(pred.label, Label::Negative);
        let expected_neg = 0.5f64.ln() + 0.75f64.ln();
        let expected_pos = 0.5f64.ln() + (1.0f64 / 3.0).ln();
        assert!((pred.scores[0] - expected_neg).abs() < 1e-12);
        assert!((pred.scores[2] - expected_pos).abs() < 1e-12);
    }

    #[test]
    fn large_alpha_tends_to_uniform() {
        let (x, y) = bad_good();
        let m = train_nb(&x, &y, 1e12).unwrap();
        for row in &m.feature_log_prob {
            for lp in row {
                assert!((lp.exp() - 0.5).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_class_always_predicted() {
        let x = vec![SparseVector::from_dense(&[1.0, 0.0, 0.0])];
        let m = train_nb(&x, &[Label::Neutral], 1.0).unwrap();
        for probe in [[0.0, 0.0, 1.0], [0.0, 5.0, 0.0], [0.0, 0.0, 0.0]] {
            let p = m.predict(&SparseVector::from_dense(&probe)).unwrap();
            assert_eq!(p.label, Label::Neutral);
        }
    }

    #[test]
    fn distributions_normalise() {
        let (x, y) = bad_good();
        let m = train_nb(&x, &y, 0.3).unwrap();
        for row in &m.feature_log_prob {
            let s: f64 = row.iter().map(|v| v.exp()).sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
        let s: f64 = m.class_log_prior.iter().map(|v| v.exp()).sum();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_empty_and_bad_alpha() {
        assert_eq!(train_nb(&[], &[], 1.0).unwrap_err(), ModelError::EmptyTrainingSet);
        let (x, y) = bad_good();
        assert!(matches!(
            train_nb(&x, &y, 0.0),
            Err(ModelError::InvalidConfig(_))
        ));
    }
}
