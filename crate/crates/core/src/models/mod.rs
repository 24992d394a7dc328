//! Classical classifiers over sparse TF-IDF features.
//!
//! * [`naive_bayes`]: multinomial naive Bayes with Lidstone smoothing.
//! * [`logistic`]: softmax regression, full-batch accelerated gradient descent.
//! * [`svm`]: one-vs-rest linear SVM trained with Pegasos-style subgradient steps.
//! * [`grid`]: stratified k-fold grid search over `C`.
//! * [`artifact`]: checksummed, versioned persistence of a trained bundle.

pub mod artifact;
pub mod grid;
pub mod logistic;
pub mod naive_bayes;
pub mod svm;

use serde::{Deserialize, Serialize};

use crate::features::{SparseVector, TfIdfModel};
use crate::label::{argmax_lowest, Label, NUM_CLASSES};
use crate::preprocess::{process_text, PreprocessConfig};

pub use artifact::{load_model, save_model, ArtifactHeader};
pub use grid::{grid_search, CvRow, GridSearchResult, DEFAULT_FOLDS, DEFAULT_GRID};
pub use logistic::train_logreg;
pub use naive_bayes::{train_nb, NaiveBayesModel};
pub use svm::train_svm;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{features} feature vectors but {labels} labels")]
    LengthMismatch { features: usize, labels: usize },
    #[error("input has dimension {found}, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("objective became non-finite at epoch {epoch}; lower the learning rate")]
    NonFinite { epoch: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("fold {fold} lacks class {label} which is present in the data")]
    TooFewSamples { fold: usize, label: Label },
    #[error("grid must be non-empty and contain only positive values")]
    InvalidGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinearKind {
    Logistic,
    Svm,
}

/// Hyperparameters shared by the iterative trainers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Inverse regularisation strength.
    pub c_value: f64,
    /// Naive Bayes smoothing.
    pub alpha: f64,
    pub max_epochs: usize,
    /// Initial step size for logistic regression (adapted by backtracking).
    pub learning_rate: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c_value: 1.0,
            alpha: 1.0,
            max_epochs: 500,
            learning_rate: 1.0,
            tolerance: 1e-4,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn with_c(mut self, c: f64) -> Self {
        self.c_value = c;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |what: &str| Err(ModelError::InvalidConfig(what.to_string()));
        if !(self.c_value > 0.0 && self.c_value.is_finite()) {
            return bad("c_value must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1");
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }
}

/// Weight matrix (row per class) plus per-class bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: [Vec<f64>; NUM_CLASSES],
    pub bias: [f64; NUM_CLASSES],
    pub kind: LinearKind,
    pub c_value: f64,
    /// Objective value at the returned parameters.
    pub objective: f64,
    pub epochs: usize,
}

impl LinearModel {
    pub fn zeros(dim: usize, kind: LinearKind, c_value: f64) -> Self {
        LinearModel {
            weights: std::array::from_fn(|_| vec![0.0; dim]),
            bias: [0.0; NUM_CLASSES],
            kind,
            c_value,
            objective: 0.0,
            epochs: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    /// Raw per-class margins `w_c . x + b_c`.
    pub fn margins(&self, x: &SparseVector) -> [f64; NUM_CLASSES] {
        std::array::from_fn(|c| x.dot_dense(&self.weights[c]) + self.bias[c])
    }

    pub fn predict(&self, x: &SparseVector) -> Result<Prediction, ModelError> {
        check_dim(self.dim(), x)?;
        let margins = self.margins(x);
        let scores = match self.kind {
            LinearKind::Logistic => logistic::softmax(&margins),
            LinearKind::Svm => margins,
        };
        Ok(Prediction::from_scores(scores))
    }
}

fn check_dim(expected: usize, x: &SparseVector) -> Result<(), ModelError> {
    if x.dim() != expected {
        return Err(ModelError::DimensionMismatch {
            expected,
            found: x.dim(),
        });
    }
    Ok(())
}

pub(crate) fn check_training_set(x: &[SparseVector], y: &[Label]) -> Result<usize, ModelError> {
    if x.len() != y.len() {
        return Err(ModelError::LengthMismatch {
            features: x.len(),
            labels: y.len(),
        });
    }
    let first = x.first().ok_or(ModelError::EmptyTrainingSet)?;
    let dim = first.dim();
    for v in x {
        check_dim(dim, v)?;
    }
    Ok(dim)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    /// Log-posteriors (naive Bayes), probabilities (logistic) or margins (SVM).
    pub scores: [f64; NUM_CLASSES],
}

impl Prediction {
    pub fn from_scores(scores: [f64; NUM_CLASSES]) -> Self {
        Prediction {
            label: argmax_lowest(&scores),
            scores,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    NaiveBayes(NaiveBayesModel),
    Linear(LinearModel),
}

impl Classifier {
    pub fn predict(&self, x: &SparseVector) -> Result<Prediction, ModelError> {
        match self {
            Classifier::NaiveBayes(m) => m.predict(x),
            Classifier::Linear(m) => m.predict(x),
        }
    }

    /// Short kind name as used on the command line and in artifact headers.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Classifier::NaiveBayes(_) => "nb",
            Classifier::Linear(m) => match m.kind {
                LinearKind::Logistic => "logreg",
                LinearKind::Svm => "svm",
            },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Classifier::NaiveBayes(m) => m.dim(),
            Classifier::Linear(m) => m.dim(),
        }
    }
}

pub fn predict(model: &Classifier, x: &SparseVector) -> Result<Prediction, ModelError> {
    model.predict(x)
}

/// Everything needed to go from raw text to a prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelBundle {
    pub preprocess: PreprocessConfig,
    pub features: TfIdfModel,
    pub classifier: Classifier,
}

impl ModelBundle {
    pub fn vectorize(&self, text: &str) -> SparseVector {
        self.features.transform(&process_text(text, &self.preprocess))
    }

    pub fn predict_text(&self, text: &str) -> Result<Prediction, ModelError> {
        self.classifier.predict(&self.vectorize(text))
    }
}
