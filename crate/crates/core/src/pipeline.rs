//! End-to-end runs: documents in, trained bundles and reports out.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::corpus::{label_distribution, split, LabeledDocument};
use crate::error::Result;
use crate::eval::{evaluate, ReportRow};
use crate::features::{SparseVector, TfIdfModel, Weighting, DEFAULT_MAX_FEATURES};
use crate::label::Label;
use crate::models::{
    grid_search, train_logreg, train_nb, train_svm, Classifier, GridSearchResult, LinearKind,
    ModelBundle, TrainConfig,
};
use crate::preprocess::{process_text, PreprocessConfig, TokenSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Nb,
    Logreg,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Nb, ModelKind::Logreg, ModelKind::Svm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Nb => "nb",
            ModelKind::Logreg => "logreg",
            ModelKind::Svm => "svm",
        }
    }

    pub fn linear_kind(self) -> Option<LinearKind> {
        match self {
            ModelKind::Nb => None,
            ModelKind::Logreg => Some(LinearKind::Logistic),
            ModelKind::Svm => Some(LinearKind::Svm),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nb" | "naive-bayes" => Ok(ModelKind::Nb),
            "logreg" | "lr" | "logistic" => Ok(ModelKind::Logreg),
            "svm" => Ok(ModelKind::Svm),
            other => Err(format!("unknown model kind {other:?} (expected nb, logreg or svm)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub preprocess: PreprocessConfig,
    pub max_features: usize,
    /// Feature weighting for naive Bayes; the linear models always use TF-IDF.
    pub nb_weighting: Weighting,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            preprocess: PreprocessConfig::default(),
            max_features: DEFAULT_MAX_FEATURES,
            nb_weighting: Weighting::TfIdf,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub kind: ModelKind,
    pub n_docs: usize,
    pub class_distribution: BTreeMap<Label, usize>,
    pub vocabulary_size: usize,
    /// Final training objective; naive Bayes has none.
    pub objective: Option<f64>,
    pub epochs: Option<usize>,
}

pub fn tokenize_all(docs: &[LabeledDocument], preprocess: &PreprocessConfig) -> Vec<TokenSequence> {
    docs.iter().map(|d| process_text(&d.text, preprocess)).collect()
}

/// Fit the vectorizer on `docs` and transform them.
pub fn featurize(
    docs: &[LabeledDocument],
    config: &PipelineConfig,
    weighting: Weighting,
) -> (TfIdfModel, Vec<SparseVector>, Vec<Label>) {
    let tokens = tokenize_all(docs, &config.preprocess);
    let model = TfIdfModel::fit(&tokens, config.max_features).with_weighting(weighting);
    let x = model.transform_corpus(&tokens);
    (model, x, docs.iter().map(|d| d.label).collect())
}

pub fn fit_bundle(
    kind: ModelKind,
    docs: &[LabeledDocument],
    config: &PipelineConfig,
) -> Result<(ModelBundle, TrainSummary)> {
    let weighting = match kind {
        ModelKind::Nb => config.nb_weighting,
        _ => Weighting::TfIdf,
    };
    let (features, x, y) = featurize(docs, config, weighting);
    let classifier = match kind {
        ModelKind::Nb => Classifier::NaiveBayes(train_nb(&x, &y, config.train.alpha)?),
        ModelKind::Logreg => Classifier::Linear(train_logreg(&x, &y, &config.train)?),
        ModelKind::Svm => Classifier::Linear(train_svm(&x, &y, &config.train)?),
    };
    let (objective, epochs) = match &classifier {
        Classifier::Linear(m) => (Some(m.objective), Some(m.epochs)),
        Classifier::NaiveBayes(_) => (None, None),
    };
    let summary = TrainSummary {
        kind,
        n_docs: docs.len(),
        class_distribution: label_distribution(docs),
        vocabulary_size: features.dim(),
        objective,
        epochs,
    };
    let bundle = ModelBundle {
        preprocess: config.preprocess.clone(),
        features,
        classifier,
    };
    Ok((bundle, summary))
}

/// Cross-validate `C` on `docs`. The vectorizer is fitted once on all of
/// `docs` before folding.
pub fn run_grid_search(
    kind: LinearKind,
    docs: &[LabeledDocument],
    config: &PipelineConfig,
    grid: &[f64],
    folds: usize,
) -> Result<GridSearchResult> {
    let (_, x, y) = featurize(docs, config, Weighting::TfIdf);
    Ok(grid_search(kind, &x, &y, grid, folds, &config.train)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRun {
    pub train_size: usize,
    pub test_size: usize,
    pub rows: Vec<ReportRow>,
    /// Wall-clock seconds per model (train + evaluate).
    pub seconds: Vec<f64>,
}

/// Split, train every kind in `kinds` on the train part and evaluate on the
/// test part.
pub fn benchmark(
    docs: &[LabeledDocument],
    ratio: f64,
    seed: u64,
    kinds: &[ModelKind],
    config: &PipelineConfig,
) -> Result<BenchmarkRun> {
    let parts = split(docs, ratio, seed)?;
    let mut rows = Vec::new();
    let mut seconds = Vec::new();
    for &kind in kinds {
        let started = Instant::now();
        let (bundle, _) = fit_bundle(kind, &parts.train, config)?;
        let (cm, report) = evaluate(&bundle, &parts.test)?;
        seconds.push(started.elapsed().as_secs_f64());
        rows.push(ReportRow::new(kind.as_str(), cm, report));
    }
    Ok(BenchmarkRun {
        train_size: parts.train.len(),
        test_size: parts.test.len(),
        rows,
        seconds,
    })
}
