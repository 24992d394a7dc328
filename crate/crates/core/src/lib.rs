//! Sentiment classification over social-media text.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`] loads labelled CSV datasets and produces stratified splits.
//! * [`preprocess`] cleans and tokenizes raw posts.
//! * [`features`] fits a capped vocabulary and emits L2-normalised TF-IDF vectors.
//! * [`models`] trains multinomial naive Bayes, softmax logistic regression and a
//!   one-vs-rest linear SVM, runs cross-validated grid search, and persists
//!   trained bundles as checksummed artifacts.
//! * [`eval`] builds confusion matrices and metric reports.
//! * [`service`] classifies NDJSON streams and aggregates sentiment trends in
//!   tumbling event-time windows.
//! * [`pipeline`] wires the above into train / evaluate / benchmark runs.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod features;
pub mod label;
pub mod models;
pub mod pipeline;
pub mod preprocess;
pub mod service;

pub use corpus::{DatasetSplit, LabeledDocument};
pub use error::{Error, Result};
pub use eval::{ConfusionMatrix, MetricsReport};
pub use features::{SparseVector, TfIdfModel, Vocabulary, Weighting};
pub use label::Label;
pub use models::{
    Classifier, LinearKind, LinearModel, ModelBundle, NaiveBayesModel, Prediction, TrainConfig,
};
pub use preprocess::{PreprocessConfig, TokenSequence};
