//! Python bindings: train, persist, predict, evaluate, anonymize and
//! aggregate trends from Python.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use sentitrend::corpus::{load_csv, split};
use sentitrend::eval::evaluate;
use sentitrend::models::{load_model, save_model};
use sentitrend::pipeline::{fit_bundle, ModelKind, PipelineConfig};
use sentitrend::service::{mask_mentions, Anonymizer as CoreAnonymizer, TrendWindow as CoreWindow};
use sentitrend::{Label, LabeledDocument, ModelBundle, PreprocessConfig, TrainConfig, Weighting};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn read_docs(path: &str) -> PyResult<Vec<LabeledDocument>> {
    let file = File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
    load_csv(BufReader::new(file)).map_err(value_err)
}

fn parse_label(name: &str) -> PyResult<Label> {
    name.parse().map_err(|_| value_err(format!("unknown label {name:?}")))
}

/// A trained pipeline: preprocessing, vectorizer and classifier.
#[pyclass(module = "sentitrend_py")]
pub struct Model {
    bundle: ModelBundle,
    version: Option<String>,
}

#[pymethods]
impl Model {
    /// Load an artifact written by `save` or the command-line tool.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        let file = File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let (bundle, header) = load_model(BufReader::new(file)).map_err(value_err)?;
        Ok(Model { bundle, version: Some(header.model_version()) })
    }

    /// Write an artifact and return its model version.
    fn save(&mut self, path: &str) -> PyResult<String> {
        let file = File::create(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let mut out = BufWriter::new(file);
        let header = save_model(&self.bundle, &mut out).map_err(value_err)?;
        out.flush().map_err(|e| PyIOError::new_err(e.to_string()))?;
        let version = header.model_version();
        self.version = Some(version.clone());
        Ok(version)
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.bundle.classifier.kind_name()
    }

    /// Set once the model has been saved or loaded.
    #[getter]
    fn model_version(&self) -> Option<String> {
        self.version.clone()
    }

    /// `(label, [neg, neu, pos] scores)`.
    fn predict(&self, text: &str) -> PyResult<(String, Vec<f64>)> {
        let p = self.bundle.predict_text(text).map_err(value_err)?;
        Ok((p.label.to_string(), p.scores.to_vec()))
    }

    fn predict_many(&self, py: Python<'_>, texts: Vec<String>) -> PyResult<Vec<String>> {
        py.detach(|| {
            texts
                .iter()
                .map(|t| self.bundle.predict_text(t).map(|p| p.label.to_string()))
                .collect::<Result<Vec<_>, _>>()
        })
        .map_err(value_err)
    }

    /// Metrics on a labelled CSV: accuracy, weighted and macro F1, and the
    /// confusion matrix (rows = truth).
    fn evaluate<'py>(&self, py: Python<'py>, csv_path: &str) -> PyResult<Bound<'py, PyDict>> {
        let docs = read_docs(csv_path)?;
        let (cm, report) = py.detach(|| evaluate(&self.bundle, &docs)).map_err(value_err)?;
        let out = PyDict::new(py);
        out.set_item("accuracy", report.accuracy)?;
        out.set_item("f1_weighted", report.weighted.f1)?;
        out.set_item("f1_macro", report.macro_avg.f1)?;
        out.set_item("confusion", cm.cells().iter().map(|r| r.to_vec()).collect::<Vec<_>>())?;
        out.set_item("n", cm.total())?;
        Ok(out)
    }
}

/// Train `kind` ("nb", "logreg" or "svm") on a labelled CSV. With `ratio`
/// set, only the stratified training part is used.
#[pyfunction]
#[pyo3(signature = (csv_path, kind, c=1.0, alpha=1.0, max_features=10_000, stopwords=true, raw_counts=false, ratio=None, seed=42))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    csv_path: &str,
    kind: &str,
    c: f64,
    alpha: f64,
    max_features: usize,
    stopwords: bool,
    raw_counts: bool,
    ratio: Option<f64>,
    seed: u64,
) -> PyResult<Model> {
    let kind: ModelKind = kind.parse().map_err(value_err)?;
    let mut docs = read_docs(csv_path)?;
    if let Some(r) = ratio {
        docs = split(&docs, r, seed).map_err(value_err)?.train;
    }
    let config = PipelineConfig {
        preprocess: PreprocessConfig { strip_stopwords: stopwords, ..PreprocessConfig::default() },
        max_features,
        nb_weighting: if raw_counts { Weighting::RawCount } else { Weighting::TfIdf },
        train: TrainConfig { c_value: c, alpha, seed, ..TrainConfig::default() },
    };
    let (bundle, _) = py.detach(|| fit_bundle(kind, &docs, &config)).map_err(value_err)?;
    Ok(Model { bundle, version: None })
}

/// Keyed id hashing and mention masking.
#[pyclass(module = "sentitrend_py")]
pub struct Anonymizer {
    inner: CoreAnonymizer,
}

#[pymethods]
impl Anonymizer {
    #[new]
    fn new(key: &str) -> Self {
        Anonymizer { inner: CoreAnonymizer::new(key) }
    }

    fn hash_id(&self, id: &str) -> String {
        self.inner.hash_id(id)
    }

    #[staticmethod]
    fn mask_mentions(text: &str) -> String {
        mask_mentions(text)
    }
}

/// Tumbling event-time sentiment counts.
#[pyclass(module = "sentitrend_py")]
pub struct TrendWindow {
    inner: CoreWindow,
}

#[pymethods]
impl TrendWindow {
    #[new]
    #[pyo3(signature = (bucket_seconds=60, retained_buckets=1440))]
    fn new(bucket_seconds: u64, retained_buckets: usize) -> PyResult<Self> {
        if bucket_seconds == 0 || retained_buckets == 0 {
            return Err(value_err("bucket_seconds and retained_buckets must be positive"));
        }
        Ok(TrendWindow { inner: CoreWindow::new(bucket_seconds, retained_buckets) })
    }

    fn record(&mut self, ts_ms: i64, label: &str) -> PyResult<()> {
        self.inner.record(ts_ms, parse_label(label)?);
        Ok(())
    }

    /// `[(bucket_start_ms, negative, neutral, positive), ...]`
    fn query(&self, from_ms: i64, to_ms: i64) -> PyResult<Vec<(i64, u64, u64, u64)>> {
        let points = self.inner.query(from_ms, to_ms).map_err(value_err)?;
        Ok(points.iter().map(|p| (p.bucket_start, p.negative, p.neutral, p.positive)).collect())
    }

    #[getter]
    fn dropped_late(&self) -> u64 {
        self.inner.dropped_late()
    }
}

#[pymodule]
fn sentitrend_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_class::<Anonymizer>()?;
    m.add_class::<TrendWindow>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    Ok(())
}
