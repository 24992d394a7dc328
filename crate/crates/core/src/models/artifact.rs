//! Versioned, checksummed model artifacts.
//!
//! An artifact is UTF-8 text: a header of `key=value` lines, a `---`
//! separator line, then a JSON payload.
//!
//! ```text
//! SSTM
//! schema_version=1
//! model_kind=logreg
//! created_unix_seconds=0
//! payload_sha256=<64 hex chars>
//! ---
//! {"preprocess":{...},"features":{...},"classifier":{...}}
//! ```
//!
//! The payload keys are emitted in a fixed order and floats use the shortest
//! representation that parses back to the same bits. Non-finite naive Bayes
//! priors are written as the string `"-inf"`. `created_unix_seconds` comes
//! from `SOURCE_DATE_EPOCH` (0 when unset) so identical inputs give identical
//! bytes.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Classifier, LinearKind, LinearModel, ModelBundle, NaiveBayesModel};
use crate::features::{TfIdfModel, Vocabulary, Weighting};
use crate::label::NUM_CLASSES;
use crate::preprocess::PreprocessConfig;

pub const MAGIC: &str = "SSTM";
pub const SCHEMA_VERSION: u32 = 1;
const SEPARATOR: &str = "---";

#[derive(Debug, thiserror::Error)]
pub enum ArtifactError {
    #[error("artifact schema version {found} is not supported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("artifact checksum mismatch: header says {expected}, payload hashes to {actual}")]
    CorruptArtifact { expected: String, actual: String },
    #[error("malformed artifact: {0}")]
    SchemaError(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn schema(msg: impl Into<String>) -> ArtifactError {
    ArtifactError::SchemaError(msg.into())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArtifactHeader {
    pub schema_version: u32,
    pub model_kind: String,
    pub created_unix_seconds: u64,
    pub payload_sha256: String,
}

impl ArtifactHeader {
    /// `<kind>-<first 12 hex digits of the payload hash>`.
    pub fn model_version(&self) -> String {
        let short: String = self.payload_sha256.chars().take(12).collect();
        format!("{}-{}", self.model_kind, short)
    }

    fn render(&self) -> String {
        format!(
            "{MAGIC}\nschema_version={}\nmodel_kind={}\ncreated_unix_seconds={}\npayload_sha256={}\n{SEPARATOR}\n",
            self.schema_version, self.model_kind, self.created_unix_seconds, self.payload_sha256
        )
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Payload {
    preprocess: PreprocessConfig,
    features: FeaturesPayload,
    classifier: ClassifierPayload,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeaturesPayload {
    weighting: Weighting,
    max_features: usize,
    n_docs: usize,
    /// `(term, index, df)` in index order.
    vocabulary: Vec<(String, usize, usize)>,
    idf: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ClassifierPayload {
    Nb {
        class_log_prior: [LogProb; NUM_CLASSES],
        feature_log_prob: [Vec<f64>; NUM_CLASSES],
        alpha: f64,
    },
    Logreg(LinearPayload),
    Svm(LinearPayload),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinearPayload {
    weights: [Vec<f64>; NUM_CLASSES],
    bias: [f64; NUM_CLASSES],
    c_value: f64,
    objective: f64,
    epochs: usize,
}

/// A log-probability that may be `-inf`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum LogProb {
    Finite(f64),
    Tag(String),
}

impl LogProb {
    fn encode(v: f64) -> Self {
        if v == f64::NEG_INFINITY {
            LogProb::Tag("-inf".into())
        } else {
            LogProb::Finite(v)
        }
    }

    fn decode(&self) -> Result<f64, ArtifactError> {
        match self {
            LogProb::Finite(v) => Ok(*v),
            LogProb::Tag(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            LogProb::Tag(s) => Err(schema(format!("bad log-probability {s:?}"))),
        }
    }
}

fn all_finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

fn to_payload(bundle: &ModelBundle) -> Result<Payload, ArtifactError> {
    let features = &bundle.features;
    let vocabulary = features
        .vocabulary
        .terms()
        .iter()
        .zip(features.vocabulary.document_frequency())
        .enumerate()
        .map(|(i, (t, &df))| (t.clone(), i, df))
        .collect();
    let classifier = match &bundle.classifier {
        Classifier::NaiveBayes(m) => {
            if m.feature_log_prob.iter().any(|row| !all_finite(row)) {
                return Err(schema("naive Bayes likelihoods must be finite"));
            }
            ClassifierPayload::Nb {
                class_log_prior: m.class_log_prior.map(LogProb::encode),
                feature_log_prob: m.feature_log_prob.clone(),
                alpha: m.alpha,
            }
        }
        Classifier::Linear(m) => {
            if m.weights.iter().any(|row| !all_finite(row)) || !all_finite(&m.bias) {
                return Err(schema("linear model parameters must be finite"));
            }
            let p = LinearPayload {
                weights: m.weights.clone(),
                bias: m.bias,
                c_value: m.c_value,
                objective: m.objective,
                epochs: m.epochs,
            };
            match m.kind {
                LinearKind::Logistic => ClassifierPayload::Logreg(p),
                LinearKind::Svm => ClassifierPayload::Svm(p),
            }
        }
    };
    Ok(Payload {
        preprocess: bundle.preprocess.clone(),
        features: FeaturesPayload {
            weighting: features.weighting,
            max_features: features.vocabulary.max_features(),
            n_docs: features.n_docs,
            vocabulary,
            idf: features.idf.clone(),
        },
        classifier,
    })
}

fn from_payload(p: Payload) -> Result<ModelBundle, ArtifactError> {
    let f = p.features;
    let mut terms = Vec::with_capacity(f.vocabulary.len());
    let mut dfs = Vec::with_capacity(f.vocabulary.len());
    for (expected, (term, index, df)) in f.vocabulary.into_iter().enumerate() {
        if index != expected {
            return Err(schema(format!("vocabulary entry {expected} has index {index}")));
        }
        terms.push(term);
        dfs.push(df);
    }
    let vocabulary = Vocabulary::from_parts(terms, dfs, f.max_features)
        .ok_or_else(|| schema("inconsistent vocabulary"))?;
    let dim = vocabulary.len();
    if f.idf.len() != dim {
        return Err(schema("idf table length differs from vocabulary"));
    }
    let features = TfIdfModel {
        vocabulary,
        idf: f.idf,
        n_docs: f.n_docs,
        weighting: f.weighting,
    };

    let classifier = match p.classifier {
        ClassifierPayload::Nb {
            class_log_prior,
            feature_log_prob,
            alpha,
        } => {
            if feature_log_prob.iter().any(|row| row.len() != dim) {
                return Err(schema("likelihood table has wrong dimension"));
            }
            let mut prior = [0.0; NUM_CLASSES];
            for (slot, lp) in prior.iter_mut().zip(&class_log_prior) {
                *slot = lp.decode()?;
            }
            Classifier::NaiveBayes(NaiveBayesModel {
                class_log_prior: prior,
                feature_log_prob,
                alpha,
            })
        }
        ClassifierPayload::Logreg(l) => Classifier::Linear(linear(l, LinearKind::Logistic, dim)?),
        ClassifierPayload::Svm(l) => Classifier::Linear(linear(l, LinearKind::Svm, dim)?),
    };
    Ok(ModelBundle {
        preprocess: p.preprocess,
        features,
        classifier,
    })
}

fn linear(p: LinearPayload, kind: LinearKind, dim: usize) -> Result<LinearModel, ArtifactError> {
    if p.weights.iter().any(|row| row.len() != dim) {
        return Err(schema("weight matrix has wrong dimension"));
    }
    Ok(LinearModel {
        weights: p.weights,
        bias: p.bias,
        kind,
        c_value: p.c_value,
        objective: p.objective,
        epochs: p.epochs,
    })
}

fn created_unix_seconds() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Serialize `bundle` to `sink` and return the header that was written.
pub fn save_model<W: Write>(bundle: &ModelBundle, mut sink: W) -> Result<ArtifactHeader, ArtifactError> {
    let payload = serde_json::to_string(&to_payload(bundle)?)
        .map_err(|e| schema(format!("cannot encode payload: {e}")))?;
    let header = ArtifactHeader {
        schema_version: SCHEMA_VERSION,
        model_kind: bundle.classifier.kind_name().to_string(),
        created_unix_seconds: created_unix_seconds(),
        payload_sha256: hex::encode(Sha256::digest(payload.as_bytes())),
    };
    sink.write_all(header.render().as_bytes())?;
    sink.write_all(payload.as_bytes())?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(header)
}

fn parse_header(text: &str) -> Result<(ArtifactHeader, &str), ArtifactError> {
    let mut rest = text;
    let mut next_line = || -> Result<&str, ArtifactError> {
        let (line, tail) = rest
            .split_once('\n')
            .ok_or_else(|| schema("truncated header"))?;
        rest = tail;
        Ok(line)
    };
    if next_line()? != MAGIC {
        return Err(schema("missing SSTM magic line"));
    }
    let mut field = |key: &str| -> Result<String, ArtifactError> {
        let line = next_line()?;
        line.strip_prefix(key)
            .and_then(|v| v.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| schema(format!("expected {key}=..., found {line:?}")))
    };
    let version: u32 = field("schema_version")?
        .parse()
        .map_err(|_| schema("schema_version is not an integer"))?;
    if version != SCHEMA_VERSION {
        return Err(ArtifactError::VersionMismatch {
            expected: SCHEMA_VERSION,
            found: version,
        });
    }
    let model_kind = field("model_kind")?;
    let created_unix_seconds = field("created_unix_seconds")?
        .parse()
        .map_err(|_| schema("created_unix_seconds is not an integer"))?;
    let payload_sha256 = field("payload_sha256")?;
    if next_line()? != SEPARATOR {
        return Err(schema("missing header separator"));
    }
    let header = ArtifactHeader {
        schema_version: version,
        model_kind,
        created_unix_seconds,
        payload_sha256,
    };
    Ok((header, rest))
}

pub fn load_model<R: Read>(mut source: R) -> Result<(ModelBundle, ArtifactHeader), ArtifactError> {
    let mut bytes = Vec::new();
    source.read_to_end(&mut bytes)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| schema("artifact is not UTF-8"))?;
    let (header, body) = parse_header(text)?;
    let payload = body.strip_suffix('\n').unwrap_or(body);
    let actual = hex::encode(Sha256::digest(payload.as_bytes()));
    if actual != header.payload_sha256 {
        return Err(ArtifactError::CorruptArtifact {
            expected: header.payload_sha256,
            actual,
        });
    }
    let parsed: Payload =
        serde_json::from_str(payload).map_err(|e| schema(format!("payload: {e}")))?;
    let bundle = from_payload(parsed)?;
    if bundle.classifier.kind_name() != header.model_kind {
        return Err(schema("model_kind does not match the payload"));
    }
    Ok((bundle, header))
}
