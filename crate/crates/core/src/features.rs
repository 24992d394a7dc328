//! Capped vocabulary and TF-IDF sparse vectors.
//!
//! Terms are ranked by document frequency (descending, ties lexicographic) and
//! the top `max_features` kept. Weights are raw term counts times the smoothed
//! IDF `ln((1 + N) / (1 + df)) + 1`, followed by L2 normalisation.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::preprocess::TokenSequence;

pub const DEFAULT_MAX_FEATURES: usize = 10_000;

/// Sparse real vector with strictly increasing indices and no explicit zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
    dim: usize,
}

impl SparseVector {
    pub fn zeros(dim: usize) -> Self {
        SparseVector {
            indices: Vec::new(),
            values: Vec::new(),
            dim,
        }
    }

    /// Build from arbitrary `(index, value)` pairs: duplicates are summed,
    /// zeros dropped. Panics if an index is out of range or a value is not
    /// finite.
    pub fn from_pairs<I>(dim: usize, pairs: I) -> Self
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, v) in pairs {
            assert!(i < dim, "index {i} out of range for dimension {dim}");
            assert!(v.is_finite(), "non-finite weight {v}");
            *acc.entry(i).or_insert(0.0) += v;
        }
        let mut out = SparseVector::zeros(dim);
        for (i, v) in acc {
            if v != 0.0 {
                out.indices.push(i as u32);
                out.values.push(v);
            }
        }
        out
    }

    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector::from_pairs(values.len(), values.iter().copied().enumerate())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn is_zero(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&i, &v)| (i as usize, v))
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn squared_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i]).sum()
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        SparseVector::from_pairs(self.dim, self.iter().map(|(i, v)| (i, v * factor)))
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    fn normalize(&mut self) {
        let norm = self.norm();
        if norm > 0.0 {
            for v in &mut self.values {
                *v /= norm;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    document_frequency: Vec<usize>,
    max_features: usize,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    /// Rebuild from terms listed in index order. Returns `None` if the terms
    /// are not unique, lengths disagree, any df is zero, or the cap is exceeded.
    pub fn from_parts(
        terms: Vec<String>,
        document_frequency: Vec<usize>,
        max_features: usize,
    ) -> Option<Self> {
        if terms.len() != document_frequency.len()
            || terms.len() > max_features
            || document_frequency.contains(&0)
        {
            return None;
        }
        let index: HashMap<String, usize> =
            terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        if index.len() != terms.len() {
            return None;
        }
        Some(Vocabulary {
            terms,
            document_frequency,
            max_features,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_features(&self) -> usize {
        self.max_features
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> Option<&str> {
        self.terms.get(index).map(String::as_str)
    }

    /// Terms in index order.
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn document_frequency(&self) -> &[usize] {
        &self.document_frequency
    }
}

/// Rank terms by descending document frequency, ties by ascending byte order,
/// and keep the first `max_features`.
pub fn fit_vocabulary(corpus: &[TokenSequence], max_features: usize) -> Vocabulary {
    assert!(max_features >= 1, "max_features must be at least 1");
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in corpus {
        let distinct: HashSet<&str> = doc.iter().map(String::as_str).collect();
        for term in distinct {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_features);

    let (terms, dfs): (Vec<String>, Vec<usize>) =
        ranked.into_iter().map(|(t, d)| (t.to_string(), d)).unzip();
    Vocabulary::from_parts(terms, dfs, max_features).expect("ranked terms are unique")
}

/// Smoothed inverse document frequency.
pub fn idf_weight(df: usize, n_docs: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// How token counts are turned into feature weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// count * idf, L2-normalised.
    #[default]
    TfIdf,
    /// Raw term counts, unnormalised.
    RawCount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfIdfModel {
    pub vocabulary: Vocabulary,
    pub idf: Vec<f64>,
    pub n_docs: usize,
    pub weighting: Weighting,
}

impl TfIdfModel {
    pub fn fit(corpus: &[TokenSequence], max_features: usize) -> Self {
        let vocabulary = fit_vocabulary(corpus, max_features);
        let n_docs = corpus.len();
        let idf = vocabulary
            .document_frequency()
            .iter()
            .map(|&df| idf_weight(df, n_docs))
            .collect();
        TfIdfModel {
            vocabulary,
            idf,
            n_docs,
            weighting: Weighting::TfIdf,
        }
    }

    pub fn with_weighting(mut self, weighting: Weighting) -> Self {
        self.weighting = weighting;
        self
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn transform(&self, tokens: &TokenSequence) -> SparseVector {
        let dim = self.dim();
        let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
        for t in tokens {
            if let Some(i) = self.vocabulary.index_of(t) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let mut out = SparseVector::zeros(dim);
        for (i, count) in counts {
            let w = match self.weighting {
                Weighting::TfIdf => count as f64 * self.idf[i],
                Weighting::RawCount => count as f64,
            };
            out.indices.push(i as u32);
            out.values.push(w);
        }
        if self.weighting == Weighting::TfIdf {
            out.normalize();
        }
        out
    }

    pub fn transform_corpus(&self, corpus: &[TokenSequence]) -> Vec<SparseVector> {
        corpus.iter().map(|t| self.transform(t)).collect()
    }
}

pub fn transform(tokens: &TokenSequence, model: &TfIdfModel) -> SparseVector {
    model.transform(tokens)
}

pub fn transform_corpus(corpus: &[TokenSequence], model: &TfIdfModel) -> Vec<SparseVector> {
    model.transform_corpus(corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(words: &[&str]) -> TokenSequence {
        words.iter().copied().collect()
    }

    #[test]
    fn vocabulary_ranking_and_cap() {
        let corpus = vec![seq(&["a", "b"]), seq(&["b", "c"]), seq(&["b"])];
        let v = fit_vocabulary(&corpus, 10);
        assert_eq!(v.terms(), &["b", "a", "c"]);
        assert_eq!(v.document_frequency(), &[3, 1, 1]);
        assert_eq!(v.index_of("c"), Some(2));

        let v = fit_vocabulary(&corpus, 1);
        assert_eq!(v.terms(), &["b"]);
        assert_eq!(fit_vocabulary(&[], 5).len(), 0);
    }

    #[test]
    fn document_frequency_counts_documents_not_occurrences() {
        let v = fit_vocabulary(&[seq(&["x", "x", "x"]), seq(&["y"]), seq(&["y"])], 10);
        assert_eq!(v.terms(), &["y", "x"]);
        assert_eq!(v.document_frequency(), &[2, 1]);
    }

    #[test]
    fn idf_values() {
        assert_eq!(idf_weight(3, 3), 1.0);
        assert!((idf_weight(1, 3) - (std::f64::consts::LN_2 + 1.0)).abs() < 1e-15);
        assert!((idf_weight(0, 3) - (4f64.ln() + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn transform_examples() {
        let model = TfIdfModel::fit(&[seq(&["a", "b"]), seq(&["a", "b"])], 10);
        let oov = model.transform(&seq(&["zzz"]));
        assert!(oov.is_zero());
        assert_eq!(oov.norm(), 0.0);

        let one = model.transform(&seq(&["a", "zzz"]));
        assert_eq!(one.nnz(), 1);
        assert_eq!(one.values()[0], 1.0);

        let two = model.transform(&seq(&["a", "b"]));
        let expected = std::f64::consts::FRAC_1_SQRT_2;
        for v in two.values() {
            assert!((v - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn raw_count_mode() {
        let model =
            TfIdfModel::fit(&[seq(&["a", "b"]), seq(&["b"])], 10).with_weighting(Weighting::RawCount);
        let v = model.transform(&seq(&["a", "a", "b"]));
        assert_eq!(v.to_dense(), vec![1.0, 2.0]);
    }

    #[test]
    fn corpus_transform_preserves_length() {
        let model = TfIdfModel::fit(&[seq(&["a"])], 10);
        assert!(model.transform_corpus(&[]).is_empty());
        let t = seq(&["a"]);
        assert_eq!(model.transform_corpus(std::slice::from_ref(&t)), vec![model.transform(&t)]);
    }

    #[test]
    fn sparse_vector_construction() {
        let v = SparseVector::from_pairs(5, [(3, 1.0), (1, 2.0), (3, -1.0), (4, 0.0)]);
        assert_eq!(v.indices(), &[1]);
        assert_eq!(v.values(), &[2.0]);
        assert_eq!(SparseVector::from_dense(&[0.0, 3.0]).iter().collect::<Vec<_>>(), vec![(1, 3.0)]);
    }

    #[test]
    fn vocabulary_from_parts_validates() {
        assert!(Vocabulary::from_parts(vec!["a".into(), "a".into()], vec![1, 1], 5).is_none());
        assert!(Vocabulary::from_parts(vec!["a".into()], vec![0], 5).is_none());
        assert!(Vocabulary::from_parts(vec!["a".into(), "b".into()], vec![1, 1], 1).is_none());
    }
}
