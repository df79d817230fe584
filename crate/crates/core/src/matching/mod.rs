//! API matching: bag-of-words representations of API descriptions, optional
//! embedding-weighted sentence vectors, and a source × target cosine
//! similarity matrix used to rank replacement candidates.
//!
//! Term weights follow the corpus-frequency normalization: the weight of
//! token `j` in document `i` is the count of `j` in `i` divided by the count
//! of `j` over every document of both libraries. Classical `tf · ln(m/df)`
//! weighting is available behind [`Weighting::Classical`].

pub mod embedding;
pub mod stem;

use std::collections::{BTreeMap, HashMap};

pub use embedding::EmbeddingTable;
pub use stem::{stem, tokenize_and_stem};

use crate::corpus::DocCorpus;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MatchError {
    #[error("token `{token}` of document `{doc}` is not in the vocabulary")]
    UnknownToken { doc: String, token: String },
    #[error("embedding mode requires an embedding table")]
    MissingEmbeddings,
    #[error("cannot build a similarity matrix from an empty corpus")]
    EmptyCorpus,
    #[error("unknown source API `{0}`")]
    UnknownSource(String),
    #[error("vectors have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    #[default]
    Tfidf,
    TfidfEmbedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    /// count / corpus-wide count
    #[default]
    CorpusFrequency,
    /// count · ln(documents / documents containing the token)
    Classical,
}

/// Sparse token counts for one description.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenVector {
    pub doc_id: String,
    pub counts: BTreeMap<String, u32>,
}

impl TokenVector {
    pub fn from_text(doc_id: impl Into<String>, text: &str) -> Self {
        Self::from_tokens(doc_id, tokenize_and_stem(text))
    }

    pub fn from_tokens(doc_id: impl Into<String>, tokens: impl IntoIterator<Item = String>) -> Self {
        let mut counts = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_insert(0) += 1;
        }
        TokenVector { doc_id: doc_id.into(), counts }
    }
}

/// Token list plus per-token statistics over every document.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    corpus_frequency: Vec<u64>,
    document_frequency: Vec<u64>,
    documents: usize,
}

impl Vocabulary {
    /// Tokens are ordered lexicographically.
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a TokenVector>) -> Self {
        let mut stats: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
        let mut documents = 0;
        for doc in docs {
            documents += 1;
            for (tok, &n) in &doc.counts {
                let s = stats.entry(tok.as_str()).or_default();
                s.0 += u64::from(n);
                s.1 += 1;
            }
        }
        let tokens: Vec<String> = stats.keys().map(|t| t.to_string()).collect();
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary {
            corpus_frequency: stats.values().map(|s| s.0).collect(),
            document_frequency: stats.values().map(|s| s.1).collect(),
            tokens,
            index,
            documents,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn corpus_frequency(&self, j: usize) -> u64 {
        self.corpus_frequency[j]
    }

    pub fn document_count(&self) -> usize {
        self.documents
    }

    fn weight(&self, j: usize, count: u32, weighting: Weighting) -> f64 {
        match weighting {
            Weighting::CorpusFrequency => f64::from(count) / self.corpus_frequency[j] as f64,
            Weighting::Classical => {
                f64::from(count) * (self.documents as f64 / self.document_frequency[j] as f64).ln()
            }
        }
    }

    /// Non-zero `(index, weight)` pairs of a document.
    fn weights(&self, doc: &TokenVector, weighting: Weighting) -> Result<Vec<(usize, f64)>, MatchError> {
        doc.counts
            .iter()
            .map(|(tok, &n)| {
                let j = self.index_of(tok).ok_or_else(|| MatchError::UnknownToken {
                    doc: doc.doc_id.clone(),
                    token: tok.clone(),
                })?;
                Ok((j, self.weight(j, n, weighting)))
            })
            .collect()
    }
}

/// Dense term-weight vector of length `vocab.len()`.
pub fn tfidf_vector(doc: &TokenVector, vocab: &Vocabulary) -> Result<Vec<f64>, MatchError> {
    weighted_vector(doc, vocab, Weighting::CorpusFrequency)
}

pub fn weighted_vector(doc: &TokenVector, vocab: &Vocabulary, weighting: Weighting) -> Result<Vec<f64>, MatchError> {
    let mut v = vec![0.0; vocab.len()];
    for (j, w) in vocab.weights(doc, weighting)? {
        v[j] = w;
    }
    Ok(v)
}

/// Term-weighted sum of word vectors; tokens without an embedding contribute
/// nothing.
pub fn embed_sentence(doc: &TokenVector, vocab: &Vocabulary, table: &EmbeddingTable) -> Result<Vec<f64>, MatchError> {
    embed_weighted(doc, vocab, table, Weighting::CorpusFrequency)
}

pub fn embed_weighted(
    doc: &TokenVector,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    weighting: Weighting,
) -> Result<Vec<f64>, MatchError> {
    let mut out = vec![0.0; table.dimension()];
    for (j, w) in vocab.weights(doc, weighting)? {
        if let Some(vec) = table.get(&vocab.tokens[j]) {
            for (o, x) in out.iter_mut().zip(vec) {
                *o += w * x;
            }
        }
    }
    Ok(out)
}

/// Cosine similarity; zero when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MatchError> {
    if a.len() != b.len() {
        return Err(MatchError::LengthMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub source_ids: Vec<String>,
    pub target_ids: Vec<String>,
    /// `scores[i][j]` compares source `i` with target `j`.
    pub scores: Vec<Vec<f64>>,
}

impl SimilarityMatrix {
    pub fn row(&self, source_api: &str) -> Result<&[f64], MatchError> {
        let i = self
            .source_ids
            .iter()
            .position(|s| s == source_api)
            .ok_or_else(|| MatchError::UnknownSource(source_api.to_string()))?;
        Ok(&self.scores[i])
    }

    /// Best `top_k` targets for `source_api`, descending by score with ties
    /// broken by target name.
    pub fn rank_targets(&self, source_api: &str, top_k: usize) -> Result<Vec<(String, f64)>, MatchError> {
        let row = self.row(source_api)?;
        let mut order: Vec<usize> = (0..self.target_ids.len()).collect();
        order.sort_by(|&a, &b| {
            row[b].total_cmp(&row[a]).then_with(|| self.target_ids[a].cmp(&self.target_ids[b]))
        });
        Ok(order
            .into_iter()
            .take(top_k)
            .map(|j| (self.target_ids[j].clone(), row[j]))
            .collect())
    }

    /// 1-based position of `target` in the full ranking of `source_api`.
    pub fn rank_of(&self, source_api: &str, target: &str) -> Result<Option<usize>, MatchError> {
        Ok(self
            .rank_targets(source_api, usize::MAX)?
            .iter()
            .position(|(t, _)| t == target)
            .map(|p| p + 1))
    }
}

/// Vocabulary and per-API representations for one source/target pair.
#[derive(Debug, Clone)]
pub struct RepresentationSpace {
    pub vocab: Vocabulary,
    pub source: Vec<(String, Vec<f64>)>,
    pub target: Vec<(String, Vec<f64>)>,
}

impl RepresentationSpace {
    pub fn build(
        source: &DocCorpus,
        target: &DocCorpus,
        mode: MatchMode,
        table: Option<&EmbeddingTable>,
        weighting: Weighting,
    ) -> Result<Self, MatchError> {
        if source.entries.is_empty() || target.entries.is_empty() {
            return Err(MatchError::EmptyCorpus);
        }
        if mode == MatchMode::TfidfEmbedding && table.is_none() {
            return Err(MatchError::MissingEmbeddings);
        }
        let docs = |c: &DocCorpus| -> Vec<TokenVector> {
            c.entries
                .iter()
                .map(|e| TokenVector::from_text(e.qualified_name.clone(), &e.description))
                .collect()
        };
        let src_docs = docs(source);
        let tgt_docs = docs(target);
        let vocab = Vocabulary::build(src_docs.iter().chain(&tgt_docs));
        let represent = |d: &TokenVector| -> Result<(String, Vec<f64>), MatchError> {
            let v = match (mode, table) {
                (MatchMode::TfidfEmbedding, Some(t)) => embed_weighted(d, &vocab, t, weighting)?,
                _ => weighted_vector(d, &vocab, weighting)?,
            };
            Ok((d.doc_id.clone(), v))
        };
        let source = src_docs.iter().map(represent).collect::<Result<Vec<_>, _>>()?;
        let target = tgt_docs.iter().map(represent).collect::<Result<Vec<_>, _>>()?;
        Ok(RepresentationSpace { vocab, source, target })
    }

    pub fn similarity(&self) -> SimilarityMatrix {
        let scores = self
            .source
            .iter()
            .map(|(_, s)| {
                self.target
                    .iter()
                    .map(|(_, t)| cosine(s, t).expect("representations share one space"))
                    .collect()
            })
            .collect();
        SimilarityMatrix {
            source_ids: self.source.iter().map(|(id, _)| id.clone()).collect(),
            target_ids: self.target.iter().map(|(id, _)| id.clone()).collect(),
            scores,
        }
    }
}

pub fn build_similarity(
    source: &DocCorpus,
    target: &DocCorpus,
    mode: MatchMode,
    table: Option<&EmbeddingTable>,
) -> Result<SimilarityMatrix, MatchError> {
    build_similarity_weighted(source, target, mode, table, Weighting::CorpusFrequency)
}

pub fn build_similarity_weighted(
    source: &DocCorpus,
    target: &DocCorpus,
    mode: MatchMode,
    table: Option<&EmbeddingTable>,
    weighting: Weighting,
) -> Result<SimilarityMatrix, MatchError> {
    Ok(RepresentationSpace::build(source, target, mode, table, weighting)?.similarity())
}
