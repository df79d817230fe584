//! Word-embedding tables in the whitespace-separated text format used by
//! GloVe: one word per line followed by its components.

use std::collections::BTreeMap;
use std::path::Path;

use super::stem::stem;

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("cannot read embeddings {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("embeddings line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("embedding table is empty")]
    Empty,
}

/// Vectors keyed by stemmed word. Raw words that share a stem are averaged
/// so lookups can use the same tokens as the description vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dimension: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn from_text(text: &str) -> Result<Self, EmbeddingError> {
        let mut dimension = None;
        let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let values = fields
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| EmbeddingError::Format { line: line_no, message: e.to_string() })?;
            if values.is_empty() {
                return Err(EmbeddingError::Format { line: line_no, message: format!("`{word}` has no components") });
            }
            let dim = *dimension.get_or_insert(values.len());
            if values.len() != dim {
                return Err(EmbeddingError::Format {
                    line: line_no,
                    message: format!("expected {dim} components, found {}", values.len()),
                });
            }
            let key = stem(&word.to_ascii_lowercase());
            let slot = sums.entry(key).or_insert_with(|| (vec![0.0; dim], 0));
            for (s, v) in slot.0.iter_mut().zip(&values) {
                *s += v;
            }
            slot.1 += 1;
        }
        let dimension = dimension.ok_or(EmbeddingError::Empty)?;
        let vectors = sums
            .into_iter()
            .map(|(k, (sum, n))| (k, sum.into_iter().map(|s| s / n as f64).collect()))
            .collect();
        Ok(EmbeddingTable { dimension, vectors })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| EmbeddingError::Io { path: path.display().to_string(), source })?;
        Self::from_text(&text)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Looks up a stemmed token.
    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.vectors.get(token).map(Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_stem_is_averaged() {
        let t = EmbeddingTable::from_text("layer 1 0\nlayers 0 1\nconv 2 2\n").unwrap();
        assert_eq!(t.dimension(), 2);
        assert_eq!(t.len(), 2);
        assert_eq!(t.get("layer"), Some(&[0.5, 0.5][..]));
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = EmbeddingTable::from_text("a 1 2\nb 1\n").unwrap_err();
        assert!(matches!(err, EmbeddingError::Format { line: 2, .. }), "{err}");
        assert!(matches!(EmbeddingTable::from_text("a x\n"), Err(EmbeddingError::Format { line: 1, .. })));
        assert!(matches!(EmbeddingTable::from_text("\n\n"), Err(EmbeddingError::Empty)));
    }
}
