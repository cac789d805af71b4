//! Dense embeddings: the provider contract, a deterministic hashing encoder
//! for offline use, the TVEC vector file and an exact inner-product index.

mod hashing;
mod index;
mod tvec;

use std::collections::HashMap;

use rayon::prelude::*;

pub use hashing::{fnv1a64, HashingEncoder, DEFAULT_HASH_DIM};
pub use index::{dot, VectorIndex};
pub use tvec::{load_vectors, read_tvec, save_vectors, write_tvec, TvecFile, TVEC_MAGIC, TVEC_VERSION};

use crate::{Error, Result};

/// Unit-length (after normalization) f32 vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub values: Vec<f32>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        self.values
            .iter()
            .map(|&v| f64::from(v) * f64::from(v))
            .sum::<f64>()
            .sqrt()
    }

    /// Scales to unit L2 norm; `None` for the zero vector.
    pub fn normalized(values: &[f64]) -> Option<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return None;
        }
        Some(Embedding {
            values: values.iter().map(|v| (v / norm) as f32).collect(),
        })
    }
}

/// Whether text is being encoded as a query or as a stored document.
/// Symmetric providers ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextRole {
    Query,
    Passage,
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    /// Must be deterministic: the same text and role give the same vector.
    fn encode(&self, text: &str, role: TextRole) -> Result<Embedding>;

    /// Prefixes prepended to queries/passages by asymmetric encoders.
    fn prefix_scheme(&self) -> Option<(&str, &str)> {
        None
    }
}

/// Encodes passages in fixed-size batches; batches run in parallel and the
/// output order always matches `texts`. Batch size never changes results.
pub fn encode_passages(provider: &dyn EmbeddingProvider, texts: &[&str], batch_size: usize) -> Result<Vec<Embedding>> {
    let batch_size = batch_size.max(1);
    let batches: Vec<Vec<Embedding>> = texts
        .par_chunks(batch_size)
        .map(|chunk| {
            chunk
                .iter()
                .map(|t| provider.encode(t, TextRole::Passage))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(batches.into_iter().flatten().collect())
}

/// Provider backed by precomputed vectors keyed by exact text, e.g. query
/// embeddings exported alongside a TVEC document file.
#[derive(Debug, Clone)]
pub struct LookupProvider {
    name: String,
    dim: usize,
    table: HashMap<String, Embedding>,
}

impl LookupProvider {
    pub fn new(name: impl Into<String>, file: TvecFile) -> Self {
        let dim = file.dim;
        let table = file
            .rows
            .into_iter()
            .map(|(id, values)| (id, Embedding { values }))
            .collect();
        LookupProvider {
            name: name.into(),
            dim,
            table,
        }
    }
}

impl EmbeddingProvider for LookupProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, text: &str, _role: TextRole) -> Result<Embedding> {
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("no precomputed vector for text {text:?}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_size_does_not_change_output() {
        let enc = HashingEncoder::new(64);
        let texts = ["село Рантамак", "река Мёша", "озеро Кабан", "гора", "луг"];
        let a = encode_passages(&enc, &texts, 1).unwrap();
        let b = encode_passages(&enc, &texts, 32).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lookup_provider_misses_are_errors() {
        let file = TvecFile {
            dim: 2,
            rows: vec![("q".into(), vec![1.0, 0.0])],
        };
        let p = LookupProvider::new("file", file);
        assert_eq!(p.encode("q", TextRole::Query).unwrap().values, vec![1.0, 0.0]);
        assert!(p.encode("other", TextRole::Query).is_err());
    }
}
