//! Immutable snapshot of a corpus with all of its indexes.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::info;

use crate::config::{EmbedderKind, EngineConfig};
use crate::corpus::{
    assemble_qa_context, assemble_retrieval_context, load_corpus, QaContext, ToponymRecord, DEFAULT_MAX_CONTEXT,
};
use crate::geo::{GeoPoint, SpatialIndex};
use crate::hybrid::{Indexes, Method, Notice, ScoredHit, SearchOutcome, SearchQuery};
use crate::lexical::InvertedIndex;
use crate::reader::{extract, ReaderAnswer};
use crate::semantic::{
    encode_passages, load_vectors, read_tvec, save_vectors, EmbeddingProvider, HashingEncoder, LookupProvider,
    VectorIndex,
};
use crate::{Error, Result};

pub const INDEX_FILE: &str = "index.json";
pub const VECTORS_FILE: &str = "vectors.tvec";

const ENCODE_BATCH: usize = 32;

/// Written next to the corpus by the `index` step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexManifest {
    pub embedder: EmbedderKind,
    pub dim: usize,
    pub vectors_file: String,
    /// TVEC of query embeddings keyed by query text (file embedder only).
    pub query_vectors: Option<PathBuf>,
    pub documents: usize,
}

/// Encodes (hashing) or imports (file) document vectors for the corpus in
/// `dir` and records the choice in `index.json`.
pub fn build_index(dir: &Path, cfg: &EngineConfig) -> Result<IndexManifest> {
    let (records, _) = load_corpus(dir)?;
    let out = dir.join(VECTORS_FILE);
    let (dim, rows) = match cfg.embedder {
        EmbedderKind::Hashing => {
            let enc = HashingEncoder::new(cfg.dim);
            let contexts: Vec<String> = records.iter().map(assemble_retrieval_context).collect();
            let refs: Vec<&str> = contexts.iter().map(String::as_str).collect();
            let embs = encode_passages(&enc, &refs, ENCODE_BATCH)?;
            let rows = records
                .iter()
                .zip(embs)
                .map(|(r, e)| (r.id.clone(), e.values))
                .collect();
            (cfg.dim, rows)
        }
        EmbedderKind::File => {
            let src = cfg
                .vectors
                .as_deref()
                .ok_or_else(|| Error::invalid("--vectors is required for the file embedder"))?;
            let f = File::open(src).map_err(|e| Error::io(src, e))?;
            let tvec = read_tvec(BufReader::new(f))?;
            check_coverage(&records, tvec.rows.iter().map(|(id, _)| id.as_str()))?;
            (tvec.dim, tvec.rows)
        }
    };
    save_vectors(&out, dim, &rows)?;
    let manifest = IndexManifest {
        embedder: cfg.embedder,
        dim,
        vectors_file: VECTORS_FILE.into(),
        query_vectors: cfg.query_vectors.clone(),
        documents: rows.len(),
    };
    let path = dir.join(INDEX_FILE);
    std::fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    info!(documents = manifest.documents, dim, "index written");
    Ok(manifest)
}

fn check_coverage<'a>(records: &[ToponymRecord], ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let have: HashSet<&str> = ids.collect();
    let missing: Vec<&str> = records
        .iter()
        .map(|r| r.id.as_str())
        .filter(|id| !have.contains(id))
        .collect();
    if let Some(first) = missing.first() {
        return Err(Error::Data(format!(
            "{} corpus documents have no vector (first: {first:?})",
            missing.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchDefaults {
    pub radius_m: f64,
    pub alpha: f64,
    pub k: usize,
}

impl Default for SearchDefaults {
    fn default() -> Self {
        SearchDefaults {
            radius_m: crate::hybrid::DEFAULT_RADIUS_M,
            alpha: crate::hybrid::DEFAULT_ALPHA,
            k: crate::hybrid::DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub answer: ReaderAnswer,
    pub doc_id: Option<String>,
    pub context: String,
    pub hit: Option<ScoredHit>,
    pub notices: Vec<Notice>,
}

pub struct Engine {
    records: Vec<ToponymRecord>,
    by_id: HashMap<String, usize>,
    retrieval_contexts: Vec<String>,
    spatial: SpatialIndex,
    vectors: VectorIndex,
    lexical: InvertedIndex,
    provider: Box<dyn EmbeddingProvider>,
    defaults: SearchDefaults,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("records", &self.records.len())
            .field("provider", &self.provider.name())
            .field("dim", &self.vectors.dim())
            .finish()
    }
}

impl Engine {
    /// Builds every index in memory, encoding documents with `provider`.
    pub fn from_records(records: Vec<ToponymRecord>, provider: Box<dyn EmbeddingProvider>) -> Result<Self> {
        let contexts: Vec<String> = records.iter().map(assemble_retrieval_context).collect();
        let refs: Vec<&str> = contexts.iter().map(String::as_str).collect();
        let embs = encode_passages(provider.as_ref(), &refs, ENCODE_BATCH)?;
        let ids = records.iter().map(|r| r.id.clone()).collect();
        let vectors = VectorIndex::from_embeddings(ids, embs, provider.dim())?;
        Self::with_vectors(records, vectors, provider)
    }

    /// Uses precomputed document vectors; every record must have one.
    pub fn with_vectors(
        records: Vec<ToponymRecord>,
        vectors: VectorIndex,
        provider: Box<dyn EmbeddingProvider>,
    ) -> Result<Self> {
        if vectors.dim() != provider.dim() {
            return Err(Error::Data(format!(
                "document vectors have dim {} but the {} provider produces {}",
                vectors.dim(),
                provider.name(),
                provider.dim()
            )));
        }
        check_coverage(&records, vectors.ids().iter().map(String::as_str))?;
        if vectors.len() != records.len() {
            return Err(Error::Data(format!(
                "{} vectors for {} documents; the vector file has ids outside the corpus",
                vectors.len(),
                records.len()
            )));
        }
        let mut by_id = HashMap::with_capacity(records.len());
        for (i, r) in records.iter().enumerate() {
            if by_id.insert(r.id.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate record id {:?}", r.id)));
            }
        }
        let retrieval_contexts: Vec<String> = records.iter().map(assemble_retrieval_context).collect();
        let spatial = SpatialIndex::build(records.iter().filter_map(|r| r.point().map(|p| (r.id.clone(), p))));
        let lexical = InvertedIndex::build(records.iter().map(|r| r.id.clone()).zip(retrieval_contexts.iter()));
        Ok(Engine {
            records,
            by_id,
            retrieval_contexts,
            spatial,
            vectors,
            lexical,
            provider,
            defaults: SearchDefaults::default(),
        })
    }

    /// Opens a corpus directory. Vectors written by [`build_index`] are used
    /// when present; otherwise documents are hashed at load time.
    pub fn open(dir: &Path, cfg: &EngineConfig) -> Result<Self> {
        let (records, _) = load_corpus(dir)?;
        let index_path = dir.join(INDEX_FILE);
        let engine = if index_path.exists() {
            let text = std::fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
            let manifest: IndexManifest =
                serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", index_path.display())))?;
            let (vectors, _) = load_vectors(&dir.join(&manifest.vectors_file))?;
            let provider: Box<dyn EmbeddingProvider> = match manifest.embedder {
                EmbedderKind::Hashing => Box::new(HashingEncoder::new(manifest.dim)),
                EmbedderKind::File => {
                    let path = cfg
                        .query_vectors
                        .clone()
                        .or(manifest.query_vectors)
                        .ok_or_else(|| Error::invalid("the file embedder needs query vectors to answer queries"))?;
                    let f = File::open(&path).map_err(|e| Error::io(&path, e))?;
                    Box::new(LookupProvider::new("file", read_tvec(BufReader::new(f))?))
                }
            };
            Self::with_vectors(records, vectors, provider)?
        } else {
            Self::from_records(records, Box::new(HashingEncoder::new(cfg.dim)))?
        };
        Ok(engine.with_defaults(SearchDefaults {
            radius_m: cfg.radius_m,
            alpha: cfg.alpha,
            k: cfg.k,
        }))
    }

    pub fn with_defaults(mut self, defaults: SearchDefaults) -> Self {
        self.defaults = defaults;
        self
    }

    pub fn defaults(&self) -> SearchDefaults {
        self.defaults
    }

    pub fn indexes(&self) -> Indexes<'_> {
        Indexes {
            spatial: &self.spatial,
            vectors: &self.vectors,
            lexical: &self.lexical,
            provider: self.provider.as_ref(),
        }
    }

    pub fn records(&self) -> &[ToponymRecord] {
        &self.records
    }

    pub fn record(&self, id: &str) -> Option<&ToponymRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn retrieval_context(&self, id: &str) -> Option<&str> {
        self.by_id.get(id).map(|&i| self.retrieval_contexts[i].as_str())
    }

    pub fn qa_context(&self, id: &str) -> Option<QaContext> {
        self.record(id).map(|r| assemble_qa_context(r, DEFAULT_MAX_CONTEXT))
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn with_coordinates(&self) -> usize {
        self.spatial.len()
    }

    pub fn search(&self, query: &SearchQuery) -> Result<SearchOutcome> {
        self.indexes().search(query)
    }

    /// Retrieves the top hybrid hit for the question and reads the answer
    /// from that document's QA context.
    pub fn answer(&self, question: &str, point: Option<GeoPoint>, radius_m: f64, alpha: f64) -> Result<Answer> {
        let query = SearchQuery {
            text: question.to_string(),
            point,
            radius_m,
            alpha,
            k: 1,
            method: Method::Hybrid,
        };
        let outcome = self.search(&query)?;
        let Some(hit) = outcome.hits.into_iter().next() else {
            return Ok(Answer {
                answer: extract(question, ""),
                doc_id: None,
                context: String::new(),
                hit: None,
                notices: outcome.notices,
            });
        };
        let context = self.qa_context(&hit.doc_id).expect("hit ids come from the corpus").text;
        Ok(Answer {
            answer: extract(question, &context),
            doc_id: Some(hit.doc_id.clone()),
            context,
            hit: Some(hit),
            notices: outcome.notices,
        })
    }
}
