//! Engine configuration, read from TOML. Command-line flags override it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::hybrid::{DEFAULT_ALPHA, DEFAULT_K, DEFAULT_RADIUS_M};
use crate::semantic::DEFAULT_HASH_DIM;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    #[default]
    Hashing,
    File,
}

impl std::str::FromStr for EmbedderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hashing" => Ok(EmbedderKind::Hashing),
            "file" => Ok(EmbedderKind::File),
            other => Err(Error::invalid(format!("unknown embedder {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub corpus: Option<PathBuf>,
    pub embedder: EmbedderKind,
    /// Document vectors (TVEC) for the `file` embedder.
    pub vectors: Option<PathBuf>,
    /// Query vectors (TVEC keyed by query text) for the `file` embedder.
    pub query_vectors: Option<PathBuf>,
    pub dim: usize,
    pub radius_m: f64,
    pub alpha: f64,
    pub k: usize,
    pub port: u16,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            corpus: None,
            embedder: EmbedderKind::Hashing,
            vectors: None,
            query_vectors: None,
            dim: DEFAULT_HASH_DIM,
            radius_m: DEFAULT_RADIUS_M,
            alpha: DEFAULT_ALPHA,
            k: DEFAULT_K,
            port: 8080,
            seed: 42,
        }
    }
}

impl EngineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: EngineConfig = toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(self.radius_m.is_finite() && self.radius_m > 0.0) {
            return Err(Error::invalid(format!(
                "radius_m must be positive, got {}",
                self.radius_m
            )));
        }
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::invalid("dim must be positive"));
        }
        if self.embedder == EmbedderKind::File && self.vectors.is_none() {
            return Err(Error::invalid("the file embedder needs a vectors path"));
        }
        Ok(())
    }

    /// Checks that every configured path exists.
    pub fn check_paths(&self) -> Result<()> {
        for p in [&self.corpus, &self.vectors, &self.query_vectors].into_iter().flatten() {
            if !p.exists() {
                return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
        }
        Ok(())
    }
}
