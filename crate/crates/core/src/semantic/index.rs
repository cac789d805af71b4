use std::collections::HashMap;

use super::Embedding;
use crate::{Error, Result};

/// Inner product accumulated in f64.
pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

/// Flat (exact) inner-product index over unit-norm rows.
#[derive(Debug, Clone)]
pub struct VectorIndex {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    rows: HashMap<String, usize>,
}

/// Rows whose norm is off by more than this are renormalized on insert.
const NORM_SLACK: f64 = 1e-3;

impl VectorIndex {
    /// Builds the index, renormalizing off-unit rows. Returns the ids of
    /// rows that had to be renormalized.
    pub fn from_rows(dim: usize, rows: Vec<(String, Vec<f32>)>) -> Result<(Self, Vec<String>)> {
        if dim == 0 {
            return Err(Error::invalid("vector dim must be positive"));
        }
        let mut index = VectorIndex {
            dim,
            ids: Vec::with_capacity(rows.len()),
            data: Vec::with_capacity(rows.len() * dim),
            rows: HashMap::with_capacity(rows.len()),
        };
        let mut renormalized = Vec::new();
        for (id, mut values) in rows {
            if values.len() != dim {
                return Err(Error::invalid(format!(
                    "vector {id:?} has dim {}, expected {dim}",
                    values.len()
                )));
            }
            let norm = dot(&values, &values).sqrt();
            if (norm - 1.0).abs() > NORM_SLACK {
                let as_f64: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
                values = Embedding::normalized(&as_f64)
                    .ok_or_else(|| Error::Data(format!("vector {id:?} is all zeros")))?
                    .values;
                renormalized.push(id.clone());
            }
            if index.rows.insert(id.clone(), index.ids.len()).is_some() {
                return Err(Error::Data(format!("duplicate vector id {id:?}")));
            }
            index.ids.push(id);
            index.data.extend_from_slice(&values);
        }
        Ok((index, renormalized))
    }

    pub fn from_embeddings(ids: Vec<String>, embeddings: Vec<Embedding>, dim: usize) -> Result<Self> {
        let rows = ids.into_iter().zip(embeddings.into_iter().map(|e| e.values)).collect();
        Ok(Self::from_rows(dim, rows)?.0)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vector(&self, id: &str) -> Option<&[f32]> {
        self.rows.get(id).map(|&i| self.row(i))
    }

    fn check_dim(&self, query: &Embedding) -> Result<()> {
        if query.dim() != self.dim {
            return Err(Error::invalid(format!(
                "query dim {} does not match index dim {}",
                query.dim(),
                self.dim
            )));
        }
        Ok(())
    }

    /// Exact top-k by descending inner product, ties by doc id.
    pub fn top_k(&self, query: &Embedding, k: usize) -> Result<Vec<(String, f64)>> {
        self.check_dim(query)?;
        if k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        let mut scored: Vec<(usize, f64)> = (0..self.len()).map(|i| (i, dot(&query.values, self.row(i)))).collect();
        let cmp =
            |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then_with(|| self.ids[a.0].cmp(&self.ids[b.0]));
        if k < scored.len() {
            scored.select_nth_unstable_by(k - 1, cmp);
            scored.truncate(k);
        }
        scored.sort_unstable_by(cmp);
        Ok(scored.into_iter().map(|(i, s)| (self.ids[i].clone(), s)).collect())
    }

    /// Inner products for exactly `ids`, in the given order.
    pub fn score_subset<S: AsRef<str>>(&self, query: &Embedding, ids: &[S]) -> Result<Vec<f64>> {
        self.check_dim(query)?;
        ids.iter()
            .map(|id| {
                let id = id.as_ref();
                self.vector(id)
                    .map(|row| dot(&query.values, row))
                    .ok_or_else(|| Error::invalid(format!("unknown doc id {id:?}")))
            })
            .collect()
    }
}
