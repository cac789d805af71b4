//! BM25 over retrieval contexts. No stemming or stopwords.

use std::collections::HashMap;

pub const DEFAULT_K1: f64 = 1.5;
pub const DEFAULT_B: f64 = 0.75;

/// Lowercases and splits on anything that is not a letter or digit.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone)]
pub struct InvertedIndex {
    /// term -> (doc ordinal, term frequency), ascending by doc ordinal
    postings: HashMap<String, Vec<(u32, u32)>>,
    doc_ids: Vec<String>,
    doc_len: Vec<u32>,
    avg_len: f64,
    k1: f64,
    b: f64,
}

impl InvertedIndex {
    pub fn build<I, S, T>(docs: I) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        Self::with_params(docs, DEFAULT_K1, DEFAULT_B)
    }

    pub fn with_params<I, S, T>(docs: I, k1: f64, b: f64) -> Self
    where
        I: IntoIterator<Item = (S, T)>,
        S: Into<String>,
        T: AsRef<str>,
    {
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_ids = Vec::new();
        let mut doc_len = Vec::new();
        for (ordinal, (id, text)) in docs.into_iter().enumerate() {
            let tokens = tokenize(text.as_ref());
            doc_len.push(tokens.len() as u32);
            doc_ids.push(id.into());
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push((ordinal as u32, count));
            }
        }
        let avg_len = if doc_len.is_empty() {
            0.0
        } else {
            doc_len.iter().map(|&l| f64::from(l)).sum::<f64>() / doc_len.len() as f64
        };
        InvertedIndex {
            postings,
            doc_ids,
            doc_len,
            avg_len,
            k1,
            b,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_len
    }

    /// ln((N - df + 0.5) / (df + 0.5) + 1)
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.postings.get(term).map_or(0, Vec::len) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    /// Documents sharing at least one query term, by descending BM25 score,
    /// ties by doc id.
    pub fn top_k(&self, query: &str, k: usize) -> Vec<(String, f64)> {
        let mut scores: HashMap<u32, f64> = HashMap::new();
        let mut terms = tokenize(query);
        terms.sort();
        terms.dedup();
        for term in &terms {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for &(doc, tf) in list {
                let tf = f64::from(tf);
                let norm = 1.0 - self.b + self.b * f64::from(self.doc_len[doc as usize]) / self.avg_len;
                *scores.entry(doc).or_default() += idf * tf * (self.k1 + 1.0) / (tf + self.k1 * norm);
            }
        }
        let mut ranked: Vec<(String, f64)> = scores
            .into_iter()
            .map(|(d, s)| (self.doc_ids[d as usize].clone(), s))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.truncate(k);
        ranked
    }
}
