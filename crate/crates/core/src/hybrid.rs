//! Fusion of spatial and semantic relevance, plus the three single-signal
//! baselines and the α grid search.
//!
//! For a query with text `q`, point `c`, radius `R` and weight `α`, the
//! hybrid ranking is computed over the geofiltered candidate set only:
//!
//! ```text
//! candidates  = { i : haversine(c, i) <= R }
//! geo_score   = exp(-d_i / R)
//! sem_norm    = (sem_i - min) / (max - min)      (all 1 when max - min < 1e-9)
//! geo_norm    = geo_score_i / max geo_score
//! combined    = α · sem_norm + (1 - α) · geo_norm
//! ```

use serde::{Deserialize, Serialize};

use crate::eval::recall_at_k;
use crate::geo::{GeoPoint, SpatialIndex};
use crate::lexical::InvertedIndex;
use crate::semantic::{Embedding, EmbeddingProvider, TextRole, VectorIndex};
use crate::{Error, Result};

pub const DEFAULT_RADIUS_M: f64 = 50_000.0;
pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_K: usize = 5;
pub const DEFAULT_ALPHA_GRID: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

/// Spread below which min-max normalization is considered degenerate.
const DEGENERATE_SPREAD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hybrid,
    #[serde(rename = "semantic")]
    SemanticOnly,
    #[serde(rename = "spatial")]
    SpatialOnly,
    Bm25,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bm25, Method::SpatialOnly, Method::SemanticOnly, Method::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Hybrid => "hybrid",
            Method::SemanticOnly => "semantic",
            Method::SpatialOnly => "spatial",
            Method::Bm25 => "bm25",
        }
    }

    pub fn needs_point(self) -> bool {
        matches!(self, Method::Hybrid | Method::SpatialOnly)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hybrid" => Ok(Method::Hybrid),
            "semantic" | "semantic-only" | "semanticonly" => Ok(Method::SemanticOnly),
            "spatial" | "spatial-only" | "spatialonly" => Ok(Method::SpatialOnly),
            "bm25" => Ok(Method::Bm25),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchQuery {
    pub text: String,
    pub point: Option<GeoPoint>,
    pub radius_m: f64,
    pub alpha: f64,
    pub k: usize,
    pub method: Method,
}

impl SearchQuery {
    pub fn new(text: impl Into<String>) -> Self {
        SearchQuery {
            text: text.into(),
            point: None,
            radius_m: DEFAULT_RADIUS_M,
            alpha: DEFAULT_ALPHA,
            k: DEFAULT_K,
            method: Method::Hybrid,
        }
    }

    pub fn at(mut self, point: GeoPoint) -> Self {
        self.point = Some(point);
        self
    }

    pub fn method(mut self, method: Method) -> Self {
        self.method = method;
        self
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
        if self.method != Method::SpatialOnly && self.text.trim().is_empty() {
            return Err(Error::invalid("query text must not be empty"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredHit {
    pub doc_id: String,
    pub rank: usize,
    pub sem_score: Option<f64>,
    pub distance_m: Option<f64>,
    pub geo_score: Option<f64>,
    pub sem_norm: Option<f64>,
    pub geo_norm: Option<f64>,
    pub combined: f64,
}

impl ScoredHit {
    fn scored(doc_id: String, combined: f64) -> Self {
        ScoredHit {
            doc_id,
            rank: 0,
            sem_score: None,
            distance_m: None,
            geo_score: None,
            sem_norm: None,
            geo_norm: None,
            combined,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoticeCode {
    /// Hybrid query without a point was answered semantically.
    NoPoint,
    /// No document passed the geofilter.
    NoCandidates,
    /// The search box was cut at ±180° longitude.
    AntimeridianClamped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notice {
    pub code: NoticeCode,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SearchOutcome {
    pub hits: Vec<ScoredHit>,
    pub notices: Vec<Notice>,
}

impl SearchOutcome {
    pub fn doc_ids(&self) -> Vec<&str> {
        self.hits.iter().map(|h| h.doc_id.as_str()).collect()
    }
}

pub fn geo_score(distance_m: f64, radius_m: f64) -> Result<f64> {
    if !(radius_m.is_finite() && radius_m > 0.0) {
        return Err(Error::invalid(format!("radius_m must be positive, got {radius_m}")));
    }
    if !(0.0..=radius_m).contains(&distance_m) {
        return Err(Error::invalid(format!("distance {distance_m} outside [0, {radius_m}]")));
    }
    Ok((-distance_m / radius_m).exp())
}

pub fn min_max_normalize(scores: &[f64]) -> Result<Vec<f64>> {
    let (min, max) = min_max(scores)?;
    let spread = max - min;
    if spread < DEGENERATE_SPREAD {
        return Ok(vec![1.0; scores.len()]);
    }
    Ok(scores.iter().map(|s| (s - min) / spread).collect())
}

pub fn max_normalize(scores: &[f64]) -> Result<Vec<f64>> {
    let (min, max) = min_max(scores)?;
    if min <= 0.0 {
        return Err(Error::invalid("max_normalize needs strictly positive scores"));
    }
    Ok(scores.iter().map(|s| s / max).collect())
}

fn min_max(scores: &[f64]) -> Result<(f64, f64)> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot normalize an empty score list"));
    }
    Ok(scores.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
        (lo.min(s), hi.max(s))
    }))
}

pub fn combine(sem_norm: f64, geo_norm: f64, alpha: f64) -> Result<f64> {
    for (name, v) in [("sem_norm", sem_norm), ("geo_norm", geo_norm), ("alpha", alpha)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} must be in [0, 1], got {v}")));
        }
    }
    Ok(alpha * sem_norm + (1.0 - alpha) * geo_norm)
}

/// Borrowed view of everything a search needs.
#[derive(Clone, Copy)]
pub struct Indexes<'a> {
    pub spatial: &'a SpatialIndex,
    pub vectors: &'a VectorIndex,
    pub lexical: &'a InvertedIndex,
    pub provider: &'a dyn EmbeddingProvider,
}

impl<'a> Indexes<'a> {
    pub fn search(&self, query: &SearchQuery) -> Result<SearchOutcome> {
        query.validate()?;
        let embedding = match query.method {
            Method::Hybrid | Method::SemanticOnly => Some(self.provider.encode(&query.text, TextRole::Query)?),
            _ => None,
        };
        self.search_encoded(query, embedding.as_ref())
    }

    /// Same as [`Indexes::search`] with the query embedding supplied by the
    /// caller (must be present for hybrid and semantic queries).
    pub fn search_encoded(&self, query: &SearchQuery, embedding: Option<&Embedding>) -> Result<SearchOutcome> {
        query.validate()?;
        let need_embedding = || embedding.ok_or_else(|| Error::invalid("query embedding missing"));
        let mut outcome = match (query.method, query.point) {
            (Method::Hybrid, Some(point)) => {
                self.hybrid(need_embedding()?, point, query.radius_m, query.alpha, query.k)?
            }
            (Method::Hybrid, None) => {
                let mut out = self.semantic(need_embedding()?, query.k)?;
                out.notices.push(Notice {
                    code: NoticeCode::NoPoint,
                    message: "no query point given; ranked by semantic similarity only".into(),
                });
                out
            }
            (Method::SemanticOnly, _) => self.semantic(need_embedding()?, query.k)?,
            (Method::SpatialOnly, Some(point)) => self.spatial(point, query.radius_m, query.k)?,
            (Method::SpatialOnly, None) => return Err(Error::invalid("spatial search requires a query point")),
            (Method::Bm25, _) => SearchOutcome {
                hits: self
                    .lexical
                    .top_k(&query.text, query.k)
                    .into_iter()
                    .map(|(id, s)| ScoredHit::scored(id, s))
                    .collect(),
                notices: Vec::new(),
            },
        };
        for (i, hit) in outcome.hits.iter_mut().enumerate() {
            hit.rank = i + 1;
        }
        Ok(outcome)
    }

    fn semantic(&self, embedding: &Embedding, k: usize) -> Result<SearchOutcome> {
        let hits = self
            .vectors
            .top_k(embedding, k)?
            .into_iter()
            .map(|(id, s)| ScoredHit {
                sem_score: Some(s),
                ..ScoredHit::scored(id, s)
            })
            .collect();
        Ok(SearchOutcome {
            hits,
            notices: Vec::new(),
        })
    }

    fn spatial(&self, point: GeoPoint, radius_m: f64, k: usize) -> Result<SearchOutcome> {
        let res = self.spatial.radius_query(point, radius_m)?;
        let mut outcome = SearchOutcome::default();
        push_geo_notices(&mut outcome, res.antimeridian_clamped, res.hits.is_empty());
        outcome.hits = res
            .hits
            .into_iter()
            .take(k)
            .map(|h| {
                let g = geo_score(h.distance_m, radius_m)?;
                Ok(ScoredHit {
                    distance_m: Some(h.distance_m),
                    geo_score: Some(g),
                    ..ScoredHit::scored(h.doc_id, g)
                })
            })
            .collect::<Result<_>>()?;
        Ok(outcome)
    }

    fn hybrid(
        &self,
        embedding: &Embedding,
        point: GeoPoint,
        radius_m: f64,
        alpha: f64,
        k: usize,
    ) -> Result<SearchOutcome> {
        let res = self.spatial.radius_query(point, radius_m)?;
        let mut outcome = SearchOutcome::default();
        push_geo_notices(&mut outcome, res.antimeridian_clamped, res.hits.is_empty());
        if res.hits.is_empty() {
            return Ok(outcome);
        }
        let ids: Vec<&str> = res.hits.iter().map(|h| h.doc_id.as_str()).collect();
        let sem = self.vectors.score_subset(embedding, &ids)?;
        let sem_norm = min_max_normalize(&sem)?;
        let geo: Vec<f64> = res
            .hits
            .iter()
            .map(|h| geo_score(h.distance_m, radius_m))
            .collect::<Result<_>>()?;
        let geo_norm = max_normalize(&geo)?;

        let mut hits = Vec::with_capacity(res.hits.len());
        for (i, h) in res.hits.into_iter().enumerate() {
            hits.push(ScoredHit {
                doc_id: h.doc_id,
                rank: 0,
                sem_score: Some(sem[i]),
                distance_m: Some(h.distance_m),
                geo_score: Some(geo[i]),
                sem_norm: Some(sem_norm[i]),
                geo_norm: Some(geo_norm[i]),
                combined: combine(sem_norm[i], geo_norm[i], alpha)?,
            });
        }
        hits.sort_by(|a, b| b.combined.total_cmp(&a.combined).then_with(|| a.doc_id.cmp(&b.doc_id)));
        hits.truncate(k);
        outcome.hits = hits;
        Ok(outcome)
    }
}

fn push_geo_notices(outcome: &mut SearchOutcome, clamped: bool, empty: bool) {
    if clamped {
        outcome.notices.push(Notice {
            code: NoticeCode::AntimeridianClamped,
            message: "search area crosses ±180° longitude; the far side was not searched".into(),
        });
    }
    if empty {
        outcome.notices.push(Notice {
            code: NoticeCode::NoCandidates,
            message: "no documents within the search radius".into(),
        });
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub best_alpha: f64,
    /// (alpha, mean Recall@5) in grid order.
    pub table: Vec<(f64, f64)>,
    pub radius_m: f64,
    pub queries: usize,
}

/// Evaluates hybrid search at each grid weight with a fixed radius and
/// picks the weight with the highest mean Recall@5 (smallest weight on ties).
pub fn grid_search_alpha(
    indexes: &Indexes<'_>,
    validation: &[(SearchQuery, String)],
    grid: &[f64],
    radius_m: f64,
) -> Result<GridSearchResult> {
    use rayon::prelude::*;

    if grid.is_empty() {
        return Err(Error::invalid("alpha grid is empty"));
    }
    if validation.is_empty() {
        return Err(Error::invalid("validation query set is empty"));
    }
    let embeddings: Vec<Embedding> = validation
        .par_iter()
        .map(|(q, _)| indexes.provider.encode(&q.text, TextRole::Query))
        .collect::<Result<_>>()?;

    let table: Vec<(f64, f64)> = grid
        .iter()
        .map(|&alpha| {
            let hits: Vec<f64> = validation
                .par_iter()
                .zip(&embeddings)
                .map(|((q, gold), emb)| {
                    let q = SearchQuery {
                        alpha,
                        radius_m,
                        k: 5,
                        method: Method::Hybrid,
                        ..q.clone()
                    };
                    let out = indexes.search_encoded(&q, Some(emb))?;
                    Ok(recall_at_k(&out.doc_ids(), gold, 5))
                })
                .collect::<Result<_>>()?;
            Ok((alpha, hits.iter().sum::<f64>() / hits.len() as f64))
        })
        .collect::<Result<_>>()?;

    let mut best = table[0];
    for &(alpha, recall) in &table[1..] {
        if recall > best.1 || (recall == best.1 && alpha < best.0) {
            best = (alpha, recall);
        }
    }
    Ok(GridSearchResult {
        best_alpha: best.0,
        table,
        radius_m,
        queries: validation.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantic::HashingEncoder;

    const E_INV: f64 = 0.367_879_441_171_442_3;

    #[test]
    fn geo_score_values() {
        assert_eq!(geo_score(0.0, 50_000.0).unwrap(), 1.0);
        assert!((geo_score(50_000.0, 50_000.0).unwrap() - E_INV).abs() < 1e-7);
        assert!((geo_score(25_000.0, 50_000.0).unwrap() - 0.606_530_7).abs() < 1e-7);
        assert!(geo_score(60_000.0, 50_000.0).is_err());
        assert!(geo_score(-1.0, 50_000.0).is_err());
        assert!(geo_score(0.0, 0.0).is_err());
    }

    #[test]
    fn min_max_examples() {
        assert_eq!(min_max_normalize(&[2.0, 2.0, 2.0]).unwrap(), [1.0, 1.0, 1.0]);
        assert_eq!(min_max_normalize(&[0.1, 0.3]).unwrap(), [0.0, 1.0]);
        assert_eq!(min_max_normalize(&[0.1]).unwrap(), [1.0]);
        assert!(min_max_normalize(&[]).is_err());
    }

    #[test]
    fn max_normalize_examples() {
        assert_eq!(max_normalize(&[1.0]).unwrap(), [1.0]);
        let v = max_normalize(&[E_INV, 1.0]).unwrap();
        assert!((v[0] - 0.367_879_4).abs() < 1e-7 && v[1] == 1.0);
        assert!(max_normalize(&[]).is_err());
        assert!(max_normalize(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn combine_examples() {
        assert_eq!(combine(1.0, 1.0, 0.37).unwrap(), 1.0);
        assert!((combine(0.5, 1.0, 0.1).unwrap() - 0.95).abs() < 1e-15);
        assert!((combine(1.0, 0.0, 0.1).unwrap() - 0.1).abs() < 1e-15);
        assert!(combine(1.1, 0.0, 0.1).is_err());
        assert!(combine(0.5, 0.5, -0.1).is_err());
    }

    #[test]
    fn method_parse_roundtrip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{}\"", m.as_str()));
        }
        assert!("fuzzy".parse::<Method>().is_err());
    }

    struct Fixture {
        spatial: SpatialIndex,
        vectors: VectorIndex,
        lexical: InvertedIndex,
        provider: HashingEncoder,
    }

    impl Fixture {
        fn new(docs: &[(&str, &str, f64, f64)]) -> Self {
            let provider = HashingEncoder::new(64);
            let spatial = SpatialIndex::build(docs.iter().map(|d| (d.0, GeoPoint::new(d.2, d.3).unwrap())));
            let ids = docs.iter().map(|d| d.0.to_string()).collect();
            let embs = docs.iter().map(|d| provider.hash_encode(d.1).unwrap()).collect();
            let vectors = VectorIndex::from_embeddings(ids, embs, 64).unwrap();
            let lexical = InvertedIndex::build(docs.iter().map(|d| (d.0, d.1)));
            Fixture {
                spatial,
                vectors,
                lexical,
                provider,
            }
        }

        fn indexes(&self) -> Indexes<'_> {
            Indexes {
                spatial: &self.spatial,
                vectors: &self.vectors,
                lexical: &self.lexical,
                provider: &self.provider,
            }
        }
    }

    #[test]
    fn single_candidate_scores_one() {
        let f = Fixture::new(&[("a", "река Мёша", 55.6, 49.9)]);
        let q = SearchQuery::new("Где находится Мёша?").at(GeoPoint::new(55.6, 49.9).unwrap());
        let out = f.indexes().search(&q).unwrap();
        assert_eq!(out.hits.len(), 1);
        assert_eq!(out.hits[0].combined, 1.0);
        assert_eq!(out.hits[0].rank, 1);
    }

    #[test]
    fn near_low_semantic_beats_far_high_semantic() {
        // B sits ~50 km north (just inside R) and matches the text; A is at the anchor
        let f = Fixture::new(&[("A", "гора Чатыр-Тау", 55.0, 50.0), ("B", "река Мёша", 55.4490, 50.0)]);
        let q = SearchQuery::new("река Мёша").at(GeoPoint::new(55.0, 50.0).unwrap());
        let out = f.indexes().search(&q).unwrap();
        assert_eq!(out.doc_ids(), ["A", "B"]);
        let (a, b) = (&out.hits[0], &out.hits[1]);
        assert_eq!(a.sem_norm, Some(0.0));
        assert_eq!(b.sem_norm, Some(1.0));
        assert!((a.combined - 0.9).abs() < 1e-12);
        let expected_b = 0.1 + 0.9 * (-b.distance_m.unwrap() / 50_000.0).exp();
        assert!((b.combined - expected_b).abs() < 1e-12);
        assert!(b.combined < 0.47);
    }

    #[test]
    fn fallbacks() {
        let f = Fixture::new(&[("a", "река Мёша", 55.6, 49.9), ("b", "озеро Кабан", 55.78, 49.12)]);
        let out = f.indexes().search(&SearchQuery::new("Мёша")).unwrap();
        assert_eq!(out.notices[0].code, NoticeCode::NoPoint);
        assert_eq!(out.hits[0].doc_id, "a");
        assert!(out.hits[0].geo_norm.is_none());

        let far = SearchQuery::new("Мёша").at(GeoPoint::new(10.0, 10.0).unwrap());
        let out = f.indexes().search(&far).unwrap();
        assert!(out.hits.is_empty());
        assert_eq!(out.notices[0].code, NoticeCode::NoCandidates);

        let spatial = SearchQuery::new("").method(Method::SpatialOnly);
        assert!(f.indexes().search(&spatial).unwrap_err().is_invalid_argument());
    }

    #[test]
    fn spatial_orders_by_distance() {
        let f = Fixture::new(&[
            ("far", "x", 55.3, 49.0),
            ("near", "y", 55.1, 49.0),
            ("mid", "z", 55.2, 49.0),
        ]);
        let q = SearchQuery::new("")
            .method(Method::SpatialOnly)
            .at(GeoPoint::new(55.0, 49.0).unwrap());
        let out = f.indexes().search(&q).unwrap();
        assert_eq!(out.doc_ids(), ["near", "mid", "far"]);
    }

    #[test]
    fn alpha_endpoints() {
        let docs = [
            ("a", "река Мёша приток Камы", 55.00, 49.00),
            ("b", "деревня Мёша", 55.05, 49.02),
            ("c", "озеро Кабан", 55.10, 49.05),
            ("d", "село Рантамак", 55.15, 49.10),
        ];
        let f = Fixture::new(&docs);
        let point = GeoPoint::new(55.02, 49.0).unwrap();
        let base = SearchQuery {
            k: 10,
            ..SearchQuery::new("река Мёша").at(point)
        };

        let sem_only = f
            .indexes()
            .search(&SearchQuery {
                alpha: 1.0,
                ..base.clone()
            })
            .unwrap();
        let mut by_sem = sem_only.hits.clone();
        by_sem.sort_by(|x, y| {
            y.sem_score
                .partial_cmp(&x.sem_score)
                .unwrap()
                .then(x.doc_id.cmp(&y.doc_id))
        });
        assert_eq!(sem_only.hits, by_sem);

        let geo_only = f.indexes().search(&SearchQuery { alpha: 0.0, ..base }).unwrap();
        let mut by_dist = geo_only.hits.clone();
        by_dist.sort_by(|x, y| {
            x.distance_m
                .partial_cmp(&y.distance_m)
                .unwrap()
                .then(x.doc_id.cmp(&y.doc_id))
        });
        assert_eq!(
            geo_only.doc_ids(),
            by_dist.iter().map(|h| h.doc_id.as_str()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn grid_trivial_and_validation() {
        let f = Fixture::new(&[("a", "река Мёша", 55.6, 49.9)]);
        let q = SearchQuery::new("Мёша").at(GeoPoint::new(55.6, 49.9).unwrap());
        let val = vec![(q, "a".to_string())];
        let r = grid_search_alpha(&f.indexes(), &val, &[0.5], 50_000.0).unwrap();
        assert_eq!(r.best_alpha, 0.5);
        let r = grid_search_alpha(&f.indexes(), &val, &DEFAULT_ALPHA_GRID, 50_000.0).unwrap();
        assert_eq!(r.best_alpha, 0.1, "all tie at 1.0 -> smallest alpha");
        assert!(grid_search_alpha(&f.indexes(), &[], &[0.5], 50_000.0).is_err());
        assert!(grid_search_alpha(&f.indexes(), &val, &[], 50_000.0).is_err());
    }
}
