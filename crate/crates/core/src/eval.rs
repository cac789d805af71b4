//! Retrieval evaluation: query generation, Recall@k, MRR, percentile
//! bootstrap intervals and the four-method comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::corpus::{ToponymRecord, ToponymType};
use crate::geo::{destination, GeoPoint};
use crate::hybrid::{Indexes, Method, SearchQuery};
use crate::{Error, Result};

pub const QUERY_TEMPLATES: [&str; 5] = [
    "Что такое {name}?",
    "Где находится {name}?",
    "Расскажи о {name}",
    "Что известно о {name}?",
    "Где расположен {name}?",
];

pub const RUSSIAN_NAME_PROBABILITY: f64 = 0.7;
pub const DEFAULT_RESAMPLES: usize = 1000;
pub const DEFAULT_K_LIST: [usize; 3] = [1, 3, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Rus,
    Tat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalQuery {
    pub query_text: String,
    pub gold_doc_id: String,
    pub point: Option<GeoPoint>,
    pub language_used: Language,
    pub toponym_type: Option<ToponymType>,
}

/// Seeded permutation of the records that have coordinates. Test queries
/// come from its head, validation queries from its tail, so the two sets
/// are disjoint whenever they fit.
fn permutation(records: &[ToponymRecord], seed: u64) -> Vec<&ToponymRecord> {
    let mut pool: Vec<&ToponymRecord> = records.iter().filter(|r| r.point().is_some()).collect();
    pool.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    pool
}

fn make_query(rec: &ToponymRecord, rng: &mut ChaCha8Rng, jitter_m: f64) -> EvalQuery {
    let template = QUERY_TEMPLATES[rng.gen_range(0..QUERY_TEMPLATES.len())];
    let want_rus = rng.gen::<f64>() < RUSSIAN_NAME_PROBABILITY;
    let (name, language) = match (want_rus, rec.name_rus.is_empty(), rec.name_tat.is_empty()) {
        (true, false, _) | (false, false, true) => (&rec.name_rus, Language::Rus),
        _ => (&rec.name_tat, Language::Tat),
    };
    let mut point = rec.point().expect("pool holds records with coordinates");
    if jitter_m > 0.0 {
        let bearing = rng.gen_range(0.0..std::f64::consts::TAU);
        point = destination(point, bearing, rng.gen_range(0.0..=jitter_m));
    }
    EvalQuery {
        query_text: template.replacen("{name}", name, 1),
        gold_doc_id: rec.id.clone(),
        point: Some(point),
        language_used: language,
        toponym_type: rec.toponym_type,
    }
}

/// `n` test queries from distinct records with coordinates.
pub fn generate_eval_queries(records: &[ToponymRecord], n: usize, seed: u64, jitter_m: f64) -> Result<Vec<EvalQuery>> {
    let pool = permutation(records, seed);
    if n > pool.len() {
        return Err(Error::invalid(format!(
            "requested {n} queries but only {} records have coordinates",
            pool.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    Ok(pool[..n].iter().map(|r| make_query(r, &mut rng, jitter_m)).collect())
}

/// `n_val` validation queries from the tail of the same permutation used by
/// [`generate_eval_queries`]. Overlap with the first `n_test` records is
/// reported with a warning.
pub fn generate_validation_queries(
    records: &[ToponymRecord],
    n_val: usize,
    n_test: usize,
    seed: u64,
    jitter_m: f64,
) -> Result<Vec<EvalQuery>> {
    let pool = permutation(records, seed);
    if n_val > pool.len() {
        return Err(Error::invalid(format!(
            "requested {n_val} validation queries but only {} records have coordinates",
            pool.len()
        )));
    }
    if n_val + n_test > pool.len() {
        warn!(
            n_val,
            n_test,
            available = pool.len(),
            "validation and test queries overlap"
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(2));
    Ok(pool[pool.len() - n_val..]
        .iter()
        .map(|r| make_query(r, &mut rng, jitter_m))
        .collect())
}

/// 1 if `gold` is among the first `k` ids.
pub fn recall_at_k<S: AsRef<str>>(ranked: &[S], gold: &str, k: usize) -> f64 {
    if ranked.iter().take(k).any(|id| id.as_ref() == gold) {
        1.0
    } else {
        0.0
    }
}

/// 1/rank of `gold` in `ranked`, 0 when absent.
pub fn reciprocal_rank<S: AsRef<str>>(ranked: &[S], gold: &str) -> f64 {
    ranked
        .iter()
        .position(|id| id.as_ref() == gold)
        .map_or(0.0, |i| 1.0 / (i + 1) as f64)
}

/// Mean reciprocal rank over 1-based ranks (`None` = not found).
pub fn mrr(ranks: &[Option<usize>]) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().map(|r| r.map_or(0.0, |r| 1.0 / r as f64)).sum::<f64>() / ranks.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapCi {
    pub point_estimate: f64,
    pub lower_95: f64,
    pub upper_95: f64,
    pub resamples: usize,
    pub seed: u64,
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Percentile bootstrap of the mean.
pub fn bootstrap_ci(values: &[f64], resamples: usize, seed: u64) -> Result<BootstrapCi> {
    if values.is_empty() {
        return Err(Error::invalid("bootstrap needs at least one value"));
    }
    if resamples == 0 {
        return Err(Error::invalid("bootstrap needs at least one resample"));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    // a skewed resample distribution can leave the mean just outside the
    // percentile band; the interval is widened to contain it
    let lower = percentile(&means, 0.025).min(mean);
    let upper = percentile(&means, 0.975).max(mean);
    Ok(BootstrapCi {
        point_estimate: mean,
        lower_95: lower,
        upper_95: upper,
        resamples,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallAtK {
    pub k: usize,
    pub ci: BootstrapCi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: Method,
    pub recall: Vec<RecallAtK>,
    pub mrr: BootstrapCi,
    /// Queries the method could not run (counted as misses).
    pub failed_queries: usize,
}

impl MethodReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.recall.iter().find(|r| r.k == k).map(|r| r.ci.point_estimate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeBreakdown {
    pub toponym_type: String,
    pub queries: usize,
    pub recall_at_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalParams {
    pub alpha: f64,
    pub radius_m: f64,
    pub k_list: Vec<usize>,
    pub resamples: usize,
    pub seed: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            alpha: crate::hybrid::DEFAULT_ALPHA,
            radius_m: crate::hybrid::DEFAULT_RADIUS_M,
            k_list: DEFAULT_K_LIST.to_vec(),
            resamples: DEFAULT_RESAMPLES,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryTrace {
    pub method: Method,
    pub query: String,
    pub gold_doc_id: String,
    pub rank: Option<usize>,
    pub top: Vec<String>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub params: EvalParams,
    pub queries: usize,
    pub methods: Vec<MethodReport>,
    /// Recall@1 of the hybrid method per toponym type.
    pub per_type: Vec<TypeBreakdown>,
    #[serde(skip)]
    pub traces: Vec<QueryTrace>,
}

impl RetrievalReport {
    pub fn method(&self, m: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|r| r.method == m)
    }

    /// Plain-text table: one row per method, Recall@k and MRR with intervals.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<16}", "Method");
        for k in &self.params.k_list {
            let _ = write!(out, " | {:<22}", format!("Recall@{k}"));
        }
        let _ = writeln!(out, " | {:<22}", "MRR");
        let cell = |ci: &BootstrapCi| format!("{:.3} [{:.3}, {:.3}]", ci.point_estimate, ci.lower_95, ci.upper_95);
        for m in &self.methods {
            let _ = write!(out, "{:<16}", method_label(m.method));
            for r in &m.recall {
                let _ = write!(out, " | {:<22}", cell(&r.ci));
            }
            let _ = writeln!(out, " | {:<22}", cell(&m.mrr));
        }
        if !self.per_type.is_empty() {
            let _ = writeln!(out, "\nHybrid Recall@1 by toponym type");
            for t in &self.per_type {
                let _ = writeln!(out, "{:<16} | {:>5} | {:.3}", t.toponym_type, t.queries, t.recall_at_1);
            }
        }
        out
    }
}

fn method_label(m: Method) -> &'static str {
    match m {
        Method::Bm25 => "BM25",
        Method::SpatialOnly => "Spatial only",
        Method::SemanticOnly => "Semantic only",
        Method::Hybrid => "Hybrid",
    }
}

struct Outcome {
    ranked: Vec<String>,
    error: Option<String>,
}

/// Runs every method on every query and aggregates the metrics. Per-query
/// work runs in parallel; results are reduced in query order.
pub fn compare_methods(
    indexes: &Indexes<'_>,
    queries: &[EvalQuery],
    methods: &[Method],
    params: &EvalParams,
) -> Result<RetrievalReport> {
    if queries.is_empty() {
        return Err(Error::invalid("no evaluation queries"));
    }
    if params.k_list.is_empty() || params.k_list.contains(&0) {
        return Err(Error::invalid("k_list must be non-empty and positive"));
    }
    let depth = *params.k_list.iter().max().expect("non-empty");

    let mut reports = Vec::new();
    let mut traces = Vec::new();
    for &method in methods {
        let outcomes: Vec<Outcome> = queries
            .par_iter()
            .map(|q| {
                let sq = SearchQuery {
                    text: q.query_text.clone(),
                    point: q.point,
                    radius_m: params.radius_m,
                    alpha: params.alpha,
                    k: depth,
                    method,
                };
                match indexes.search(&sq) {
                    Ok(out) => Outcome {
                        ranked: out.hits.into_iter().map(|h| h.doc_id).collect(),
                        error: None,
                    },
                    Err(e) => Outcome {
                        ranked: Vec::new(),
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect();

        let failed_queries = outcomes.iter().filter(|o| o.error.is_some()).count();
        if failed_queries > 0 {
            warn!(%method, failed_queries, "queries could not be run and count as misses");
        }
        let mut recall = Vec::new();
        for &k in &params.k_list {
            let vals: Vec<f64> = outcomes
                .iter()
                .zip(queries)
                .map(|(o, q)| recall_at_k(&o.ranked, &q.gold_doc_id, k))
                .collect();
            recall.push(RecallAtK {
                k,
                ci: bootstrap_ci(&vals, params.resamples, params.seed)?,
            });
        }
        let rr: Vec<f64> = outcomes
            .iter()
            .zip(queries)
            .map(|(o, q)| reciprocal_rank(&o.ranked, &q.gold_doc_id))
            .collect();
        reports.push(MethodReport {
            method,
            recall,
            mrr: bootstrap_ci(&rr, params.resamples, params.seed)?,
            failed_queries,
        });
        for (o, q) in outcomes.into_iter().zip(queries) {
            traces.push(QueryTrace {
                method,
                query: q.query_text.clone(),
                gold_doc_id: q.gold_doc_id.clone(),
                rank: o.ranked.iter().position(|id| *id == q.gold_doc_id).map(|i| i + 1),
                top: o.ranked,
                error: o.error,
            });
        }
    }

    let top1 = |ts: &[QueryTrace]| -> Vec<f64> {
        ts.iter()
            .filter(|t| t.method == Method::Hybrid)
            .map(|t| if t.rank == Some(1) { 1.0 } else { 0.0 })
            .collect()
    };
    let hybrid_r1 = if methods.contains(&Method::Hybrid) {
        top1(&traces)
    } else {
        // the per-type table is about the hybrid method even when it was not requested
        let sub = EvalParams {
            k_list: vec![1],
            resamples: 1,
            ..params.clone()
        };
        top1(&compare_methods(indexes, queries, &[Method::Hybrid], &sub)?.traces)
    };
    let mut groups: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for (q, hit) in queries.iter().zip(&hybrid_r1) {
        let label = q.toponym_type.map_or("unknown", |t| t.label()).to_string();
        let e = groups.entry(label).or_default();
        e.0 += 1;
        e.1 += hit;
    }
    let per_type = groups
        .into_iter()
        .map(|(toponym_type, (n, hits))| TypeBreakdown {
            toponym_type,
            queries: n,
            recall_at_1: hits / n as f64,
        })
        .collect();

    Ok(RetrievalReport {
        params: params.clone(),
        queries: queries.len(),
        methods: reports,
        per_type,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn recall_and_rr_examples() {
        let ranked = ["a", "b", "gold", "c"];
        assert_eq!(recall_at_k(&ranked, "gold", 1), 0.0);
        assert_eq!(recall_at_k(&ranked, "gold", 3), 1.0);
        assert!((reciprocal_rank(&ranked, "gold") - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(recall_at_k(&ranked, "zzz", 5), 0.0);
        assert_eq!(reciprocal_rank(&ranked, "zzz"), 0.0);
    }

    #[test]
    fn mrr_of_1_2_4() {
        let m = mrr(&[Some(1), Some(2), Some(4)]);
        assert!((m - 0.583_333_333_333_333_4).abs() < 1e-9);
        assert_eq!(mrr(&[None, None]), 0.0);
    }

    #[test]
    fn bootstrap_zero_variance_is_a_point() {
        let ci = bootstrap_ci(&[1.0; 50], 1000, 7).unwrap();
        assert_eq!((ci.lower_95, ci.point_estimate, ci.upper_95), (1.0, 1.0, 1.0));
    }

    #[test]
    fn bootstrap_brackets_and_is_deterministic() {
        let vals: Vec<f64> = (0..400).map(|i| f64::from(i % 2)).collect();
        let a = bootstrap_ci(&vals, 1000, 3).unwrap();
        let b = bootstrap_ci(&vals, 1000, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.lower_95 < 0.5 && 0.5 < a.upper_95);
        // normal approximation: half-width ~ 1.96 * 0.5 / 20 = 0.049
        assert!((a.upper_95 - a.lower_95 - 0.098).abs() < 0.02, "{a:?}");
        assert!(bootstrap_ci(&[], 10, 1).unwrap_err().is_invalid_argument());
    }

    #[test]
    fn percentile_interpolates() {
        assert_eq!(percentile(&[0.0, 10.0], 0.25), 2.5);
        assert_eq!(percentile(&[3.0], 0.975), 3.0);
    }

    fn records(n: usize) -> Vec<ToponymRecord> {
        (0..n)
            .map(|i| {
                let mut r = ToponymRecord::named(format!("r{i}"), format!("Рус{i}"));
                r.name_tat = format!("Тат{i}");
                r.with_coordinates(&format!("55.{i:02}"), "49.1")
            })
            .collect()
    }

    #[test]
    fn query_generation() {
        let recs = records(40);
        let qs = generate_eval_queries(&recs, 30, 9, 0.0).unwrap();
        assert_eq!(qs.len(), 30);
        assert_eq!(qs, generate_eval_queries(&recs, 30, 9, 0.0).unwrap());
        let mut ids: Vec<_> = qs.iter().map(|q| q.gold_doc_id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 30);
        for q in &qs {
            let rec = recs.iter().find(|r| r.id == q.gold_doc_id).unwrap();
            assert_eq!(q.point, rec.point());
            let name = if q.language_used == Language::Rus {
                &rec.name_rus
            } else {
                &rec.name_tat
            };
            assert!(q.query_text.contains(name.as_str()));
        }
        assert!(generate_eval_queries(&recs, 41, 9, 0.0)
            .unwrap_err()
            .is_invalid_argument());
    }

    #[test]
    fn tatar_only_record_uses_tatar() {
        let mut r = ToponymRecord::named("t", "").with_coordinates("55", "49");
        r.name_tat = "Кабан күле".into();
        for seed in 0..20 {
            let q = &generate_eval_queries(std::slice::from_ref(&r), 1, seed, 0.0).unwrap()[0];
            assert_eq!(q.language_used, Language::Tat);
            assert!(q.query_text.contains("Кабан күле"));
        }
    }

    #[test]
    fn language_mix_is_roughly_70_30() {
        let recs = records(100);
        let mut rus = 0;
        for seed in 0..20 {
            rus += generate_eval_queries(&recs, 100, seed, 0.0)
                .unwrap()
                .iter()
                .filter(|q| q.language_used == Language::Rus)
                .count();
        }
        let share = rus as f64 / 2000.0;
        assert!((share - 0.7).abs() < 0.03, "{share}");
    }

    #[test]
    fn jitter_stays_within_bound() {
        let recs = records(20);
        for q in generate_eval_queries(&recs, 20, 4, 1000.0).unwrap() {
            let gold = recs.iter().find(|r| r.id == q.gold_doc_id).unwrap().point().unwrap();
            assert!(crate::geo::haversine_m(gold, q.point.unwrap()) <= 1000.0 + 1e-6);
        }
    }

    #[test]
    fn validation_is_disjoint_when_it_fits() {
        let recs = records(50);
        let test = generate_eval_queries(&recs, 30, 1, 0.0).unwrap();
        let val = generate_validation_queries(&recs, 20, 30, 1, 0.0).unwrap();
        assert!(val.iter().all(|v| test.iter().all(|t| t.gold_doc_id != v.gold_doc_id)));
    }

    proptest! {
        #[test]
        fn recall_monotone_in_k(ranked in proptest::collection::vec(0u8..20, 0..15), gold in 0u8..20) {
            let ranked: Vec<String> = ranked.iter().map(|x| x.to_string()).collect();
            let gold = gold.to_string();
            let mut prev = 0.0;
            for k in 1..=16 {
                let r = recall_at_k(&ranked, &gold, k);
                prop_assert!(r >= prev);
                prev = r;
            }
            let rr = reciprocal_rank(&ranked, &gold);
            prop_assert!(rr >= recall_at_k(&ranked, &gold, 1));
            prop_assert!(rr <= recall_at_k(&ranked, &gold, ranked.len().max(1)));
        }
    }
}
