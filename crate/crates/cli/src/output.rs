//! Plain-text renderings. Structured output is the service JSON instead.

use std::fmt::Write;

use toposearch::api::{AskResponse, SearchResponse};
use toposearch::hybrid::GridSearchResult;
use toposearch::reader::QaMetrics;

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.digits$}"))
}

pub fn search_table(r: &SearchResponse) -> String {
    let mut out = String::new();
    let _ = write!(out, "{} search for {:?}", r.method, r.query);
    if let (Some(lat), Some(lon)) = (r.lat, r.lon) {
        let _ = write!(out, " near {lat}, {lon} within {} m", r.radius_m);
    }
    let _ = writeln!(out, " (alpha {}, k {})", r.alpha, r.k);
    for n in &r.notices {
        let _ = writeln!(out, "note: {}", n.message);
    }
    if r.hits.is_empty() {
        let _ = writeln!(out, "no hits");
        return out;
    }
    let _ = writeln!(
        out,
        "{:>4}  {:<12} {:<28} {:>10} {:>8} {:>8} {:>8}",
        "rank", "doc_id", "name", "dist_km", "sem", "geo", "score"
    );
    for h in &r.hits {
        let name = if h.name_rus.is_empty() {
            &h.name_tat
        } else {
            &h.name_rus
        };
        let _ = writeln!(
            out,
            "{:>4}  {:<12} {:<28} {:>10} {:>8} {:>8} {:>8.4}",
            h.rank,
            h.doc_id,
            name,
            opt(h.distance_m.map(|d| d / 1000.0), 2),
            opt(h.sem_norm, 4),
            opt(h.geo_norm, 4),
            h.combined
        );
    }
    out
}

pub fn answer_text(r: &AskResponse) -> String {
    let mut out = String::new();
    for n in &r.notices {
        let _ = writeln!(out, "note: {}", n.message);
    }
    if r.answer_start < 0 {
        let _ = writeln!(out, "no answer found");
    } else {
        let _ = writeln!(out, "answer: {}", r.answer);
    }
    if let Some(c) = r.category {
        let _ = writeln!(out, "category: {}", c.as_str());
    }
    if let Some(id) = &r.doc_id {
        let _ = writeln!(out, "document: {id} (offset {})", r.answer_start);
    }
    if let Some(h) = &r.hit {
        let _ = writeln!(
            out,
            "score: {:.4} (sem {}, geo {}, distance {} km)",
            h.combined,
            opt(h.sem_norm, 4),
            opt(h.geo_norm, 4),
            opt(h.distance_m.map(|d| d / 1000.0), 2)
        );
    }
    out
}

pub fn grid_table(r: &GridSearchResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} validation queries, radius {} m", r.queries, r.radius_m);
    let _ = writeln!(out, "{:>6}  {:>9}", "alpha", "Recall@5");
    for (alpha, recall) in &r.table {
        let mark = if *alpha == r.best_alpha { "  *" } else { "" };
        let _ = writeln!(out, "{alpha:>6.2}  {recall:>9.4}{mark}");
    }
    let _ = writeln!(out, "best alpha: {}", r.best_alpha);
    out
}

pub fn reader_table(m: &QaMetrics) -> String {
    let mut out = String::new();
    let mode = if m.normalized { "normalized" } else { "raw" };
    let _ = writeln!(out, "{} pairs, {mode} scoring", m.count);
    let _ = writeln!(out, "{:<14} {:>6} {:>7} {:>7}", "category", "n", "EM", "F1");
    for c in &m.per_category {
        let _ = writeln!(
            out,
            "{:<14} {:>6} {:>7.3} {:>7.3}",
            c.category.as_str(),
            c.count,
            c.exact_match,
            c.f1
        );
    }
    let _ = writeln!(
        out,
        "{:<14} {:>6} {:>7.3} {:>7.3}",
        "overall", m.count, m.exact_match, m.f1
    );
    let _ = writeln!(out, "mean latency {:.4} ms", m.mean_latency_ms);
    out
}
