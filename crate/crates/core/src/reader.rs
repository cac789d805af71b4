//! Rule-based extractive reader, answer normalization and EM/F1 scoring.

use std::collections::{BTreeMap, HashMap};
use std::sync::LazyLock;
use std::time::Instant;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::corpus::SEPARATOR;
use crate::qagen::{QaCategory, QaPair};
use crate::{Error, Result};

/// Keyword rules in priority order. Matching is case-insensitive substring.
const RULES: [(QaCategory, &[&str]); 7] = [
    (QaCategory::Coordinates, &["координат", "на карте"]),
    (QaCategory::Region, &["регион", "федеральный субъект"]),
    (QaCategory::Etymology, &["означает", "называется", "происхожден"]),
    (QaCategory::Sources, &["источник", "прочитать"]),
    (QaCategory::Physio, &["физико-географ", "географических особенностях"]),
    (QaCategory::Location, &["находится", "располож"]),
    (QaCategory::ObjectType, &["что такое", "тип"]),
];

pub fn classify_question(question: &str) -> Option<QaCategory> {
    let q = question.to_lowercase();
    RULES
        .iter()
        .find(|(_, keys)| keys.iter().any(|k| q.contains(k)))
        .map(|(cat, _)| *cat)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReaderAnswer {
    pub text: String,
    /// Character offset of `text` in the context, or -1 when there is no answer.
    pub start: i64,
    pub category_guess: Option<QaCategory>,
    pub source_prefix: String,
}

impl ReaderAnswer {
    fn none(category_guess: Option<QaCategory>) -> Self {
        ReaderAnswer {
            text: String::new(),
            start: -1,
            category_guess,
            source_prefix: String::new(),
        }
    }

    pub fn is_answer(&self) -> bool {
        self.start >= 0
    }
}

/// Returns the value of the field whose prefix matches the question's
/// category: from the end of the prefix to the next separator.
pub fn extract(question: &str, context: &str) -> ReaderAnswer {
    let category = classify_question(question);
    let Some(cat) = category else {
        return ReaderAnswer::none(None);
    };
    let prefix = cat.field().prefix();
    let mut offset = 0usize;
    for field in context.split(SEPARATOR) {
        if let Some(value) = field.strip_prefix(prefix) {
            return ReaderAnswer {
                text: value.to_string(),
                start: (offset + prefix.chars().count()) as i64,
                category_guess: category,
                source_prefix: prefix.to_string(),
            };
        }
        offset += field.chars().count() + SEPARATOR.chars().count();
    }
    ReaderAnswer::none(category)
}

static SPACE_BEFORE_POINT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\d)\s+\.\s*(\d)").unwrap());
static SPACE_AFTER_POINT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\d)\.\s+(\d)").unwrap());
static SPACED_HYPHEN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(\p{L})\s*-\s*(\p{L})").unwrap());
static OPEN_BRACKET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([(\[{])\s+").unwrap());
static CLOSE_BRACKET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+([)\]}])").unwrap());
static SPACE_COMMA: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+,").unwrap());
static WHITESPACE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\s+").unwrap());

fn normalize_once(text: &str) -> String {
    let s = SPACE_BEFORE_POINT.replace_all(text, "$1.$2");
    let s = SPACE_AFTER_POINT.replace_all(&s, "$1.$2");
    let s = SPACED_HYPHEN.replace_all(&s, "$1-$2");
    let s = OPEN_BRACKET.replace_all(&s, "$1");
    let s = CLOSE_BRACKET.replace_all(&s, "$1");
    let s = SPACE_COMMA.replace_all(&s, ",");
    WHITESPACE.replace_all(s.trim(), " ").into_owned()
}

/// Repairs tokenization artifacts in predicted answers:
///
/// 1. whitespace around the point of a decimal number is removed
///    (`55. 175195` becomes `55.175195`);
/// 2. spaces around a hyphen between letters are removed
///    (`северо - западу` becomes `северо-западу`);
/// 3. spaces just inside brackets and before commas are removed;
/// 4. the text is trimmed and whitespace runs collapse to one space.
///
/// The rules are applied until nothing changes, so the result is a fixpoint.
pub fn normalize_answer(text: &str) -> String {
    let mut cur = normalize_once(text);
    loop {
        let next = normalize_once(&cur);
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

pub fn exact_match(pred: &str, gold: &str, normalized: bool) -> f64 {
    let same = if normalized {
        normalize_answer(pred) == normalize_answer(gold)
    } else {
        pred.trim() == gold.trim()
    };
    if same {
        1.0
    } else {
        0.0
    }
}

pub fn token_f1(pred: &str, gold: &str, normalized: bool) -> f64 {
    let prep = |s: &str| {
        let s = if normalized { normalize_answer(s) } else { s.to_string() };
        s.to_lowercase()
            .split_whitespace()
            .map(str::to_string)
            .collect::<Vec<_>>()
    };
    let (p, g) = (prep(pred), prep(gold));
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    if p.is_empty() || g.is_empty() {
        return 0.0;
    }
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for t in &g {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / p.len() as f64;
    let recall = common as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryMetrics {
    pub category: QaCategory,
    pub count: usize,
    pub exact_match: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaMetrics {
    pub normalized: bool,
    pub count: usize,
    pub exact_match: f64,
    pub f1: f64,
    pub per_category: Vec<CategoryMetrics>,
    pub mean_latency_ms: f64,
    pub mean_pred_chars: f64,
    pub mean_gold_chars: f64,
}

struct Scored {
    category: QaCategory,
    em: f64,
    f1: f64,
    latency_ms: f64,
    pred_chars: usize,
    gold_chars: usize,
}

fn aggregate(scored: Vec<Scored>, normalized: bool) -> QaMetrics {
    let n = scored.len() as f64;
    let mean = |f: &dyn Fn(&Scored) -> f64| scored.iter().map(f).sum::<f64>() / n;
    let mut groups: BTreeMap<QaCategory, Vec<&Scored>> = BTreeMap::new();
    for s in &scored {
        groups.entry(s.category).or_default().push(s);
    }
    let per_category = groups
        .into_iter()
        .map(|(category, items)| {
            let m = items.len() as f64;
            CategoryMetrics {
                category,
                count: items.len(),
                exact_match: items.iter().map(|s| s.em).sum::<f64>() / m,
                f1: items.iter().map(|s| s.f1).sum::<f64>() / m,
            }
        })
        .collect();
    QaMetrics {
        normalized,
        count: scored.len(),
        exact_match: mean(&|s| s.em),
        f1: mean(&|s| s.f1),
        per_category,
        mean_latency_ms: mean(&|s| s.latency_ms),
        mean_pred_chars: mean(&|s| s.pred_chars as f64),
        mean_gold_chars: mean(&|s| s.gold_chars as f64),
    }
}

/// Scores `reader` (question, context -> answer text) on `pairs`.
pub fn evaluate_reader<F>(pairs: &[QaPair], reader: F, normalized: bool) -> Result<QaMetrics>
where
    F: Fn(&str, &str) -> String + Sync,
{
    if pairs.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty QA set"));
    }
    let scored = pairs
        .par_iter()
        .map(|p| {
            let t0 = Instant::now();
            let pred = reader(&p.question, &p.context);
            let latency_ms = t0.elapsed().as_secs_f64() * 1e3;
            Scored {
                category: p.category,
                em: exact_match(&pred, &p.answer_text, normalized),
                f1: token_f1(&pred, &p.answer_text, normalized),
                latency_ms,
                pred_chars: pred.chars().count(),
                gold_chars: p.answer_text.chars().count(),
            }
        })
        .collect();
    Ok(aggregate(scored, normalized))
}

/// Scores an external prediction map (pair id -> answer text). Missing ids
/// count as empty predictions; latency is not measured.
pub fn evaluate_predictions(
    pairs: &[QaPair],
    predictions: &HashMap<String, String>,
    normalized: bool,
) -> Result<QaMetrics> {
    if pairs.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty QA set"));
    }
    let scored = pairs
        .iter()
        .map(|p| {
            let pred = predictions.get(&p.id).map_or("", String::as_str);
            Scored {
                category: p.category,
                em: exact_match(pred, &p.answer_text, normalized),
                f1: token_f1(pred, &p.answer_text, normalized),
                latency_ms: 0.0,
                pred_chars: pred.chars().count(),
                gold_chars: p.answer_text.chars().count(),
            }
        })
        .collect();
    Ok(aggregate(scored, normalized))
}

/// The rule-based reader as a plain function, for [`evaluate_reader`].
pub fn rule_based(question: &str, context: &str) -> String {
    extract(question, context).text
}
