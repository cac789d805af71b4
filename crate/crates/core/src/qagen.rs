//! SQuAD-style QA corpus generation from toponym records.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{assemble_qa_context, FieldCategory, ToponymRecord};
use crate::semantic::fnv1a64;
use crate::{Error, Result};

pub const DEFAULT_MAX_PER_RECORD: usize = 10;
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaCategory {
    ObjectType,
    Location,
    Etymology,
    Coordinates,
    Region,
    Sources,
    Physio,
}

impl QaCategory {
    /// Generation order, following the field order of the QA context.
    pub const ORDER: [QaCategory; 7] = [
        QaCategory::ObjectType,
        QaCategory::Etymology,
        QaCategory::Location,
        QaCategory::Region,
        QaCategory::Physio,
        QaCategory::Sources,
        QaCategory::Coordinates,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            QaCategory::ObjectType => "object_type",
            QaCategory::Location => "location",
            QaCategory::Etymology => "etymology",
            QaCategory::Coordinates => "coordinates",
            QaCategory::Region => "region",
            QaCategory::Sources => "sources",
            QaCategory::Physio => "physio",
        }
    }

    pub fn field(self) -> FieldCategory {
        match self {
            QaCategory::ObjectType => FieldCategory::ObjectType,
            QaCategory::Location => FieldCategory::Location,
            QaCategory::Etymology => FieldCategory::Etymology,
            QaCategory::Coordinates => FieldCategory::Coordinates,
            QaCategory::Region => FieldCategory::Region,
            QaCategory::Sources => FieldCategory::Sources,
            QaCategory::Physio => FieldCategory::Physio,
        }
    }
}

impl std::fmt::Display for QaCategory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuestionTemplate {
    pub category: QaCategory,
    pub pattern: &'static str,
}

impl QuestionTemplate {
    pub fn fill(&self, name: &str) -> String {
        self.pattern.replacen("{name}", name, 1)
    }
}

const TEMPLATES: [QuestionTemplate; 17] = {
    use QaCategory::*;
    const fn t(category: QaCategory, pattern: &'static str) -> QuestionTemplate {
        QuestionTemplate { category, pattern }
    }
    [
        t(ObjectType, "Что такое {name}?"),
        t(ObjectType, "Какой тип у {name}?"),
        t(ObjectType, "К какому типу относится {name}?"),
        t(Location, "Где находится {name}?"),
        t(Location, "В каком месте расположен {name}?"),
        t(Location, "Где именно расположен {name}?"),
        t(Etymology, "Что означает название {name}?"),
        t(Etymology, "Почему {name} так называется?"),
        t(Etymology, "Каково происхождение названия {name}?"),
        t(Coordinates, "Какие координаты у {name}?"),
        t(Coordinates, "Где на карте находится {name}?"),
        t(Region, "В каком регионе находится {name}?"),
        t(Region, "Какой федеральный субъект у {name}?"),
        t(Sources, "Какие источники упоминают {name}?"),
        t(Sources, "Где можно прочитать о {name}?"),
        t(Physio, "Какие физико-географические сведения о {name}?"),
        t(Physio, "Что известно о географических особенностях {name}?"),
    ]
};

pub fn builtin_templates() -> &'static [QuestionTemplate] {
    &TEMPLATES
}

pub fn templates_for(category: QaCategory) -> impl Iterator<Item = &'static QuestionTemplate> {
    TEMPLATES.iter().filter(move |t| t.category == category)
}

/// One extractive example. `answer_start` counts characters, not bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaPair {
    pub id: String,
    pub context: String,
    pub question: String,
    pub answer_text: String,
    pub answer_start: usize,
    pub category: QaCategory,
}

impl QaPair {
    /// Whether the answer occurs in the context at `answer_start`.
    pub fn span_is_valid(&self) -> bool {
        span_matches(&self.context, self.answer_start, &self.answer_text)
    }
}

pub(crate) fn span_matches(context: &str, start: usize, text: &str) -> bool {
    let mut chars = context.chars().skip(start);
    text.chars().all(|c| chars.next() == Some(c))
}

/// One question per populated category, the template drawn with a seeded
/// RNG that also depends on the record id.
pub fn generate_pairs(rec: &ToponymRecord, seed: u64, max_per_record: usize, max_context: usize) -> Vec<QaPair> {
    let name = rec.display_name();
    if name.is_empty() {
        return Vec::new();
    }
    let ctx = assemble_qa_context(rec, max_context);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(rec.id.as_bytes()));
    let mut pairs = Vec::new();
    for category in QaCategory::ORDER {
        if pairs.len() >= max_per_record {
            break;
        }
        let Some(seg) = ctx.segment(category.field()) else {
            continue;
        };
        if seg.value.is_empty() {
            continue;
        }
        let options: Vec<&QuestionTemplate> = templates_for(category).collect();
        let template = options.choose(&mut rng).expect("every category has templates");
        pairs.push(QaPair {
            id: format!("{}_{}_0", rec.id, category),
            context: ctx.text.clone(),
            question: template.fill(name),
            answer_text: seg.value.clone(),
            answer_start: seg.start_of_value,
            category,
        });
    }
    pairs
}

pub fn generate_corpus(records: &[ToponymRecord], seed: u64, max_per_record: usize, max_context: usize) -> Vec<QaPair> {
    use rayon::prelude::*;
    records
        .par_iter()
        .flat_map_iter(|r| generate_pairs(r, seed, max_per_record, max_context))
        .collect()
}

/// Stratified split: within each category a seeded shuffle, then the first
/// ceil(n · train_fraction) pairs go to train.
pub fn split_corpus(pairs: &[QaPair], train_fraction: f64, seed: u64) -> Result<(Vec<QaPair>, Vec<QaPair>)> {
    if pairs.is_empty() {
        return Err(Error::invalid("cannot split an empty QA corpus"));
    }
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} outside [0, 1]"
        )));
    }
    let mut by_cat: BTreeMap<QaCategory, Vec<&QaPair>> = BTreeMap::new();
    for p in pairs {
        by_cat.entry(p.category).or_default().push(p);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (_, mut group) in by_cat {
        group.shuffle(&mut rng);
        // guard against 0.9 * 10 landing a hair above 9
        let n_train = ((group.len() as f64 * train_fraction) - 1e-9).ceil().max(0.0) as usize;
        let n_train = n_train.min(group.len());
        train.extend(group[..n_train].iter().map(|p| (*p).clone()));
        val.extend(group[n_train..].iter().map(|p| (*p).clone()));
    }
    Ok((train, val))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquadAnswer {
    pub text: String,
    pub answer_start: usize,
}

/// Line of the flat JSONL form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatPair {
    pub id: String,
    pub context: String,
    pub question: String,
    pub answers: Vec<SquadAnswer>,
    pub category: QaCategory,
}

impl From<&QaPair> for FlatPair {
    fn from(p: &QaPair) -> Self {
        FlatPair {
            id: p.id.clone(),
            context: p.context.clone(),
            question: p.question.clone(),
            answers: vec![SquadAnswer {
                text: p.answer_text.clone(),
                answer_start: p.answer_start,
            }],
            category: p.category,
        }
    }
}

impl TryFrom<FlatPair> for QaPair {
    type Error = Error;

    fn try_from(f: FlatPair) -> Result<Self> {
        let answer = f
            .answers
            .into_iter()
            .next()
            .ok_or_else(|| Error::Data(format!("pair {} has no answers", f.id)))?;
        let pair = QaPair {
            id: f.id,
            context: f.context,
            question: f.question,
            answer_text: answer.text,
            answer_start: answer.answer_start,
            category: f.category,
        };
        if !pair.span_is_valid() {
            return Err(Error::Data(format!(
                "pair {}: answer does not occur at offset {}",
                pair.id, pair.answer_start
            )));
        }
        Ok(pair)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadFile {
    version: String,
    data: Vec<SquadArticle>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadArticle {
    title: String,
    paragraphs: Vec<SquadParagraph>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadParagraph {
    context: String,
    qas: Vec<SquadQuestion>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SquadQuestion {
    id: String,
    question: String,
    answers: Vec<SquadAnswer>,
    category: QaCategory,
}

fn record_id(pair_id: &str, category: QaCategory) -> &str {
    pair_id
        .strip_suffix(&format!("_{category}_0"))
        .or_else(|| pair_id.rsplit_once('_').map(|(head, _)| head))
        .unwrap_or(pair_id)
}

/// Nested SQuAD v1.1 layout; consecutive pairs sharing a context become one
/// paragraph, titled by the record id.
pub fn write_squad<W: Write>(out: W, pairs: &[QaPair]) -> Result<()> {
    let mut data: Vec<SquadArticle> = Vec::new();
    for p in pairs {
        let title = record_id(&p.id, p.category);
        let q = SquadQuestion {
            id: p.id.clone(),
            question: p.question.clone(),
            answers: vec![SquadAnswer {
                text: p.answer_text.clone(),
                answer_start: p.answer_start,
            }],
            category: p.category,
        };
        match data.last_mut() {
            Some(a) if a.title == title && a.paragraphs[0].context == p.context => a.paragraphs[0].qas.push(q),
            _ => data.push(SquadArticle {
                title: title.to_string(),
                paragraphs: vec![SquadParagraph {
                    context: p.context.clone(),
                    qas: vec![q],
                }],
            }),
        }
    }
    let file = SquadFile {
        version: "1.1".into(),
        data,
    };
    serde_json::to_writer(out, &file)?;
    Ok(())
}

pub fn read_squad<R: std::io::Read>(input: R) -> Result<Vec<QaPair>> {
    let file: SquadFile = serde_json::from_reader(input)?;
    let mut pairs = Vec::new();
    for article in file.data {
        for para in article.paragraphs {
            for q in para.qas {
                pairs.push(QaPair::try_from(FlatPair {
                    id: q.id,
                    context: para.context.clone(),
                    question: q.question,
                    answers: q.answers,
                    category: q.category,
                })?);
            }
        }
    }
    Ok(pairs)
}

pub fn write_flat<W: Write>(mut out: W, pairs: &[QaPair]) -> Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut out, &FlatPair::from(p))?;
        out.write_all(b"\n").map_err(|e| Error::io("<flat>", e))?;
    }
    Ok(())
}

pub fn read_flat<R: BufRead>(input: R) -> Result<Vec<QaPair>> {
    let mut pairs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<flat>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let flat: FlatPair = serde_json::from_str(&line).map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        pairs.push(QaPair::try_from(flat)?);
    }
    Ok(pairs)
}

pub fn emit_squad(pairs: &[QaPair], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_squad(&mut w, pairs)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn emit_flat(pairs: &[QaPair], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_flat(&mut w, pairs)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads either layout: a file that parses as a single SQuAD document is
/// nested, anything else is treated as flat JSONL.
pub fn load_pairs(path: &Path) -> Result<Vec<QaPair>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match serde_json::from_str::<SquadFile>(&text) {
        Ok(_) => read_squad(text.as_bytes()),
        Err(_) => read_flat(BufReader::new(text.as_bytes())),
    }
}
