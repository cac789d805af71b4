use serde::{Deserialize, Serialize};

use super::ToponymRecord;

/// Field separator in both context flavours.
pub const SEPARATOR: &str = " | ";

pub const DEFAULT_MAX_CONTEXT: usize = 2048;

/// English-prefix context used for retrieval. Coordinates and the federal
/// subject are never included.
pub fn assemble_retrieval_context(rec: &ToponymRecord) -> String {
    let kind = rec.toponym_type.map(|t| t.label()).unwrap_or("");
    let subtype = rec.toponym_subtype.label().unwrap_or("");
    let fields: [(&str, &str); 9] = [
        ("Name (rus)", &rec.name_rus),
        ("Name (tat)", &rec.name_tat),
        ("Type", kind),
        ("Subtype", subtype),
        ("Object", &rec.geographical_object),
        ("Etymology", &rec.etymology),
        ("Details", &rec.physio_details),
        ("Location", &rec.geographical_location),
        ("Sources", &rec.sources),
    ];
    fields
        .iter()
        .filter(|(_, value)| !value.is_empty())
        .map(|(prefix, value)| format!("{prefix}: {}", sanitize(value)))
        .collect::<Vec<_>>()
        .join(SEPARATOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FieldCategory {
    NameRus,
    NameTat,
    ObjectType,
    Etymology,
    Location,
    Region,
    Physio,
    Sources,
    Coordinates,
}

impl FieldCategory {
    /// Rendering order of the QA context.
    pub const ORDER: [FieldCategory; 9] = [
        FieldCategory::NameRus,
        FieldCategory::NameTat,
        FieldCategory::ObjectType,
        FieldCategory::Etymology,
        FieldCategory::Location,
        FieldCategory::Region,
        FieldCategory::Physio,
        FieldCategory::Sources,
        FieldCategory::Coordinates,
    ];

    /// Russian prefix including the trailing ": ".
    pub fn prefix(self) -> &'static str {
        match self {
            FieldCategory::NameRus => "Название (рус): ",
            FieldCategory::NameTat => "Название (тат): ",
            FieldCategory::ObjectType => "Объект: ",
            FieldCategory::Etymology => "Этимология: ",
            FieldCategory::Location => "Расположение: ",
            FieldCategory::Region => "Регион: ",
            FieldCategory::Physio => "Физико-географические сведения: ",
            FieldCategory::Sources => "Источники: ",
            FieldCategory::Coordinates => "Координаты: ",
        }
    }

    fn value(self, rec: &ToponymRecord) -> Option<String> {
        let raw = match self {
            FieldCategory::NameRus => &rec.name_rus,
            FieldCategory::NameTat => &rec.name_tat,
            FieldCategory::ObjectType => &rec.geographical_object,
            FieldCategory::Etymology => &rec.etymology,
            FieldCategory::Location => &rec.geographical_location,
            FieldCategory::Region => &rec.federal_subject,
            FieldCategory::Physio => &rec.physio_details,
            FieldCategory::Sources => &rec.sources,
            FieldCategory::Coordinates => return rec.coordinates_text(),
        };
        (!raw.is_empty()).then(|| sanitize(raw))
    }
}

/// One rendered field of a QA context. Offsets count Unicode scalar values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSegment {
    pub category: FieldCategory,
    pub prefix: String,
    pub value: String,
    pub start_of_value: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QaContext {
    pub text: String,
    pub segments: Vec<FieldSegment>,
}

impl QaContext {
    pub fn segment(&self, category: FieldCategory) -> Option<&FieldSegment> {
        self.segments.iter().find(|s| s.category == category)
    }

    /// Length in characters.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }
}

/// Russian-prefix context used for QA, with exact value offsets.
///
/// When the full rendering exceeds `max_len` characters every value except
/// the coordinates is cut to a share of the remaining budget proportional
/// to its length; prefixes and separators are never touched. Coordinates
/// are kept whole because they are answers in their own right.
pub fn assemble_qa_context(rec: &ToponymRecord, max_len: usize) -> QaContext {
    let mut fields: Vec<(FieldCategory, String)> = FieldCategory::ORDER
        .iter()
        .filter_map(|&cat| cat.value(rec).map(|v| (cat, v)))
        .collect();

    let len = |s: &str| s.chars().count();
    let raw_len: usize = fields.iter().map(|(cat, v)| len(cat.prefix()) + len(v)).sum::<usize>()
        + SEPARATOR.len() * fields.len().saturating_sub(1);

    if raw_len > max_len {
        let fixed: usize = fields
            .iter()
            .map(|(cat, v)| len(cat.prefix()) + if *cat == FieldCategory::Coordinates { len(v) } else { 0 })
            .sum::<usize>()
            + SEPARATOR.len() * fields.len().saturating_sub(1);
        let budget = max_len.saturating_sub(fixed);
        let truncatable: usize = fields
            .iter()
            .filter(|(cat, _)| *cat != FieldCategory::Coordinates)
            .map(|(_, v)| len(v))
            .sum();
        for (cat, value) in fields.iter_mut() {
            if *cat == FieldCategory::Coordinates {
                continue;
            }
            let keep = len(value) * budget / truncatable;
            let cut: String = value.chars().take(keep).collect();
            *value = cut.trim_end().to_string();
        }
    }

    let mut text = String::new();
    let mut offset = 0usize;
    let mut segments = Vec::with_capacity(fields.len());
    for (i, (cat, value)) in fields.into_iter().enumerate() {
        if i > 0 {
            text.push_str(SEPARATOR);
            offset += SEPARATOR.len();
        }
        let prefix = cat.prefix();
        text.push_str(prefix);
        offset += len(prefix);
        text.push_str(&value);
        segments.push(FieldSegment {
            category: cat,
            prefix: prefix.to_string(),
            start_of_value: offset,
            value: value.clone(),
        });
        offset += len(&value);
    }
    QaContext { text, segments }
}

/// A literal '|' inside a value would make the separator ambiguous.
fn sanitize(value: &str) -> String {
    value.replace('|', "/")
}
