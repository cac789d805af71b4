use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use serde::Serialize;
use serde_json::value::RawValue;
use serde_json::Value;

use super::{Coordinate, ToponymRecord, ToponymSubtype, ToponymType};
use crate::{Error, Result};

/// Why a line or record was rejected. `line` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: usize,
    pub record_id: Option<String>,
    pub field: String,
    pub reason: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "line {}: record {}: {}: {}",
            self.line,
            self.record_id.as_deref().unwrap_or("?"),
            self.field,
            self.reason
        )
    }
}

#[derive(Debug, Default)]
pub struct Ingested {
    pub records: Vec<ToponymRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Reads line-delimited JSON records. Invalid records are reported and
/// dropped, never repaired; blank lines are skipped.
pub fn ingest_records<R: BufRead>(reader: R) -> Result<Ingested> {
    let mut out = Ingested::default();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(&line) {
            Ok(rec) => {
                if !seen.insert(rec.id.clone()) {
                    out.diagnostics.push(Diagnostic {
                        line: lineno,
                        record_id: Some(rec.id),
                        field: "id".into(),
                        reason: "duplicate id".into(),
                    });
                } else {
                    out.records.push(rec);
                }
            }
            Err(mut diags) => {
                for d in &mut diags {
                    d.line = lineno;
                }
                out.diagnostics.extend(diags);
            }
        }
    }
    Ok(out)
}

/// Parses and validates one record line. All invariant violations of the
/// record are collected; the `line` of returned diagnostics is 0.
pub fn parse_record(line: &str) -> std::result::Result<ToponymRecord, Vec<Diagnostic>> {
    let fields: HashMap<String, Box<RawValue>> = match serde_json::from_str(line) {
        Ok(f) => f,
        Err(e) => {
            return Err(vec![Diagnostic {
                line: 0,
                record_id: None,
                field: "<line>".into(),
                reason: format!("malformed record: {e}"),
            }])
        }
    };
    let mut reader = FieldReader {
        fields,
        diags: Vec::new(),
        id: None,
    };

    let id = reader.text(&["id"]);
    if id.is_empty() {
        reader.fail("id", "missing id");
    } else {
        reader.id = Some(id.clone());
    }

    let toponym_type = match reader.text(&["toponym_type"]).to_lowercase().as_str() {
        "" => None,
        "toponym" | "топоним" => Some(ToponymType::Toponym),
        "microtoponym" | "микротопоним" => Some(ToponymType::Microtoponym),
        other => {
            let reason = format!("unknown toponym type {other:?}");
            reader.fail("toponym_type", &reason);
            None
        }
    };
    let toponym_subtype = match reader.text(&["toponym_subtype"]).to_lowercase().as_str() {
        "oikonym" | "ойконим" => ToponymSubtype::Oikonym,
        "hydronym" | "гидроним" => ToponymSubtype::Hydronym,
        "oronym" | "ороним" => ToponymSubtype::Oronym,
        "" | "none" | "нет типа" | "без типа" | "нет" => ToponymSubtype::None,
        other => {
            let reason = format!("unknown toponym subtype {other:?}");
            reader.fail("toponym_subtype", &reason);
            ToponymSubtype::None
        }
    };

    let latitude = reader.coordinate("latitude", 90.0);
    let longitude = reader.coordinate("longitude", 180.0);
    if latitude.is_some() != longitude.is_some() {
        reader.fail(
            "latitude/longitude",
            "latitude and longitude must be both present or both absent",
        );
    }

    let rec = ToponymRecord {
        id,
        url: reader.text(&["url"]),
        toponym_type,
        toponym_subtype,
        geographical_object: reader.text(&["geographical_object"]),
        name_rus: reader.text(&["name_rus"]),
        name_tat: reader.text(&["name_tat"]),
        federal_subject: reader.text(&["federal_subject", "region"]),
        physio_details: reader.text(&["physio_details", "physiographic_details"]),
        geographical_location: reader.text(&["geographical_location"]),
        etymology: reader.text(&["etymology"]),
        sources: reader.text(&["sources", "bibliographic_sources"]),
        latitude,
        longitude,
        has_map: reader.flag("has_map"),
    };
    if rec.name_rus.is_empty() && rec.name_tat.is_empty() {
        reader.fail("name_rus/name_tat", "at least one name is required");
    }

    if reader.diags.is_empty() {
        Ok(rec)
    } else {
        Err(reader.diags)
    }
}

struct FieldReader {
    fields: HashMap<String, Box<RawValue>>,
    diags: Vec<Diagnostic>,
    id: Option<String>,
}

impl FieldReader {
    fn fail(&mut self, field: &str, reason: &str) {
        self.diags.push(Diagnostic {
            line: 0,
            record_id: self.id.clone(),
            field: field.into(),
            reason: reason.into(),
        });
    }

    fn raw(&self, names: &[&str]) -> Option<&RawValue> {
        names.iter().find_map(|n| self.fields.get(*n)).map(|b| b.as_ref())
    }

    /// Strings and numbers become trimmed text; null, "" and other types are empty.
    fn text(&mut self, names: &[&str]) -> String {
        let Some(raw) = self.raw(names) else {
            return String::new();
        };
        match serde_json::from_str::<Value>(raw.get()) {
            Ok(Value::String(s)) => s.trim().to_string(),
            Ok(Value::Number(_)) => raw.get().trim().to_string(),
            Ok(Value::Null) => String::new(),
            _ => {
                self.fail(names[0], "expected a string");
                String::new()
            }
        }
    }

    fn coordinate(&mut self, name: &str, limit: f64) -> Option<Coordinate> {
        let raw = self.raw(&[name])?.get().trim().to_string();
        let text = match serde_json::from_str::<Value>(&raw) {
            Ok(Value::Null) => return None,
            Ok(Value::String(s)) if s.trim().is_empty() => return None,
            Ok(Value::String(s)) => s.trim().to_string(),
            Ok(Value::Number(_)) => raw,
            _ => {
                self.fail(name, "expected a decimal number");
                return None;
            }
        };
        let Some(coord) = Coordinate::new(text.clone()) else {
            self.fail(name, &format!("unparseable coordinate {text:?}"));
            return None;
        };
        if coord.value.abs() > limit {
            self.fail(name, &format!("{} out of range [-{limit}, {limit}]", coord.value));
            return None;
        }
        Some(coord)
    }

    fn flag(&mut self, name: &str) -> bool {
        let Some(raw) = self.raw(&[name]) else {
            return false;
        };
        match serde_json::from_str::<Value>(raw.get()) {
            Ok(Value::Bool(b)) => b,
            Ok(Value::Number(n)) => n.as_f64().is_some_and(|v| v != 0.0),
            Ok(Value::String(s)) => {
                matches!(s.trim().to_lowercase().as_str(), "true" | "1" | "yes" | "да")
            }
            _ => false,
        }
    }
}
