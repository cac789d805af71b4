//! Toponym records: ingestion, validation, persistence and the two
//! canonical context strings built from them.

mod context;
mod ingest;
mod store;

use serde::{Deserialize, Serialize};

pub use context::{
    assemble_qa_context, assemble_retrieval_context, FieldCategory, FieldSegment, QaContext, DEFAULT_MAX_CONTEXT,
    SEPARATOR,
};
pub use ingest::{ingest_records, parse_record, Diagnostic, Ingested};
pub use store::{
    load_corpus, record_to_json, save_corpus, CorpusManifest, MANIFEST_FILE, RECORDS_FILE, SCHEMA_VERSION,
};

use crate::geo::GeoPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ToponymType {
    Toponym,
    Microtoponym,
}

impl ToponymType {
    /// Label used in the dataset and in rendered contexts.
    pub fn label(self) -> &'static str {
        match self {
            ToponymType::Toponym => "Топоним",
            ToponymType::Microtoponym => "Микротопоним",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ToponymSubtype {
    Oikonym,
    Hydronym,
    Oronym,
    None,
}

impl ToponymSubtype {
    /// `None` has no label: "no type" carries no information for a context.
    pub fn label(self) -> Option<&'static str> {
        match self {
            ToponymSubtype::Oikonym => Some("Ойконим"),
            ToponymSubtype::Hydronym => Some("Гидроним"),
            ToponymSubtype::Oronym => Some("Ороним"),
            ToponymSubtype::None => None,
        }
    }
}

/// A coordinate value together with the decimal text it was read from.
///
/// Contexts and answers reuse `text` verbatim so that answers stay exact
/// substrings of the source data (no float reformatting).
#[derive(Debug, Clone, PartialEq)]
pub struct Coordinate {
    pub value: f64,
    pub text: String,
}

impl Coordinate {
    pub fn new(text: impl Into<String>) -> Option<Self> {
        let text = text.into();
        let value: f64 = text.trim().parse().ok()?;
        value.is_finite().then_some(Coordinate { value, text })
    }

    pub fn from_value(value: f64) -> Self {
        Coordinate {
            value,
            text: value.to_string(),
        }
    }
}

/// One gazetteer entry. Empty strings stand for absent optional fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ToponymRecord {
    pub id: String,
    pub url: String,
    pub toponym_type: Option<ToponymType>,
    pub toponym_subtype: ToponymSubtype,
    pub geographical_object: String,
    pub name_rus: String,
    pub name_tat: String,
    pub federal_subject: String,
    pub physio_details: String,
    pub geographical_location: String,
    pub etymology: String,
    pub sources: String,
    pub latitude: Option<Coordinate>,
    pub longitude: Option<Coordinate>,
    pub has_map: bool,
}

impl ToponymRecord {
    /// A record with only an id and a Russian name; the rest empty.
    pub fn named(id: impl Into<String>, name_rus: impl Into<String>) -> Self {
        ToponymRecord {
            id: id.into(),
            url: String::new(),
            toponym_type: None,
            toponym_subtype: ToponymSubtype::None,
            geographical_object: String::new(),
            name_rus: name_rus.into(),
            name_tat: String::new(),
            federal_subject: String::new(),
            physio_details: String::new(),
            geographical_location: String::new(),
            etymology: String::new(),
            sources: String::new(),
            latitude: None,
            longitude: None,
            has_map: false,
        }
    }

    pub fn with_coordinates(mut self, lat: &str, lon: &str) -> Self {
        self.latitude = Coordinate::new(lat);
        self.longitude = Coordinate::new(lon);
        self
    }

    pub fn point(&self) -> Option<GeoPoint> {
        match (&self.latitude, &self.longitude) {
            (Some(lat), Some(lon)) => GeoPoint::new(lat.value, lon.value).ok(),
            _ => None,
        }
    }

    /// Russian name when present, otherwise the Tatar one.
    pub fn display_name(&self) -> &str {
        if self.name_rus.is_empty() {
            &self.name_tat
        } else {
            &self.name_rus
        }
    }

    /// "<lat>, <lon>" using the original decimal text.
    pub fn coordinates_text(&self) -> Option<String> {
        match (&self.latitude, &self.longitude) {
            (Some(lat), Some(lon)) => Some(format!("{}, {}", lat.text, lon.text)),
            _ => None,
        }
    }
}

/// Retrieval unit derived from a record.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedDocument {
    pub doc_id: String,
    pub context: String,
    pub point: Option<GeoPoint>,
    pub display_name: String,
}

impl IndexedDocument {
    pub fn from_record(rec: &ToponymRecord) -> Self {
        IndexedDocument {
            doc_id: rec.id.clone(),
            context: assemble_retrieval_context(rec),
            point: rec.point(),
            display_name: rec.display_name().to_string(),
        }
    }
}
