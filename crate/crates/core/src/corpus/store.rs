use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::{ingest_records, Coordinate, ToponymRecord, ToponymSubtype, ToponymType};
use crate::{Error, Result};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema_version: u32,
    pub record_count: usize,
    pub with_coordinates: usize,
}

#[derive(Serialize)]
struct CanonicalRecord<'a> {
    id: &'a str,
    url: &'a str,
    toponym_type: Option<ToponymType>,
    toponym_subtype: ToponymSubtype,
    geographical_object: &'a str,
    name_rus: &'a str,
    name_tat: &'a str,
    federal_subject: &'a str,
    physio_details: &'a str,
    geographical_location: &'a str,
    etymology: &'a str,
    sources: &'a str,
    latitude: Option<Box<RawValue>>,
    longitude: Option<Box<RawValue>>,
    has_map: bool,
}

/// JSON number when the original text is one, otherwise a JSON string.
fn coordinate_json(c: &Option<Coordinate>) -> Result<Option<Box<RawValue>>> {
    let Some(c) = c else { return Ok(None) };
    let text = c.text.trim();
    let raw = match serde_json::from_str::<serde_json::Number>(text) {
        Ok(_) => RawValue::from_string(text.to_string())?,
        Err(_) => RawValue::from_string(serde_json::to_string(text)?)?,
    };
    Ok(Some(raw))
}

pub fn record_to_json(rec: &ToponymRecord) -> Result<String> {
    let canonical = CanonicalRecord {
        id: &rec.id,
        url: &rec.url,
        toponym_type: rec.toponym_type,
        toponym_subtype: rec.toponym_subtype,
        geographical_object: &rec.geographical_object,
        name_rus: &rec.name_rus,
        name_tat: &rec.name_tat,
        federal_subject: &rec.federal_subject,
        physio_details: &rec.physio_details,
        geographical_location: &rec.geographical_location,
        etymology: &rec.etymology,
        sources: &rec.sources,
        latitude: coordinate_json(&rec.latitude)?,
        longitude: coordinate_json(&rec.longitude)?,
        has_map: rec.has_map,
    };
    Ok(serde_json::to_string(&canonical)?)
}

/// Writes `records.jsonl` and `manifest.json` into `dir`, creating it.
pub fn save_corpus(dir: &Path, records: &[ToponymRecord]) -> Result<CorpusManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(RECORDS_FILE);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut out = BufWriter::new(file);
    for rec in records {
        writeln!(out, "{}", record_to_json(rec)?).map_err(|e| Error::io(&path, e))?;
    }
    out.flush().map_err(|e| Error::io(&path, e))?;

    let manifest = CorpusManifest {
        schema_version: SCHEMA_VERSION,
        record_count: records.len(),
        with_coordinates: records.iter().filter(|r| r.point().is_some()).count(),
    };
    let mpath = dir.join(MANIFEST_FILE);
    let body = serde_json::to_string_pretty(&manifest)?;
    fs::write(&mpath, body + "\n").map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

/// Loads a corpus directory. Any record that fails validation here is a
/// data error: the directory was supposed to hold validated records.
pub fn load_corpus(dir: &Path) -> Result<(Vec<ToponymRecord>, CorpusManifest)> {
    let mpath = dir.join(MANIFEST_FILE);
    let body = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: CorpusManifest = serde_json::from_str(&body)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::Format(format!(
            "unsupported corpus schema version {}",
            manifest.schema_version
        )));
    }
    let path = dir.join(RECORDS_FILE);
    let file = File::open(&path).map_err(|e| Error::io(&path, e))?;
    let ingested = ingest_records(BufReader::new(file))?;
    if let Some(d) = ingested.diagnostics.first() {
        return Err(Error::Data(format!("{}: {d}", path.display())));
    }
    if ingested.records.len() != manifest.record_count {
        return Err(Error::Data(format!(
            "manifest lists {} records, found {}",
            manifest.record_count,
            ingested.records.len()
        )));
    }
    Ok((ingested.records, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::rantamak;

    #[test]
    fn save_then_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let mut other = ToponymRecord::named("2", "");
        other.name_tat = "Кабан".into();
        let records = vec![rantamak(), other];
        let manifest = save_corpus(dir.path(), &records).unwrap();
        assert_eq!(manifest.record_count, 2);
        assert_eq!(manifest.with_coordinates, 1);
        let (loaded, m2) = load_corpus(dir.path()).unwrap();
        assert_eq!(loaded, records);
        assert_eq!(m2, manifest);
    }

    #[test]
    fn canonical_json_keeps_coordinate_text() {
        let json = record_to_json(&rantamak()).unwrap();
        assert!(json.contains(r#""latitude":55.205461"#), "{json}");
    }
}
