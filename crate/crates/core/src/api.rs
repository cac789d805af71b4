//! JSON wire types of the HTTP API and the functions that produce them.
//!
//! The service, the client and the in-process CLI all go through
//! [`search`], [`ask`], [`doc`] and [`health`], so every front end returns
//! byte-identical payloads for the same engine and parameters.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::record_to_json;
use crate::engine::Engine;
use crate::geo::GeoPoint;
use crate::hybrid::{Method, Notice, ScoredHit, SearchQuery};
use crate::qagen::QaCategory;

const SNIPPET_CHARS: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    BadRequest,
    NotFound,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub error: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

impl ApiError {
    pub fn bad_request(fields: Vec<FieldError>) -> Self {
        let error = fields
            .iter()
            .map(|f| format!("{}: {}", f.field, f.message))
            .collect::<Vec<_>>()
            .join("; ");
        ApiError {
            kind: ErrorKind::BadRequest,
            error,
            fields,
        }
    }

    pub fn field(field: &str, message: impl Into<String>) -> Self {
        Self::bad_request(vec![FieldError {
            field: field.into(),
            message: message.into(),
        }])
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        ApiError {
            kind: ErrorKind::NotFound,
            error: what.into(),
            fields: Vec::new(),
        }
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        ApiError {
            kind: ErrorKind::Internal,
            error: e.to_string(),
            fields: Vec::new(),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.error)
    }
}

impl std::error::Error for ApiError {}

/// Query parameters of `GET /api/search`. Absent values take the engine
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
}

fn parse_field<T: std::str::FromStr>(
    raw: &HashMap<String, String>,
    name: &str,
    what: &str,
    errors: &mut Vec<FieldError>,
) -> Option<T> {
    let v = raw.get(name)?;
    if v.is_empty() {
        return None;
    }
    match v.parse() {
        Ok(x) => Some(x),
        Err(_) => {
            errors.push(FieldError {
                field: name.into(),
                message: format!("expected {what}, got {v:?}"),
            });
            None
        }
    }
}

impl SearchParams {
    /// Parses raw query-string pairs, reporting every unparsable field.
    pub fn from_pairs(raw: &HashMap<String, String>) -> Result<Self, ApiError> {
        let mut errors = Vec::new();
        let params = SearchParams {
            q: raw.get("q").cloned(),
            lat: parse_field(raw, "lat", "a number", &mut errors),
            lon: parse_field(raw, "lon", "a number", &mut errors),
            radius_m: parse_field(raw, "radius_m", "a number", &mut errors),
            alpha: parse_field(raw, "alpha", "a number", &mut errors),
            k: parse_field(raw, "k", "a positive integer", &mut errors),
            method: parse_field(raw, "method", "one of hybrid, semantic, spatial, bm25", &mut errors),
        };
        if errors.is_empty() {
            Ok(params)
        } else {
            Err(ApiError::bad_request(errors))
        }
    }

    pub fn to_query(&self, engine: &Engine) -> Result<SearchQuery, ApiError> {
        let d = engine.defaults();
        let method = self.method.unwrap_or(Method::Hybrid);
        let mut errors = Vec::new();
        let point = resolve_point(self.lat, self.lon, &mut errors);
        let text = self.q.clone().unwrap_or_default();
        if method != Method::SpatialOnly && text.trim().is_empty() {
            errors.push(FieldError {
                field: "q".into(),
                message: "query text is required".into(),
            });
        }
        if method == Method::SpatialOnly
            && point.is_none()
            && errors.iter().all(|e| e.field != "lat" && e.field != "lon")
        {
            errors.push(FieldError {
                field: "lat".into(),
                message: "spatial search requires lat and lon".into(),
            });
        }
        let radius_m = check_radius(self.radius_m.unwrap_or(d.radius_m), &mut errors);
        let alpha = check_alpha(self.alpha.unwrap_or(d.alpha), &mut errors);
        let k = self.k.unwrap_or(d.k);
        if k == 0 {
            errors.push(FieldError {
                field: "k".into(),
                message: "must be at least 1".into(),
            });
        }
        if !errors.is_empty() {
            return Err(ApiError::bad_request(errors));
        }
        Ok(SearchQuery {
            text,
            point,
            radius_m,
            alpha,
            k,
            method,
        })
    }
}

fn resolve_point(lat: Option<f64>, lon: Option<f64>, errors: &mut Vec<FieldError>) -> Option<GeoPoint> {
    match (lat, lon) {
        (None, None) => None,
        (Some(_), None) => {
            errors.push(FieldError {
                field: "lon".into(),
                message: "lon is required when lat is given".into(),
            });
            None
        }
        (None, Some(_)) => {
            errors.push(FieldError {
                field: "lat".into(),
                message: "lat is required when lon is given".into(),
            });
            None
        }
        (Some(lat), Some(lon)) => {
            let mut ok = true;
            if !(-90.0..=90.0).contains(&lat) {
                ok = false;
                errors.push(FieldError {
                    field: "lat".into(),
                    message: format!("must be in [-90, 90], got {lat}"),
                });
            }
            if !(-180.0..=180.0).contains(&lon) {
                ok = false;
                errors.push(FieldError {
                    field: "lon".into(),
                    message: format!("must be in [-180, 180], got {lon}"),
                });
            }
            if ok {
                GeoPoint::new(lat, lon).ok()
            } else {
                None
            }
        }
    }
}

fn check_radius(r: f64, errors: &mut Vec<FieldError>) -> f64 {
    if !(r.is_finite() && r > 0.0) {
        errors.push(FieldError {
            field: "radius_m".into(),
            message: format!("must be positive, got {r}"),
        });
    }
    r
}

fn check_alpha(a: f64, errors: &mut Vec<FieldError>) -> f64 {
    if !(0.0..=1.0).contains(&a) {
        errors.push(FieldError {
            field: "alpha".into(),
            message: format!("must be in [0, 1], got {a}"),
        });
    }
    a
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub rank: usize,
    pub doc_id: String,
    pub name_rus: String,
    pub name_tat: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub distance_m: Option<f64>,
    pub sem_score: Option<f64>,
    pub geo_score: Option<f64>,
    pub sem_norm: Option<f64>,
    pub geo_norm: Option<f64>,
    pub combined: f64,
    pub snippet: String,
}

fn hit(engine: &Engine, h: ScoredHit) -> Hit {
    let rec = engine.record(&h.doc_id).expect("hit ids come from the corpus");
    let ctx = engine.retrieval_context(&h.doc_id).unwrap_or("");
    Hit {
        rank: h.rank,
        name_rus: rec.name_rus.clone(),
        name_tat: rec.name_tat.clone(),
        lat: rec.latitude.as_ref().map(|c| c.value),
        lon: rec.longitude.as_ref().map(|c| c.value),
        distance_m: h.distance_m,
        sem_score: h.sem_score,
        geo_score: h.geo_score,
        sem_norm: h.sem_norm,
        geo_norm: h.geo_norm,
        combined: h.combined,
        snippet: ctx.chars().take(SNIPPET_CHARS).collect(),
        doc_id: h.doc_id,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub method: Method,
    pub query: String,
    pub lat: Option<f64>,
    pub lon: Option<f64>,
    pub radius_m: f64,
    pub alpha: f64,
    pub k: usize,
    pub hits: Vec<Hit>,
    pub notices: Vec<Notice>,
}

pub fn search(engine: &Engine, params: &SearchParams) -> Result<SearchResponse, ApiError> {
    let q = params.to_query(engine)?;
    let outcome = engine.search(&q).map_err(to_api_error)?;
    Ok(SearchResponse {
        method: q.method,
        lat: q.point.map(|p| p.lat_deg),
        lon: q.point.map(|p| p.lon_deg),
        radius_m: q.radius_m,
        alpha: q.alpha,
        k: q.k,
        hits: outcome.hits.into_iter().map(|h| hit(engine, h)).collect(),
        notices: outcome.notices,
        query: q.text,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AskRequest {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskResponse {
    pub question: String,
    pub answer: String,
    pub category: Option<QaCategory>,
    pub doc_id: Option<String>,
    /// Character offset of `answer` in `context`; -1 when nothing was found.
    pub answer_start: i64,
    pub context: String,
    pub hit: Option<Hit>,
    pub notices: Vec<Notice>,
}

pub fn ask(engine: &Engine, req: &AskRequest) -> Result<AskResponse, ApiError> {
    let d = engine.defaults();
    let mut errors = Vec::new();
    if req.question.trim().is_empty() {
        errors.push(FieldError {
            field: "question".into(),
            message: "question is required".into(),
        });
    }
    let point = resolve_point(req.lat, req.lon, &mut errors);
    let radius_m = check_radius(req.radius_m.unwrap_or(d.radius_m), &mut errors);
    let alpha = check_alpha(req.alpha.unwrap_or(d.alpha), &mut errors);
    if !errors.is_empty() {
        return Err(ApiError::bad_request(errors));
    }
    let a = engine
        .answer(&req.question, point, radius_m, alpha)
        .map_err(to_api_error)?;
    Ok(AskResponse {
        question: req.question.clone(),
        answer: a.answer.text,
        category: a.answer.category_guess,
        doc_id: a.doc_id,
        answer_start: a.answer.start,
        context: a.context,
        hit: a.hit.map(|h| hit(engine, h)),
        notices: a.notices,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocResponse {
    pub record: serde_json::Value,
    pub retrieval_context: String,
    pub qa_context: String,
}

pub fn doc(engine: &Engine, id: &str) -> Result<DocResponse, ApiError> {
    let rec = engine
        .record(id)
        .ok_or_else(|| ApiError::not_found(format!("no document with id {id:?}")))?;
    let json = record_to_json(rec).map_err(ApiError::internal)?;
    Ok(DocResponse {
        record: serde_json::from_str(&json).map_err(ApiError::internal)?,
        retrieval_context: engine.retrieval_context(id).unwrap_or_default().to_string(),
        qa_context: engine.qa_context(id).map(|c| c.text).unwrap_or_default(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub records: usize,
    pub with_coordinates: usize,
    pub embedder: String,
    pub dim: usize,
}

pub fn health(engine: &Engine) -> HealthResponse {
    HealthResponse {
        status: "ok".into(),
        records: engine.records().len(),
        with_coordinates: engine.with_coordinates(),
        embedder: engine.provider_name().to_string(),
        dim: engine.dim(),
    }
}

fn to_api_error(e: crate::Error) -> ApiError {
    if e.is_invalid_argument() {
        ApiError::field("query", e.to_string())
    } else {
        ApiError::internal(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::ToponymRecord;
    use crate::semantic::HashingEncoder;

    fn engine() -> Engine {
        let recs = vec![
            ToponymRecord::named("a", "Мёша").with_coordinates("55.6", "49.9"),
            ToponymRecord::named("b", "Кабан").with_coordinates("55.76", "49.14"),
            ToponymRecord::named("c", "Без координат"),
        ];
        Engine::from_records(recs, Box::new(HashingEncoder::new(32))).unwrap()
    }

    fn pairs(kv: &[(&str, &str)]) -> HashMap<String, String> {
        kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn unparsable_fields_are_listed() {
        let err = SearchParams::from_pairs(&pairs(&[("lat", "north"), ("k", "-1"), ("method", "x")])).unwrap_err();
        let fields: Vec<_> = err.fields.iter().map(|f| f.field.as_str()).collect();
        assert_eq!(fields, ["lat", "k", "method"]);
        assert_eq!(err.kind, ErrorKind::BadRequest);
    }

    #[test]
    fn range_errors_are_field_level() {
        let e = engine();
        let p = SearchParams {
            q: Some("Мёша".into()),
            lat: Some(95.0),
            lon: Some(49.0),
            alpha: Some(2.0),
            ..Default::default()
        };
        let err = search(&e, &p).unwrap_err();
        let fields: Vec<_> = err.fields.iter().map(|f| f.field.as_str()).collect();
        assert_eq!(fields, ["lat", "alpha"]);
        let err = search(&e, &SearchParams::default()).unwrap_err();
        assert_eq!(err.fields[0].field, "q");
    }

    #[test]
    fn query_only_degrades_to_semantic() {
        let e = engine();
        let r = search(
            &e,
            &SearchParams {
                q: Some("Мёша".into()),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.notices[0].code, crate::hybrid::NoticeCode::NoPoint);
        assert_eq!(r.hits[0].doc_id, "a");
        assert_eq!(r.k, 5);
    }

    #[test]
    fn doc_lookup() {
        let e = engine();
        let d = doc(&e, "a").unwrap();
        assert_eq!(d.record["name_rus"], "Мёша");
        assert_eq!(doc(&e, "zzz").unwrap_err().kind, ErrorKind::NotFound);
    }

    #[test]
    fn ask_validation() {
        let e = engine();
        assert_eq!(ask(&e, &AskRequest::default()).unwrap_err().fields[0].field, "question");
        let r = ask(
            &e,
            &AskRequest {
                question: "Какие координаты у Мёша?".into(),
                lat: Some(55.6),
                lon: Some(49.9),
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.answer, "55.6, 49.9");
        assert_eq!(r.category, Some(QaCategory::Coordinates));
    }

    #[test]
    fn params_roundtrip_through_query_string_form() {
        let p = SearchParams {
            q: Some("Кабан".into()),
            lat: Some(55.76),
            lon: Some(49.14),
            method: Some(Method::SpatialOnly),
            ..Default::default()
        };
        let v = serde_json::to_value(&p).unwrap();
        let raw: HashMap<String, String> = v
            .as_object()
            .unwrap()
            .iter()
            .map(|(k, v)| {
                (
                    k.clone(),
                    v.as_str().map(str::to_string).unwrap_or_else(|| v.to_string()),
                )
            })
            .collect();
        assert_eq!(SearchParams::from_pairs(&raw).unwrap(), p);
    }
}
