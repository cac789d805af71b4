//! Typed async client for the toposearch HTTP service.

use reqwest::{StatusCode, Url};
use serde::de::DeserializeOwned;
use toposearch::api::{ApiError, AskRequest, AskResponse, DocResponse, HealthResponse, SearchParams, SearchResponse};

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("invalid server URL {0:?}")]
    Url(String),

    #[error("request failed: {0}")]
    Http(#[from] reqwest::Error),

    #[error("server returned {status}: {error}")]
    Api { status: StatusCode, error: ApiError },
}

impl ClientError {
    /// The structured error body, when the server sent one.
    pub fn api_error(&self) -> Option<&ApiError> {
        match self {
            ClientError::Api { error, .. } => Some(error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Client {
    base: Url,
    http: reqwest::Client,
}

impl Client {
    pub fn new(base: &str) -> Result<Self, ClientError> {
        let mut base = Url::parse(base).map_err(|_| ClientError::Url(base.to_string()))?;
        if base.cannot_be_a_base() {
            return Err(ClientError::Url(base.to_string()));
        }
        if !base.path().ends_with('/') {
            let path = format!("{}/", base.path());
            base.set_path(&path);
        }
        Ok(Client {
            base,
            http: reqwest::Client::new(),
        })
    }

    fn url(&self, segments: &[&str]) -> Url {
        let mut url = self.base.clone();
        url.path_segments_mut()
            .expect("checked in new")
            .pop_if_empty()
            .extend(segments);
        url
    }

    async fn decode<T: DeserializeOwned>(resp: reqwest::Response) -> Result<T, ClientError> {
        let status = resp.status();
        if status.is_success() {
            return Ok(resp.json().await?);
        }
        let text = resp.text().await?;
        let error = serde_json::from_str(&text).unwrap_or_else(|_| ApiError::internal(text));
        Err(ClientError::Api { status, error })
    }

    pub async fn health(&self) -> Result<HealthResponse, ClientError> {
        Self::decode(self.http.get(self.url(&["api", "health"])).send().await?).await
    }

    pub async fn search(&self, params: &SearchParams) -> Result<SearchResponse, ClientError> {
        let req = self.http.get(self.url(&["api", "search"])).query(params);
        Self::decode(req.send().await?).await
    }

    pub async fn ask(&self, req: &AskRequest) -> Result<AskResponse, ClientError> {
        Self::decode(self.http.post(self.url(&["api", "ask"])).json(req).send().await?).await
    }

    pub async fn doc(&self, id: &str) -> Result<DocResponse, ClientError> {
        Self::decode(self.http.get(self.url(&["api", "doc", id])).send().await?).await
    }
}
