//! Blocking HTTP client for the API, used by `bibifi-admin` and tests.

use std::time::Duration;

use reqwest::blocking::{Client as Http, RequestBuilder, Response};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("HTTP {status}: {message}")]
    Status { status: u16, message: String },
    #[error(transparent)]
    Http(#[from] reqwest::Error),
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Status { status, .. } => Some(*status),
            ClientError::Http(_) => None,
        }
    }
}

pub struct Client {
    base: String,
    token: Option<String>,
    http: Http,
}

impl Client {
    pub fn new(base: &str, token: Option<String>) -> Self {
        let http = Http::builder().timeout(Duration::from_secs(60)).build().expect("client builds");
        Client { base: base.trim_end_matches('/').to_owned(), token, http }
    }

    fn auth(&self, r: RequestBuilder) -> RequestBuilder {
        match &self.token {
            Some(t) => r.bearer_auth(t),
            None => r,
        }
    }

    fn finish(r: Response) -> Result<Response, ClientError> {
        let status = r.status().as_u16();
        if r.status().is_success() {
            return Ok(r);
        }
        let text = r.text().unwrap_or_default();
        let message = serde_json::from_str::<Value>(&text)
            .ok()
            .and_then(|v| v.get("error").and_then(Value::as_str).map(str::to_owned))
            .unwrap_or(text);
        Err(ClientError::Status { status, message })
    }

    pub fn get_text(&self, path: &str) -> Result<String, ClientError> {
        let r = self.auth(self.http.get(format!("{}{path}", self.base))).send()?;
        Ok(Self::finish(r)?.text()?)
    }

    pub fn get(&self, path: &str) -> Result<Value, ClientError> {
        let r = self.auth(self.http.get(format!("{}{path}", self.base))).send()?;
        Ok(Self::finish(r)?.json()?)
    }

    pub fn post(&self, path: &str, body: &Value) -> Result<Value, ClientError> {
        let r = self.auth(self.http.post(format!("{}{path}", self.base))).json(body).send()?;
        Ok(Self::finish(r)?.json()?)
    }

    pub fn post_bytes(&self, path: &str, body: Vec<u8>) -> Result<Value, ClientError> {
        let r = self
            .auth(self.http.post(format!("{}{path}", self.base)))
            .header(reqwest::header::CONTENT_TYPE, "application/octet-stream")
            .body(body)
            .send()?;
        Ok(Self::finish(r)?.json()?)
    }
}
