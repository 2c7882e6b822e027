//! Page fetching with a per-browser cookie jar.

use std::time::Duration;

use url::Url;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    Get,
    Post(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub url: String,
    pub method: Method,
}

impl Request {
    pub fn get(url: impl Into<String>) -> Self {
        Self { url: url.into(), method: Method::Get }
    }
}

#[derive(Debug, Clone)]
pub struct Response {
    /// Final URL after redirects.
    pub url: String,
    pub status: u16,
    pub body: String,
}

#[derive(Debug, Clone)]
pub struct Fetcher {
    client: reqwest::Client,
}

impl Fetcher {
    pub fn new(timeout: Duration) -> Self {
        let client = reqwest::Client::builder()
            .cookie_store(true)
            .timeout(timeout)
            .build()
            .expect("http client builds");
        Self { client }
    }

    pub async fn fetch(&self, req: &Request) -> Result<Response, String> {
        if req.url == "about:blank" {
            return Ok(Response { url: req.url.clone(), status: 200, body: String::new() });
        }
        let url = Url::parse(&req.url).map_err(|e| format!("invalid url {}: {e}", req.url))?;
        let builder = match &req.method {
            Method::Get => self.client.get(url),
            Method::Post(body) => self
                .client
                .post(url)
                .header("content-type", "application/x-www-form-urlencoded")
                .body(body.clone()),
        };
        let resp = builder.send().await.map_err(|e| e.to_string())?;
        let final_url = resp.url().to_string();
        let status = resp.status().as_u16();
        let body = resp.text().await.map_err(|e| e.to_string())?;
        Ok(Response { url: final_url, status, body })
    }
}

/// Resolves `href` against `base`, keeping the special schemes intact.
pub fn resolve_url(base: &str, href: &str) -> Option<String> {
    let href = href.trim();
    if href == "about:blank" {
        return Some(href.to_string());
    }
    if let Ok(abs) = Url::parse(href) {
        return Some(abs.to_string());
    }
    Url::parse(base).ok()?.join(href).ok().map(|u| u.to_string())
}
