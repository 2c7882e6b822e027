//! Deterministic scripted provider.
//!
//! Rules are tried in order; the first rule whose label and pattern both
//! match the request answers it. Each rule owns an ordered list of replies:
//! successive matches walk the list and then stick on the last reply.
//!
//! Script files (one rule per file, applied in file-name order):
//!
//! ```text
//! label: action
//! match: (?s)search for (?P<item>\w+)
//! delay_ms: 20
//! expand: true
//! ---
//! first reply, may use ${item} when expand is on
//! ---
//! second reply
//! ```

use std::collections::VecDeque;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use parking_lot::Mutex;
use regex::Regex;
use thiserror::Error;

use crate::embedding::hash_embedding;
use crate::error::ProviderError;
use crate::provider::ChatProvider;
use crate::request::ChatRequest;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("reading mock scripts: {0}")]
    Io(#[from] std::io::Error),
    #[error("{file}: {message}")]
    Parse { file: String, message: String },
}

type Responder = dyn Fn(&ChatRequest) -> String + Send + Sync;

pub struct MockRule {
    label: Option<String>,
    pattern: Option<Regex>,
    replies: Vec<String>,
    responder: Option<Arc<Responder>>,
    expand: bool,
    delay: Duration,
    cursor: AtomicUsize,
}

impl std::fmt::Debug for MockRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MockRule")
            .field("label", &self.label)
            .field("pattern", &self.pattern.as_ref().map(|p| p.as_str()))
            .field("replies", &self.replies.len())
            .field("delay", &self.delay)
            .finish()
    }
}

impl MockRule {
    /// A rule matching every request.
    pub fn any() -> Self {
        Self {
            label: None,
            pattern: None,
            replies: Vec::new(),
            responder: None,
            expand: false,
            delay: Duration::ZERO,
            cursor: AtomicUsize::new(0),
        }
    }

    pub fn for_label(label: impl Into<String>) -> Self {
        Self { label: Some(label.into()), ..Self::any() }
    }

    /// Restricts the rule to requests whose transcript matches `pattern`.
    pub fn matching(mut self, pattern: &str) -> Self {
        self.pattern = Some(Regex::new(pattern).expect("invalid mock pattern"));
        self
    }

    pub fn reply(mut self, text: impl Into<String>) -> Self {
        self.replies.push(text.into());
        self
    }

    pub fn replies<I, S>(mut self, texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.replies.extend(texts.into_iter().map(Into::into));
        self
    }

    /// Expand `${name}` / `$1` capture references of `pattern` in replies.
    pub fn expanding(mut self) -> Self {
        self.expand = true;
        self
    }

    /// Computes the reply from the request instead of a fixed list.
    pub fn respond_with<F>(mut self, f: F) -> Self
    where
        F: Fn(&ChatRequest) -> String + Send + Sync + 'static,
    {
        self.responder = Some(Arc::new(f));
        self
    }

    pub fn with_delay(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    fn matches(&self, req: &ChatRequest, transcript: &str) -> bool {
        if let Some(label) = &self.label {
            if req.label.as_deref() != Some(label.as_str()) {
                return false;
            }
        }
        match &self.pattern {
            Some(p) => p.is_match(transcript),
            None => true,
        }
    }

    fn next_reply(&self, req: &ChatRequest, transcript: &str) -> String {
        if let Some(responder) = &self.responder {
            return responder(req);
        }
        if self.replies.is_empty() {
            return String::new();
        }
        let i = self.cursor.fetch_add(1, Ordering::SeqCst).min(self.replies.len() - 1);
        let template = &self.replies[i];
        match (&self.pattern, self.expand) {
            (Some(p), true) => match p.captures(transcript) {
                Some(caps) => {
                    let mut out = String::new();
                    caps.expand(template, &mut out);
                    out
                }
                None => template.clone(),
            },
            _ => template.clone(),
        }
    }

    fn parse_script(file: &str, text: &str) -> Result<Self, ScriptError> {
        let err = |message: String| ScriptError::Parse { file: file.to_string(), message };
        let mut rule = MockRule::any();
        let mut lines = text.lines();
        let mut saw_separator = false;
        for line in lines.by_ref() {
            if line.trim() == "---" {
                saw_separator = true;
                break;
            }
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once(':')
                .ok_or_else(|| err(format!("expected `key: value`, got {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "label" => rule.label = Some(value.to_string()),
                "match" => {
                    rule.pattern =
                        Some(Regex::new(value).map_err(|e| err(format!("bad pattern: {e}")))?)
                }
                "delay_ms" => {
                    let ms: u64 = value.parse().map_err(|_| err(format!("bad delay {value}")))?;
                    rule.delay = Duration::from_millis(ms);
                }
                "expand" => rule.expand = value == "true",
                other => return Err(err(format!("unknown header {other:?}"))),
            }
        }
        if !saw_separator {
            return Err(err("missing `---` separator before replies".into()));
        }
        let mut current: Vec<&str> = Vec::new();
        for line in lines {
            if line.trim() == "---" {
                rule.replies.push(current.join("\n").trim().to_string());
                current.clear();
            } else {
                current.push(line);
            }
        }
        let tail = current.join("\n").trim().to_string();
        if !tail.is_empty() || rule.replies.is_empty() {
            rule.replies.push(tail);
        }
        Ok(rule)
    }
}

/// Scripted, fully deterministic provider.
#[derive(Debug)]
pub struct MockProvider {
    rules: Vec<MockRule>,
    fallback: Option<String>,
    embed_dim: usize,
    embed_seed: u64,
    failures: Mutex<VecDeque<ProviderError>>,
    log: Mutex<Vec<ChatRequest>>,
}

impl Default for MockProvider {
    fn default() -> Self {
        Self::new()
    }
}

impl MockProvider {
    pub const DEFAULT_DIM: usize = 256;

    pub fn new() -> Self {
        Self {
            rules: Vec::new(),
            fallback: None,
            embed_dim: Self::DEFAULT_DIM,
            embed_seed: 0,
            failures: Mutex::new(VecDeque::new()),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Replies `text` to every request not matched by a rule.
    pub fn always(text: impl Into<String>) -> Self {
        Self::new().with_fallback(text)
    }

    pub fn with_rule(mut self, rule: MockRule) -> Self {
        self.rules.push(rule);
        self
    }

    pub fn with_fallback(mut self, text: impl Into<String>) -> Self {
        self.fallback = Some(text.into());
        self
    }

    pub fn with_embedding(mut self, dim: usize, seed: u64) -> Self {
        assert!(dim > 0);
        self.embed_dim = dim;
        self.embed_seed = seed;
        self
    }

    pub fn embed_dim(&self) -> usize {
        self.embed_dim
    }

    pub fn embed_seed(&self) -> u64 {
        self.embed_seed
    }

    /// The next `n` chat calls fail with `error` before any rule is consulted.
    pub fn fail_next(&self, n: usize, error: ProviderError) {
        let mut q = self.failures.lock();
        for _ in 0..n {
            q.push_back(error.clone());
        }
    }

    /// Loads one rule per file from `dir`, in file-name order.
    pub fn from_script_dir(dir: &Path) -> Result<Self, ScriptError> {
        let mut entries: Vec<_> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        let mut provider = Self::new();
        for path in entries {
            let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let text = std::fs::read_to_string(&path)?;
            if name == "fallback.txt" {
                provider.fallback = Some(text.trim().to_string());
                continue;
            }
            provider.rules.push(MockRule::parse_script(&name, &text)?);
        }
        Ok(provider)
    }

    /// Every request received so far, in arrival order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().clone()
    }

    pub fn request_count(&self) -> usize {
        self.log.lock().len()
    }
}

#[async_trait]
impl ChatProvider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    async fn chat(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        self.log.lock().push(request.clone());
        if let Some(err) = self.failures.lock().pop_front() {
            return Err(err);
        }
        let transcript = request.transcript();
        let Some(rule) = self.rules.iter().find(|r| r.matches(request, &transcript)) else {
            return self.fallback.clone().ok_or_else(|| {
                ProviderError::Fatal(format!(
                    "no mock rule matches request (label {:?})",
                    request.label
                ))
            });
        };
        if !rule.delay.is_zero() {
            tokio::time::sleep(rule.delay).await;
        }
        Ok(rule.next_reply(request, &transcript))
    }

    async fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        Ok(hash_embedding(text, self.embed_dim, self.embed_seed).values().to_vec())
    }
}
