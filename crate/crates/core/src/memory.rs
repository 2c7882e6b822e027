//! Append-only memory stream with scored retrieval.
//!
//! Timestamps are logical steps. The stream owns a clock that the fast loop
//! advances once per iteration; pieces are stamped with the clock value at
//! append time unless an explicit timestamp is supplied.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use parking_lot::RwLock;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use uxsim_llm::EmbeddingVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MemoryKind {
    Observation,
    Plan,
    Action,
    Thought,
}

impl MemoryKind {
    pub const ALL: [MemoryKind; 4] = [MemoryKind::Observation, MemoryKind::Plan, MemoryKind::Action, MemoryKind::Thought];

    pub fn as_str(self) -> &'static str {
        match self {
            MemoryKind::Observation => "observation",
            MemoryKind::Plan => "plan",
            MemoryKind::Action => "action",
            MemoryKind::Thought => "thought",
        }
    }
}

impl fmt::Display for MemoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reasoning module that wrote a memory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceModule {
    Perception,
    Planning,
    Action,
    Reflection,
    Wonder,
}

impl SourceModule {
    /// The only kind this module may write.
    pub fn kind(self) -> MemoryKind {
        match self {
            SourceModule::Perception => MemoryKind::Observation,
            SourceModule::Planning => MemoryKind::Plan,
            SourceModule::Action => MemoryKind::Action,
            SourceModule::Reflection | SourceModule::Wonder => MemoryKind::Thought,
        }
    }
}

pub type MemoryId = u64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryPiece {
    pub id: MemoryId,
    pub kind: MemoryKind,
    pub content: String,
    pub timestamp: u64,
    #[serde(default)]
    pub importance: Option<f64>,
    pub embedding: EmbeddingVector,
    pub source_module: SourceModule,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub metadata: Map<String, Value>,
}

impl MemoryPiece {
    pub fn is_wonder(&self) -> bool {
        self.metadata.get("wonder").and_then(Value::as_bool).unwrap_or(false)
    }
}

/// Input to [`MemoryStream::append`].
#[derive(Debug, Clone, PartialEq)]
pub struct NewMemory {
    pub kind: MemoryKind,
    pub content: String,
    pub source_module: SourceModule,
    pub embedding: EmbeddingVector,
    /// `None` stamps the piece with the stream clock.
    pub timestamp: Option<u64>,
    pub importance: Option<f64>,
    pub metadata: Map<String, Value>,
}

impl NewMemory {
    pub fn new(source_module: SourceModule, content: impl Into<String>, embedding: EmbeddingVector) -> Self {
        Self {
            kind: source_module.kind(),
            content: content.into(),
            source_module,
            embedding,
            timestamp: None,
            importance: None,
            metadata: Map::new(),
        }
    }

    pub fn at(mut self, timestamp: u64) -> Self {
        self.timestamp = Some(timestamp);
        self
    }

    pub fn with_kind(mut self, kind: MemoryKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_importance(mut self, importance: f64) -> Self {
        self.importance = Some(importance);
        self
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MemoryError {
    #[error("timestamp {timestamp} is earlier than the last appended timestamp {last}")]
    ClockRegression { timestamp: u64, last: u64 },
    #[error("timestamp {timestamp} is ahead of the stream clock {clock}")]
    FutureTimestamp { timestamp: u64, clock: u64 },
    #[error("{source_module:?} may only write {expected} memories, not {got}")]
    KindMismatch { source_module: SourceModule, expected: MemoryKind, got: MemoryKind },
    #[error("memory timestamp {t} is after now {now}")]
    NegativeAge { t: u64, now: u64 },
    #[error("embedding dimension {got} does not match query dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("memory {0} already has an importance score")]
    AlreadyScored(MemoryId),
    #[error("no memory with id {0}")]
    UnknownId(MemoryId),
    #[error("importance {0} is outside [0, 1]")]
    ImportanceOutOfRange(f64),
    #[error("invalid retrieval weights: {0}")]
    InvalidWeights(String),
    #[error("memory content is empty")]
    EmptyContent,
    #[error("reading stream: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalWeights {
    pub w_imp: f64,
    pub w_rel: f64,
    pub w_rec: f64,
    /// Recency decay rate.
    pub k: f64,
    #[serde(default = "default_type_weights")]
    pub w_type: BTreeMap<MemoryKind, f64>,
    pub top_k: usize,
}

fn default_type_weights() -> BTreeMap<MemoryKind, f64> {
    MemoryKind::ALL.into_iter().map(|k| (k, 1.0)).collect()
}

impl RetrievalWeights {
    pub fn new(w_imp: f64, w_rel: f64, w_rec: f64, top_k: usize) -> Self {
        Self { w_imp, w_rel, w_rec, k: 1.0, w_type: default_type_weights(), top_k }
    }

    /// Recency-heavy preset for planning and action.
    pub fn fast() -> Self {
        Self::new(0.3, 0.5, 1.0, 10)
    }

    /// Relevance-heavy preset for reflection.
    pub fn slow() -> Self {
        Self::new(0.7, 1.0, 0.3, 20)
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k;
        self
    }

    pub fn with_type_weight(mut self, kind: MemoryKind, w: f64) -> Self {
        self.w_type.insert(kind, w);
        self
    }

    pub fn type_weight(&self, kind: MemoryKind) -> f64 {
        self.w_type.get(&kind).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<(), MemoryError> {
        let bad = |m: &str| Err(MemoryError::InvalidWeights(m.into()));
        let all = [self.w_imp, self.w_rel, self.w_rec];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("w_imp, w_rel and w_rec must be finite and nonnegative");
        }
        if all.iter().all(|w| *w == 0.0) {
            return bad("at least one of w_imp, w_rel, w_rec must be positive");
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return bad("k must be positive");
        }
        if self.w_type.values().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("type weights must be finite and nonnegative");
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalQuery {
    pub query_text: String,
    pub query_embedding: EmbeddingVector,
    pub weights: RetrievalWeights,
    pub now: u64,
}

/// `exp(-k (now - t))`.
pub fn recency(t: u64, now: u64, k: f64) -> Result<f64, MemoryError> {
    if t > now {
        return Err(MemoryError::NegativeAge { t, now });
    }
    Ok((-k * (now - t) as f64).exp())
}

pub fn score(piece: &MemoryPiece, query: &RetrievalQuery) -> Result<f64, MemoryError> {
    let w = &query.weights;
    let rel = piece.embedding.cosine(&query.query_embedding).ok_or(MemoryError::DimensionMismatch {
        expected: query.query_embedding.dim(),
        got: piece.embedding.dim(),
    })?;
    let rec = recency(piece.timestamp, query.now, w.k)?;
    let imp = piece.importance.unwrap_or(0.0);
    Ok((imp * w.w_imp + rel * w.w_rel + rec * w.w_rec) * w.type_weight(piece.kind))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub piece: MemoryPiece,
    pub score: f64,
}

/// Scores every piece with `timestamp <= now` and keeps the best `top_k`.
/// Order: score descending, then newer timestamp, then later append.
fn rank(pieces: &[MemoryPiece], query: &RetrievalQuery) -> Result<Vec<Scored>, MemoryError> {
    query.weights.validate()?;
    let mut scored = Vec::new();
    for (pos, p) in pieces.iter().enumerate() {
        if p.timestamp <= query.now {
            // + 0.0 folds -0.0 into 0.0 so zero scores tie under total_cmp.
            scored.push((score(p, query)? + 0.0, pos));
        }
    }
    scored.sort_by(|(sa, pa), (sb, pb)| {
        sb.total_cmp(sa)
            .then_with(|| pieces[*pb].timestamp.cmp(&pieces[*pa].timestamp))
            .then_with(|| pb.cmp(pa))
    });
    scored.truncate(query.weights.top_k);
    Ok(scored.into_iter().map(|(score, pos)| Scored { piece: pieces[pos].clone(), score }).collect())
}

#[derive(Debug, Default)]
struct Inner {
    pieces: Vec<MemoryPiece>,
    clock: u64,
    last_timestamp: u64,
    next_id: MemoryId,
}

/// Shared handle; clones see the same stream.
#[derive(Debug, Clone, Default)]
pub struct MemoryStream {
    inner: Arc<RwLock<Inner>>,
}

impl MemoryStream {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn clock(&self) -> u64 {
        self.inner.read().clock
    }

    /// Advances the clock by one step and returns the new value.
    pub fn tick(&self) -> u64 {
        let mut g = self.inner.write();
        g.clock += 1;
        g.clock
    }

    pub fn set_clock(&self, clock: u64) -> Result<(), MemoryError> {
        let mut g = self.inner.write();
        if clock < g.clock {
            return Err(MemoryError::ClockRegression { timestamp: clock, last: g.clock });
        }
        g.clock = clock;
        Ok(())
    }

    pub fn append(&self, m: NewMemory) -> Result<MemoryId, MemoryError> {
        let expected = m.source_module.kind();
        if m.kind != expected {
            return Err(MemoryError::KindMismatch { source_module: m.source_module, expected, got: m.kind });
        }
        if m.content.trim().is_empty() {
            return Err(MemoryError::EmptyContent);
        }
        if let Some(i) = m.importance {
            if !(0.0..=1.0).contains(&i) {
                return Err(MemoryError::ImportanceOutOfRange(i));
            }
        }
        let mut g = self.inner.write();
        let timestamp = m.timestamp.unwrap_or(g.clock);
        if timestamp > g.clock {
            return Err(MemoryError::FutureTimestamp { timestamp, clock: g.clock });
        }
        if !g.pieces.is_empty() && timestamp < g.last_timestamp {
            return Err(MemoryError::ClockRegression { timestamp, last: g.last_timestamp });
        }
        let id = g.next_id;
        g.next_id += 1;
        g.last_timestamp = timestamp;
        g.pieces.push(MemoryPiece {
            id,
            kind: m.kind,
            content: m.content,
            timestamp,
            importance: m.importance,
            embedding: m.embedding,
            source_module: m.source_module,
            metadata: m.metadata,
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.inner.read().pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, id: MemoryId) -> Option<MemoryPiece> {
        self.inner.read().pieces.iter().find(|p| p.id == id).cloned()
    }

    /// All pieces in append order.
    pub fn pieces(&self) -> Vec<MemoryPiece> {
        self.inner.read().pieces.clone()
    }

    pub fn unscored(&self) -> Vec<MemoryPiece> {
        self.inner.read().pieces.iter().filter(|p| p.importance.is_none()).cloned().collect()
    }

    pub fn max_timestamp(&self) -> Option<u64> {
        self.inner.read().pieces.iter().map(|p| p.timestamp).max()
    }

    pub fn set_importance(&self, id: MemoryId, value: f64) -> Result<MemoryPiece, MemoryError> {
        if !(0.0..=1.0).contains(&value) {
            return Err(MemoryError::ImportanceOutOfRange(value));
        }
        let mut g = self.inner.write();
        let p = g.pieces.iter_mut().find(|p| p.id == id).ok_or(MemoryError::UnknownId(id))?;
        if p.importance.is_some() {
            return Err(MemoryError::AlreadyScored(id));
        }
        p.importance = Some(value);
        Ok(p.clone())
    }

    pub fn retrieve(&self, query: &RetrievalQuery) -> Result<Vec<MemoryPiece>, MemoryError> {
        Ok(self.retrieve_scored(query)?.into_iter().map(|s| s.piece).collect())
    }

    pub fn retrieve_scored(&self, query: &RetrievalQuery) -> Result<Vec<Scored>, MemoryError> {
        rank(&self.inner.read().pieces, query)
    }

    /// Frozen copy of the pieces with `timestamp <= t`.
    pub fn snapshot_until(&self, t: u64) -> MemoryView {
        let g = self.inner.read();
        MemoryView { until: t, pieces: g.pieces.iter().filter(|p| p.timestamp <= t).cloned().collect() }
    }

    pub fn to_jsonl(&self) -> String {
        let g = self.inner.read();
        let mut out = String::new();
        for p in &g.pieces {
            out.push_str(&serde_json::to_string(p).expect("memory serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), MemoryError> {
        let mut f = std::fs::File::create(path).map_err(|e| MemoryError::Io(e.to_string()))?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(|e| MemoryError::Io(e.to_string()))
    }

    /// Rebuilds a stream from JSONL; the clock resumes at the largest timestamp.
    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, MemoryError> {
        let mut inner = Inner::default();
        for (n, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| MemoryError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let p: MemoryPiece =
                serde_json::from_str(&line).map_err(|e| MemoryError::Io(format!("line {}: {e}", n + 1)))?;
            if p.timestamp < inner.last_timestamp {
                return Err(MemoryError::ClockRegression { timestamp: p.timestamp, last: inner.last_timestamp });
            }
            inner.last_timestamp = p.timestamp;
            inner.clock = inner.clock.max(p.timestamp);
            inner.next_id = inner.next_id.max(p.id + 1);
            inner.pieces.push(p);
        }
        Ok(Self { inner: Arc::new(RwLock::new(inner)) })
    }

    pub fn read_jsonl(path: &Path) -> Result<Self, MemoryError> {
        let f = std::fs::File::open(path).map_err(|e| MemoryError::Io(e.to_string()))?;
        Self::from_jsonl(std::io::BufReader::new(f))
    }
}

/// Read-only view of a stream up to a timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryView {
    until: u64,
    pieces: Vec<MemoryPiece>,
}

impl MemoryView {
    pub fn until(&self) -> u64 {
        self.until
    }

    pub fn pieces(&self) -> &[MemoryPiece] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Retrieval restricted to the view; `query.now` is capped at the view bound.
    pub fn retrieve_scored(&self, query: &RetrievalQuery) -> Result<Vec<Scored>, MemoryError> {
        let mut q = query.clone();
        q.now = q.now.min(self.until);
        rank(&self.pieces, &q)
    }

    pub fn retrieve(&self, query: &RetrievalQuery) -> Result<Vec<MemoryPiece>, MemoryError> {
        Ok(self.retrieve_scored(query)?.into_iter().map(|s| s.piece).collect())
    }
}
