use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use uxsim_llm::ChatRequest;

use crate::memory::MemoryPiece;

/// One assembled prompt with the memories placed in its context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapturedPrompt {
    /// Request label: perceive, planning, action, reflect, wonder, ...
    pub module: String,
    /// Stream clock when the prompt was assembled.
    pub step: u64,
    pub text: String,
    /// `(memory id, timestamp)` for every memory in the context.
    pub retrieved: Vec<(u64, u64)>,
    /// Milliseconds since the log was created.
    pub at_ms: u64,
}

impl CapturedPrompt {
    pub fn contains_memory(&self, id: u64) -> bool {
        self.retrieved.iter().any(|(m, _)| *m == id)
    }
}

/// Shared, append-only prompt log. Disabled logs drop everything.
#[derive(Debug, Clone)]
pub struct CaptureLog {
    enabled: bool,
    started: Instant,
    entries: Arc<Mutex<Vec<CapturedPrompt>>>,
}

impl CaptureLog {
    pub fn new(enabled: bool) -> Self {
        Self { enabled, started: Instant::now(), entries: Arc::default() }
    }

    pub fn is_enabled(&self) -> bool {
        self.enabled
    }

    pub(crate) fn record(&self, req: &ChatRequest, step: u64, context: &[MemoryPiece]) {
        if !self.enabled {
            return;
        }
        let entry = CapturedPrompt {
            module: req.label.clone().unwrap_or_default(),
            step,
            text: req.transcript(),
            retrieved: context.iter().map(|p| (p.id, p.timestamp)).collect(),
            at_ms: self.started.elapsed().as_millis() as u64,
        };
        self.entries.lock().push(entry);
    }

    pub fn entries(&self) -> Vec<CapturedPrompt> {
        self.entries.lock().clone()
    }

    pub fn for_module(&self, module: &str) -> Vec<CapturedPrompt> {
        self.entries.lock().iter().filter(|e| e.module == module).cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in self.entries.lock().iter() {
            out.push_str(&serde_json::to_string(e).expect("capture entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_jsonl())
    }
}
