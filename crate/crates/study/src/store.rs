//! One directory per run:
//!
//! ```text
//! {run_id}/config.json
//! {run_id}/run.json
//! {run_id}/personas/
//! {run_id}/agents/{agent_id}/session.json
//! {run_id}/agents/{agent_id}/trace.jsonl
//! {run_id}/agents/{agent_id}/steps.jsonl
//! {run_id}/agents/{agent_id}/memory.jsonl
//! {run_id}/agents/{agent_id}/screenshots/step_NNN.png
//! {run_id}/aggregates.json
//! {run_id}/exports/
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use uxsim_core::{MemoryStream, StepRecord, TraceRecord};

use crate::aggregate::aggregate;
use crate::config::StudyConfig;
use crate::export::{export_rows, ExportFormat};
use crate::record::{RunManifest, SessionRecord, StudyRun};
use crate::StudyError;

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> StudyError {
    StudyError::Io(format!("{}: {e}", path.display()))
}

/// Whether `s` can be used as a single path component.
pub fn safe_component(s: &str) -> bool {
    !s.is_empty()
        && !s.starts_with('.')
        && s.len() <= 128
        && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

/// Writes through a temporary file so readers never see half a file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StudyError> {
    let dir = path.parent().expect("store paths have a parent");
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StudyError> {
    let mut text = serde_json::to_string_pretty(value).expect("store values serialize");
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StudyError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("jsonl values serialize"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| format!("line {}: {e}", n + 1)))
        .collect()
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StudyError> {
    match std::fs::read_to_string(path) {
        Ok(text) => from_jsonl(&text).map_err(|e| io_err(path, e)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Vec::new()),
        Err(e) => Err(io_err(path, e)),
    }
}

impl RunStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StudyError> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| io_err(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, run_id: &str) -> Result<PathBuf, StudyError> {
        if !safe_component(run_id) {
            return Err(StudyError::UnknownRun(run_id.to_string()));
        }
        Ok(self.root.join(run_id))
    }

    pub fn agent_dir(&self, run_id: &str, agent_id: &str) -> Result<PathBuf, StudyError> {
        if !safe_component(agent_id) {
            return Err(StudyError::UnknownAgent(agent_id.to_string()));
        }
        Ok(self.run_dir(run_id)?.join("agents").join(agent_id))
    }

    pub fn exists(&self, run_id: &str) -> bool {
        self.run_dir(run_id).is_ok_and(|d| d.join("run.json").is_file())
    }

    fn existing_run(&self, run_id: &str) -> Result<PathBuf, StudyError> {
        let dir = self.run_dir(run_id)?;
        if !dir.join("run.json").is_file() {
            return Err(StudyError::UnknownRun(run_id.to_string()));
        }
        Ok(dir)
    }

    pub fn create_run(&self, manifest: &RunManifest, config: &StudyConfig) -> Result<(), StudyError> {
        let dir = self.run_dir(&manifest.run_id)?;
        if dir.exists() {
            return Err(StudyError::Io(format!("run {} already exists", manifest.run_id)));
        }
        write_json(&dir.join("config.json"), config)?;
        write_json(&dir.join("run.json"), manifest)
    }

    pub fn write_manifest(&self, manifest: &RunManifest) -> Result<(), StudyError> {
        write_json(&self.run_dir(&manifest.run_id)?.join("run.json"), manifest)
    }

    pub fn read_manifest(&self, run_id: &str) -> Result<RunManifest, StudyError> {
        read_json(&self.existing_run(run_id)?.join("run.json"))
    }

    pub fn read_config(&self, run_id: &str) -> Result<StudyConfig, StudyError> {
        read_json(&self.existing_run(run_id)?.join("config.json"))
    }

    pub fn personas_dir(&self, run_id: &str) -> Result<PathBuf, StudyError> {
        Ok(self.run_dir(run_id)?.join("personas"))
    }

    pub fn write_session(&self, run_id: &str, record: &SessionRecord) -> Result<(), StudyError> {
        write_json(&self.agent_dir(run_id, &record.agent_id)?.join("session.json"), record)
    }

    pub fn read_session(&self, run_id: &str, agent_id: &str) -> Result<SessionRecord, StudyError> {
        self.existing_run(run_id)?;
        let path = self.agent_dir(run_id, agent_id)?.join("session.json");
        if !path.is_file() {
            return Err(StudyError::UnknownAgent(agent_id.to_string()));
        }
        read_json(&path)
    }

    pub fn write_trace(&self, run_id: &str, agent_id: &str, trace: &[TraceRecord]) -> Result<(), StudyError> {
        write_atomic(&self.agent_dir(run_id, agent_id)?.join("trace.jsonl"), to_jsonl(trace).as_bytes())
    }

    pub fn read_trace(&self, run_id: &str, agent_id: &str) -> Result<Vec<TraceRecord>, StudyError> {
        read_jsonl(&self.agent_dir(run_id, agent_id)?.join("trace.jsonl"))
    }

    pub fn trace_path(&self, run_id: &str, agent_id: &str) -> Result<PathBuf, StudyError> {
        Ok(self.agent_dir(run_id, agent_id)?.join("trace.jsonl"))
    }

    pub fn write_steps(&self, run_id: &str, agent_id: &str, steps: &[StepRecord]) -> Result<(), StudyError> {
        write_atomic(&self.agent_dir(run_id, agent_id)?.join("steps.jsonl"), to_jsonl(steps).as_bytes())
    }

    pub fn read_steps(&self, run_id: &str, agent_id: &str) -> Result<Vec<StepRecord>, StudyError> {
        read_jsonl(&self.agent_dir(run_id, agent_id)?.join("steps.jsonl"))
    }

    /// Writes the stream and returns its path relative to the run directory.
    pub fn write_memory(&self, run_id: &str, agent_id: &str, stream: &MemoryStream) -> Result<String, StudyError> {
        let path = self.agent_dir(run_id, agent_id)?.join("memory.jsonl");
        write_atomic(&path, stream.to_jsonl().as_bytes())?;
        Ok(format!("agents/{agent_id}/memory.jsonl"))
    }

    pub fn read_memory(&self, run_id: &str, agent_id: &str) -> Result<MemoryStream, StudyError> {
        let path = self.agent_dir(run_id, agent_id)?.join("memory.jsonl");
        if !path.is_file() {
            return Ok(MemoryStream::new());
        }
        MemoryStream::read_jsonl(&path).map_err(|e| io_err(&path, e))
    }

    pub fn write_capture(&self, run_id: &str, agent_id: &str, jsonl: &str) -> Result<(), StudyError> {
        write_atomic(&self.agent_dir(run_id, agent_id)?.join("prompts.jsonl"), jsonl.as_bytes())
    }

    /// Stores a PNG and returns its reference.
    pub fn write_screenshot(&self, run_id: &str, agent_id: &str, step: usize, png: &[u8]) -> Result<String, StudyError> {
        let file = format!("step_{step:03}.png");
        write_atomic(&self.agent_dir(run_id, agent_id)?.join("screenshots").join(&file), png)?;
        Ok(format!("{run_id}/{agent_id}/{file}"))
    }

    /// File behind a screenshot reference, if the reference is well formed.
    pub fn screenshot_path(&self, reference: &str) -> Option<PathBuf> {
        let parts: Vec<&str> = reference.split('/').collect();
        let [run, agent, file] = parts.as_slice() else { return None };
        if !file.ends_with(".png") || !safe_component(file) {
            return None;
        }
        Some(self.agent_dir(run, agent).ok()?.join("screenshots").join(file))
    }

    pub fn write_run_file(&self, run_id: &str, name: &str, bytes: &[u8]) -> Result<PathBuf, StudyError> {
        let path = self.run_dir(run_id)?.join(name);
        write_atomic(&path, bytes)?;
        Ok(path)
    }

    pub fn read_run_file(&self, run_id: &str, name: &str) -> Result<Vec<u8>, StudyError> {
        let path = self.existing_run(run_id)?.join(name);
        std::fs::read(&path).map_err(|e| io_err(&path, e))
    }

    /// Run ids, oldest first (ids start with a timestamp).
    pub fn list_runs(&self) -> Result<Vec<String>, StudyError> {
        let mut ids: Vec<String> = std::fs::read_dir(&self.root)
            .map_err(|e| io_err(&self.root, e))?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join("run.json").is_file())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|id| safe_component(id))
            .collect();
        ids.sort();
        Ok(ids)
    }

    pub fn load_run(&self, run_id: &str) -> Result<StudyRun, StudyError> {
        let manifest = self.read_manifest(run_id)?;
        let config = self.read_config(run_id)?;
        let mut sessions = Vec::with_capacity(manifest.agents.len());
        for aid in &manifest.agents {
            match self.read_session(run_id, aid) {
                Ok(s) => sessions.push(s),
                Err(StudyError::UnknownAgent(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(StudyRun {
            run_id: manifest.run_id,
            config,
            sessions,
            started_at: manifest.started_at,
            finished_at: manifest.finished_at,
            status: manifest.status,
            error: manifest.error,
        })
    }

    /// Writes `exports/aggregates.{ext}` and returns its path and bytes.
    pub fn export(&self, run_id: &str, format: ExportFormat) -> Result<(PathBuf, Vec<u8>), StudyError> {
        let bytes = export_rows(&aggregate(&self.load_run(run_id)?).rows, format)?;
        let path = self.write_run_file(run_id, &format!("exports/aggregates.{}", format.extension()), &bytes)?;
        Ok((path, bytes))
    }
}
