//! Persona sheets, demographic sampling and batch generation.

use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use uxsim_llm::{ChatMessage, ChatRequest, Gateway, LlmError};

use crate::prompts::PromptSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedValue {
    pub label: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicField {
    pub name: String,
    pub values: Vec<WeightedValue>,
}

impl DemographicField {
    pub fn new<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = (S, f64)>) -> Self {
        Self {
            name: name.into(),
            values: values.into_iter().map(|(l, w)| WeightedValue { label: l.into(), weight: w }).collect(),
        }
    }

    /// Equal weights.
    pub fn uniform<S: Into<String>>(name: impl Into<String>, labels: impl IntoIterator<Item = S>) -> Self {
        Self::new(name, labels.into_iter().map(|l| (l, 1.0)))
    }

    fn total(&self) -> f64 {
        self.values.iter().map(|v| v.weight).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    #[default]
    WeightedRandom,
    ExactQuota,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemographicSpec {
    pub fields: Vec<DemographicField>,
    #[serde(default)]
    pub sampling_mode: SamplingMode,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PersonaError {
    #[error("invalid demographic spec: {0}")]
    InvalidSpec(String),
    #[error("persona sheet is malformed: {0}")]
    Malformed(String),
    #[error("persona reply could not be parsed: {0}")]
    SchemaViolation(String),
    #[error(transparent)]
    Gateway(LlmError),
    #[error("batch stopped with {failed} failed persona(s)")]
    Incomplete { failed: usize, batch: Box<PersonaBatch> },
    #[error("persona files: {0}")]
    Io(String),
}

/// One sampled label per field, in spec order.
pub type Assignment = IndexMap<String, String>;

impl DemographicSpec {
    pub fn new(fields: Vec<DemographicField>, sampling_mode: SamplingMode) -> Result<Self, PersonaError> {
        let s = Self { fields, sampling_mode };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), PersonaError> {
        let mut seen = std::collections::HashSet::new();
        for f in &self.fields {
            if f.name.trim().is_empty() {
                return Err(PersonaError::InvalidSpec("field name is empty".into()));
            }
            if !seen.insert(normalize_key(&f.name)) {
                return Err(PersonaError::InvalidSpec(format!("duplicate field {:?}", f.name)));
            }
            if f.values.is_empty() {
                return Err(PersonaError::InvalidSpec(format!("field {:?} has no values", f.name)));
            }
            if f.values.iter().any(|v| !v.weight.is_finite() || v.weight < 0.0) {
                return Err(PersonaError::InvalidSpec(format!("field {:?} has a negative weight", f.name)));
            }
            if f.total().is_nan() || f.total() <= 0.0 {
                return Err(PersonaError::InvalidSpec(format!("weights of {:?} sum to zero", f.name)));
            }
            if is_age_field(&f.name) {
                for v in &f.values {
                    if let Some((lo, hi)) = age_range(&v.label) {
                        if lo > hi {
                            return Err(PersonaError::InvalidSpec(format!("age range {:?} is reversed", v.label)));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Independent weighted draw per field.
pub fn sample_demographics(spec: &DemographicSpec, rng: &mut impl Rng) -> Assignment {
    spec.fields
        .iter()
        .map(|f| {
            let mut x = rng.gen::<f64>() * f.total();
            let mut pick = f.values.len() - 1;
            for (i, v) in f.values.iter().enumerate() {
                if x < v.weight {
                    pick = i;
                    break;
                }
                x -= v.weight;
            }
            // Skip zero-weight labels that a float edge case could land on.
            while f.values[pick].weight == 0.0 && pick > 0 {
                pick -= 1;
            }
            (f.name.clone(), f.values[pick].label.clone())
        })
        .collect()
}

/// Largest-remainder apportionment of `n` over the weights. Leftover units
/// go to the largest fractional parts, earlier labels first on ties.
pub fn quota_counts(field: &DemographicField, n: usize) -> Vec<usize> {
    let total = field.total();
    let quotas: Vec<f64> = field.values.iter().map(|v| n as f64 * v.weight / total).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Assignments for a whole batch. Exact-quota mode shuffles each field's
/// apportioned labels independently.
pub fn plan_assignments(spec: &DemographicSpec, n: usize, rng: &mut impl Rng) -> Vec<Assignment> {
    match spec.sampling_mode {
        SamplingMode::WeightedRandom => (0..n).map(|_| sample_demographics(spec, rng)).collect(),
        SamplingMode::ExactQuota => {
            let mut out = vec![Assignment::new(); n];
            for f in &spec.fields {
                let mut labels: Vec<&str> = quota_counts(f, n)
                    .iter()
                    .zip(&f.values)
                    .flat_map(|(&c, v)| std::iter::repeat_n(v.label.as_str(), c))
                    .collect();
                labels.shuffle(rng);
                for (a, l) in out.iter_mut().zip(labels) {
                    a.insert(f.name.clone(), l.to_string());
                }
            }
            out
        }
    }
}

pub(crate) fn normalize_key(k: &str) -> String {
    k.trim().to_lowercase().replace(['_', '-'], " ").split_whitespace().collect::<Vec<_>>().join(" ")
}

fn is_age_field(name: &str) -> bool {
    normalize_key(name) == "age"
}

/// `"18-25"`, `"18 – 25"` or `"18 to 25"`.
pub fn age_range(label: &str) -> Option<(u32, u32)> {
    let l = label.replace(['–', '—'], "-").replace(" to ", "-");
    let (a, b) = l.split_once('-')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

fn title_case(k: &str) -> String {
    normalize_key(k)
        .split(' ')
        .map(|w| {
            let mut c = w.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect::<String>()).unwrap_or_default()
        })
        .collect::<Vec<_>>()
        .join(" ")
}

const SECTIONS: [&str; 7] = [
    "Background",
    "Demographics",
    "Financial Situation",
    "Shopping Habits",
    "Professional Life",
    "Personal Style",
    "Intent",
];

const CORE_DEMOGRAPHICS: [&str; 5] = ["Age", "Gender", "Education", "Profession", "Income"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub name: String,
    pub background: String,
    /// Display key to value, in sheet order.
    pub demographics: IndexMap<String, String>,
    pub financial_situation: String,
    pub shopping_habits: String,
    pub professional_life: String,
    pub personal_style: String,
    pub intent: String,
    /// The labels this persona was generated for.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub assignment: Assignment,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl Persona {
    /// Parses the heading-plus-paragraph sheet format.
    pub fn parse(text: &str) -> Result<Self, PersonaError> {
        let mut name = None;
        let mut sections: IndexMap<&'static str, Vec<String>> = IndexMap::new();
        let mut current: Option<&'static str> = None;
        for raw in text.lines() {
            let line = raw.trim().trim_start_matches('#').trim().trim_matches('*').trim();
            let plain = line.trim_end_matches(':').trim_matches('*').trim();
            if name.is_none() {
                if line.is_empty() {
                    continue;
                }
                if let Some(rest) = strip_label(line, "Persona") {
                    if !rest.is_empty() {
                        name = Some(rest.to_string());
                        continue;
                    }
                }
            }
            if let Some(h) = SECTIONS.iter().find(|h| plain.eq_ignore_ascii_case(h) && line.ends_with(':')) {
                current = Some(h);
                sections.entry(h).or_default();
                continue;
            }
            // "Intent: buy a sofa" on one line.
            if let Some(h) = SECTIONS.iter().find(|h| **h != "Demographics" && strip_label(line, h).is_some_and(|r| !r.is_empty())) {
                current = Some(h);
                sections.entry(h).or_default().push(strip_label(line, h).unwrap().to_string());
                continue;
            }
            if let Some(h) = current {
                if !line.is_empty() {
                    sections.entry(h).or_default().push(line.to_string());
                }
            }
        }
        let name = name.ok_or_else(|| PersonaError::Malformed("missing \"Persona: <name>\" line".into()))?;
        let missing: Vec<&str> =
            SECTIONS.iter().copied().filter(|h| sections.get(h).is_none_or(|v| v.is_empty())).collect();
        if !missing.is_empty() {
            return Err(PersonaError::Malformed(format!("missing section(s): {}", missing.join(", "))));
        }
        let para = |h: &str| sections[h].join(" ");
        let mut demographics = IndexMap::new();
        for l in &sections["Demographics"] {
            let l = l.trim_start_matches(['-', '*', '•']).trim();
            let Some((k, v)) = l.split_once(':') else {
                return Err(PersonaError::Malformed(format!("demographics line {l:?} is not \"Key: value\"")));
            };
            if !v.trim().is_empty() {
                demographics.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let mut p = Persona {
            name,
            background: para("Background"),
            demographics,
            financial_situation: para("Financial Situation"),
            shopping_habits: para("Shopping Habits"),
            professional_life: para("Professional Life"),
            personal_style: para("Personal Style"),
            intent: para("Intent"),
            assignment: Assignment::new(),
            flags: Vec::new(),
        };
        if p.demographic("age").is_some() && p.age().is_none() {
            p.flags.push("age_unparsed".into());
        }
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "Persona: {}\n", self.name);
        let _ = writeln!(s, "Background:\n{}\n", self.background);
        s.push_str("Demographics:\n");
        for (k, v) in &self.demographics {
            let _ = writeln!(s, "{k}: {v}");
        }
        s.push('\n');
        for (h, body) in [
            ("Financial Situation", &self.financial_situation),
            ("Shopping Habits", &self.shopping_habits),
            ("Professional Life", &self.professional_life),
            ("Personal Style", &self.personal_style),
            ("Intent", &self.intent),
        ] {
            let _ = writeln!(s, "{h}:\n{body}\n");
        }
        s
    }

    /// Case- and separator-insensitive demographic lookup.
    pub fn demographic(&self, key: &str) -> Option<&str> {
        let want = normalize_key(key);
        self.demographics.iter().find(|(k, _)| normalize_key(k) == want).map(|(_, v)| v.as_str())
    }

    pub fn set_demographic(&mut self, key: &str, value: impl Into<String>) {
        let want = normalize_key(key);
        match self.demographics.iter_mut().find(|(k, _)| normalize_key(k) == want) {
            Some((_, v)) => *v = value.into(),
            None => {
                self.demographics.insert(title_case(key), value.into());
            }
        }
    }

    /// Leading integer of the age entry.
    pub fn age(&self) -> Option<u32> {
        let raw = self.demographic("age")?;
        let digits: String = raw.trim().chars().take_while(|c| c.is_ascii_digit()).collect();
        digits.parse().ok()
    }

    pub fn gender(&self) -> Option<&str> {
        self.demographic("gender")
    }

    /// Income as a number, from text like `$75,000`.
    pub fn income(&self) -> Option<f64> {
        let raw = self.demographic("income")?;
        let cleaned: String = raw.chars().filter(|c| c.is_ascii_digit() || *c == '.').collect();
        cleaned.parse().ok()
    }

    pub fn missing_core_demographics(&self) -> Vec<&'static str> {
        CORE_DEMOGRAPHICS.iter().copied().filter(|k| self.demographic(k).is_none()).collect()
    }

    /// Forces the sheet to agree with `assignment`. Age ranges are kept as an
    /// integer inside the range; other labels are written verbatim.
    pub fn apply_assignment(&mut self, assignment: &Assignment, rng: &mut impl Rng) {
        for (field, label) in assignment {
            if is_age_field(field) {
                if let Some((lo, hi)) = age_range(label) {
                    match self.age() {
                        Some(a) if (lo..=hi).contains(&a) => {}
                        _ => {
                            if self.demographic("age").is_some() {
                                self.flags.push("age_adjusted".into());
                            }
                            self.flags.retain(|f| f != "age_unparsed");
                            self.set_demographic(field, rng.gen_range(lo..=hi).to_string());
                        }
                    }
                    continue;
                }
            }
            if self.demographic(field) != Some(label.as_str()) {
                self.set_demographic(field, label.clone());
            }
        }
        self.assignment = assignment.clone();
    }

    /// Whether the sheet honours its recorded assignment.
    pub fn satisfies(&self, assignment: &Assignment) -> bool {
        assignment.iter().all(|(field, label)| match (is_age_field(field), age_range(label)) {
            (true, Some((lo, hi))) => self.age().is_some_and(|a| (lo..=hi).contains(&a)),
            _ => self.demographic(field) == Some(label.as_str()),
        })
    }
}

/// A complete sheet, usable as the seed example for a batch.
pub const EXAMPLE_PERSONA: &str = include_str!("../assets/example_persona.txt");

impl Persona {
    pub fn example() -> Self {
        Self::parse(EXAMPLE_PERSONA).expect("bundled example persona parses")
    }
}

fn strip_label<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let (k, v) = line.split_once(':')?;
    k.trim().trim_matches('*').trim().eq_ignore_ascii_case(label).then(|| v.trim().trim_matches('*').trim())
}

/// Builds the generation request for one persona.
pub fn persona_request(prompts: &PromptSet, example: &Persona, assignment: &Assignment) -> ChatRequest {
    let constraints: Vec<String> = assignment.iter().map(|(k, v)| format!("{} {}", normalize_key(k), v)).collect();
    let text = prompts.persona(&example.to_text(), &constraints);
    ChatRequest::new(vec![ChatMessage::user(text)]).with_label("persona").with_temperature(1.0)
}

pub async fn generate_persona(
    gateway: &Gateway,
    prompts: &PromptSet,
    example: &Persona,
    assignment: &Assignment,
    rng: &mut impl Rng,
) -> Result<Persona, PersonaError> {
    let req = persona_request(prompts, example, assignment);
    let parsed = gateway
        .complete_with(&req, |t| Persona::parse(t).map_err(|e| e.to_string()))
        .await
        .map_err(|e| match e {
            LlmError::SchemaViolation { last_error, .. } => PersonaError::SchemaViolation(last_error),
            other => PersonaError::Gateway(other),
        })?;
    let mut p = parsed.value;
    p.apply_assignment(assignment, rng);
    Ok(p)
}

/// Where a persona's example came from: 0 is the user seed, `i` is the
/// `i`-th generated persona (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub index: usize,
    pub example_index: usize,
    pub assignment: Assignment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonaBatch {
    /// Successfully generated personas, in generation order.
    pub personas: Vec<Persona>,
    pub seed_example: Persona,
    pub rng_seed: u64,
    /// One entry per requested persona, successful or not.
    pub provenance: Vec<Provenance>,
}

impl PersonaBatch {
    /// Persona by 1-based generation index, if it succeeded.
    pub fn generated(&self, index: usize) -> Option<&Persona> {
        let pos = self.provenance.iter().filter(|p| p.error.is_none()).position(|p| p.index == index)?;
        self.personas.get(pos)
    }

    /// Checks the diversity rule from recorded provenance.
    pub fn provenance_is_valid(&self) -> bool {
        let ok: std::collections::HashSet<usize> =
            self.provenance.iter().filter(|p| p.error.is_none()).map(|p| p.index).collect();
        self.provenance.iter().enumerate().all(|(pos, p)| {
            p.index == pos + 1 && (p.example_index == 0 || (p.example_index < p.index && ok.contains(&p.example_index)))
        })
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), PersonaError> {
        let io = |e: std::io::Error| PersonaError::Io(e.to_string());
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut files = Vec::new();
        let mut personas = self.personas.iter();
        for p in &self.provenance {
            if p.error.is_some() {
                files.push(None);
                continue;
            }
            let name = format!("persona_{:04}.txt", p.index);
            std::fs::write(dir.join(&name), personas.next().expect("one persona per success").to_text()).map_err(io)?;
            files.push(Some(name));
        }
        std::fs::write(dir.join("seed_persona.txt"), self.seed_example.to_text()).map_err(io)?;
        let manifest = serde_json::json!({
            "rng_seed": self.rng_seed,
            "requested": self.provenance.len(),
            "generated": self.personas.len(),
            "entries": self.provenance.iter().zip(&files).map(|(p, f)| serde_json::json!({
                "index": p.index,
                "file": f,
                "example_index": p.example_index,
                "assignment": p.assignment,
                "error": p.error,
            })).collect::<Vec<_>>(),
            "personas": self.personas,
        });
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest).expect("manifest serializes"))
            .map_err(io)
    }

    pub fn read_dir(dir: &Path) -> Result<Self, PersonaError> {
        let io = |e: std::io::Error| PersonaError::Io(e.to_string());
        let raw = std::fs::read_to_string(dir.join("manifest.json")).map_err(io)?;
        let v: serde_json::Value = serde_json::from_str(&raw).map_err(|e| PersonaError::Io(e.to_string()))?;
        let bad = |e: serde_json::Error| PersonaError::Io(format!("manifest: {e}"));
        let personas: Vec<Persona> = serde_json::from_value(v["personas"].clone()).map_err(bad)?;
        let provenance: Vec<Provenance> = serde_json::from_value(v["entries"].clone()).map_err(bad)?;
        let seed = Persona::parse(&std::fs::read_to_string(dir.join("seed_persona.txt")).map_err(io)?)?;
        Ok(Self { personas, seed_example: seed, rng_seed: v["rng_seed"].as_u64().unwrap_or(0), provenance })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BatchOptions {
    /// Personas in flight at once. Persona `i` draws its example from the
    /// seed and personas `1..=i-window`, all of which have finished before
    /// `i` is dispatched. A window of 1 is strictly sequential.
    pub window: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self { window: 1 }
    }
}

pub async fn generate_batch(
    gateway: &Gateway,
    prompts: &PromptSet,
    spec: &DemographicSpec,
    seed_example: &Persona,
    n: usize,
    rng_seed: u64,
    options: BatchOptions,
) -> Result<PersonaBatch, PersonaError> {
    spec.validate()?;
    if n == 0 {
        return Err(PersonaError::InvalidSpec("batch size must be at least 1".into()));
    }
    let window = options.window.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let assignments = plan_assignments(spec, n, &mut rng);
    let mut done: Vec<Option<Persona>> = Vec::with_capacity(n);
    let mut provenance: Vec<Provenance> = Vec::with_capacity(n);
    for chunk_start in (0..n).step_by(window) {
        let chunk: Vec<usize> = (chunk_start..(chunk_start + window).min(n)).collect();
        let mut jobs = Vec::new();
        for &pos in &chunk {
            let index = pos + 1;
            // Eligible: the seed plus finished personas 1..=index-window.
            let mut pool = vec![0usize];
            pool.extend((1..=index.saturating_sub(window)).filter(|j| done[j - 1].is_some()));
            let example_index = *pool.choose(&mut rng).expect("pool holds the seed");
            let person_seed: u64 = rng.gen();
            provenance.push(Provenance { index, example_index, assignment: assignments[pos].clone(), error: None });
            let example = if example_index == 0 { seed_example } else { done[example_index - 1].as_ref().expect("eligible") };
            let assignment = &assignments[pos];
            jobs.push(async move {
                let mut r = ChaCha8Rng::seed_from_u64(person_seed);
                generate_persona(gateway, prompts, example, assignment, &mut r).await
            });
        }
        for (pos, result) in chunk.iter().zip(futures::future::join_all(jobs).await) {
            match result {
                Ok(p) => done.push(Some(p)),
                Err(e) => {
                    tracing::warn!(index = pos + 1, error = %e, "persona generation failed");
                    provenance[*pos].error = Some(e.to_string());
                    done.push(None);
                }
            }
        }
    }
    let failed = done.iter().filter(|p| p.is_none()).count();
    let batch = PersonaBatch {
        personas: done.into_iter().flatten().collect(),
        seed_example: seed_example.clone(),
        rng_seed,
        provenance,
    };
    if failed > 0 {
        return Err(PersonaError::Incomplete { failed, batch: Box::new(batch) });
    }
    Ok(batch)
}
