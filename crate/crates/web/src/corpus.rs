//! Golden-label checks for DOM fixture pages.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dom::{parse_snapshot, ParsedPage};
use crate::driver::BrowserDriver;
use crate::engine::HeadlessBrowser;

/// Hand-written expectations for one fixture page.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenLabels {
    pub clickable: BTreeSet<String>,
    #[serde(default)]
    pub hoverable: BTreeSet<String>,
    #[serde(default)]
    pub inputs: BTreeSet<String>,
    #[serde(default)]
    pub selects: BTreeSet<String>,
    /// Text that must not survive simplification.
    #[serde(default)]
    pub absent_text: Vec<String>,
    #[serde(default)]
    pub present_text: Vec<String>,
    /// Fragments matched against [`flatten_html`] output.
    #[serde(default)]
    pub html_contains: Vec<String>,
    #[serde(default)]
    pub html_excludes: Vec<String>,
    #[serde(default)]
    pub expect_warnings: bool,
}

#[derive(Debug, Clone)]
pub struct FixtureResult {
    pub name: String,
    pub mismatches: Vec<String>,
    pub page: ParsedPage,
}

impl FixtureResult {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

fn set_diff(label: &str, expected: &BTreeSet<String>, actual: BTreeSet<String>, out: &mut Vec<String>) {
    for missing in expected.difference(&actual) {
        out.push(format!("{label}: expected {missing:?}, not found"));
    }
    for extra in actual.difference(expected) {
        out.push(format!("{label}: unexpected {extra:?}"));
    }
}

/// Loads markup into a fresh headless page and parses it.
pub async fn parse_markup(markup: &str, url: &str) -> ParsedPage {
    let mut b = HeadlessBrowser::default();
    b.load_html(markup, url);
    let snap = b.snapshot().await.expect("fresh browser snapshots");
    parse_snapshot(&snap)
}

/// Simplified markup without indentation or line breaks, which is the form
/// golden fragments are written against.
pub fn flatten_html(html: &str) -> String {
    html.lines().map(str::trim).collect()
}

pub fn compare(page: &ParsedPage, golden: &GoldenLabels) -> Vec<String> {
    let mut out = Vec::new();
    let ids = |f: fn(&crate::dom::Interactivity) -> bool| -> BTreeSet<String> {
        page.elements.iter().filter(|e| f(&e.interactivity)).map(|e| e.semantic_id.clone()).collect()
    };
    set_diff("clickable", &golden.clickable, ids(|i| i.clickable()), &mut out);
    set_diff("hoverable", &golden.hoverable, ids(|i| i.hoverable), &mut out);
    set_diff("inputs", &golden.inputs, ids(|i| i.input), &mut out);
    set_diff("selects", &golden.selects, ids(|i| i.select), &mut out);

    let all: Vec<&str> = page.elements.iter().map(|e| e.semantic_id.as_str()).collect();
    let unique: BTreeSet<&str> = all.iter().copied().collect();
    if unique.len() != all.len() {
        out.push("semantic ids are not unique".into());
    }
    for id in &all {
        if !id.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_') || id.is_empty() {
            out.push(format!("id {id:?} breaks the slug grammar"));
        }
        if !page.html.contains(&format!("semantic-id=\"{id}\"")) {
            out.push(format!("id {id:?} missing from html"));
        }
    }
    let flat = flatten_html(&page.html);
    for t in &golden.absent_text {
        if page.html.contains(t.as_str()) {
            out.push(format!("text {t:?} should have been discarded"));
        }
    }
    for t in &golden.present_text {
        if !page.html.contains(t.as_str()) && !flat.contains(t.as_str()) {
            out.push(format!("text {t:?} is missing"));
        }
    }
    for f in &golden.html_contains {
        if !flat.contains(f.as_str()) {
            out.push(format!("html lacks fragment {f:?}"));
        }
    }
    for f in &golden.html_excludes {
        if flat.contains(f.as_str()) {
            out.push(format!("html contains forbidden fragment {f:?}"));
        }
    }
    if golden.expect_warnings && page.warnings.is_empty() {
        out.push("expected parser warnings for malformed markup".into());
    }
    out
}

/// Evaluates every `*.html` file in `dir` against its sibling `.json`.
pub async fn run_corpus(dir: &Path) -> std::io::Result<Vec<FixtureResult>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "html"))
        .collect();
    files.sort();
    let mut results = Vec::new();
    for html_path in files {
        let name = html_path.file_stem().unwrap().to_string_lossy().into_owned();
        let markup = std::fs::read_to_string(&html_path)?;
        let golden: GoldenLabels = serde_json::from_str(&std::fs::read_to_string(html_path.with_extension("json"))?)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{name}: {e}")))?;
        let page = parse_markup(&markup, &format!("http://fixture.local/{name}")).await;
        let mismatches = compare(&page, &golden);
        results.push(FixtureResult { name, mismatches, page });
    }
    Ok(results)
}

/// Directory holding the bundled fixture pages.
pub fn bundled_corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/dom")
}
