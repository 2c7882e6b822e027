//! Inline handler mini-language and static listener discovery.
//!
//! The engine does not run JavaScript. Handlers are recognised from a few
//! common statement shapes and script text is scanned for listener
//! registrations, which mirrors what the page instrumentation records in a
//! real browser.

use std::sync::LazyLock;

use regex::Regex;

use super::dom::Document;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    Navigate(String),
    OpenTab(String),
    SubmitForm,
    Toggle(String),
    Back,
    Reload,
}

type Rule = (Regex, fn(&regex::Captures) -> Effect);

static STATEMENT: LazyLock<Vec<Rule>> = LazyLock::new(|| {
    let url = r#"['"]([^'"]*)['"]"#;
    vec![
        (
            Regex::new(&format!(r"^(?:window\.|document\.)?location(?:\.href)?\s*=\s*{url}$")).unwrap(),
            (|c: &regex::Captures| Effect::Navigate(c[1].to_string())) as fn(&regex::Captures) -> Effect,
        ),
        (
            Regex::new(&format!(r"^(?:window\.)?location\.(?:assign|replace)\(\s*{url}\s*\)$")).unwrap(),
            |c| Effect::Navigate(c[1].to_string()),
        ),
        (Regex::new(&format!(r"^window\.open\(\s*{url}.*\)$")).unwrap(), |c| Effect::OpenTab(c[1].to_string())),
        (Regex::new(r"^this\.form\.submit\(\)$").unwrap(), |_| Effect::SubmitForm),
        (Regex::new(r#"^toggle\(\s*['"]([^'"]+)['"]\s*\)$"#).unwrap(), |c| Effect::Toggle(c[1].to_string())),
        (Regex::new(r"^(?:window\.)?history\.back\(\)$").unwrap(), |_| Effect::Back),
        (Regex::new(r"^(?:window\.)?location\.reload\(\)$").unwrap(), |_| Effect::Reload),
    ]
});

/// Interprets a handler attribute. Unknown statements are ignored.
pub fn interpret(handler: &str) -> Vec<Effect> {
    handler
        .split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .filter_map(|stmt| {
            let found = STATEMENT.iter().find_map(|(re, f)| re.captures(stmt).map(|c| f(&c)));
            if found.is_none() && stmt != "return false" {
                tracing::debug!(stmt, "unsupported handler statement");
            }
            found
        })
        .collect()
}

pub const HOVER_EVENTS: &[&str] = &["mouseover", "mouseenter", "mousemove", "pointerover", "pointerenter"];

static REGISTRATION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"(?:getElementById\(\s*['"]([^'"]+)['"]\s*\)|querySelector\(\s*['"]([^'"]+)['"]\s*\))\s*\.addEventListener\(\s*['"]([a-z]+)['"]"#,
    )
    .unwrap()
});

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Registration {
    pub element: usize,
    pub event: String,
}

/// Finds `addEventListener` calls on elements named by id or simple
/// selector inside `<script>` blocks.
pub fn scan_registrations(doc: &Document) -> Vec<Registration> {
    let mut out = Vec::new();
    for s in doc.elements().filter(|&i| doc.tag(i) == Some("script")) {
        let text = doc.text_content(s);
        for c in REGISTRATION.captures_iter(&text) {
            let element = if let Some(id) = c.get(1) {
                doc.by_id(id.as_str())
            } else {
                let sel = c.get(2).unwrap().as_str();
                super::css::Selector::parse(sel).and_then(|sel| {
                    doc.elements().find(|&i| sel.matches(doc, i, &Default::default()))
                })
            };
            if let Some(element) = element {
                out.push(Registration { element, event: c[3].to_string() });
            }
        }
    }
    out
}
