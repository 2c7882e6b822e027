//! A small CSS subset: enough cascade to decide display, visibility,
//! cursor, explicit geometry and hover reactivity.

use std::collections::HashMap;

use super::dom::Document;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Pseudo {
    Hover,
    Focus,
    FirstChild,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum AttrOp {
    Exists,
    Equals(String),
    Contains(String),
    Prefix(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Compound {
    tag: Option<String>,
    id: Option<String>,
    classes: Vec<String>,
    attrs: Vec<(String, AttrOp)>,
    pseudos: Vec<Pseudo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Combinator {
    Descendant,
    Child,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    /// Subject last.
    parts: Vec<(Compound, Option<Combinator>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declaration {
    pub property: String,
    pub value: String,
    pub important: bool,
}

#[derive(Debug, Clone)]
pub struct Rule {
    pub selector: Selector,
    pub declarations: Vec<Declaration>,
}

#[derive(Debug, Clone, Default)]
pub struct Stylesheet {
    pub rules: Vec<Rule>,
}

impl Compound {
    fn specificity(&self) -> (u32, u32, u32) {
        (
            self.id.is_some() as u32,
            (self.classes.len() + self.attrs.len() + self.pseudos.len()) as u32,
            self.tag.is_some() as u32,
        )
    }
}

impl Selector {
    pub fn parse(text: &str) -> Option<Selector> {
        let mut parts: Vec<(Compound, Option<Combinator>)> = Vec::new();
        let mut pending: Option<Combinator> = None;
        let chars: Vec<char> = text.trim().chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                pending.get_or_insert(Combinator::Descendant);
                i += 1;
                continue;
            }
            if c == '>' {
                pending = Some(Combinator::Child);
                i += 1;
                continue;
            }
            if c == '+' || c == '~' || c == ',' {
                return None;
            }
            let (compound, next) = parse_compound(&chars, i)?;
            if !parts.is_empty() {
                let comb = pending.take().unwrap_or(Combinator::Descendant);
                parts.last_mut().unwrap().1 = Some(comb);
            }
            pending = None;
            parts.push((compound, None));
            i = next;
        }
        if parts.is_empty() {
            None
        } else {
            Some(Selector { parts })
        }
    }

    pub fn specificity(&self) -> (u32, u32, u32) {
        self.parts.iter().fold((0, 0, 0), |acc, (c, _)| {
            let s = c.specificity();
            (acc.0 + s.0, acc.1 + s.1, acc.2 + s.2)
        })
    }

    pub fn matches(&self, doc: &Document, el: usize, st: &DynamicState) -> bool {
        self.match_from(doc, el, self.parts.len() - 1, st)
    }

    fn match_from(&self, doc: &Document, el: usize, part: usize, st: &DynamicState) -> bool {
        if !compound_matches(&self.parts[part].0, doc, el, st, false) {
            return false;
        }
        if part == 0 {
            return true;
        }
        match self.parts[part - 1].1 {
            Some(Combinator::Child) => doc.nodes[el]
                .parent
                .filter(|&p| doc.element(p).is_some())
                .is_some_and(|p| self.match_from(doc, p, part - 1, st)),
            _ => doc
                .ancestors(el)
                .filter(|&a| doc.element(a).is_some())
                .any(|a| self.match_from(doc, a, part - 1, st)),
        }
    }

    /// True when some `:hover` compound of this selector applies to `el`
    /// regardless of the pointer position.
    pub fn hover_reacts(&self, doc: &Document, el: usize) -> bool {
        let st = DynamicState::default();
        self.parts.iter().any(|(c, _)| c.pseudos.contains(&Pseudo::Hover) && compound_matches(c, doc, el, &st, true))
    }
}

fn ident_end(chars: &[char], mut i: usize) -> usize {
    while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '-' || chars[i] == '_') {
        i += 1;
    }
    i
}

fn parse_compound(chars: &[char], mut i: usize) -> Option<(Compound, usize)> {
    let mut c = Compound::default();
    let start = i;
    while i < chars.len() {
        match chars[i] {
            '*' => i += 1,
            '#' => {
                let e = ident_end(chars, i + 1);
                c.id = Some(chars[i + 1..e].iter().collect());
                i = e;
            }
            '.' => {
                let e = ident_end(chars, i + 1);
                c.classes.push(chars[i + 1..e].iter().collect());
                i = e;
            }
            '[' => {
                let close = chars[i..].iter().position(|&x| x == ']')? + i;
                let inner: String = chars[i + 1..close].iter().collect();
                c.attrs.push(parse_attr(&inner)?);
                i = close + 1;
            }
            ':' => {
                let e = ident_end(chars, i + 1);
                let name: String = chars[i + 1..e].iter().collect();
                c.pseudos.push(match name.as_str() {
                    "hover" => Pseudo::Hover,
                    "focus" => Pseudo::Focus,
                    "first-child" => Pseudo::FirstChild,
                    _ => return None,
                });
                i = e;
            }
            ch if ch.is_alphanumeric() => {
                let e = ident_end(chars, i);
                c.tag = Some(chars[i..e].iter().collect::<String>().to_ascii_lowercase());
                i = e;
            }
            _ => break,
        }
    }
    (i > start).then_some((c, i))
}

fn parse_attr(inner: &str) -> Option<(String, AttrOp)> {
    let unquote = |v: &str| v.trim().trim_matches(|c| c == '"' || c == '\'').to_string();
    for (op, ctor) in [("*=", AttrOp::Contains as fn(String) -> AttrOp), ("^=", AttrOp::Prefix), ("=", AttrOp::Equals)] {
        if let Some((k, v)) = inner.split_once(op) {
            return Some((k.trim().to_ascii_lowercase(), ctor(unquote(v))));
        }
    }
    let name = inner.trim();
    (!name.is_empty()).then(|| (name.to_ascii_lowercase(), AttrOp::Exists))
}

fn compound_matches(c: &Compound, doc: &Document, el: usize, st: &DynamicState, ignore_dynamic: bool) -> bool {
    let Some(data) = doc.element(el) else { return false };
    if c.tag.as_ref().is_some_and(|t| *t != data.tag) {
        return false;
    }
    if c.id.as_ref().is_some_and(|id| data.attrs.get("id") != Some(id)) {
        return false;
    }
    if !c.classes.is_empty() {
        let classes: Vec<&str> = data.attrs.get("class").map(|s| s.split_whitespace().collect()).unwrap_or_default();
        if !c.classes.iter().all(|k| classes.contains(&k.as_str())) {
            return false;
        }
    }
    for (name, op) in &c.attrs {
        let Some(v) = data.attrs.get(name) else { return false };
        let ok = match op {
            AttrOp::Exists => true,
            AttrOp::Equals(x) => v == x,
            AttrOp::Contains(x) => v.contains(x.as_str()),
            AttrOp::Prefix(x) => v.starts_with(x.as_str()),
        };
        if !ok {
            return false;
        }
    }
    for p in &c.pseudos {
        let ok = match p {
            Pseudo::Hover => ignore_dynamic || st.hovered.is_some_and(|h| doc.is_inclusive_ancestor(el, h)),
            Pseudo::Focus => ignore_dynamic || st.focused == Some(el),
            Pseudo::FirstChild => doc.nodes[el]
                .parent
                .and_then(|p| doc.nodes[p].children.iter().copied().find(|&s| doc.element(s).is_some()))
                == Some(el),
        };
        if !ok {
            return false;
        }
    }
    true
}

/// Pointer and focus state that pseudo-classes depend on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DynamicState {
    pub hovered: Option<usize>,
    pub focused: Option<usize>,
}

fn strip_comments(css: &str) -> String {
    let mut out = String::with_capacity(css.len());
    let mut rest = css;
    while let Some(start) = rest.find("/*") {
        out.push_str(&rest[..start]);
        match rest[start + 2..].find("*/") {
            Some(end) => rest = &rest[start + 2 + end + 2..],
            None => return out,
        }
    }
    out.push_str(rest);
    out
}

pub fn parse_declarations(text: &str) -> Vec<Declaration> {
    text.split(';')
        .filter_map(|d| {
            let (k, v) = d.split_once(':')?;
            let mut value = v.trim().to_string();
            let important = value.to_ascii_lowercase().ends_with("!important");
            if important {
                value.truncate(value.len() - "!important".len());
                value = value.trim().to_string();
            }
            let property = k.trim().to_ascii_lowercase();
            (!property.is_empty()).then_some(Declaration { property, value: value.to_ascii_lowercase(), important })
        })
        .collect()
}

impl Stylesheet {
    /// Parses rule sets. At-rules and unsupported selectors are skipped.
    pub fn parse(css: &str) -> Stylesheet {
        let css = strip_comments(css);
        let mut rules = Vec::new();
        let bytes: Vec<char> = css.chars().collect();
        let mut i = 0;
        while i < bytes.len() {
            let Some(open) = bytes[i..].iter().position(|&c| c == '{').map(|p| p + i) else { break };
            let prelude: String = bytes[i..open].iter().collect();
            let mut depth = 1;
            let mut j = open + 1;
            while j < bytes.len() && depth > 0 {
                match bytes[j] {
                    '{' => depth += 1,
                    '}' => depth -= 1,
                    _ => {}
                }
                j += 1;
            }
            let body: String = bytes[open + 1..j.saturating_sub(1).max(open + 1)].iter().collect();
            i = j;
            let prelude = prelude.trim();
            if prelude.starts_with('@') {
                continue;
            }
            let declarations = parse_declarations(&body);
            for sel in prelude.split(',') {
                if let Some(selector) = Selector::parse(sel) {
                    rules.push(Rule { selector, declarations: declarations.clone() });
                }
            }
        }
        Stylesheet { rules }
    }
}

pub const UA_CSS: &str = r#"
head, script, style, meta, link, title, template, noscript, base, datalist { display: none }
html, body, div, p, h1, h2, h3, h4, h5, h6, ul, ol, li, form, header, footer, nav, section,
article, aside, main, table, tbody, thead, tfoot, tr, fieldset, details, summary, dl, dt, dd,
figure, figcaption, blockquote, pre, hr, address, legend, menu, dialog, option, optgroup { display: block }
[hidden] { display: none }
input[type=hidden] { display: none }
a[href] { cursor: pointer }
"#;

/// Cascaded values for the properties the engine understands.
#[derive(Debug, Clone, PartialEq)]
pub struct Style {
    pub display: String,
    pub visibility: String,
    pub cursor: String,
    pub position: String,
    pub width: Option<f64>,
    pub height: Option<f64>,
    pub left: Option<f64>,
    pub top: Option<f64>,
    pub hover_styled: bool,
}

impl Default for Style {
    fn default() -> Self {
        Style {
            display: "inline".into(),
            visibility: "visible".into(),
            cursor: "auto".into(),
            position: "static".into(),
            width: None,
            height: None,
            left: None,
            top: None,
            hover_styled: false,
        }
    }
}

pub fn px(value: &str) -> Option<f64> {
    let v = value.trim();
    let num = v.strip_suffix("px").unwrap_or(v);
    num.trim().parse::<f64>().ok()
}

/// Computes styles for every element. Indices without an element get the
/// default style.
pub fn compute_styles(doc: &Document, sheets: &[Stylesheet], st: &DynamicState) -> Vec<Style> {
    let mut styles = vec![Style::default(); doc.nodes.len()];
    // Nodes are stored in tree order: parents precede children.
    for i in 0..doc.nodes.len() {
        let parent_style = doc.nodes[i].parent.map(|p| styles[p].clone());
        let Some(el) = doc.element(i) else {
            if let Some(p) = parent_style {
                styles[i] = Style { display: "inline".into(), ..p };
            }
            continue;
        };
        let mut winners: HashMap<String, (Key, String)> = HashMap::new();
        let mut order = 0usize;
        let mut hover_styled = false;
        for (origin, sheet) in sheets.iter().enumerate() {
            for rule in &sheet.rules {
                order += 1;
                if rule.selector.hover_reacts(doc, i) && origin > 0 {
                    hover_styled = true;
                }
                if !rule.selector.matches(doc, i, st) {
                    continue;
                }
                let spec = rule.selector.specificity();
                for d in &rule.declarations {
                    let key = (d.important, origin as u32, spec, order);
                    offer(&mut winners, &d.property, key, &d.value);
                }
            }
        }
        if let Some(inline) = el.attrs.get("style") {
            order += 1;
            for d in parse_declarations(inline) {
                let key = (d.important, u32::MAX, (u32::MAX, 0, 0), order);
                offer(&mut winners, &d.property, key, &d.value);
            }
        }
        let mut s = Style::default();
        if let Some(p) = &parent_style {
            s.visibility = p.visibility.clone();
            s.cursor = p.cursor.clone();
        }
        for (prop, (_, value)) in winners {
            if value == "inherit" {
                if let Some(p) = &parent_style {
                    match prop.as_str() {
                        "display" => s.display = p.display.clone(),
                        "cursor" => s.cursor = p.cursor.clone(),
                        "visibility" => s.visibility = p.visibility.clone(),
                        _ => {}
                    }
                }
                continue;
            }
            match prop.as_str() {
                "display" => s.display = value,
                "visibility" => s.visibility = value,
                "cursor" => s.cursor = value,
                "position" => s.position = value,
                "width" => s.width = px(&value),
                "height" => s.height = px(&value),
                "left" => s.left = px(&value),
                "top" => s.top = px(&value),
                _ => {}
            }
        }
        s.hover_styled = hover_styled;
        styles[i] = s;
    }
    styles
}

type Key = (bool, u32, (u32, u32, u32), usize);

fn offer(winners: &mut HashMap<String, (Key, String)>, prop: &str, key: Key, value: &str) {
    match winners.get(prop) {
        Some((k, _)) if *k > key => {}
        _ => {
            winners.insert(prop.to_string(), (key, value.to_string()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn styles_for(html: &str) -> (Document, Vec<Style>) {
        let doc = Document::parse(html, "http://t/");
        let mut sheets = vec![Stylesheet::parse(UA_CSS)];
        for s in doc.elements().filter(|&i| doc.tag(i) == Some("style")) {
            sheets.push(Stylesheet::parse(&doc.text_content(s)));
        }
        let st = compute_styles(&doc, &sheets, &DynamicState::default());
        (doc, st)
    }

    #[test]
    fn cascade_specificity_and_inline() {
        let (doc, st) = styles_for(
            r#"<style>.a { display: none } #x { display: block } p span { cursor: pointer !important }</style>
               <div id=x class=a>x</div><div class=a id=y>y</div><p><span style="cursor: text">s</span></p>"#,
        );
        assert_eq!(st[doc.by_id("x").unwrap()].display, "block");
        assert_eq!(st[doc.by_id("y").unwrap()].display, "none");
        assert_eq!(st[doc.first_tag("span").unwrap()].cursor, "pointer");
    }

    #[test]
    fn cursor_inherits_and_hover_detected() {
        let (doc, st) = styles_for(
            r#"<style>.card { cursor: pointer } .menu:hover .sub { display: block } .sub { display: none }</style>
               <div class=card><b id=inner>t</b></div><div class=menu id=m><div class=sub id=s>x</div></div>"#,
        );
        assert_eq!(st[doc.by_id("inner").unwrap()].cursor, "pointer");
        assert!(st[doc.by_id("m").unwrap()].hover_styled);
        assert_eq!(st[doc.by_id("s").unwrap()].display, "none");
        let hovered = DynamicState { hovered: doc.by_id("m"), focused: None };
        let sheets = vec![Stylesheet::parse(UA_CSS), Stylesheet::parse(&doc.text_content(doc.first_tag("style").unwrap()))];
        let st2 = compute_styles(&doc, &sheets, &hovered);
        assert_eq!(st2[doc.by_id("s").unwrap()].display, "block");
    }

    #[test]
    fn unsupported_selectors_skipped() {
        let sheet = Stylesheet::parse("a + b { color: red } @media print { p { display: none } } p { display: block }");
        assert_eq!(sheet.rules.len(), 1);
    }
}
