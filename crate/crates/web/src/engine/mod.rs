//! In-process headless browser.
//!
//! Documents are fetched over HTTP, parsed, styled with a CSS subset and
//! laid out with fixed text metrics. Pointer and keyboard input trigger the
//! usual default actions (links, forms, checkboxes, labels, details) plus a
//! small handler mini-language. Navigation runs in the background so that
//! in-flight requests are observable for quiescence waiting.

pub mod css;
pub mod dom;
pub mod layout;
pub mod net;
pub mod render;
pub mod script;

use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;
use parking_lot::Mutex;
use tokio::time::Instant;

use crate::dom::Annotation;
use crate::driver::{Activity, BrowserDriver, BrowserFactory, DriverError};
use crate::observation::TabInfo;
use crate::snapshot::{
    ComputedStyle, DomSnapshot, ListenerFlags, NodeKind, NodeRef, NodeState, Rect, Size, SnapshotNode,
};

use css::{compute_styles, DynamicState, Style, Stylesheet, UA_CSS};
use dom::{Document, NodeData};
use layout::{Layout, VIEWPORT_HEIGHT, VIEWPORT_WIDTH};
use net::{resolve_url, Fetcher, Method, Request};
use script::{interpret, scan_registrations, Effect, HOVER_EVENTS};

#[derive(Debug, Clone)]
pub struct HeadlessConfig {
    pub request_timeout: Duration,
}

impl Default for HeadlessConfig {
    fn default() -> Self {
        Self { request_timeout: Duration::from_secs(30) }
    }
}

struct Page {
    doc: Document,
    sheets: Vec<Stylesheet>,
    styles: Vec<Style>,
    layout: Layout,
}

impl Page {
    fn new(doc: Document) -> Self {
        let mut sheets = vec![Stylesheet::parse(UA_CSS)];
        for s in doc.elements().filter(|&i| doc.tag(i) == Some("style")).collect::<Vec<_>>() {
            sheets.push(Stylesheet::parse(&doc.text_content(s)));
        }
        let mut page = Page { doc, sheets, styles: vec![], layout: Layout::default() };
        page.apply_registrations();
        page.relayout(&DynamicState::default());
        page
    }

    fn apply_registrations(&mut self) {
        for reg in scan_registrations(&self.doc) {
            if HOVER_EVENTS.contains(&reg.event.as_str()) {
                self.doc.set_attr(reg.element, "maybe-hoverable", "true");
                if let Some(el) = self.doc.element_mut(reg.element) {
                    el.listeners.hover = true;
                }
            } else if reg.event == "click" {
                if let Some(el) = self.doc.element_mut(reg.element) {
                    el.listeners.click = true;
                }
            }
        }
    }

    fn relayout(&mut self, st: &DynamicState) {
        let mut styles = compute_styles(&self.doc, &self.sheets, st);
        // Closed <details> only render their summary.
        for d in self.doc.elements().filter(|&i| self.doc.tag(i) == Some("details")).collect::<Vec<_>>() {
            if self.doc.has_attr(d, "open") {
                continue;
            }
            for &c in &self.doc.nodes[d].children {
                if self.doc.tag(c).is_some_and(|t| t != "summary") {
                    styles[c].display = "none".into();
                }
            }
        }
        self.layout = layout::layout(&self.doc, &styles);
        self.styles = styles;
    }

    fn hit(&self, x: f64, y: f64) -> Option<usize> {
        self.doc
            .elements()
            .filter(|&i| {
                self.layout.boxes[i].is_some_and(|b| b.contains(x, y)) && self.styles[i].visibility == "visible"
            })
            .max_by_key(|&i| (self.styles[i].position != "static", i))
    }
}

struct Tab {
    id: u64,
    page: Page,
    history: Vec<String>,
    pos: usize,
    scroll_y: f64,
    hovered: Option<usize>,
    focused: Option<usize>,
    generation: u64,
}

impl Tab {
    fn dynamic(&self) -> DynamicState {
        DynamicState { hovered: self.hovered, focused: self.focused }
    }

    fn relayout(&mut self) {
        let st = self.dynamic();
        self.page.relayout(&st);
    }

    fn url(&self) -> &str {
        &self.page.doc.url
    }
}

#[derive(Clone, Copy)]
enum HistoryMode {
    Push,
    Reset(usize),
}

struct State {
    tabs: Vec<Tab>,
    active: usize,
    closed: bool,
    next_tab: u64,
    inflight: usize,
    last_network: Instant,
    last_mutation: Instant,
}

struct Shared {
    state: Mutex<State>,
    fetcher: Fetcher,
}

/// Headless browser session. Cloning shares the session.
#[derive(Clone)]
pub struct HeadlessBrowser {
    shared: Arc<Shared>,
}

fn blank_tab(id: u64) -> Tab {
    Tab {
        id,
        page: Page::new(Document::blank("about:blank")),
        history: vec!["about:blank".into()],
        pos: 0,
        scroll_y: 0.0,
        hovered: None,
        focused: None,
        generation: 0,
    }
}

impl Default for HeadlessBrowser {
    fn default() -> Self {
        Self::new(HeadlessConfig::default())
    }
}

impl HeadlessBrowser {
    pub fn new(cfg: HeadlessConfig) -> Self {
        let now = Instant::now();
        let state = State {
            tabs: vec![blank_tab(0)],
            active: 0,
            closed: false,
            next_tab: 1,
            inflight: 0,
            last_network: now,
            last_mutation: now,
        };
        Self { shared: Arc::new(Shared { state: Mutex::new(state), fetcher: Fetcher::new(cfg.request_timeout) }) }
    }

    /// Replaces the active tab's document with the given markup.
    pub fn load_html(&self, markup: &str, url: &str) {
        let mut st = self.shared.state.lock();
        let active = st.active;
        load_document(&mut st.tabs[active], Document::parse(markup, url), HistoryMode::Push);
        st.last_mutation = Instant::now();
    }

    /// URL of the active tab.
    pub fn current_url(&self) -> String {
        let st = self.shared.state.lock();
        st.tabs[st.active].url().to_string()
    }

    /// Current value of the first element matching the `id` attribute.
    pub fn value_of(&self, element_id: &str) -> Option<String> {
        let st = self.shared.state.lock();
        let doc = &st.tabs[st.active].page.doc;
        let i = doc.by_id(element_id)?;
        doc.element(i)?.value.clone()
    }

    /// Simulates a crash: every later call fails with `BrowserGone`.
    pub fn kill(&self) {
        self.shared.state.lock().closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.shared.state.lock().closed
    }

    fn guard(&self) -> Result<parking_lot::MutexGuard<'_, State>, DriverError> {
        let st = self.shared.state.lock();
        if st.closed {
            return Err(DriverError::BrowserGone("browser was closed".into()));
        }
        Ok(st)
    }

    fn start_navigation(&self, st: &mut State, tab_index: usize, req: Request, mode: HistoryMode) {
        let tab = &mut st.tabs[tab_index];
        tab.generation += 1;
        let (tab_id, generation) = (tab.id, tab.generation);
        st.inflight += 1;
        st.last_network = Instant::now();
        let shared = self.shared.clone();
        tokio::spawn(async move {
            let result = shared.fetcher.fetch(&req).await;
            let mut st = shared.state.lock();
            st.inflight -= 1;
            let now = Instant::now();
            st.last_network = now;
            let Some(tab) = st.tabs.iter_mut().find(|t| t.id == tab_id) else { return };
            if tab.generation != generation {
                return;
            }
            let doc = match result {
                Ok(resp) => {
                    if resp.status >= 400 {
                        tracing::debug!(url = %resp.url, status = resp.status, "error status");
                    }
                    Document::parse(&resp.body, &resp.url)
                }
                Err(e) => {
                    tracing::warn!(url = %req.url, error = %e, "navigation failed");
                    let markup = format!("<title>Error</title><h1>This page could not be loaded</h1><p>{}</p>", escape(&e));
                    Document::parse(&markup, &req.url)
                }
            };
            load_document(tab, doc, mode);
            st.last_mutation = now;
        });
    }

    fn navigate_active(&self, st: &mut State, href: &str) -> Result<(), DriverError> {
        let active = st.active;
        let base = st.tabs[active].url().to_string();
        let url = resolve_url(&base, href).ok_or_else(|| DriverError::Navigation(format!("cannot resolve {href:?}")))?;
        self.start_navigation(st, active, Request::get(url), HistoryMode::Push);
        Ok(())
    }

    fn open_tab(&self, st: &mut State, url: Option<String>) {
        let id = st.next_tab;
        st.next_tab += 1;
        st.tabs.push(blank_tab(id));
        st.active = st.tabs.len() - 1;
        if let Some(url) = url {
            let last = st.tabs.len() - 1;
            self.start_navigation(st, last, Request::get(url), HistoryMode::Reset(0));
        }
        st.last_mutation = Instant::now();
    }

    fn submit_form(&self, st: &mut State, form: usize, submitter: Option<usize>) -> Result<(), DriverError> {
        let active = st.active;
        let doc = &st.tabs[active].page.doc;
        let action = submitter
            .and_then(|s| doc.attr(s, "formaction"))
            .or(doc.attr(form, "action"))
            .filter(|a| !a.is_empty())
            .unwrap_or(doc.url.as_str())
            .to_string();
        let method = doc.attr(form, "method").unwrap_or("get").to_ascii_lowercase();
        let data = doc.form_data(form, submitter);
        let target = resolve_url(&doc.url, &action).ok_or_else(|| DriverError::Navigation(format!("bad form action {action:?}")))?;
        let encoded = url::form_urlencoded::Serializer::new(String::new()).extend_pairs(&data).finish();
        let req = if method == "post" {
            Request { url: target, method: Method::Post(encoded) }
        } else {
            let mut u = url::Url::parse(&target).map_err(|e| DriverError::Navigation(e.to_string()))?;
            u.set_query(Some(&encoded));
            Request::get(u.to_string())
        };
        self.start_navigation(st, active, req, HistoryMode::Push);
        Ok(())
    }

    fn run_effects(&self, st: &mut State, origin: usize, effects: Vec<Effect>) -> Result<(), DriverError> {
        for e in effects {
            match e {
                Effect::Navigate(href) => self.navigate_active(st, &href)?,
                Effect::OpenTab(href) => {
                    let base = st.tabs[st.active].url().to_string();
                    self.open_tab(st, resolve_url(&base, &href));
                }
                Effect::SubmitForm => {
                    let form = st.tabs[st.active].page.doc.form_of(origin);
                    if let Some(form) = form {
                        self.submit_form(st, form, None)?;
                    }
                }
                Effect::Toggle(id) => toggle_hidden(&mut st.tabs[st.active], &id),
                Effect::Back => self.history_step(st, -1)?,
                Effect::Reload => self.history_step(st, 0)?,
            }
        }
        Ok(())
    }

    fn history_step(&self, st: &mut State, delta: isize) -> Result<(), DriverError> {
        let active = st.active;
        let tab = &st.tabs[active];
        let pos = tab.pos as isize + delta;
        if pos < 0 || pos as usize >= tab.history.len() {
            return Err(DriverError::Refused(if delta < 0 { "no previous page".into() } else { "no next page".into() }));
        }
        let url = tab.history[pos as usize].clone();
        self.start_navigation(st, active, Request::get(url), HistoryMode::Reset(pos as usize));
        Ok(())
    }

    /// Click semantics on an arena element: handlers along the ancestor
    /// path, then the default action of the nearest activatable element.
    fn activate(&self, st: &mut State, target: usize) -> Result<(), DriverError> {
        let active = st.active;
        let tab = &mut st.tabs[active];
        let doc = &tab.page.doc;
        let path: Vec<usize> = std::iter::once(target).chain(doc.ancestors(target)).filter(|&i| doc.element(i).is_some()).collect();
        tab.focused = path.iter().copied().find(|&i| doc.is_focusable(i));

        let mut effects = Vec::new();
        let mut prevent_default = false;
        for &i in &path {
            if let Some(h) = doc.attr(i, "onclick") {
                prevent_default |= h.contains("return false");
                effects.push((i, interpret(h)));
            }
            if let Some(id) = doc.attr(i, "data-toggle") {
                effects.push((i, vec![Effect::Toggle(id.to_string())]));
            }
        }
        let default = if prevent_default {
            None
        } else {
            path.iter().copied().find(|&i| is_activatable(doc, i))
        };
        for (origin, es) in effects {
            self.run_effects(st, origin, es)?;
        }
        if let Some(el) = default {
            self.default_action(st, el)?;
        }
        let tab = &mut st.tabs[st.active];
        tab.relayout();
        st.last_mutation = Instant::now();
        Ok(())
    }

    fn default_action(&self, st: &mut State, el: usize) -> Result<(), DriverError> {
        let active = st.active;
        let doc = &st.tabs[active].page.doc;
        if doc.is_disabled(el) {
            return Ok(());
        }
        match doc.tag(el).unwrap_or("") {
            "a" => {
                let href = doc.attr(el, "href").unwrap_or("").to_string();
                if href.starts_with('#') {
                    return Ok(());
                }
                if let Some(js) = href.strip_prefix("javascript:") {
                    let effects = interpret(js);
                    return self.run_effects(st, el, effects);
                }
                if doc.attr(el, "target") == Some("_blank") {
                    let url = resolve_url(&doc.url, &href);
                    self.open_tab(st, url);
                    return Ok(());
                }
                self.navigate_active(st, &href)
            }
            "button" => {
                let ty = doc.attr(el, "type").unwrap_or("submit").to_ascii_lowercase();
                match (ty.as_str(), doc.form_of(el)) {
                    ("submit", Some(form)) => self.submit_form(st, form, Some(el)),
                    ("reset", Some(form)) => {
                        reset_form(&mut st.tabs[active].page.doc, form);
                        Ok(())
                    }
                    _ => Ok(()),
                }
            }
            "input" => {
                let ty = doc.input_type(el);
                match ty.as_str() {
                    "submit" | "image" => match doc.form_of(el) {
                        Some(form) => self.submit_form(st, form, Some(el)),
                        None => Ok(()),
                    },
                    "checkbox" => {
                        let doc = &mut st.tabs[active].page.doc;
                        let e = doc.element_mut(el).unwrap();
                        e.checked = !e.checked;
                        self.fire_change(st, el)
                    }
                    "radio" => {
                        let doc = &mut st.tabs[active].page.doc;
                        let name = doc.attr(el, "name").map(str::to_string);
                        let form = doc.form_of(el);
                        let peers: Vec<usize> = doc
                            .elements()
                            .filter(|&i| {
                                doc.tag(i) == Some("input")
                                    && doc.input_type(i) == "radio"
                                    && doc.attr(i, "name").map(str::to_string) == name
                                    && doc.form_of(i) == form
                            })
                            .collect();
                        for p in peers {
                            doc.element_mut(p).unwrap().checked = p == el;
                        }
                        self.fire_change(st, el)
                    }
                    "reset" => {
                        if let Some(form) = doc.form_of(el) {
                            reset_form(&mut st.tabs[active].page.doc, form);
                        }
                        Ok(())
                    }
                    _ => Ok(()),
                }
            }
            "label" => {
                let control = match doc.attr(el, "for") {
                    Some(id) => doc.by_id(id),
                    None => doc
                        .descendants(el)
                        .into_iter()
                        .find(|&d| matches!(doc.tag(d), Some("input" | "select" | "textarea" | "button"))),
                };
                match control {
                    Some(c) if c != el => {
                        st.tabs[active].focused = Some(c);
                        self.default_action(st, c)
                    }
                    _ => Ok(()),
                }
            }
            "summary" => {
                let parent = doc.nodes[el].parent.filter(|&p| doc.tag(p) == Some("details"));
                if let Some(d) = parent {
                    let doc = &mut st.tabs[active].page.doc;
                    if doc.has_attr(d, "open") {
                        doc.remove_attr(d, "open");
                    } else {
                        doc.set_attr(d, "open", "");
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn fire_change(&self, st: &mut State, el: usize) -> Result<(), DriverError> {
        let handler = st.tabs[st.active].page.doc.attr(el, "onchange").map(str::to_string);
        match handler {
            Some(h) => self.run_effects(st, el, interpret(&h)),
            None => Ok(()),
        }
    }

    fn index_of(st: &State, node: NodeRef) -> Result<usize, DriverError> {
        st.tabs[st.active].page.doc.index_of(node).ok_or(DriverError::StaleNode(node))
    }
}

fn insert_locked(st: &mut State, text: &str) -> Result<(), DriverError> {
    let active = st.active;
    let tab = &mut st.tabs[active];
    let Some(f) = tab.focused.filter(|&f| tab.page.doc.is_text_control(f)) else {
        return Err(DriverError::Refused("no editable element has focus".into()));
    };
    let e = tab.page.doc.element_mut(f).unwrap();
    e.value.get_or_insert_with(String::new).push_str(text);
    st.last_mutation = Instant::now();
    Ok(())
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn is_activatable(doc: &Document, i: usize) -> bool {
    match doc.tag(i) {
        Some("a") => doc.has_attr(i, "href"),
        Some("button" | "label" | "summary") => true,
        Some("input") => matches!(doc.input_type(i).as_str(), "submit" | "image" | "checkbox" | "radio" | "reset"),
        _ => false,
    }
}

fn reset_form(doc: &mut Document, form: usize) {
    let members: Vec<usize> = doc.elements().filter(|&i| doc.form_of(i) == Some(form)).collect();
    for i in members {
        let initial = doc.attr(i, "value").map(str::to_string);
        let checked = doc.has_attr(i, "checked");
        if let Some(e) = doc.element_mut(i) {
            if e.tag == "input" {
                e.value = initial;
                e.checked = checked;
            }
        }
    }
}

fn toggle_hidden(tab: &mut Tab, id: &str) {
    let doc = &mut tab.page.doc;
    if let Some(i) = doc.by_id(id) {
        if doc.has_attr(i, "hidden") {
            doc.remove_attr(i, "hidden");
        } else {
            doc.set_attr(i, "hidden", "");
        }
    }
}

fn load_document(tab: &mut Tab, doc: Document, mode: HistoryMode) {
    let url = doc.url.clone();
    tab.page = Page::new(doc);
    tab.scroll_y = 0.0;
    tab.hovered = None;
    tab.focused = None;
    match mode {
        HistoryMode::Push => {
            if tab.history.len() == 1 && tab.history[0] == "about:blank" && tab.pos == 0 && url != "about:blank" {
                tab.history[0] = url;
            } else {
                tab.history.truncate(tab.pos + 1);
                tab.history.push(url);
                tab.pos = tab.history.len() - 1;
            }
        }
        HistoryMode::Reset(pos) => {
            tab.pos = pos.min(tab.history.len() - 1);
            tab.history[tab.pos] = url;
        }
    }
}

fn snapshot_of(tab: &Tab) -> DomSnapshot {
    let page = &tab.page;
    let doc = &page.doc;
    let nodes = doc
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let style = &page.styles[i];
            let mut node = SnapshotNode {
                node_ref: n.id,
                kind: NodeKind::Document,
                tag: String::new(),
                attrs: Default::default(),
                text: String::new(),
                children: n.children.clone(),
                style: ComputedStyle {
                    display: style.display.clone(),
                    visibility: style.visibility.clone(),
                    cursor: style.cursor.clone(),
                },
                bbox: page.layout.boxes[i],
                hover_styled: style.hover_styled,
                listeners: ListenerFlags::default(),
                state: NodeState::default(),
            };
            match &n.data {
                NodeData::Document => {}
                NodeData::Text(t) => {
                    node.kind = NodeKind::Text;
                    node.text = t.clone();
                }
                NodeData::Element(e) => {
                    node.kind = NodeKind::Element;
                    node.tag = e.tag.clone();
                    node.attrs = e.attrs.clone();
                    node.listeners = ListenerFlags {
                        click: e.listeners.click,
                        hover: e.listeners.hover
                            || e.attrs.contains_key("onmouseover")
                            || e.attrs.contains_key("onmouseenter"),
                    };
                    node.state = NodeState {
                        value: if doc.is_text_control(i) { e.value.clone() } else { None },
                        checked: (e.tag == "input" && matches!(doc.input_type(i).as_str(), "checkbox" | "radio"))
                            .then_some(e.checked),
                        selected: e.selected_option.map(|o| doc.option_label(o)),
                        focused: tab.focused == Some(i),
                    };
                }
            }
            node
        })
        .collect();
    DomSnapshot {
        url: doc.url.clone(),
        title: doc.title(),
        viewport: Size { width: VIEWPORT_WIDTH, height: VIEWPORT_HEIGHT },
        document: Size { width: page.layout.width, height: page.layout.height },
        scroll: Size { width: 0.0, height: tab.scroll_y },
        nodes,
        root: 0,
        warnings: doc.warnings.clone(),
    }
}

#[async_trait]
impl BrowserDriver for HeadlessBrowser {
    async fn snapshot(&mut self) -> Result<DomSnapshot, DriverError> {
        let st = self.guard()?;
        Ok(snapshot_of(&st.tabs[st.active]))
    }

    async fn annotate(&mut self, annotations: &[Annotation]) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        let active = st.active;
        let doc = &mut st.tabs[active].page.doc;
        for i in doc.elements().collect::<Vec<_>>() {
            doc.remove_attr(i, "semantic-id");
            doc.remove_attr(i, "clickable");
        }
        for a in annotations {
            if let Some(i) = doc.index_of(a.node_ref) {
                doc.set_attr(i, "semantic-id", &a.semantic_id);
                if a.clickable {
                    doc.set_attr(i, "clickable", "true");
                }
            }
        }
        Ok(())
    }

    async fn resolve(&mut self, semantic_id: &str) -> Result<Option<NodeRef>, DriverError> {
        let st = self.guard()?;
        let doc = &st.tabs[st.active].page.doc;
        Ok(doc.by_attr("semantic-id", semantic_id).map(|i| doc.nodes[i].id))
    }

    async fn scroll_into_view(&mut self, node: NodeRef) -> Result<Rect, DriverError> {
        let mut st = self.guard()?;
        let i = Self::index_of(&st, node)?;
        let active = st.active;
        let tab = &mut st.tabs[active];
        let Some(b) = tab.page.layout.boxes[i] else { return Ok(Rect::default()) };
        let max_scroll = (tab.page.layout.height - VIEWPORT_HEIGHT).max(0.0);
        if b.y < tab.scroll_y || b.bottom() > tab.scroll_y + VIEWPORT_HEIGHT {
            let centered = b.y - ((VIEWPORT_HEIGHT - b.height) / 2.0).max(0.0);
            tab.scroll_y = centered.clamp(0.0, max_scroll);
        }
        Ok(Rect::new(b.x, b.y - tab.scroll_y, b.width, b.height))
    }

    async fn hit_test(&mut self, x: f64, y: f64) -> Result<Vec<NodeRef>, DriverError> {
        let st = self.guard()?;
        let tab = &st.tabs[st.active];
        let doc = &tab.page.doc;
        Ok(match tab.page.hit(x, y + tab.scroll_y) {
            Some(t) => std::iter::once(t).chain(doc.ancestors(t)).map(|i| doc.nodes[i].id).collect(),
            None => vec![],
        })
    }

    async fn click_at(&mut self, x: f64, y: f64) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        let active = st.active;
        let tab = &mut st.tabs[active];
        match tab.page.hit(x, y + tab.scroll_y) {
            Some(target) => self.activate(&mut st, target),
            None => {
                tab.focused = None;
                Ok(())
            }
        }
    }

    async fn hover_at(&mut self, x: f64, y: f64) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        let active = st.active;
        let tab = &mut st.tabs[active];
        let target = tab.page.hit(x, y + tab.scroll_y);
        tab.hovered = target;
        let mut effects = Vec::new();
        if let Some(t) = target {
            let doc = &tab.page.doc;
            for i in std::iter::once(t).chain(doc.ancestors(t)) {
                for attr in ["onmouseover", "onmouseenter"] {
                    if let Some(h) = doc.attr(i, attr) {
                        effects.push((i, interpret(h)));
                    }
                }
            }
        }
        for (origin, es) in effects {
            self.run_effects(&mut st, origin, es)?;
        }
        st.tabs[active].relayout();
        st.last_mutation = Instant::now();
        Ok(())
    }

    async fn focus(&mut self, node: NodeRef) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        let i = Self::index_of(&st, node)?;
        let active = st.active;
        st.tabs[active].focused = Some(i);
        st.tabs[active].relayout();
        Ok(())
    }

    async fn insert_text(&mut self, text: &str) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        insert_locked(&mut st, text)
    }

    async fn press_key(&mut self, key: &str) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        let active = st.active;
        let focused = st.tabs[active].focused;
        let doc = &st.tabs[active].page.doc;
        match key {
            "Enter" => match focused {
                Some(f) if doc.tag(f) == Some("textarea") => {
                    let e = st.tabs[active].page.doc.element_mut(f).unwrap();
                    e.value.get_or_insert_with(String::new).push('\n');
                }
                Some(f) if doc.is_text_control(f) => {
                    if let Some(form) = doc.form_of(f) {
                        self.submit_form(&mut st, form, None)?;
                    }
                }
                Some(f) if is_activatable(doc, f) => self.activate(&mut st, f)?,
                _ => {}
            },
            " " | "Space" => {
                if let Some(f) = focused.filter(|&f| is_activatable(doc, f)) {
                    self.activate(&mut st, f)?;
                } else if focused.is_some_and(|f| doc.is_text_control(f)) {
                    return insert_locked(&mut st, " ");
                }
            }
            "Tab" => {
                let tab = &mut st.tabs[active];
                let doc = &tab.page.doc;
                let order: Vec<usize> = doc
                    .elements()
                    .filter(|&i| doc.is_focusable(i) && tab.page.layout.boxes[i].is_some_and(|b| !b.is_empty()))
                    .collect();
                let next = match focused.and_then(|f| order.iter().position(|&i| i == f)) {
                    Some(p) => order.get(p + 1).or(order.first()).copied(),
                    None => order.first().copied(),
                };
                tab.focused = next;
                tab.relayout();
            }
            "Backspace" => {
                if let Some(f) = focused.filter(|&f| doc.is_text_control(f)) {
                    let e = st.tabs[active].page.doc.element_mut(f).unwrap();
                    if let Some(v) = e.value.as_mut() {
                        v.pop();
                    }
                }
            }
            "Escape" => {}
            k if k.chars().count() == 1 => return insert_locked(&mut st, k),
            other => tracing::debug!(key = other, "key has no effect"),
        }
        st.last_mutation = Instant::now();
        Ok(())
    }

    async fn clear(&mut self, node: NodeRef) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        let i = Self::index_of(&st, node)?;
        let active = st.active;
        let doc = &mut st.tabs[active].page.doc;
        if !doc.is_text_control(i) {
            return Err(DriverError::Refused("element is not editable".into()));
        }
        doc.element_mut(i).unwrap().value = Some(String::new());
        st.last_mutation = Instant::now();
        Ok(())
    }

    async fn select_option(&mut self, node: NodeRef, option: &str) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        let i = Self::index_of(&st, node)?;
        let active = st.active;
        let doc = &mut st.tabs[active].page.doc;
        if doc.tag(i) != Some("select") {
            return Err(DriverError::Refused("element is not a select".into()));
        }
        let wanted = option.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
        let opts = doc.options(i);
        let chosen = opts
            .iter()
            .copied()
            .find(|&o| doc.option_label(o).to_lowercase() == wanted)
            .or_else(|| opts.iter().copied().find(|&o| doc.option_value(o).to_lowercase() == wanted))
            .ok_or_else(|| DriverError::NoSuchOption(option.to_string()))?;
        doc.element_mut(i).unwrap().selected_option = Some(chosen);
        st.last_mutation = Instant::now();
        self.fire_change(&mut st, i)
    }

    async fn navigate(&mut self, url: &str) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        self.navigate_active(&mut st, url)
    }

    async fn back(&mut self) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        self.history_step(&mut st, -1)
    }

    async fn forward(&mut self) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        self.history_step(&mut st, 1)
    }

    async fn reload(&mut self) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        self.history_step(&mut st, 0)
    }

    async fn tabs(&mut self) -> Result<Vec<TabInfo>, DriverError> {
        let st = self.guard()?;
        Ok(st
            .tabs
            .iter()
            .enumerate()
            .map(|(index, t)| TabInfo {
                index,
                title: t.page.doc.title(),
                url: t.url().to_string(),
                active: index == st.active,
            })
            .collect())
    }

    async fn new_tab(&mut self, url: Option<&str>) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        let base = st.tabs[st.active].url().to_string();
        let resolved = match url {
            Some(u) => Some(resolve_url(&base, u).ok_or_else(|| DriverError::Navigation(format!("cannot resolve {u:?}")))?),
            None => None,
        };
        self.open_tab(&mut st, resolved);
        Ok(())
    }

    async fn switch_tab(&mut self, index: usize) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        if index >= st.tabs.len() {
            return Err(DriverError::NoSuchTab(index));
        }
        st.active = index;
        st.last_mutation = Instant::now();
        Ok(())
    }

    async fn close_tab(&mut self, index: usize) -> Result<(), DriverError> {
        let mut st = self.guard()?;
        if index >= st.tabs.len() {
            return Err(DriverError::NoSuchTab(index));
        }
        if st.tabs.len() == 1 {
            return Err(DriverError::Refused("cannot close the last remaining tab".into()));
        }
        st.tabs.remove(index);
        if st.active > index || st.active >= st.tabs.len() {
            st.active = st.active.saturating_sub(1);
        }
        st.last_mutation = Instant::now();
        Ok(())
    }

    async fn activity(&mut self) -> Result<Activity, DriverError> {
        let st = self.guard()?;
        Ok(Activity { inflight: st.inflight, last_network: st.last_network, last_mutation: st.last_mutation })
    }

    async fn screenshot(&mut self) -> Result<Vec<u8>, DriverError> {
        let st = self.guard()?;
        let page = &st.tabs[st.active].page;
        Ok(render::render_png(&page.doc, &page.styles, &page.layout))
    }

    async fn close(&mut self) -> Result<(), DriverError> {
        let mut st = self.shared.state.lock();
        st.closed = true;
        Ok(())
    }
}

/// Launches independent headless sessions (separate cookie jars).
#[derive(Debug, Clone, Default)]
pub struct HeadlessFactory {
    pub config: HeadlessConfig,
}

#[async_trait]
impl BrowserFactory for HeadlessFactory {
    async fn launch(&self) -> Result<Box<dyn BrowserDriver>, DriverError> {
        Ok(Box::new(HeadlessBrowser::new(self.config.clone())))
    }
}
