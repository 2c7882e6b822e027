use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::process::Stdio;
use std::time::Duration;

use async_trait::async_trait;
use base64::Engine as _;
use serde_json::{json, Value};
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::process::Child;
use tokio::time::Instant;

use super::client::{CdpClient, Event, ProtocolLog};
use crate::dom::Annotation;
use crate::driver::{Activity, BrowserDriver, BrowserFactory, DriverError};
use crate::observation::TabInfo;
use crate::snapshot::{DomSnapshot, NodeRef, Rect};

pub const INSTRUMENT_JS: &str = include_str!("../../assets/instrument.js");

#[derive(Debug, Clone)]
pub struct CdpConfig {
    pub call_timeout: Duration,
    pub viewport: (u32, u32),
}

impl Default for CdpConfig {
    fn default() -> Self {
        Self { call_timeout: Duration::from_secs(30), viewport: (1280, 720) }
    }
}

#[derive(Debug, Clone)]
struct Tab {
    target_id: String,
    session_id: String,
}

/// A browser session driven over the DevTools protocol. Each driver owns
/// one browser context, so cookies and storage are not shared with other
/// drivers on the same browser.
pub struct CdpDriver {
    client: CdpClient,
    config: CdpConfig,
    context_id: Option<String>,
    tabs: Vec<Tab>,
    active: usize,
    inflight: HashMap<String, HashSet<String>>,
    last_network: Instant,
    gone: bool,
    child: Option<Child>,
    _profile: Option<tempfile::TempDir>,
}

fn gone() -> DriverError {
    DriverError::BrowserGone("session was closed".into())
}

impl CdpDriver {
    /// Attaches to a browser-level websocket endpoint and opens a fresh
    /// context with one blank tab.
    pub async fn connect(ws_url: &str, config: CdpConfig) -> Result<Self, DriverError> {
        let client = CdpClient::connect(ws_url, config.call_timeout).await?;
        let mut d = Self {
            client,
            config,
            context_id: None,
            tabs: Vec::new(),
            active: 0,
            inflight: HashMap::new(),
            last_network: Instant::now(),
            gone: false,
            child: None,
            _profile: None,
        };
        d.client.call("Target.setDiscoverTargets", json!({ "discover": true }), None).await?;
        let ctx = d.client.call("Target.createBrowserContext", json!({ "disposeOnDetach": true }), None).await?;
        d.context_id = ctx.get("browserContextId").and_then(Value::as_str).map(str::to_string);
        d.open_target("about:blank").await?;
        Ok(d)
    }

    pub fn protocol_log(&self) -> &ProtocolLog {
        self.client.log()
    }

    fn session(&self) -> Result<&str, DriverError> {
        if self.gone {
            return Err(gone());
        }
        self.tabs.get(self.active).map(|t| t.session_id.as_str()).ok_or_else(gone)
    }

    async fn call(&self, method: &str, params: Value) -> Result<Value, DriverError> {
        let s = self.session()?.to_string();
        self.client.call(method, params, Some(&s)).await
    }

    async fn open_target(&mut self, url: &str) -> Result<(), DriverError> {
        let mut params = json!({ "url": "about:blank" });
        if let Some(ctx) = &self.context_id {
            params["browserContextId"] = Value::String(ctx.clone());
        }
        let created = self.client.call("Target.createTarget", params, None).await?;
        let target_id = str_field(&created, "targetId")?;
        self.attach(target_id).await?;
        if url != "about:blank" {
            self.navigate(url).await?;
        }
        Ok(())
    }

    async fn attach(&mut self, target_id: String) -> Result<(), DriverError> {
        let attached = self
            .client
            .call("Target.attachToTarget", json!({ "targetId": target_id, "flatten": true }), None)
            .await?;
        let session_id = str_field(&attached, "sessionId")?;
        let s = Some(session_id.as_str());
        for method in ["Page.enable", "Runtime.enable", "Network.enable"] {
            self.client.call(method, json!({}), s).await?;
        }
        self.client.call("Page.addScriptToEvaluateOnNewDocument", json!({ "source": INSTRUMENT_JS }), s).await?;
        let (w, h) = self.config.viewport;
        self.client
            .call(
                "Emulation.setDeviceMetricsOverride",
                json!({ "width": w, "height": h, "deviceScaleFactor": 1, "mobile": false }),
                s,
            )
            .await?;
        self.client.call("Runtime.evaluate", json!({ "expression": INSTRUMENT_JS }), s).await?;
        self.tabs.push(Tab { target_id, session_id });
        self.active = self.tabs.len() - 1;
        Ok(())
    }

    /// Applies queued events: network bookkeeping, popups and closed tabs.
    async fn pump(&mut self) -> Result<(), DriverError> {
        if self.gone {
            return Err(gone());
        }
        if self.client.is_closed() {
            self.gone = true;
            return Err(DriverError::BrowserGone("browser connection dropped".into()));
        }
        for Event { method, params, session_id } in self.client.drain_events() {
            let request = params.get("requestId").and_then(Value::as_str).map(str::to_string);
            match method.as_str() {
                "Network.requestWillBeSent" => {
                    if let (Some(s), Some(r)) = (session_id, request) {
                        self.inflight.entry(s).or_default().insert(r);
                    }
                    self.last_network = Instant::now();
                }
                "Network.loadingFinished" | "Network.loadingFailed" => {
                    if let (Some(s), Some(r)) = (session_id, request) {
                        if let Some(set) = self.inflight.get_mut(&s) {
                            set.remove(&r);
                        }
                    }
                    self.last_network = Instant::now();
                }
                "Target.targetCreated" => {
                    let info = &params["targetInfo"];
                    let opener = info.get("openerId").and_then(Value::as_str);
                    let ours = opener.is_some_and(|o| self.tabs.iter().any(|t| t.target_id == o));
                    let known = info["targetId"].as_str().is_some_and(|id| self.tabs.iter().any(|t| t.target_id == id));
                    if ours && !known && info["type"] == "page" {
                        self.attach(str_field(info, "targetId")?).await?;
                    }
                }
                "Target.targetDestroyed" => {
                    if let Some(id) = params.get("targetId").and_then(Value::as_str) {
                        self.forget(id);
                    }
                }
                "Inspector.detached" | "Target.detachedFromTarget" if session_id.is_none() => {
                    if let Some(s) = params.get("sessionId").and_then(Value::as_str) {
                        if let Some(t) = self.tabs.iter().find(|t| t.session_id == s).cloned() {
                            self.forget(&t.target_id);
                        }
                    }
                }
                _ => {}
            }
        }
        if self.tabs.is_empty() {
            self.gone = true;
            return Err(DriverError::BrowserGone("all tabs were closed".into()));
        }
        Ok(())
    }

    fn forget(&mut self, target_id: &str) {
        if let Some(i) = self.tabs.iter().position(|t| t.target_id == target_id) {
            let t = self.tabs.remove(i);
            self.inflight.remove(&t.session_id);
            if self.active >= i && self.active > 0 {
                self.active -= 1;
            }
        }
    }

    /// Calls `__uxsim.<call>` in the active page, reinstalling the helpers
    /// once if the document was replaced before they were injected.
    async fn helper(&mut self, call: &str) -> Result<Value, DriverError> {
        self.pump().await?;
        let expression = format!("__uxsim.{call}");
        for attempt in 0..2 {
            let r = self
                .call("Runtime.evaluate", json!({ "expression": expression, "returnByValue": true, "awaitPromise": true }))
                .await?;
            match r.get("exceptionDetails") {
                None => return Ok(r["result"].get("value").cloned().unwrap_or(Value::Null)),
                Some(ex) => {
                    let text = ex["exception"]["description"]
                        .as_str()
                        .or_else(|| ex["text"].as_str())
                        .unwrap_or("script error")
                        .to_string();
                    if attempt == 0 && text.contains("__uxsim") {
                        self.call("Runtime.evaluate", json!({ "expression": INSTRUMENT_JS })).await?;
                        continue;
                    }
                    if let Some(r) = text.split("stale node ").nth(1) {
                        let n = r.split(|c: char| !c.is_ascii_digit()).next().unwrap_or("0");
                        return Err(DriverError::StaleNode(n.parse().unwrap_or(0)));
                    }
                    return Err(DriverError::Protocol(text));
                }
            }
        }
        Err(DriverError::Protocol("page helpers unavailable".into()))
    }

    async fn mouse(&mut self, kind: &str, x: f64, y: f64) -> Result<(), DriverError> {
        let mut p = json!({ "type": kind, "x": x, "y": y });
        if kind != "mouseMoved" {
            p["button"] = json!("left");
            p["clickCount"] = json!(1);
        }
        self.call("Input.dispatchMouseEvent", p).await.map(drop)
    }

    async fn history_step(&mut self, delta: i64) -> Result<(), DriverError> {
        self.pump().await?;
        let h = self.call("Page.getNavigationHistory", json!({})).await?;
        let idx = h["currentIndex"].as_i64().unwrap_or(0) + delta;
        let entries = h["entries"].as_array().cloned().unwrap_or_default();
        let Some(entry) = usize::try_from(idx).ok().and_then(|i| entries.get(i)) else {
            let which = if delta < 0 { "back" } else { "forward" };
            return Err(DriverError::Refused(format!("no page to go {which} to")));
        };
        self.last_network = Instant::now();
        self.call("Page.navigateToHistoryEntry", json!({ "entryId": entry["id"] })).await.map(drop)
    }
}

fn str_field(v: &Value, key: &str) -> Result<String, DriverError> {
    v.get(key)
        .and_then(Value::as_str)
        .map(str::to_string)
        .ok_or_else(|| DriverError::Protocol(format!("response is missing {key}")))
}

fn as_ref(v: &Value) -> Option<NodeRef> {
    v.as_u64()
}

fn key_event(key: &str) -> Option<(String, String, i64, Option<String>)> {
    let named = |code: &str, vk: i64, text: Option<&str>| Some((key.to_string(), code.to_string(), vk, text.map(str::to_string)));
    match key {
        "Enter" => named("Enter", 13, Some("\r")),
        "Tab" => named("Tab", 9, None),
        "Backspace" => named("Backspace", 8, None),
        "Delete" => named("Delete", 46, None),
        "Escape" => named("Escape", 27, None),
        "ArrowUp" => named("ArrowUp", 38, None),
        "ArrowDown" => named("ArrowDown", 40, None),
        "ArrowLeft" => named("ArrowLeft", 37, None),
        "ArrowRight" => named("ArrowRight", 39, None),
        "Home" => named("Home", 36, None),
        "End" => named("End", 35, None),
        "PageUp" => named("PageUp", 33, None),
        "PageDown" => named("PageDown", 34, None),
        " " | "Space" => Some((" ".into(), "Space".into(), 32, Some(" ".into()))),
        _ => {
            let mut chars = key.chars();
            let c = chars.next()?;
            if chars.next().is_some() {
                return None;
            }
            let vk = c.to_ascii_uppercase() as i64;
            let code = if c.is_ascii_alphabetic() {
                format!("Key{}", c.to_ascii_uppercase())
            } else if c.is_ascii_digit() {
                format!("Digit{c}")
            } else {
                String::new()
            };
            Some((c.to_string(), code, vk, Some(c.to_string())))
        }
    }
}

#[async_trait]
impl BrowserDriver for CdpDriver {
    async fn snapshot(&mut self) -> Result<DomSnapshot, DriverError> {
        let v = self.helper("snapshot()").await?;
        serde_json::from_value(v).map_err(|e| DriverError::Protocol(format!("malformed snapshot: {e}")))
    }

    async fn annotate(&mut self, annotations: &[Annotation]) -> Result<(), DriverError> {
        let list: Vec<Value> = annotations
            .iter()
            .map(|a| json!({ "node_ref": a.node_ref, "semantic_id": a.semantic_id, "clickable": a.clickable }))
            .collect();
        self.helper(&format!("annotate({})", Value::Array(list))).await.map(drop)
    }

    async fn resolve(&mut self, semantic_id: &str) -> Result<Option<NodeRef>, DriverError> {
        let v = self.helper(&format!("resolve({})", Value::String(semantic_id.into()))).await?;
        Ok(as_ref(&v))
    }

    async fn scroll_into_view(&mut self, node: NodeRef) -> Result<Rect, DriverError> {
        let v = self.helper(&format!("scrollIntoView({node})")).await?;
        serde_json::from_value(v).map_err(|e| DriverError::Protocol(format!("malformed rect: {e}")))
    }

    async fn hit_test(&mut self, x: f64, y: f64) -> Result<Vec<NodeRef>, DriverError> {
        let v = self.helper(&format!("hitTest({x}, {y})")).await?;
        Ok(v.as_array().map(|a| a.iter().filter_map(as_ref).collect()).unwrap_or_default())
    }

    async fn click_at(&mut self, x: f64, y: f64) -> Result<(), DriverError> {
        self.pump().await?;
        self.last_network = Instant::now();
        self.mouse("mouseMoved", x, y).await?;
        self.mouse("mousePressed", x, y).await?;
        self.mouse("mouseReleased", x, y).await
    }

    async fn hover_at(&mut self, x: f64, y: f64) -> Result<(), DriverError> {
        self.pump().await?;
        self.mouse("mouseMoved", x, y).await
    }

    async fn focus(&mut self, node: NodeRef) -> Result<(), DriverError> {
        self.helper(&format!("focus({node})")).await.map(drop)
    }

    async fn insert_text(&mut self, text: &str) -> Result<(), DriverError> {
        self.pump().await?;
        self.call("Input.insertText", json!({ "text": text })).await.map(drop)
    }

    async fn press_key(&mut self, key: &str) -> Result<(), DriverError> {
        self.pump().await?;
        let Some((key, code, vk, text)) = key_event(key) else {
            return Err(DriverError::Refused(format!("unsupported key {key:?}")));
        };
        let mut down = json!({ "type": "keyDown", "key": key, "code": code, "windowsVirtualKeyCode": vk });
        if let Some(t) = &text {
            down["text"] = json!(t);
        }
        self.last_network = Instant::now();
        self.call("Input.dispatchKeyEvent", down).await?;
        self.call("Input.dispatchKeyEvent", json!({ "type": "keyUp", "key": key, "code": code, "windowsVirtualKeyCode": vk }))
            .await
            .map(drop)
    }

    async fn clear(&mut self, node: NodeRef) -> Result<(), DriverError> {
        self.helper(&format!("clear({node})")).await.map(drop)
    }

    async fn select_option(&mut self, node: NodeRef, option: &str) -> Result<(), DriverError> {
        self.last_network = Instant::now();
        let v = self.helper(&format!("select({node}, {})", Value::String(option.into()))).await?;
        if v.as_bool() == Some(true) {
            Ok(())
        } else {
            Err(DriverError::NoSuchOption(option.into()))
        }
    }

    async fn navigate(&mut self, url: &str) -> Result<(), DriverError> {
        self.pump().await?;
        self.last_network = Instant::now();
        let r = self.call("Page.navigate", json!({ "url": url })).await?;
        match r.get("errorText").and_then(Value::as_str) {
            Some(e) if !e.is_empty() => Err(DriverError::Navigation(format!("{url}: {e}"))),
            _ => Ok(()),
        }
    }

    async fn back(&mut self) -> Result<(), DriverError> {
        self.history_step(-1).await
    }

    async fn forward(&mut self) -> Result<(), DriverError> {
        self.history_step(1).await
    }

    async fn reload(&mut self) -> Result<(), DriverError> {
        self.pump().await?;
        self.last_network = Instant::now();
        self.call("Page.reload", json!({})).await.map(drop)
    }

    async fn tabs(&mut self) -> Result<Vec<TabInfo>, DriverError> {
        self.pump().await?;
        let mut out = Vec::with_capacity(self.tabs.len());
        for (index, t) in self.tabs.iter().enumerate() {
            let r = self.client.call("Target.getTargetInfo", json!({ "targetId": t.target_id }), None).await?;
            let info = &r["targetInfo"];
            out.push(TabInfo {
                index,
                title: info["title"].as_str().unwrap_or_default().to_string(),
                url: info["url"].as_str().unwrap_or_default().to_string(),
                active: index == self.active,
            });
        }
        Ok(out)
    }

    async fn new_tab(&mut self, url: Option<&str>) -> Result<(), DriverError> {
        self.pump().await?;
        self.open_target(url.unwrap_or("about:blank")).await
    }

    async fn switch_tab(&mut self, index: usize) -> Result<(), DriverError> {
        self.pump().await?;
        let t = self.tabs.get(index).ok_or(DriverError::NoSuchTab(index))?;
        self.client.call("Target.activateTarget", json!({ "targetId": t.target_id }), None).await?;
        self.active = index;
        Ok(())
    }

    async fn close_tab(&mut self, index: usize) -> Result<(), DriverError> {
        self.pump().await?;
        if index >= self.tabs.len() {
            return Err(DriverError::NoSuchTab(index));
        }
        if self.tabs.len() == 1 {
            return Err(DriverError::Refused("cannot close the last tab; use terminate".into()));
        }
        let id = self.tabs[index].target_id.clone();
        self.client.call("Target.closeTarget", json!({ "targetId": id }), None).await?;
        self.forget(&id);
        Ok(())
    }

    async fn activity(&mut self) -> Result<Activity, DriverError> {
        let since = self.helper("activity()").await?.as_f64().unwrap_or(0.0).max(0.0);
        let now = Instant::now();
        let last_mutation = now.checked_sub(Duration::from_secs_f64(since / 1000.0)).unwrap_or(now);
        let inflight = self.inflight.get(self.session()?).map_or(0, HashSet::len);
        Ok(Activity { inflight, last_network: self.last_network, last_mutation })
    }

    async fn screenshot(&mut self) -> Result<Vec<u8>, DriverError> {
        self.pump().await?;
        let r = self.call("Page.captureScreenshot", json!({ "format": "png", "captureBeyondViewport": true })).await?;
        base64::engine::general_purpose::STANDARD
            .decode(str_field(&r, "data")?)
            .map_err(|e| DriverError::Protocol(format!("bad screenshot data: {e}")))
    }

    async fn close(&mut self) -> Result<(), DriverError> {
        if self.gone {
            return Ok(());
        }
        self.gone = true;
        let result = match (&self.child, &self.context_id) {
            (Some(_), _) => self.client.call("Browser.close", json!({}), None).await.map(drop),
            (None, Some(ctx)) => self
                .client
                .call("Target.disposeBrowserContext", json!({ "browserContextId": ctx }), None)
                .await
                .map(drop),
            (None, None) => Ok(()),
        };
        if let Some(mut child) = self.child.take() {
            let _ = child.kill().await;
        }
        match result {
            Err(DriverError::BrowserGone(_)) | Ok(()) => Ok(()),
            Err(e) => Err(e),
        }
    }
}

/// Starts a local headless Chrome for each session.
#[derive(Debug, Clone)]
pub struct ChromeLauncher {
    pub binary: PathBuf,
    pub extra_args: Vec<String>,
    pub startup_timeout: Duration,
    pub config: CdpConfig,
}

impl ChromeLauncher {
    pub fn new(binary: impl Into<PathBuf>) -> Self {
        Self { binary: binary.into(), extra_args: Vec::new(), startup_timeout: Duration::from_secs(20), config: CdpConfig::default() }
    }

    /// Looks for `UXSIM_CHROME`, then common binary names on `PATH`.
    pub fn discover() -> Option<Self> {
        if let Some(p) = std::env::var_os("UXSIM_CHROME") {
            return Some(Self::new(p));
        }
        let names = ["google-chrome", "google-chrome-stable", "chromium", "chromium-browser", "chrome", "headless_shell"];
        let path = std::env::var_os("PATH")?;
        std::env::split_paths(&path)
            .flat_map(|dir| names.iter().map(move |n| dir.join(n)))
            .find(|p| p.is_file())
            .map(Self::new)
    }

    pub async fn launch(&self) -> Result<CdpDriver, DriverError> {
        let profile = tempfile::tempdir().map_err(|e| DriverError::BrowserGone(format!("no profile dir: {e}")))?;
        let (w, h) = self.config.viewport;
        let mut child = tokio::process::Command::new(&self.binary)
            .arg("--headless=new")
            .arg("--remote-debugging-port=0")
            .arg(format!("--user-data-dir={}", profile.path().display()))
            .arg(format!("--window-size={w},{h}"))
            .args(["--no-first-run", "--no-default-browser-check", "--disable-gpu", "--disable-extensions"])
            .args(&self.extra_args)
            .arg("about:blank")
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::piped())
            .kill_on_drop(true)
            .spawn()
            .map_err(|e| DriverError::BrowserGone(format!("cannot start {}: {e}", self.binary.display())))?;
        let stderr = child.stderr.take().expect("stderr is piped");
        let find = async {
            let mut lines = BufReader::new(stderr).lines();
            while let Ok(Some(line)) = lines.next_line().await {
                if let Some(url) = line.split("DevTools listening on ").nth(1) {
                    return Some(url.trim().to_string());
                }
            }
            None
        };
        let ws = match tokio::time::timeout(self.startup_timeout, find).await {
            Ok(Some(ws)) => ws,
            _ => return Err(DriverError::BrowserGone("browser did not report a debugging endpoint".into())),
        };
        let mut d = CdpDriver::connect(&ws, self.config.clone()).await?;
        d.child = Some(child);
        d._profile = Some(profile);
        Ok(d)
    }
}

/// Where CDP sessions come from.
#[derive(Debug, Clone)]
pub enum CdpFactory {
    /// A fresh browser process and profile per session.
    Launch(ChromeLauncher),
    /// A fresh browser context per session on an already running browser.
    Connect { ws_url: String, config: CdpConfig },
}

#[async_trait]
impl BrowserFactory for CdpFactory {
    async fn launch(&self) -> Result<Box<dyn BrowserDriver>, DriverError> {
        Ok(match self {
            CdpFactory::Launch(l) => Box::new(l.launch().await?),
            CdpFactory::Connect { ws_url, config } => Box::new(CdpDriver::connect(ws_url, config.clone()).await?),
        })
    }
}
