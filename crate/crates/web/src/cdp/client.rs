//! Minimal DevTools protocol client over a websocket.

use std::collections::HashMap;
use std::sync::Arc;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use futures::{SinkExt, StreamExt};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::{mpsc, oneshot};
use tokio_tungstenite::tungstenite::Message;

use crate::driver::DriverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Sent,
    Received,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedMessage {
    pub direction: Direction,
    /// Milliseconds since the unix epoch.
    pub at_ms: u64,
    pub message: Value,
}

/// Every protocol frame sent or received, in order.
#[derive(Debug, Clone, Default)]
pub struct ProtocolLog(Arc<Mutex<Vec<LoggedMessage>>>);

impl ProtocolLog {
    fn push(&self, direction: Direction, message: Value) {
        let at_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
        self.0.lock().push(LoggedMessage { direction, at_ms, message });
    }

    pub fn entries(&self) -> Vec<LoggedMessage> {
        self.0.lock().clone()
    }

    pub fn len(&self) -> usize {
        self.0.lock().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One JSON object per line.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for m in self.0.lock().iter() {
            out.push_str(&serde_json::to_string(m).expect("log entry serializes"));
            out.push('\n');
        }
        out
    }
}

/// An unsolicited protocol event.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub method: String,
    pub params: Value,
    pub session_id: Option<String>,
}

type Pending = Arc<Mutex<HashMap<u64, oneshot::Sender<Result<Value, DriverError>>>>>;

pub struct CdpClient {
    next_id: AtomicU64,
    pending: Pending,
    outgoing: mpsc::UnboundedSender<String>,
    events: Mutex<mpsc::UnboundedReceiver<Event>>,
    closed: Arc<AtomicBool>,
    log: ProtocolLog,
    timeout: Duration,
}

impl CdpClient {
    pub async fn connect(ws_url: &str, timeout: Duration) -> Result<Self, DriverError> {
        let (socket, _) = tokio_tungstenite::connect_async(ws_url)
            .await
            .map_err(|e| DriverError::BrowserGone(format!("cannot connect to {ws_url}: {e}")))?;
        let (mut sink, mut stream) = socket.split();
        let pending: Pending = Arc::default();
        let closed = Arc::new(AtomicBool::new(false));
        let log = ProtocolLog::default();
        let (out_tx, mut out_rx) = mpsc::unbounded_channel::<String>();
        let (ev_tx, ev_rx) = mpsc::unbounded_channel();

        let writer_closed = closed.clone();
        tokio::spawn(async move {
            while let Some(text) = out_rx.recv().await {
                if sink.send(Message::Text(text.into())).await.is_err() {
                    break;
                }
            }
            writer_closed.store(true, Ordering::SeqCst);
            let _ = sink.close().await;
        });

        let reader_pending = pending.clone();
        let reader_closed = closed.clone();
        let reader_log = log.clone();
        tokio::spawn(async move {
            while let Some(frame) = stream.next().await {
                let text = match frame {
                    Ok(Message::Text(t)) => t.to_string(),
                    Ok(Message::Binary(b)) => String::from_utf8_lossy(&b).into_owned(),
                    Ok(Message::Close(_)) | Err(_) => break,
                    Ok(_) => continue,
                };
                let Ok(msg) = serde_json::from_str::<Value>(&text) else {
                    tracing::warn!(frame = %text, "unparseable protocol frame");
                    continue;
                };
                reader_log.push(Direction::Received, msg.clone());
                if let Some(id) = msg.get("id").and_then(Value::as_u64) {
                    if let Some(tx) = reader_pending.lock().remove(&id) {
                        let result = match msg.get("error") {
                            Some(err) => Err(DriverError::Protocol(
                                err.get("message").and_then(Value::as_str).unwrap_or("unknown error").to_string(),
                            )),
                            None => Ok(msg.get("result").cloned().unwrap_or(Value::Null)),
                        };
                        let _ = tx.send(result);
                    }
                } else if let Some(method) = msg.get("method").and_then(Value::as_str) {
                    let _ = ev_tx.send(Event {
                        method: method.to_string(),
                        params: msg.get("params").cloned().unwrap_or(Value::Null),
                        session_id: msg.get("sessionId").and_then(Value::as_str).map(str::to_string),
                    });
                }
            }
            reader_closed.store(true, Ordering::SeqCst);
            for (_, tx) in reader_pending.lock().drain() {
                let _ = tx.send(Err(DriverError::BrowserGone("connection closed".into())));
            }
        });

        Ok(Self {
            next_id: AtomicU64::new(1),
            pending,
            outgoing: out_tx,
            events: Mutex::new(ev_rx),
            closed,
            log,
            timeout,
        })
    }

    pub fn log(&self) -> &ProtocolLog {
        &self.log
    }

    pub fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }

    pub async fn call(&self, method: &str, params: Value, session: Option<&str>) -> Result<Value, DriverError> {
        if self.is_closed() {
            return Err(DriverError::BrowserGone("connection closed".into()));
        }
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let mut msg = json!({ "id": id, "method": method, "params": params });
        if let Some(s) = session {
            msg["sessionId"] = Value::String(s.to_string());
        }
        let (tx, rx) = oneshot::channel();
        self.pending.lock().insert(id, tx);
        self.log.push(Direction::Sent, msg.clone());
        if self.outgoing.send(msg.to_string()).is_err() {
            self.pending.lock().remove(&id);
            return Err(DriverError::BrowserGone("connection closed".into()));
        }
        match tokio::time::timeout(self.timeout, rx).await {
            Ok(Ok(result)) => result,
            Ok(Err(_)) => Err(DriverError::BrowserGone("connection closed".into())),
            Err(_) => {
                self.pending.lock().remove(&id);
                Err(DriverError::Protocol(format!("{method} timed out after {} ms", self.timeout.as_millis())))
            }
        }
    }

    /// Events received since the last drain.
    pub fn drain_events(&self) -> Vec<Event> {
        let mut rx = self.events.lock();
        let mut out = Vec::new();
        while let Ok(e) = rx.try_recv() {
            out.push(e);
        }
        out
    }
}
