//! Waiting for network and DOM idleness after an action.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use tokio::time::Instant;

use crate::driver::{BrowserDriver, DriverError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuiescencePolicy {
    #[serde(with = "millis")]
    pub network_idle_window: Duration,
    #[serde(with = "millis")]
    pub dom_mutation_idle_window: Duration,
    #[serde(with = "millis")]
    pub max_wait: Duration,
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        u64::deserialize(d).map(Duration::from_millis)
    }
}

impl Default for QuiescencePolicy {
    fn default() -> Self {
        Self {
            network_idle_window: Duration::from_millis(500),
            dom_mutation_idle_window: Duration::from_millis(300),
            max_wait: Duration::from_secs(10),
        }
    }
}

impl QuiescencePolicy {
    pub fn new(network_idle: Duration, dom_idle: Duration, max_wait: Duration) -> Result<Self, String> {
        let p = Self { network_idle_window: network_idle, dom_mutation_idle_window: dom_idle, max_wait };
        p.validate().map(|_| p)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.max_wait < self.network_idle_window || self.max_wait < self.dom_mutation_idle_window {
            return Err("max_wait must be at least as long as both idle windows".into());
        }
        Ok(())
    }

    /// Short windows for tests against local servers.
    pub fn fast() -> Self {
        Self {
            network_idle_window: Duration::from_millis(20),
            dom_mutation_idle_window: Duration::from_millis(10),
            max_wait: Duration::from_secs(5),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuiescenceReport {
    #[serde(with = "millis")]
    pub waited: Duration,
    pub timed_out: bool,
}

const POLL: Duration = Duration::from_millis(5);

/// Polls driver activity until no request is in flight and both idle
/// windows have elapsed, or until `max_wait`.
pub async fn wait_for_quiescence(
    driver: &mut dyn BrowserDriver,
    policy: &QuiescencePolicy,
) -> Result<QuiescenceReport, DriverError> {
    let start = Instant::now();
    loop {
        let a = driver.activity().await?;
        let now = Instant::now();
        let idle = a.inflight == 0
            && now.duration_since(a.last_network) >= policy.network_idle_window
            && now.duration_since(a.last_mutation) >= policy.dom_mutation_idle_window;
        let waited = now.duration_since(start);
        if idle {
            tracing::debug!(waited_ms = waited.as_millis() as u64, "page quiescent");
            return Ok(QuiescenceReport { waited, timed_out: false });
        }
        if waited >= policy.max_wait {
            tracing::warn!(waited_ms = waited.as_millis() as u64, inflight = a.inflight, "quiescence timeout");
            return Ok(QuiescenceReport { waited, timed_out: true });
        }
        let until_net = policy.network_idle_window.saturating_sub(now.duration_since(a.last_network));
        let until_dom = policy.dom_mutation_idle_window.saturating_sub(now.duration_since(a.last_mutation));
        let nap = until_net.max(until_dom).max(POLL).min(policy.max_wait - waited);
        tokio::time::sleep(nap.max(Duration::from_millis(1))).await;
    }
}
