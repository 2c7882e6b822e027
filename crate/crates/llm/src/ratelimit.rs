use std::time::Duration;

use tokio::sync::Mutex;
use tokio::time::Instant;

/// Serializes dispatch so that consecutive requests are at least
/// `min_interval` apart. Callers block while waiting for their slot.
#[derive(Debug)]
pub struct RateLimiter {
    min_interval: Duration,
    next_slot: Mutex<Option<Instant>>,
}

impl RateLimiter {
    pub fn new(min_interval: Duration) -> Self {
        Self { min_interval, next_slot: Mutex::new(None) }
    }

    pub fn per_minute(requests: f64) -> Self {
        Self::new(Duration::from_secs_f64(60.0 / requests))
    }

    pub async fn acquire(&self) {
        let mut slot = self.next_slot.lock().await;
        let now = Instant::now();
        if let Some(at) = *slot {
            if at > now {
                tokio::time::sleep_until(at).await;
            }
        }
        *slot = Some(Instant::now() + self.min_interval);
    }
}
