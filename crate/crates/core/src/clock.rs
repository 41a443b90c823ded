//! Time sources. Replayed and scripted runs use a logical clock advanced only
//! by recorded response latencies, so every timing they persist is
//! reproducible.

use std::fmt::Debug;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use chrono::{DateTime, SecondsFormat, Utc};

pub trait Clock: Send + Sync + Debug {
    /// Milliseconds since the clock was created.
    fn now_ms(&self) -> u64;
    /// Advances a logical clock; wall clocks ignore it.
    fn advance(&self, ms: u64);
    /// RFC 3339 timestamp for transcript records.
    fn timestamp(&self) -> String;
}

#[derive(Debug)]
pub struct SystemClock {
    start: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        SystemClock { start: Instant::now() }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        self.start.elapsed().as_millis() as u64
    }

    fn advance(&self, _ms: u64) {}

    fn timestamp(&self) -> String {
        Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
    }
}

#[derive(Debug, Default)]
pub struct LogicalClock {
    ms: AtomicU64,
}

impl LogicalClock {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Clock for LogicalClock {
    fn now_ms(&self) -> u64 {
        self.ms.load(Ordering::SeqCst)
    }

    fn advance(&self, ms: u64) {
        self.ms.fetch_add(ms, Ordering::SeqCst);
    }

    fn timestamp(&self) -> String {
        let ms = self.now_ms() as i64;
        DateTime::<Utc>::from_timestamp_millis(ms)
            .unwrap_or_default()
            .to_rfc3339_opts(SecondsFormat::Millis, true)
    }
}
