use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_RATE: u32 = 800;
pub const DEFAULT_CONCURRENCY: usize = 256;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(3);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OptionsError {
    #[error("concurrency must be at least 1")]
    Concurrency,
    #[error("rate must be at least 1 probe per second")]
    Rate,
    #[error("connect timeout must be positive")]
    Timeout,
}

/// How probes are dispatched.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Execution {
    /// One probe at a time on the calling thread.
    #[cfg_attr(not(feature = "parallel"), default)]
    Sequential,
    /// A worker pool sized to `concurrency`.
    #[cfg(feature = "parallel")]
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanOptions {
    /// Maximum simultaneous in-flight probes.
    pub concurrency: usize,
    /// Maximum probe initiations in any one-second window.
    pub rate: u32,
    /// Applied to connects and to every socket read/write.
    #[serde(with = "millis")]
    pub connect_timeout: Duration,
    /// Enables second-phase footprinting in every adapter.
    pub extended: bool,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            concurrency: DEFAULT_CONCURRENCY,
            rate: DEFAULT_RATE,
            connect_timeout: DEFAULT_TIMEOUT,
            extended: false,
            execution: Execution::default(),
        }
    }
}

impl ScanOptions {
    pub fn validate(&self) -> Result<(), OptionsError> {
        if self.concurrency == 0 {
            return Err(OptionsError::Concurrency);
        }
        if self.rate == 0 {
            return Err(OptionsError::Rate);
        }
        if self.connect_timeout.is_zero() {
            return Err(OptionsError::Timeout);
        }
        Ok(())
    }

    pub fn extended(mut self, on: bool) -> Self {
        self.extended = on;
        self
    }

    pub fn with_concurrency(mut self, n: usize) -> Self {
        self.concurrency = n;
        self
    }

    pub fn with_rate(mut self, rate: u32) -> Self {
        self.rate = rate;
        self
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.connect_timeout = timeout;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

mod millis {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}
