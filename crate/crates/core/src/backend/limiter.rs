//! Retry policy and a sliding-window rate limiter.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::clock::Clock;

/// Exponential backoff: the wait before retry `k` (1-based) is
/// `base_delay * 2^(k-1)`, capped at `max_delay`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy {
            max_retries: 0,
            ..Self::default()
        }
    }

    pub fn delay(&self, retry: u32) -> Duration {
        let shift = retry.saturating_sub(1).min(20);
        self.base_delay
            .saturating_mul(1u32 << shift)
            .min(self.max_delay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateLimit {
    pub max_requests: usize,
    pub window: Duration,
}

/// Admits at most `max_requests` calls in any window of length `window`.
pub struct RateLimiter {
    limit: RateLimit,
    clock: Arc<dyn Clock>,
    issued: Mutex<VecDeque<Duration>>,
}

impl RateLimiter {
    pub fn new(limit: RateLimit, clock: Arc<dyn Clock>) -> Self {
        assert!(limit.max_requests > 0, "rate limit must admit at least one request");
        RateLimiter {
            limit,
            clock,
            issued: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks until a call may be issued, then records it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let now = self.clock.now();
                let mut issued = self.issued.lock().unwrap();
                while let Some(&t) = issued.front() {
                    if now >= t + self.limit.window {
                        issued.pop_front();
                    } else {
                        break;
                    }
                }
                if issued.len() < self.limit.max_requests {
                    issued.push_back(now);
                    return;
                }
                issued[0] + self.limit.window - now
            };
            self.clock.sleep(wait);
        }
    }
}
