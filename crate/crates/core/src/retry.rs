//! Retry schedule with exponential backoff and seedable jitter.

use std::sync::Mutex;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct RetryPolicy {
    /// Total attempts including the first one.
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    /// No waiting between attempts; for tests and mock runs.
    pub fn immediate(max_attempts: u32) -> Self {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
            max_delay: Duration::ZERO,
        }
    }

    /// Delay before retry number `retry` (1-based), with `jitter` in [0, 1).
    ///
    /// The un-capped delay lies in `[base·2^(k-1), 1.5·base·2^(k-1))`, so
    /// successive delays never decrease whatever jitter is drawn.
    pub fn delay_for(&self, retry: u32, jitter: f64) -> Duration {
        let exp = retry.saturating_sub(1).min(30);
        let nominal = self.base_delay.as_secs_f64() * f64::from(1u32 << exp);
        let jittered = nominal * (1.0 + 0.5 * jitter.clamp(0.0, 1.0));
        Duration::from_secs_f64(jittered.min(self.max_delay.as_secs_f64()))
    }
}

/// Draws jitter from a seeded generator shared across threads.
#[derive(Debug)]
pub struct Backoff {
    policy: RetryPolicy,
    rng: Mutex<ChaCha8Rng>,
}

impl Backoff {
    pub fn new(policy: RetryPolicy, seed: u64) -> Self {
        Backoff {
            policy,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn policy(&self) -> &RetryPolicy {
        &self.policy
    }

    /// Wait before retry number `retry`, honoring a server hint when larger.
    pub fn delay(&self, retry: u32, server_hint: Option<Duration>) -> Duration {
        let jitter: f64 = self.rng.lock().expect("rng lock").random();
        let computed = self.policy.delay_for(retry, jitter);
        match server_hint {
            Some(hint) if hint > computed => hint,
            _ => computed,
        }
    }

    pub fn sleep(&self, retry: u32, server_hint: Option<Duration>) -> Duration {
        let d = self.delay(retry, server_hint);
        if !d.is_zero() {
            std::thread::sleep(d);
        }
        d
    }
}
