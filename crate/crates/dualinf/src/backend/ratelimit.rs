//! Token-bucket rate limiting shared per backend id.

use std::sync::Mutex;
use std::time::{Duration, Instant};

struct BucketState {
    tokens: f64,
    last_refill: Instant,
}

/// A blocking token bucket. `acquire` sleeps until a token is available.
pub struct TokenBucket {
    capacity: f64,
    refill_per_sec: f64,
    state: Mutex<BucketState>,
}

impl TokenBucket {
    /// A bucket allowing `requests_per_minute` sustained throughput with a
    /// small burst allowance.
    pub fn per_minute(requests_per_minute: f64) -> Self {
        let per_sec = (requests_per_minute / 60.0).max(f64::MIN_POSITIVE);
        TokenBucket {
            capacity: (requests_per_minute / 10.0).max(1.0),
            refill_per_sec: per_sec,
            state: Mutex::new(BucketState {
                tokens: 1.0,
                last_refill: Instant::now(),
            }),
        }
    }

    /// Blocks until a token is available, then consumes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut state = self.state.lock().expect("bucket lock");
                let now = Instant::now();
                let elapsed = now.duration_since(state.last_refill).as_secs_f64();
                state.tokens = (state.tokens + elapsed * self.refill_per_sec).min(self.capacity);
                state.last_refill = now;
                if state.tokens >= 1.0 {
                    state.tokens -= 1.0;
                    return;
                }
                Duration::from_secs_f64((1.0 - state.tokens) / self.refill_per_sec)
            };
            std::thread::sleep(wait.min(Duration::from_millis(250)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn throttles_to_the_configured_rate() {
        // 1200/minute = 20/second; 5 extra acquires past the burst should
        // take roughly 250 ms.
        let bucket = TokenBucket::per_minute(1200.0);
        let start = Instant::now();
        for _ in 0..6 {
            bucket.acquire();
        }
        let elapsed = start.elapsed();
        assert!(elapsed >= Duration::from_millis(150), "{elapsed:?}");
        assert!(elapsed < Duration::from_secs(2), "{elapsed:?}");
    }
}
