//! Sliding-window admission control.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

pub trait Clock: Send + Sync {
    fn now(&self) -> Instant;
    fn sleep(&self, d: Duration);
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> Instant {
        Instant::now()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Admits at most `limit` calls in any window of length `window`.
///
/// Admission times are kept in a queue, so the bound holds for every
/// sliding window, not just aligned buckets.
pub struct RateLimiter {
    limit: usize,
    window: Duration,
    clock: Arc<dyn Clock>,
    admitted: Mutex<VecDeque<Instant>>,
}

impl RateLimiter {
    pub fn new(limit: u32, window: Duration) -> Self {
        Self::with_clock(limit, window, Arc::new(SystemClock))
    }

    pub fn with_clock(limit: u32, window: Duration, clock: Arc<dyn Clock>) -> Self {
        assert!(limit > 0, "rate limit must be positive");
        Self {
            limit: limit as usize,
            window,
            clock,
            admitted: Mutex::new(VecDeque::new()),
        }
    }

    /// Blocks until a slot is free and returns the admission instant.
    pub fn acquire(&self) -> Instant {
        loop {
            let wait = {
                let mut q = self.admitted.lock().unwrap();
                let now = self.clock.now();
                while q
                    .front()
                    .is_some_and(|t| now.duration_since(*t) >= self.window)
                {
                    q.pop_front();
                }
                if q.len() < self.limit {
                    q.push_back(now);
                    return now;
                }
                let oldest = *q.front().expect("queue is full");
                (oldest + self.window).saturating_duration_since(now)
            };
            self.clock.sleep(wait.max(Duration::from_micros(100)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Time only moves when someone sleeps.
    struct FakeClock {
        start: Instant,
        offset: Mutex<Duration>,
    }

    impl Clock for FakeClock {
        fn now(&self) -> Instant {
            self.start + *self.offset.lock().unwrap()
        }

        fn sleep(&self, d: Duration) {
            *self.offset.lock().unwrap() += d;
        }
    }

    #[test]
    fn sliding_window_bound_on_fake_clock() {
        let clock = Arc::new(FakeClock {
            start: Instant::now(),
            offset: Mutex::new(Duration::ZERO),
        });
        let window = Duration::from_secs(60);
        let rl = RateLimiter::with_clock(5, window, clock.clone());
        let mut stamps = Vec::new();
        for i in 0..23 {
            stamps.push(rl.acquire());
            // Uneven spacing between calls.
            clock.sleep(Duration::from_secs([1, 7, 0, 13, 2][i % 5]));
        }
        for (i, t) in stamps.iter().enumerate() {
            let in_window = stamps[i..].iter().filter(|s| s.duration_since(*t) < window).count();
            assert!(in_window <= 5, "{in_window} admissions within 60 s of #{i}");
        }
        // The sixth call had to wait for the first to age out.
        assert_eq!(stamps[5].duration_since(stamps[0]), window);
    }
}
