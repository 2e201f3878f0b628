use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

const WINDOW: Duration = Duration::from_secs(1);

/// Monotonic time source, measured from the clock's own origin.
pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Clock that only moves when someone sleeps on it.
#[derive(Default)]
pub struct ManualClock {
    now: Mutex<Duration>,
}

impl ManualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        *self.now.lock().unwrap() += d;
    }
}

impl Clock for ManualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

/// Sliding-window limiter: no half-open one-second window ever holds more
/// than `rate` initiations.
pub struct RateLimiter {
    rate: usize,
    clock: Arc<dyn Clock>,
    window: Mutex<VecDeque<Duration>>,
    log: Mutex<Vec<Duration>>,
}

impl RateLimiter {
    pub fn new(rate: u32, clock: Arc<dyn Clock>) -> Self {
        let rate = rate.max(1) as usize;
        Self {
            rate,
            clock,
            window: Mutex::new(VecDeque::with_capacity(rate)),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Blocks until an initiation slot is free and returns its timestamp.
    pub fn acquire(&self) -> Duration {
        // The window lock is held while sleeping so waiters are served in turn.
        let mut window = self.window.lock().unwrap();
        loop {
            let now = self.clock.now();
            while window
                .front()
                .is_some_and(|&t| now.saturating_sub(t) >= WINDOW)
            {
                window.pop_front();
            }
            if window.len() < self.rate {
                window.push_back(now);
                self.log.lock().unwrap().push(now);
                return now;
            }
            let oldest = *window.front().expect("window is full");
            self.clock.sleep(WINDOW - now.saturating_sub(oldest));
        }
    }

    /// Every initiation granted so far, in grant order.
    pub fn initiations(&self) -> Vec<Duration> {
        self.log.lock().unwrap().clone()
    }
}

/// Largest number of instants falling in any half-open one-second window.
pub fn max_per_window(instants: &[Duration]) -> usize {
    let mut sorted = instants.to_vec();
    sorted.sort();
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..sorted.len() {
        while sorted[hi] - sorted[lo] >= WINDOW {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn never_exceeds_rate_in_any_window() {
        let clock = Arc::new(ManualClock::new());
        let limiter = RateLimiter::new(800, clock.clone());
        for i in 0..2500 {
            if i % 7 == 0 {
                clock.advance(Duration::from_micros(900));
            }
            limiter.acquire();
        }
        let log = limiter.initiations();
        assert_eq!(log.len(), 2500);
        assert_eq!(max_per_window(&log), 800);
        // 2500 initiations at 800/s cannot finish before the third window opens.
        assert!(*log.last().unwrap() >= Duration::from_secs(3));
    }

    #[test]
    fn rate_of_one_spaces_by_a_second() {
        let clock = Arc::new(ManualClock::new());
        let limiter = RateLimiter::new(1, clock);
        let stamps: Vec<_> = (0..4).map(|_| limiter.acquire()).collect();
        assert_eq!(stamps, (0..4).map(Duration::from_secs).collect::<Vec<_>>());
    }

    #[test]
    fn window_counter() {
        let ms = Duration::from_millis;
        assert_eq!(max_per_window(&[]), 0);
        assert_eq!(max_per_window(&[ms(0), ms(999), ms(1000)]), 2);
        assert_eq!(max_per_window(&[ms(0), ms(500), ms(600), ms(1400)]), 3);
    }
}
