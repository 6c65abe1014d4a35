use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::Clock;

/// Requests-per-window ceiling, kept as a log of recent admission times: a
/// call is admitted only while fewer than `limit` admissions fall inside the
/// trailing window, so no window of that length ever holds more than `limit`.
pub struct RateLimiter {
    limit: u32,
    window: Duration,
    clock: Arc<dyn Clock>,
    state: Mutex<State>,
}

#[derive(Default)]
struct State {
    recent: VecDeque<Duration>,
    audit: Option<Vec<Duration>>,
}

impl RateLimiter {
    pub fn new(limit: u32, window: Duration, clock: Arc<dyn Clock>) -> Self {
        assert!(limit > 0, "rate limit must be positive");
        Self {
            limit,
            window,
            clock,
            state: Mutex::new(State::default()),
        }
    }

    /// Keep every admission time for later inspection.
    pub fn with_audit(self) -> Self {
        self.state.lock().expect("limiter lock").audit = Some(Vec::new());
        self
    }

    pub fn limit(&self) -> u32 {
        self.limit
    }

    pub fn window(&self) -> Duration {
        self.window
    }

    /// Block until a call may proceed, then record it.
    pub fn admit(&self) {
        loop {
            let wait = {
                let mut s = self.state.lock().expect("limiter lock");
                let now = self.clock.now();
                while s.recent.front().is_some_and(|t| now.saturating_sub(*t) >= self.window) {
                    s.recent.pop_front();
                }
                if (s.recent.len() as u32) < self.limit {
                    s.recent.push_back(now);
                    if let Some(a) = s.audit.as_mut() {
                        a.push(now);
                    }
                    return;
                }
                (s.recent[0] + self.window).saturating_sub(now)
            };
            self.clock.sleep(wait.max(Duration::from_nanos(1)));
        }
    }

    pub fn admissions(&self) -> Vec<Duration> {
        self.state
            .lock()
            .expect("limiter lock")
            .audit
            .clone()
            .unwrap_or_default()
    }
}

/// Largest number of admissions inside any half-open window `[t, t + window)`.
pub fn max_in_window(admissions: &[Duration], window: Duration) -> usize {
    let mut times = admissions.to_vec();
    times.sort();
    let mut best = 0;
    let mut lo = 0;
    for hi in 0..times.len() {
        while times[hi] - times[lo] >= window {
            lo += 1;
        }
        best = best.max(hi - lo + 1);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::VirtualClock;

    #[test]
    fn ceiling_holds_single_thread() {
        let clock = Arc::new(VirtualClock::default());
        let l = RateLimiter::new(5, Duration::from_secs(60), clock.clone()).with_audit();
        for _ in 0..23 {
            l.admit();
        }
        let a = l.admissions();
        assert_eq!(a.len(), 23);
        assert_eq!(max_in_window(&a, Duration::from_secs(60)), 5);
        assert!(clock.now() >= Duration::from_secs(240));
    }

    #[test]
    fn ceiling_holds_across_threads() {
        let clock = Arc::new(VirtualClock::default());
        let l = Arc::new(RateLimiter::new(60, Duration::from_secs(60), clock.clone()).with_audit());
        std::thread::scope(|s| {
            for _ in 0..8 {
                let l = l.clone();
                let clock = clock.clone();
                s.spawn(move || {
                    for _ in 0..40 {
                        l.admit();
                        clock.sleep(Duration::from_millis(300));
                    }
                });
            }
        });
        let a = l.admissions();
        assert_eq!(a.len(), 320);
        assert!(max_in_window(&a, Duration::from_secs(60)) <= 60);
    }

    #[test]
    fn window_counter() {
        let s = |v: &[u64]| v.iter().map(|x| Duration::from_secs(*x)).collect::<Vec<_>>();
        assert_eq!(max_in_window(&s(&[0, 10, 59, 60, 61]), Duration::from_secs(60)), 4);
        assert_eq!(max_in_window(&s(&[0, 60, 120]), Duration::from_secs(60)), 1);
        assert_eq!(max_in_window(&[], Duration::from_secs(60)), 0);
    }
}
