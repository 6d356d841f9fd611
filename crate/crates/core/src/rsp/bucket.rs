//! Send credits and additive rate control.

use core::time::Duration;

use super::RspError;

/// Byte credits refilled at a fixed rate up to a capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenBucket {
    credits: f64,
    capacity: f64,
    fill_rate: f64,
    last_fill: Duration,
}

impl TokenBucket {
    /// A full bucket.
    pub fn new(capacity: f64, fill_rate: f64, now: Duration) -> Self {
        Self { credits: capacity, capacity, fill_rate, last_fill: now }
    }

    pub fn with_credits(mut self, credits: f64) -> Self {
        self.credits = credits.clamp(0.0, self.capacity);
        self
    }

    pub fn credits(&self) -> f64 {
        self.credits
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn fill_rate(&self) -> f64 {
        self.fill_rate
    }

    /// Changes the rate; credits accumulated so far are kept.
    pub fn set_fill_rate(&mut self, rate: f64, now: Duration) {
        self.refill(now);
        self.fill_rate = rate;
    }

    fn refill(&mut self, now: Duration) {
        if now > self.last_fill {
            let dt = (now - self.last_fill).as_secs_f64();
            self.credits = (self.credits + dt * self.fill_rate).min(self.capacity);
            self.last_fill = now;
        }
    }

    /// Time until `n` credits are available, without taking them.
    pub fn wait_time(&self, n: f64, now: Duration) -> Duration {
        let mut credits = self.credits;
        if now > self.last_fill {
            credits = (credits + (now - self.last_fill).as_secs_f64() * self.fill_rate).min(self.capacity);
        }
        if credits + 1e-6 >= n {
            Duration::ZERO
        } else {
            Duration::from_nanos(libm::ceil((n - credits) / self.fill_rate * 1e9) as u64)
        }
    }

    /// Takes `n` credits if available and returns zero, otherwise returns the
    /// time until they will be, leaving the bucket untouched.
    pub fn acquire(&mut self, n: f64, now: Duration) -> Result<Duration, RspError> {
        if n > self.capacity {
            return Err(RspError::Unsatisfiable);
        }
        self.refill(now);
        // tolerate float rounding after waiting exactly `wait_time`
        if self.credits + 1e-6 >= n {
            self.credits = (self.credits - n).max(0.0);
            Ok(Duration::ZERO)
        } else {
            let secs = (n - self.credits) / self.fill_rate;
            // round up so that waiting exactly this long always suffices
            Ok(Duration::from_nanos(libm::ceil(secs * 1e9) as u64))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateEvent {
    AdvanceOk,
    RetransmitNeeded,
}

/// Additive increase, additive decrease, clamped to `[min, max]`.
pub fn congestion_update(rate: f64, event: RateEvent, min: f64, max: f64, increase: f64, decrease: f64) -> f64 {
    match event {
        RateEvent::AdvanceOk => (rate + increase).clamp(min, max),
        RateEvent::RetransmitNeeded => (rate - decrease).clamp(min, max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MB: f64 = 1.0e6;

    #[test]
    fn exact_credit_is_free() {
        let mut b = TokenBucket::new(100.0, 1.0, Duration::ZERO).with_credits(40.0);
        assert_eq!(b.acquire(40.0, Duration::ZERO).unwrap(), Duration::ZERO);
        assert_eq!(b.credits(), 0.0);
    }

    #[test]
    fn empty_bucket_waits_one_second() {
        let mut b = TokenBucket::new(MB, MB, Duration::ZERO).with_credits(0.0);
        assert_eq!(b.acquire(MB, Duration::ZERO).unwrap(), Duration::from_secs(1));
        assert_eq!(b.credits(), 0.0);
        assert_eq!(b.acquire(MB, Duration::from_secs(1)).unwrap(), Duration::ZERO);
    }

    #[test]
    fn oversized_request_fails() {
        let mut b = TokenBucket::new(10.0, 1.0, Duration::ZERO);
        assert_eq!(b.acquire(11.0, Duration::ZERO), Err(RspError::Unsatisfiable));
    }

    #[test]
    fn offered_load_above_rate_is_capped() {
        // A sender offering 2x the fill rate on a virtual clock.
        let rate = 10.0 * MB;
        let n = 1500.0;
        let mut b = TokenBucket::new(64.0 * 1024.0, rate, Duration::ZERO);
        let offer_gap = Duration::from_secs_f64(n / (2.0 * rate));
        let mut now = Duration::ZERO;
        let mut sent = 0.0;
        let end = Duration::from_secs(2);
        while now < end {
            let wait = b.acquire(n, now).unwrap();
            if wait.is_zero() {
                sent += n;
                now += offer_gap;
            } else {
                now += wait;
            }
        }
        let throughput = sent / end.as_secs_f64();
        // the initial full bucket adds at most capacity / 2 s
        assert!((throughput - rate).abs() <= 0.05 * rate, "throughput {throughput}");
    }

    #[test]
    fn clamps_and_steps() {
        let (min, max, inc, dec) = (MB, 100.0 * MB, MB, 2.0 * MB);
        assert_eq!(congestion_update(max, RateEvent::AdvanceOk, min, max, inc, dec), max);
        assert_eq!(congestion_update(50.0 * MB, RateEvent::RetransmitNeeded, min, max, inc, dec), 48.0 * MB);
        assert_eq!(congestion_update(min, RateEvent::RetransmitNeeded, min, max, inc, dec), min);
    }

    #[test]
    fn alternating_events_oscillate_around_equilibrium() {
        // With equal steps every increase/decrease pair returns to the start,
        // so the rate only ever visits `start` and `start + step`.
        let (min, max, step) = (MB, 100.0 * MB, 1.5 * MB);
        let start = 50.0 * MB;
        let mut r = start;
        for i in 0..10_000 {
            let e = if i % 2 == 0 { RateEvent::AdvanceOk } else { RateEvent::RetransmitNeeded };
            r = congestion_update(r, e, min, max, step, step);
            assert!((r - start).abs() <= step + 1e-6);
        }
        assert!((r - start).abs() < 1e-6);
    }
}
