use alloc::collections::VecDeque;

/// Delay before the next swap so that swaps are at least the smoothed
/// interval apart.
pub fn framerate_delay(history_ms: &[f64], elapsed_ms: f64) -> f64 {
    if history_ms.is_empty() {
        return 0.0;
    }
    let mean = history_ms.iter().sum::<f64>() / history_ms.len() as f64;
    (mean - elapsed_ms).max(0.0)
}

/// Smooths the swap cadence of a destination fed by sources that finish
/// unevenly, e.g. time-multiplexed compounds.
#[derive(Clone, Debug)]
pub struct FramerateEqualizer {
    window: usize,
    intervals: VecDeque<f64>,
    last_ready: Option<f64>,
    last_swap: Option<f64>,
}

impl Default for FramerateEqualizer {
    fn default() -> Self {
        Self::new(10)
    }
}

impl FramerateEqualizer {
    pub fn new(window: usize) -> Self {
        FramerateEqualizer {
            window: window.max(1),
            intervals: VecDeque::new(),
            last_ready: None,
            last_swap: None,
        }
    }

    /// Records a frame ready at `ready_ms` and returns when it is swapped.
    pub fn swap(&mut self, ready_ms: f64) -> f64 {
        let interval = self.last_ready.map(|prev| ready_ms - prev);
        self.swap_with_interval(ready_ms, interval)
    }

    /// Like [`FramerateEqualizer::swap`], but with the frame interval the
    /// sources could sustain supplied by the caller. Measured ready
    /// intervals include any stall caused by earlier delayed swaps, so a
    /// caller that throttles its sources on swaps should pass an
    /// unthrottled estimate instead.
    pub fn swap_with_interval(&mut self, ready_ms: f64, interval_ms: Option<f64>) -> f64 {
        if let Some(iv) = interval_ms {
            if self.intervals.len() == self.window {
                self.intervals.pop_front();
            }
            self.intervals.push_back(iv);
        }
        self.last_ready = Some(ready_ms);
        let at = match self.last_swap {
            None => ready_ms,
            Some(last) => {
                let (a, b) = self.intervals.as_slices();
                let mut hist = alloc::vec::Vec::with_capacity(a.len() + b.len());
                hist.extend_from_slice(a);
                hist.extend_from_slice(b);
                ready_ms + framerate_delay(&hist, ready_ms - last)
            }
        };
        self.last_swap = Some(at);
        at
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn swaps(intervals: &[f64]) -> Vec<f64> {
        let mut eq = FramerateEqualizer::default();
        let mut t = 0.0;
        let mut out = alloc::vec![eq.swap(0.0)];
        for i in intervals {
            t += i;
            out.push(eq.swap(t));
        }
        out
    }

    fn std_dev(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        libm::sqrt(v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64)
    }

    #[test]
    fn regular_input_adds_no_delay() {
        let s = swaps(&[16.0; 30]);
        for (i, w) in s.windows(2).enumerate().skip(10) {
            assert!((w[1] - w[0] - 16.0).abs() < 1e-9, "{i}");
        }
        assert!((s[30] - 480.0).abs() < 1e-9);
    }

    #[test]
    fn uneven_input_is_smoothed() {
        let input: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 5.0 } else { 35.0 }).collect();
        let s = swaps(&input);
        let out: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).skip(10).collect();
        assert!(std_dev(&out) < std_dev(&input) * 0.25);
    }

    #[test]
    fn single_sample_window() {
        assert_eq!(framerate_delay(&[20.0], 5.0), 15.0);
        assert_eq!(framerate_delay(&[20.0], 25.0), 0.0);
        assert_eq!(framerate_delay(&[], 1.0), 0.0);
    }
}
