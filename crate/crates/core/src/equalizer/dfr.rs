/// Dynamic frame resolution controller for fill-limited rendering.
///
/// Render time is modeled as proportional to the pixel count, i.e. to the
/// square of the linear `scale`. The ideal correction is therefore
/// `sqrt(target / last)`; only the `1 - damping` share of it is applied, in
/// log space, to avoid oscillation.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct DfrState {
    pub target_ms: f64,
    pub scale: f64,
    pub min_scale: f64,
    pub max_scale: f64,
    pub damping: f64,
}

impl DfrState {
    pub fn new(target_ms: f64) -> Self {
        DfrState {
            target_ms,
            scale: 1.0,
            min_scale: 0.25,
            max_scale: 2.0,
            damping: 0.5,
        }
    }

    pub fn for_framerate(fps: f64) -> Self {
        Self::new(1000.0 / fps)
    }

    pub fn update(&self, last_frame_ms: f64) -> DfrState {
        if !(last_frame_ms > 0.0) {
            return *self;
        }
        let step = libm::pow(self.target_ms / last_frame_ms, 0.5 * (1.0 - self.damping));
        DfrState {
            scale: (self.scale * step).clamp(self.min_scale, self.max_scale),
            ..*self
        }
    }

    /// Source channel resolution for a destination of `dest` pixels.
    pub fn source_size(&self, dest: (u32, u32)) -> (u32, u32) {
        let s = |v: u32| (libm::round(self.scale * v as f64) as u32).max(1);
        (s(dest.0), s(dest.1))
    }

    /// Zoom applied when transferring the source image to the destination.
    pub fn zoom(&self, dest: (u32, u32)) -> (f64, f64) {
        let src = self.source_size(dest);
        (dest.0 as f64 / src.0 as f64, dest.1 as f64 / src.1 as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fill-limited renderer: `base_ms` at scale 1.
    fn run(base_ms: f64, state: &mut DfrState, frames: usize) -> f64 {
        let mut t = base_ms * state.scale * state.scale;
        for _ in 0..frames {
            *state = state.update(t);
            t = base_ms * state.scale * state.scale;
        }
        t
    }

    #[test]
    fn on_target_is_fixed_point() {
        let s = DfrState::new(33.0);
        assert_eq!(s.update(33.0), s);
    }

    #[test]
    fn overload_converges_down() {
        let mut s = DfrState::new(25.0);
        let mut last = s.scale;
        for _ in 0..30 {
            let t = 100.0 * s.scale * s.scale;
            s = s.update(t);
            assert!(s.scale <= last && s.scale >= 0.5 - 1e-9);
            last = s.scale;
        }
        assert!((s.scale - 0.5).abs() < 1e-3);
    }

    #[test]
    fn headroom_supersamples() {
        let mut s = DfrState::new(40.0);
        let t = run(10.0, &mut s, 30);
        assert!(s.scale > 1.0);
        assert!((t - 40.0).abs() / 40.0 < 0.1);
    }

    #[test]
    fn bounds_hold() {
        let mut s = DfrState::new(10.0);
        run(1000.0, &mut s, 50);
        assert_eq!(s.scale, 0.25);
        assert_eq!(s.source_size((1280, 720)), (320, 180));
        assert_eq!(s.zoom((1280, 720)), (4.0, 4.0));
    }
}
