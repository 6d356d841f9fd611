use alloc::vec::Vec;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::compound::{Range, Viewport};

/// A drawable with a screen footprint and a cost.
///
/// The visible shape is the ellipse inscribed in `footprint`. The footprint
/// may extend past the screen.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct SceneObject {
    pub footprint: Viewport,
    /// Milliseconds spent whenever the object is submitted.
    pub geometry_ms: f64,
    /// Milliseconds per megapixel covered.
    pub fill_density: f64,
    pub depth: f32,
    /// Share of the database this object belongs to.
    pub range: Range,
    pub shade: u32,
}

impl SceneObject {
    /// Whether the sample at normalized `(sx, sy)` lies inside the shape.
    pub fn covers(&self, sx: f64, sy: f64) -> bool {
        let f = &self.footprint;
        let rx = f.w * 0.5;
        let ry = f.h * 0.5;
        if rx <= 0.0 || ry <= 0.0 {
            return false;
        }
        let dx = (sx - (f.x + rx)) / rx;
        let dy = (sy - (f.y + ry)) / ry;
        dx * dx + dy * dy <= 1.0
    }

    /// Database coordinate of the fragment at height `sy`: the object's range
    /// is laid out bottom to top across its footprint.
    pub fn range_coord(&self, sy: f64) -> f64 {
        let f = &self.footprint;
        let t = ((sy - f.y) / f.h).clamp(0.0, 1.0);
        let v = self.range.lo + t * self.range.len();
        if v >= self.range.hi && self.range.hi < 1.0 {
            // stay inside the half-open span
            self.range.hi - self.range.len() * 1e-9
        } else {
            v
        }
    }

    /// Whether any part of the footprint lies on screen.
    pub fn on_screen(&self) -> bool {
        let f = &self.footprint;
        f.w > 0.0 && f.h > 0.0 && f.x < 1.0 && f.right() > 0.0 && f.y < 1.0 && f.top() > 0.0
    }

    pub fn overlaps_viewport(&self, vp: &Viewport) -> bool {
        let f = &self.footprint;
        f.x < vp.right() && vp.x < f.right() && f.y < vp.top() && vp.y < f.top()
    }
}

/// Per-frame cost description of a scene.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct CostField {
    pub objects: Vec<SceneObject>,
    /// Milliseconds per megapixel of destination area, drawn or not.
    pub background_density: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SceneKind {
    /// Two rows of identical models along an alley; the camera pulls back
    /// and reveals more of them over time.
    Alley,
    /// Objects clustered around the screen center, fill-heavy.
    Skewed,
    /// Large overlapping objects covering the screen; negligible geometry.
    FillDominated,
    /// Uniformly scattered objects of random size and cost.
    Random,
}

impl SceneKind {
    pub fn name(self) -> &'static str {
        match self {
            SceneKind::Alley => "alley",
            SceneKind::Skewed => "skewed",
            SceneKind::FillDominated => "fill",
            SceneKind::Random => "random",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [
            SceneKind::Alley,
            SceneKind::Skewed,
            SceneKind::FillDominated,
            SceneKind::Random,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }
}

/// Seeded scene generator with a parametric camera path.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub objects: usize,
    pub seed: u64,
    /// Geometry cost of one object.
    pub geometry_ms: f64,
    /// Fill cost of one object if it covered the whole screen.
    pub fill_ms: f64,
    /// Fill cost of the whole screen for the background.
    pub background_ms: f64,
}

impl SceneSpec {
    pub fn new(kind: SceneKind, objects: usize, seed: u64) -> Self {
        let (geometry_ms, fill_ms, background_ms) = match kind {
            SceneKind::Alley => (2.0, 12.0, 1.0),
            SceneKind::Skewed => (0.01, 200.0, 0.5),
            SceneKind::FillDominated => (0.0, 8.0, 1.0),
            SceneKind::Random => (1.0, 10.0, 0.5),
        };
        SceneSpec {
            kind,
            objects: objects.max(1),
            seed,
            geometry_ms,
            fill_ms,
            background_ms,
        }
    }

    /// The cost field seen in `frame` of a `frames` long run rendered at
    /// `size` pixels. Densities are scaled so that costs do not depend on
    /// the resolution chosen for the run, only on the covered share.
    pub fn field(&self, frame: u64, frames: u64, size: (u32, u32)) -> CostField {
        let mpix = (size.0 as f64 * size.1 as f64 / 1e6).max(1e-12);
        let s = if frames > 1 {
            (frame.min(frames - 1)) as f64 / (frames - 1) as f64
        } else {
            0.0
        };
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let n = self.objects;
        let fill = self.fill_ms / mpix;
        let mut objects = Vec::with_capacity(n);
        for i in 0..n {
            let range = Range {
                lo: i as f64 / n as f64,
                hi: (i + 1) as f64 / n as f64,
            };
            let shade = 1000 + 7919 * i as u32;
            // per-object jitter keeps depths distinct
            let jitter: f64 = rng.random_range(0.0..1e-3);
            let obj = match self.kind {
                SceneKind::Alley => {
                    let k = (i / 2) as f64;
                    let side = if i % 2 == 0 { -1.0 } else { 1.0 };
                    let dist = 0.4 * k + 1.0 + 5.0 * s + jitter;
                    let inv = 1.0 / dist;
                    let (w, h) = (0.6 * inv, 1.2 * inv);
                    let cx = 0.5 + side * inv;
                    let cy = 0.5 - 0.2 * inv;
                    SceneObject {
                        footprint: Viewport {
                            x: cx - w / 2.0,
                            y: cy - h / 2.0,
                            w,
                            h,
                        },
                        geometry_ms: self.geometry_ms,
                        fill_density: fill,
                        depth: dist as f32,
                        range,
                        shade,
                    }
                }
                SceneKind::Skewed => {
                    let (ox, oy): (f64, f64) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    let size: f64 = rng.random_range(0.08..0.16);
                    let zoom = 1.2 - 0.4 * s;
                    let (w, h) = (size * zoom, 1.6 * size * zoom);
                    let cx = 0.5 + 0.12 * ox * zoom;
                    let cy = 0.5 + 0.2 * oy * zoom;
                    SceneObject {
                        footprint: Viewport {
                            x: cx - w / 2.0,
                            y: cy - h / 2.0,
                            w,
                            h,
                        },
                        geometry_ms: self.geometry_ms,
                        fill_density: fill,
                        depth: (1.0 + i as f64 * 0.1 + jitter) as f32,
                        range,
                        shade,
                    }
                }
                SceneKind::FillDominated => {
                    let cols = libm::ceil(libm::sqrt(n as f64)) as usize;
                    let rows = n.div_ceil(cols);
                    let (w, h) = (1.6 / cols as f64, 1.6 / rows as f64);
                    let cx = ((i % cols) as f64 + 0.5) / cols as f64;
                    let cy = ((i / cols) as f64 + 0.5) / rows as f64;
                    let drift = 0.02 * libm::sin(6.0 * s + i as f64);
                    SceneObject {
                        footprint: Viewport {
                            x: cx - w / 2.0 + drift,
                            y: cy - h / 2.0,
                            w,
                            h,
                        },
                        geometry_ms: self.geometry_ms,
                        fill_density: fill,
                        depth: (1.0 + jitter + i as f64 * 0.01) as f32,
                        range,
                        shade,
                    }
                }
                SceneKind::Random => {
                    let w: f64 = rng.random_range(0.05..0.6);
                    let h: f64 = rng.random_range(0.05..0.6);
                    let x: f64 = rng.random_range(-0.2..1.0);
                    let y: f64 = rng.random_range(-0.2..1.0);
                    let g: f64 = rng.random_range(0.0..2.0);
                    let d: f64 = rng.random_range(0.5..2.0);
                    let depth: f64 = rng.random_range(1.0..10.0);
                    SceneObject {
                        footprint: Viewport {
                            x: x + 0.1 * s,
                            y,
                            w,
                            h,
                        },
                        geometry_ms: self.geometry_ms * g,
                        fill_density: fill * d,
                        depth: depth as f32,
                        range,
                        shade,
                    }
                }
            };
            objects.push(obj);
        }
        CostField {
            objects,
            background_density: self.background_ms / mpix,
        }
    }
}
