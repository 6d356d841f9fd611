use core::fmt;

use super::ModelError;

/// Normalized rectangle relative to the parent area.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Viewport {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

const EPS: f64 = 1e-9;

impl Viewport {
    pub const FULL: Viewport = Viewport {
        x: 0.0,
        y: 0.0,
        w: 1.0,
        h: 1.0,
    };

    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self, ModelError> {
        let vp = Viewport { x, y, w, h };
        vp.validate()?;
        Ok(vp)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let finite = self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite();
        if !finite
            || self.x < 0.0
            || self.y < 0.0
            || self.w <= 0.0
            || self.h <= 0.0
            || self.x + self.w > 1.0 + EPS
            || self.y + self.h > 1.0 + EPS
        {
            return Err(ModelError::Viewport(*self));
        }
        Ok(())
    }

    pub fn is_full(&self) -> bool {
        *self == Self::FULL
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn top(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Intersection, or `None` when it has no area.
    pub fn intersect(&self, o: &Viewport) -> Option<Viewport> {
        let x0 = self.x.max(o.x);
        let y0 = self.y.max(o.y);
        let x1 = self.right().min(o.right());
        let y1 = self.top().min(o.top());
        if x1 - x0 <= EPS || y1 - y0 <= EPS {
            return None;
        }
        Some(Viewport {
            x: x0,
            y: y0,
            w: x1 - x0,
            h: y1 - y0,
        })
    }

    /// Maps `child`, given relative to `self`, into the coordinates `self` is
    /// expressed in.
    pub fn apply(&self, child: &Viewport) -> Viewport {
        Viewport {
            x: self.x + child.x * self.w,
            y: self.y + child.y * self.h,
            w: child.w * self.w,
            h: child.h * self.h,
        }
    }

    /// Inverse of [`apply`](Self::apply): expresses `abs` relative to `self`.
    pub fn relative(&self, abs: &Viewport) -> Viewport {
        Viewport {
            x: (abs.x - self.x) / self.w,
            y: (abs.y - self.y) / self.h,
            w: abs.w / self.w,
            h: abs.h / self.h,
        }
    }

    /// Pixel rectangle covered inside `area`. Edges are rounded, so sibling
    /// viewports sharing an edge resolve to disjoint, adjacent rectangles.
    pub fn to_pixels(&self, area: &PixelRect) -> PixelRect {
        let x0 = round(self.x * area.w as f64) as u32;
        let x1 = round(self.right() * area.w as f64) as u32;
        let y0 = round(self.y * area.h as f64) as u32;
        let y1 = round(self.top() * area.h as f64) as u32;
        PixelRect {
            x: area.x + x0.min(area.w),
            y: area.y + y0.min(area.h),
            w: x1.min(area.w).saturating_sub(x0),
            h: y1.min(area.h).saturating_sub(y0),
        }
    }
}

impl Default for Viewport {
    fn default() -> Self {
        Self::FULL
    }
}

fn round(v: f64) -> f64 {
    libm::floor(v + 0.5)
}

/// Normalized database range `[lo, hi)`.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const FULL: Range = Range { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Result<Self, ModelError> {
        let r = Range { lo, hi };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lo >= 0.0 && self.lo < self.hi && self.hi <= 1.0 + EPS) {
            return Err(ModelError::Range(*self));
        }
        Ok(())
    }

    pub fn is_full(&self) -> bool {
        *self == Self::FULL
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn apply(&self, child: &Range) -> Range {
        Range {
            lo: self.lo + child.lo * self.len(),
            hi: self.lo + child.hi * self.len(),
        }
    }

    pub fn overlaps(&self, o: &Range) -> bool {
        self.lo < o.hi && o.lo < self.hi
    }

    /// Whether `t` falls into the range; the upper end is closed at 1.
    pub fn contains(&self, t: f64) -> bool {
        t >= self.lo && (t < self.hi || (self.hi >= 1.0 && t <= 1.0))
    }

    /// Length of the overlap with `[a, b]`.
    pub fn overlap_len(&self, a: f64, b: f64) -> f64 {
        (self.hi.min(b) - self.lo.max(a)).max(0.0)
    }
}

impl Default for Range {
    fn default() -> Self {
        Self::FULL
    }
}

/// Pixel interleave: the task owns pixels whose coordinates are congruent to
/// the offsets modulo the counts.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PixelParam {
    pub x_offset: u32,
    pub y_offset: u32,
    pub x_count: u32,
    pub y_count: u32,
}

impl PixelParam {
    pub const FULL: PixelParam = PixelParam {
        x_offset: 0,
        y_offset: 0,
        x_count: 1,
        y_count: 1,
    };

    pub fn new(x_offset: u32, y_offset: u32, x_count: u32, y_count: u32) -> Result<Self, ModelError> {
        let p = PixelParam {
            x_offset,
            y_offset,
            x_count,
            y_count,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.x_count == 0 || self.y_count == 0 || self.x_offset >= self.x_count || self.y_offset >= self.y_count {
            return Err(ModelError::Pixel(*self));
        }
        Ok(())
    }

    pub fn is_full(&self) -> bool {
        *self == Self::FULL
    }

    pub fn owns(&self, px: u32, py: u32) -> bool {
        pixel_owner(self, px, py)
    }

    /// Share of pixels owned, in the limit of a large area.
    pub fn fraction(&self) -> f64 {
        1.0 / (self.x_count as f64 * self.y_count as f64)
    }

    /// Nests `child` inside `self`.
    pub fn apply(&self, child: &PixelParam) -> PixelParam {
        PixelParam {
            x_offset: self.x_offset + child.x_offset * self.x_count,
            y_offset: self.y_offset + child.y_offset * self.y_count,
            x_count: self.x_count * child.x_count,
            y_count: self.y_count * child.y_count,
        }
    }

    /// Number of owned pixels inside `rect`.
    pub fn owned_in(&self, rect: &PixelRect) -> u64 {
        owned_1d(self.x_offset, self.x_count, rect.x, rect.w) * owned_1d(self.y_offset, self.y_count, rect.y, rect.h)
    }
}

fn owned_1d(offset: u32, count: u32, start: u32, len: u32) -> u64 {
    // values v in [start, start + len) with v % count == offset
    let below = |n: u64| -> u64 {
        let (c, o) = (count as u64, offset as u64);
        if n <= o {
            0
        } else {
            (n - o - 1) / c + 1
        }
    };
    below(start as u64 + len as u64) - below(start as u64)
}

impl Default for PixelParam {
    fn default() -> Self {
        Self::FULL
    }
}

/// Whether the pixel at `(px, py)` belongs to the interleave slot `p`.
pub fn pixel_owner(p: &PixelParam, px: u32, py: u32) -> bool {
    px % p.x_count == p.x_offset && py % p.y_count == p.y_offset
}

/// Sample index out of `size` samples per pixel.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct SubpixelParam {
    pub index: u32,
    pub size: u32,
}

impl SubpixelParam {
    pub const FULL: SubpixelParam = SubpixelParam { index: 0, size: 1 };

    pub fn new(index: u32, size: u32) -> Result<Self, ModelError> {
        let s = SubpixelParam { index, size };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.size == 0 || self.index >= self.size {
            return Err(ModelError::Subpixel(*self));
        }
        Ok(())
    }

    pub fn is_full(&self) -> bool {
        *self == Self::FULL
    }

    pub fn apply(&self, child: &SubpixelParam) -> SubpixelParam {
        SubpixelParam {
            index: self.index + child.index * self.size,
            size: self.size * child.size,
        }
    }
}

impl Default for SubpixelParam {
    fn default() -> Self {
        Self::FULL
    }
}

/// Time-multiplex slot: active on frames where `frame % period == phase`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct PhasePeriod {
    pub phase: u32,
    pub period: u32,
}

impl PhasePeriod {
    pub const ALWAYS: PhasePeriod = PhasePeriod { phase: 0, period: 1 };

    pub fn new(phase: u32, period: u32) -> Result<Self, ModelError> {
        let p = PhasePeriod { phase, period };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.period == 0 || self.phase >= self.period {
            return Err(ModelError::Phase(*self));
        }
        Ok(())
    }

    pub fn is_always(&self) -> bool {
        self.period == 1
    }

    pub fn active(&self, frame: u64) -> bool {
        frame % self.period as u64 == self.phase as u64
    }
}

impl Default for PhasePeriod {
    fn default() -> Self {
        Self::ALWAYS
    }
}

/// Integer pixel rectangle.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct PixelRect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl PixelRect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        PixelRect { x, y, w, h }
    }

    pub const fn sized(w: u32, h: u32) -> Self {
        PixelRect { x: 0, y: 0, w, h }
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn area(&self) -> u64 {
        self.w as u64 * self.h as u64
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn top(&self) -> u32 {
        self.y + self.h
    }

    pub fn contains(&self, px: u32, py: u32) -> bool {
        px >= self.x && px < self.right() && py >= self.y && py < self.top()
    }

    pub fn intersect(&self, o: &PixelRect) -> PixelRect {
        let x0 = self.x.max(o.x);
        let y0 = self.y.max(o.y);
        let x1 = self.right().min(o.right());
        let y1 = self.top().min(o.top());
        if x1 <= x0 || y1 <= y0 {
            return PixelRect::default();
        }
        PixelRect::new(x0, y0, x1 - x0, y1 - y0)
    }

    /// Smallest rectangle containing both; empty rectangles are ignored.
    pub fn union(&self, o: &PixelRect) -> PixelRect {
        if self.is_empty() {
            return *o;
        }
        if o.is_empty() {
            return *self;
        }
        let x0 = self.x.min(o.x);
        let y0 = self.y.min(o.y);
        PixelRect::new(x0, y0, self.right().max(o.right()) - x0, self.top().max(o.top()) - y0)
    }
}

impl fmt::Display for PixelRect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}+{}+{}", self.w, self.h, self.x, self.y)
    }
}

/// Splits `area` into row-major tiles of at most `size`, clipping the last
/// row and column.
pub fn make_tiles(area: &PixelRect, size: (u32, u32)) -> alloc::vec::Vec<PixelRect> {
    let (tw, th) = (size.0.max(1), size.1.max(1));
    let mut tiles = alloc::vec::Vec::new();
    let mut y = 0;
    while y < area.h {
        let h = th.min(area.h - y);
        let mut x = 0;
        while x < area.w {
            let w = tw.min(area.w - x);
            tiles.push(PixelRect::new(area.x + x, area.y + y, w, h));
            x += w;
        }
        y += h;
    }
    tiles
}
