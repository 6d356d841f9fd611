use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::compound::{Range, Region, SplitMode, SplitParams, Viewport};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Axis {
    X,
    Y,
    /// Database range.
    Range,
}

/// Previous-frame cost map: regions with a piecewise-constant density in
/// milliseconds per unit of normalized area (or range length).
#[derive(Clone, PartialEq, Debug, Default)]
pub struct LoadGrid {
    pub frame: u64,
    pub cells: Vec<(Region, f64)>,
}

impl LoadGrid {
    /// Grid whose cells are the given regions, each with its measured time
    /// spread uniformly over it.
    pub fn from_times(frame: u64, regions: &[Region], times_ms: &[f64]) -> Self {
        let cells = regions
            .iter()
            .zip(times_ms)
            .map(|(r, &t)| {
                let m = measure(r);
                (*r, if m > 0.0 { t.max(0.0) / m } else { 0.0 })
            })
            .collect();
        LoadGrid { frame, cells }
    }

    /// Integral of the density over `region`.
    pub fn integral(&self, region: &Region) -> f64 {
        self.cells.iter().map(|(c, d)| d * overlap(c, region)).sum()
    }

    fn edges(&self, axis: Axis, out: &mut Vec<f64>) {
        for (c, _) in &self.cells {
            match (axis, c) {
                (Axis::X, Region::Viewport(v)) => out.extend([v.x, v.right()]),
                (Axis::Y, Region::Viewport(v)) => out.extend([v.y, v.top()]),
                (Axis::Range, Region::Range(r)) => out.extend([r.lo, r.hi]),
                _ => {}
            }
        }
    }
}

fn measure(r: &Region) -> f64 {
    match r {
        Region::Viewport(v) => v.area(),
        Region::Range(r) => r.len(),
    }
}

fn overlap(a: &Region, b: &Region) -> f64 {
    match (a, b) {
        (Region::Viewport(a), Region::Viewport(b)) => {
            let w = a.right().min(b.right()) - a.x.max(b.x);
            let h = a.top().min(b.top()) - a.y.max(b.y);
            if w > 0.0 && h > 0.0 {
                w * h
            } else {
                0.0
            }
        }
        (Region::Range(a), Region::Range(b)) => a.overlap_len(b.lo, b.hi),
        _ => 0.0,
    }
}

fn span(r: &Region, axis: Axis) -> (f64, f64) {
    match (r, axis) {
        (Region::Viewport(v), Axis::X) => (v.x, v.right()),
        (Region::Viewport(v), Axis::Y) => (v.y, v.top()),
        (Region::Range(r), _) => (r.lo, r.hi),
        (Region::Viewport(v), Axis::Range) => (v.x, v.right()),
    }
}

/// `r` restricted to `[lo, hi)` along `axis`.
fn cut(r: &Region, axis: Axis, lo: f64, hi: f64) -> Region {
    match (r, axis) {
        (Region::Viewport(v), Axis::X) => Region::Viewport(Viewport {
            x: lo,
            w: hi - lo,
            ..*v
        }),
        (Region::Viewport(v), Axis::Y) => Region::Viewport(Viewport {
            y: lo,
            h: hi - lo,
            ..*v
        }),
        (Region::Range(_), _) | (Region::Viewport(_), Axis::Range) => Region::Range(Range { lo, hi }),
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum SplitNode {
    Leaf {
        index: usize,
        usage: f64,
    },
    Split {
        axis: Axis,
        /// Absolute normalized coordinate of the split.
        position: f64,
        left: Box<SplitNode>,
        right: Box<SplitNode>,
    },
}

impl SplitNode {
    pub fn usage(&self) -> f64 {
        match self {
            SplitNode::Leaf { usage, .. } => *usage,
            SplitNode::Split { left, right, .. } => left.usage() + right.usage(),
        }
    }

    /// Minimum number of boundary units this subtree needs along `axis`.
    fn min_units(&self, along: Axis) -> u32 {
        match self {
            SplitNode::Leaf { .. } => 1,
            SplitNode::Split { axis, left, right, .. } => {
                if *axis == along {
                    left.min_units(along) + right.min_units(along)
                } else {
                    left.min_units(along).max(right.min_units(along))
                }
            }
        }
    }
}

/// Binary partition of a destination among source channels.
#[derive(Clone, PartialEq, Debug)]
pub struct SplitTree {
    pub mode: SplitMode,
    pub root: SplitNode,
    /// Destination size in pixels, used for resistance and boundaries.
    pub pixels: (u32, u32),
}

/// Smallest extent kept for a database range leaf.
const MIN_RANGE: f64 = 1e-4;

impl SplitTree {
    /// Balanced tree over `usages.len()` leaves, with areas proportional to
    /// usage.
    pub fn new(mode: SplitMode, usages: &[f64], pixels: (u32, u32)) -> Self {
        assert!(!usages.is_empty(), "split tree needs at least one leaf");
        let leaves: Vec<(usize, f64)> = usages.iter().copied().enumerate().collect();
        let first = match mode {
            SplitMode::Vertical => Axis::X,
            SplitMode::Horizontal => Axis::Y,
            SplitMode::Db => Axis::Range,
            SplitMode::TwoD => {
                if pixels.0 >= pixels.1 {
                    Axis::X
                } else {
                    Axis::Y
                }
            }
        };
        let root = build(&leaves, first, mode == SplitMode::TwoD);
        let mut t = SplitTree { mode, root, pixels };
        let domain = t.domain();
        t.root = t.reset(&t.root, &domain);
        let params = SplitParams {
            damping: 0.0,
            ..SplitParams::default()
        };
        let root = t.root.clone();
        t.root = t.place(&root, &domain, &params, &|_, _, p| p);
        t
    }

    pub fn leaves(&self) -> usize {
        fn count(n: &SplitNode) -> usize {
            match n {
                SplitNode::Leaf { .. } => 1,
                SplitNode::Split { left, right, .. } => count(left) + count(right),
            }
        }
        count(&self.root)
    }

    pub fn usages(&self) -> Vec<f64> {
        let mut out = alloc::vec![0.0; self.leaves()];
        fn rec(n: &SplitNode, out: &mut [f64]) {
            match n {
                SplitNode::Leaf { index, usage } => out[*index] = *usage,
                SplitNode::Split { left, right, .. } => {
                    rec(left, out);
                    rec(right, out);
                }
            }
        }
        rec(&self.root, &mut out);
        out
    }

    fn domain(&self) -> Region {
        match self.mode {
            SplitMode::Db => Region::Range(Range::FULL),
            _ => Region::Viewport(Viewport::FULL),
        }
    }

    /// Leaf regions in leaf index order.
    pub fn regions(&self) -> Vec<Region> {
        let mut out = alloc::vec![self.domain(); self.leaves()];
        fn rec(n: &SplitNode, r: Region, out: &mut [Region]) {
            match n {
                SplitNode::Leaf { index, .. } => out[*index] = r,
                SplitNode::Split {
                    axis,
                    position,
                    left,
                    right,
                } => {
                    let (lo, hi) = span(&r, *axis);
                    rec(left, cut(&r, *axis, lo, *position), out);
                    rec(right, cut(&r, *axis, *position, hi), out);
                }
            }
        }
        rec(&self.root, self.domain(), &mut out);
        out
    }

    /// All split positions with their axes, depth-first.
    pub fn positions(&self) -> Vec<(Axis, f64)> {
        let mut out = Vec::new();
        fn rec(n: &SplitNode, out: &mut Vec<(Axis, f64)>) {
            if let SplitNode::Split {
                axis,
                position,
                left,
                right,
            } = n
            {
                out.push((*axis, *position));
                rec(left, out);
                rec(right, out);
            }
        }
        rec(&self.root, &mut out);
        out
    }

    fn axis_pixels(&self, axis: Axis) -> u32 {
        match axis {
            Axis::X => self.pixels.0,
            Axis::Y => self.pixels.1,
            Axis::Range => 0,
        }
    }

    fn unit(&self, axis: Axis, params: &SplitParams) -> f64 {
        match axis {
            Axis::X if self.pixels.0 > 0 => params.boundary.0.max(1) as f64 / self.pixels.0 as f64,
            Axis::Y if self.pixels.1 > 0 => params.boundary.1.max(1) as f64 / self.pixels.1 as f64,
            _ => MIN_RANGE,
        }
    }

    /// Usage-proportional positions.
    fn reset(&self, n: &SplitNode, r: &Region) -> SplitNode {
        match n {
            SplitNode::Leaf { .. } => n.clone(),
            SplitNode::Split { axis, left, right, .. } => {
                let (lo, hi) = span(r, *axis);
                let p = lo + (hi - lo) * left.usage() / n.usage();
                SplitNode::Split {
                    axis: *axis,
                    position: p,
                    left: Box::new(self.reset(left, &cut(r, *axis, lo, p))),
                    right: Box::new(self.reset(right, &cut(r, *axis, p, hi))),
                }
            }
        }
    }

    /// Top-down placement. `target` proposes a raw position for a split
    /// given its region and previous position; damping, resistance, limits
    /// and boundary snapping are applied here.
    fn place(
        &self,
        n: &SplitNode,
        r: &Region,
        params: &SplitParams,
        target: &dyn Fn(&SplitNode, &Region, f64) -> f64,
    ) -> SplitNode {
        let SplitNode::Split {
            axis,
            position: old,
            left,
            right,
        } = n
        else {
            return n.clone();
        };
        let axis = *axis;
        let (lo, hi) = span(r, axis);
        let unit = self.unit(axis, params);
        let min = lo + left.min_units(axis) as f64 * unit;
        let max = hi - right.min_units(axis) as f64 * unit;

        let raw = target(n, r, *old);
        let mut p = *old + (1.0 - params.damping) * (raw - *old);
        let px = self.axis_pixels(axis) as f64;
        if px > 0.0 && libm::fabs(p - *old) * px < params.resistance {
            p = *old;
        }
        if min <= max {
            p = p.clamp(min, max);
            if px > 0.0 {
                let snapped = libm::round(p / unit) * unit;
                let down = libm::floor(p / unit) * unit;
                let up = libm::ceil(p / unit) * unit;
                p = [snapped, down, up]
                    .into_iter()
                    .find(|s| *s >= min - 1e-12 && *s <= max + 1e-12)
                    .unwrap_or(p);
            }
        } else {
            p = 0.5 * (lo + hi);
        }
        SplitNode::Split {
            axis,
            position: p,
            left: Box::new(self.place(left, &cut(r, axis, lo, p), params, target)),
            right: Box::new(self.place(right, &cut(r, axis, p, hi), params, target)),
        }
    }

    /// Moves every split so that the integral of `grid` on each side matches
    /// the usage ratio of the two subtrees.
    pub fn load_update(&self, grid: &LoadGrid, params: &SplitParams) -> SplitTree {
        let target = |n: &SplitNode, r: &Region, old: f64| -> f64 {
            let SplitNode::Split { axis, left, .. } = n else {
                return old;
            };
            let total = grid.integral(r);
            if !(total > 0.0) || !total.is_finite() {
                return old;
            }
            solve(grid, r, *axis, total * left.usage() / n.usage()).unwrap_or(old)
        };
        let domain = self.domain();
        SplitTree {
            root: self.place(&self.root, &domain, params, &target),
            ..self.clone()
        }
    }

    /// Cost grid of the previous frame: each leaf's time, converted to work
    /// by its usage, spread uniformly over its region.
    pub fn work_grid(&self, frame: u64, leaf_times_ms: &[f64]) -> LoadGrid {
        let work: Vec<f64> = leaf_times_ms.iter().zip(self.usages()).map(|(t, u)| t * u).collect();
        LoadGrid::from_times(frame, &self.regions(), &work)
    }

    /// Balances on the previous frame's leaf times redistributed uniformly
    /// over the leaf regions. All-zero times fall back to usage-proportional
    /// areas.
    pub fn tree_update(&self, leaf_times_ms: &[f64], params: &SplitParams) -> SplitTree {
        assert_eq!(leaf_times_ms.len(), self.leaves(), "one time per leaf");
        if leaf_times_ms.iter().all(|t| !(*t > 0.0)) {
            let domain = self.domain();
            let mut t = self.clone();
            t.root = self.reset(&self.root, &domain);
            return t.load_update(&LoadGrid::default(), &SplitParams { damping: 0.0, ..*params });
        }
        self.load_update(&self.work_grid(0, leaf_times_ms), params)
    }
}

fn build(leaves: &[(usize, f64)], axis: Axis, alternate: bool) -> SplitNode {
    if leaves.len() == 1 {
        return SplitNode::Leaf {
            index: leaves[0].0,
            usage: leaves[0].1,
        };
    }
    let next = match (alternate, axis) {
        (true, Axis::X) => Axis::Y,
        (true, Axis::Y) => Axis::X,
        _ => axis,
    };
    let mid = leaves.len() / 2;
    SplitNode::Split {
        axis,
        position: 0.5,
        left: Box::new(build(&leaves[..mid], next, alternate)),
        right: Box::new(build(&leaves[mid..], next, alternate)),
    }
}

/// Position `p` along `axis` where the integral over the part of `r` below
/// `p` equals `want`. The integral is piecewise linear between cell edges,
/// so the crossing is found exactly.
fn solve(grid: &LoadGrid, r: &Region, axis: Axis, want: f64) -> Option<f64> {
    let (lo, hi) = span(r, axis);
    let mut xs = alloc::vec![lo, hi];
    grid.edges(axis, &mut xs);
    xs.retain(|x| *x >= lo && *x <= hi);
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    xs.dedup();
    let f = |x: f64| if x <= lo { 0.0 } else { grid.integral(&cut(r, axis, lo, x)) };
    let mut prev = (lo, 0.0);
    for &x in &xs[1..] {
        let v = f(x);
        if v >= want {
            let (x0, v0) = prev;
            if v - v0 <= 0.0 {
                return Some(x0);
            }
            return Some(x0 + (x - x0) * (want - v0) / (v - v0));
        }
        prev = (x, v);
    }
    Some(hi)
}
