use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::geom::{PhasePeriod, PixelParam, Range, SubpixelParam, Viewport};
use super::ModelError;

/// A parsed configuration: resources, display model and compound trees.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Config {
    /// Frames the application may run ahead of the display. `None` means
    /// unspecified: 1, or the largest time-multiplex period when larger.
    pub latency: Option<u32>,
    pub channels: Vec<ChannelDecl>,
    pub observers: Vec<Observer>,
    pub layouts: Vec<Layout>,
    pub canvases: Vec<Canvas>,
    pub compounds: Vec<Compound>,
}

impl Config {
    pub fn layout(&self, name: &str) -> Option<&Layout> {
        self.layouts.iter().find(|l| l.name == name)
    }

    pub fn canvas(&self, name: &str) -> Option<&Canvas> {
        self.canvases.iter().find(|c| c.name == name)
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelDecl> {
        self.channels.iter().find(|c| c.name == name)
    }

    /// Latency used for scheduling and validation.
    pub fn effective_latency(&self) -> u32 {
        match self.latency {
            Some(l) => l,
            None => self
                .compounds
                .iter()
                .map(Compound::max_period)
                .max()
                .unwrap_or(1)
                .max(1),
        }
    }

    /// Checks cross-references and invariants that span the whole config.
    /// Returns human-readable warnings for suspicious but legal setups.
    pub fn validate(&self) -> Result<Vec<String>, ModelError> {
        let mut warnings = Vec::new();
        for c in &self.compounds {
            c.validate_tree(&mut warnings)?;
            if let Some(latency) = self.latency {
                let period = c.max_period();
                if latency < period {
                    return Err(ModelError::LatencyTooLow { latency, period });
                }
            }
        }
        for canvas in &self.canvases {
            if canvas.segments.is_empty() {
                return Err(ModelError::EmptyCanvas(canvas.name.clone()));
            }
            if let Some(l) = &canvas.layout {
                let layout = self.layout(l).ok_or_else(|| ModelError::UnknownLayout(l.clone()))?;
                if layout.views.is_empty() {
                    return Err(ModelError::EmptyLayout(l.clone()));
                }
            }
        }
        for layout in &self.layouts {
            for v in &layout.views {
                if let Some(o) = &v.observer {
                    if !self.observers.iter().any(|ob| &ob.name == o) {
                        return Err(ModelError::UnknownObserver(o.clone()));
                    }
                }
            }
        }
        Ok(warnings)
    }
}

/// Optional declaration binding a channel name to a node and pixel size.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct ChannelDecl {
    pub name: String,
    pub node: Option<String>,
    pub size: Option<(u32, u32)>,
}

#[derive(Clone, PartialEq, Debug, Default)]
pub struct Observer {
    pub name: String,
    pub position: [f64; 3],
}

#[derive(Clone, PartialEq, Debug, Default)]
pub struct Layout {
    pub name: String,
    pub views: Vec<View>,
}

#[derive(Clone, PartialEq, Debug, Default)]
pub struct View {
    pub name: String,
    /// Placement on the canvas the layout is applied to.
    pub viewport: Viewport,
    pub observer: Option<String>,
}

/// A physical projection surface made of one or more segments.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Canvas {
    pub name: String,
    pub layout: Option<String>,
    pub wall: Option<Wall>,
    pub swap_barrier: bool,
    pub segments: Vec<Segment>,
}

/// One output of a canvas, driven by a channel.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct Segment {
    pub name: Option<String>,
    pub channel: String,
    pub viewport: Viewport,
    /// Overrides the sub-frustum derived from the canvas wall.
    pub wall: Option<Wall>,
}

/// Planar projection rectangle given by three corners in world space.
#[derive(Clone, Copy, PartialEq, Debug, Default)]
pub struct Wall {
    pub bottom_left: [f64; 3],
    pub bottom_right: [f64; 3],
    pub top_left: [f64; 3],
}

impl Wall {
    /// The part of the wall covered by `vp`.
    pub fn restrict(&self, vp: &Viewport) -> Wall {
        let at = |u: f64, v: f64| -> [f64; 3] {
            let mut p = [0.0; 3];
            for (i, p) in p.iter_mut().enumerate() {
                *p = self.bottom_left[i]
                    + u * (self.bottom_right[i] - self.bottom_left[i])
                    + v * (self.top_left[i] - self.bottom_left[i]);
            }
            p
        };
        Wall {
            bottom_left: at(vp.x, vp.y),
            bottom_right: at(vp.right(), vp.y),
            top_left: at(vp.x, vp.top()),
        }
    }

    pub fn top_right(&self) -> [f64; 3] {
        let mut p = [0.0; 3];
        for (i, p) in p.iter_mut().enumerate() {
            *p = self.bottom_right[i] + self.top_left[i] - self.bottom_left[i];
        }
        p
    }
}

/// Axis selection of a split equalizer.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum SplitMode {
    /// Vertical stripes: splits along x.
    Vertical,
    /// Horizontal stripes: splits along y.
    Horizontal,
    /// Alternating axes, starting with the wider one.
    #[default]
    TwoD,
    /// Database range.
    Db,
}

impl SplitMode {
    pub fn keyword(self) -> &'static str {
        match self {
            SplitMode::Vertical => "VERTICAL",
            SplitMode::Horizontal => "HORIZONTAL",
            SplitMode::TwoD => "2D",
            SplitMode::Db => "DB",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "VERTICAL" | "vertical" => SplitMode::Vertical,
            "HORIZONTAL" | "horizontal" => SplitMode::Horizontal,
            "2D" | "2d" => SplitMode::TwoD,
            "DB" | "db" => SplitMode::Db,
            _ => return None,
        })
    }
}

/// Tunables shared by the load and tree equalizers.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct SplitParams {
    pub mode: SplitMode,
    /// Fraction of each computed move that is suppressed; 1 freezes splits.
    pub damping: f64,
    /// Moves smaller than this many pixels are ignored.
    pub resistance: f64,
    /// Split positions snap to multiples of this many pixels per axis.
    pub boundary: (u32, u32),
}

impl Default for SplitParams {
    fn default() -> Self {
        SplitParams {
            mode: SplitMode::TwoD,
            damping: 0.5,
            resistance: 0.0,
            boundary: (1, 1),
        }
    }
}

#[derive(Clone, PartialEq, Debug)]
pub enum EqualizerSpec {
    Load(SplitParams),
    Tree(SplitParams),
    Framerate,
    Tile { name: Option<String>, size: Option<(u32, u32)> },
    Dfr { framerate: f64 },
    Monitor,
}

impl EqualizerSpec {
    pub fn split_params(&self) -> Option<&SplitParams> {
        match self {
            EqualizerSpec::Load(p) | EqualizerSpec::Tree(p) => Some(p),
            _ => None,
        }
    }
}

/// Frame connection; `texture` marks a node-local, zero-copy transfer.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct FrameSpec {
    pub name: Option<String>,
    pub texture: bool,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TileSpec {
    pub name: String,
    pub size: (u32, u32),
}

pub const DEFAULT_TILE_SIZE: (u32, u32) = (64, 64);

/// A node of a compound tree.
#[derive(Clone, PartialEq, Debug)]
pub struct Compound {
    pub channel: Option<String>,
    pub eyes: Vec<String>,
    pub usage: f64,
    pub viewport: Viewport,
    pub range: Range,
    pub pixel: PixelParam,
    pub subpixel: SubpixelParam,
    pub phase: PhasePeriod,
    pub equalizers: Vec<EqualizerSpec>,
    pub output_tiles: Option<TileSpec>,
    pub input_tiles: Option<String>,
    pub output_frames: Vec<FrameSpec>,
    pub input_frames: Vec<FrameSpec>,
    pub children: Vec<Compound>,
}

impl Default for Compound {
    fn default() -> Self {
        Compound {
            channel: None,
            eyes: Vec::new(),
            usage: 1.0,
            viewport: Viewport::FULL,
            range: Range::FULL,
            pixel: PixelParam::FULL,
            subpixel: SubpixelParam::FULL,
            phase: PhasePeriod::ALWAYS,
            equalizers: Vec::new(),
            output_tiles: None,
            input_tiles: None,
            output_frames: Vec::new(),
            input_frames: Vec::new(),
            children: Vec::new(),
        }
    }
}

impl Compound {
    pub fn leaf(channel: &str) -> Self {
        Compound {
            channel: Some(channel.to_string()),
            ..Compound::default()
        }
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    /// Compound at `path` (child indices from `self`).
    pub fn at(&self, path: &[usize]) -> Option<&Compound> {
        let mut c = self;
        for &i in path {
            c = c.children.get(i)?;
        }
        Some(c)
    }

    pub fn at_mut(&mut self, path: &[usize]) -> Option<&mut Compound> {
        let mut c = self;
        for &i in path {
            c = c.children.get_mut(i)?;
        }
        Some(c)
    }

    pub fn split_equalizer(&self) -> Option<&EqualizerSpec> {
        self.equalizers.iter().find(|e| e.split_params().is_some())
    }

    pub fn has_equalizer(&self, f: impl Fn(&EqualizerSpec) -> bool) -> bool {
        self.equalizers.iter().any(f)
    }

    pub fn max_period(&self) -> u32 {
        self.children
            .iter()
            .map(Compound::max_period)
            .fold(self.phase.period, u32::max)
    }

    /// Visits every compound depth-first with its path and inherited channel.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&[usize], &'a Compound, Option<&'a str>)) {
        fn rec<'a>(
            c: &'a Compound,
            path: &mut Vec<usize>,
            inherited: Option<&'a str>,
            f: &mut dyn FnMut(&[usize], &'a Compound, Option<&'a str>),
        ) {
            let channel = c.channel.as_deref().or(inherited);
            f(path, c, channel);
            for (i, child) in c.children.iter().enumerate() {
                path.push(i);
                rec(child, path, channel, f);
                path.pop();
            }
        }
        rec(self, &mut Vec::new(), None, f)
    }

    /// Name under which an output frame is published.
    pub fn frame_name(spec: &FrameSpec, channel: Option<&str>) -> String {
        match &spec.name {
            Some(n) => n.clone(),
            None => format!("frame.{}", channel.unwrap_or("")),
        }
    }

    /// Validates parameters and frame/tile wiring of the tree rooted here.
    pub fn validate_tree(&self, warnings: &mut Vec<String>) -> Result<(), ModelError> {
        let mut err = None;
        let mut producers: BTreeMap<String, Vec<PhasePeriod>> = BTreeMap::new();
        let mut consumers: Vec<String> = Vec::new();
        let mut tile_out: Vec<String> = Vec::new();
        let mut tile_in: Vec<String> = Vec::new();
        self.walk(&mut |path, c, channel| {
            if err.is_some() {
                return;
            }
            let r = (|| {
                c.viewport.validate()?;
                c.range.validate()?;
                c.pixel.validate()?;
                c.subpixel.validate()?;
                c.phase.validate()?;
                if !(c.usage.is_finite() && c.usage > 0.0) {
                    return Err(ModelError::Usage(c.usage));
                }
                if channel.is_none() && (path.is_empty() || c.is_leaf()) {
                    return Err(ModelError::MissingChannel);
                }
                for e in &c.equalizers {
                    if let Some(p) = e.split_params() {
                        if !(0.0..=1.0).contains(&p.damping) || p.resistance < 0.0 || p.boundary.0 == 0 || p.boundary.1 == 0 {
                            return Err(ModelError::EqualizerParams);
                        }
                    }
                    if let EqualizerSpec::Dfr { framerate } = e {
                        if !(*framerate > 0.0) {
                            return Err(ModelError::EqualizerParams);
                        }
                    }
                }
                if let Some(t) = &c.output_tiles {
                    if t.size.0 == 0 || t.size.1 == 0 {
                        return Err(ModelError::TileSize);
                    }
                    tile_out.push(t.name.clone());
                }
                if let Some(t) = &c.input_tiles {
                    tile_in.push(t.clone());
                }
                for f in &c.output_frames {
                    producers.entry(Compound::frame_name(f, channel)).or_default().push(c.phase);
                }
                for f in &c.input_frames {
                    consumers.push(Compound::frame_name(f, channel));
                }
                sibling_warnings(c, warnings);
                Ok(())
            })();
            if let Err(e) = r {
                err = Some(e);
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
        for (name, phases) in &producers {
            for (i, a) in phases.iter().enumerate() {
                for b in &phases[i + 1..] {
                    let exclusive = a.period == b.period && a.period > 1 && a.phase != b.phase;
                    if !exclusive {
                        return Err(ModelError::DuplicateProducer(name.clone()));
                    }
                }
            }
        }
        for name in &consumers {
            if !producers.contains_key(name) {
                return Err(ModelError::UnknownFrame(name.clone()));
            }
        }
        for name in &tile_in {
            if !tile_out.contains(name) {
                return Err(ModelError::UnknownQueue(name.clone()));
            }
        }
        Ok(())
    }
}

fn sibling_warnings(c: &Compound, warnings: &mut Vec<String>) {
    let kids = &c.children;
    if kids.len() < 2 {
        return;
    }
    let subs: Vec<SubpixelParam> = kids.iter().map(|k| k.subpixel).filter(|s| !s.is_full()).collect();
    if !subs.is_empty() {
        let size = subs[0].size;
        let mut seen: Vec<u32> = subs.iter().map(|s| s.index).collect();
        seen.sort_unstable();
        let complete = subs.len() == kids.len()
            && subs.iter().all(|s| s.size == size)
            && seen.iter().copied().eq(0..size);
        if !complete {
            warnings.push(format!(
                "subpixel indices {:?} of size {} do not partition the samples",
                subs.iter().map(|s| s.index).collect::<Vec<_>>(),
                size
            ));
        }
    }
    let pix: Vec<PixelParam> = kids.iter().map(|k| k.pixel).filter(|p| !p.is_full()).collect();
    if !pix.is_empty() {
        let (xc, yc) = (pix[0].x_count, pix[0].y_count);
        let mut slots: Vec<(u32, u32)> = pix.iter().map(|p| (p.x_offset, p.y_offset)).collect();
        slots.sort_unstable();
        slots.dedup();
        let complete = pix.len() == kids.len()
            && pix.iter().all(|p| p.x_count == xc && p.y_count == yc)
            && slots.len() as u64 == xc as u64 * yc as u64
            && slots.len() == pix.len();
        if !complete {
            warnings.push(format!("pixel parameters of {} children do not partition the pixels", kids.len()));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn dplex() -> Compound {
        let mut root = Compound::leaf("destination");
        for i in 0..3 {
            let mut c = Compound::leaf(&format!("source{}", i + 1));
            c.phase = PhasePeriod::new(i, 3).unwrap();
            c.output_frames.push(FrameSpec {
                name: Some("frame".into()),
                texture: false,
            });
            root.children.push(c);
        }
        root.input_frames.push(FrameSpec {
            name: Some("frame".into()),
            texture: false,
        });
        root
    }

    #[test]
    fn exclusive_producers_allowed() {
        let mut w = Vec::new();
        dplex().validate_tree(&mut w).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn concurrent_producers_rejected() {
        let mut c = dplex();
        c.children[1].phase = PhasePeriod::new(0, 3).unwrap();
        assert_eq!(
            c.validate_tree(&mut Vec::new()),
            Err(ModelError::DuplicateProducer("frame".into()))
        );
    }

    #[test]
    fn dangling_input_rejected() {
        let mut c = dplex();
        c.input_frames[0].name = Some("nope".into());
        assert!(matches!(c.validate_tree(&mut Vec::new()), Err(ModelError::UnknownFrame(_))));
    }

    #[test]
    fn latency_below_period_rejected() {
        let mut cfg = Config {
            compounds: vec![dplex()],
            ..Config::default()
        };
        assert_eq!(cfg.effective_latency(), 3);
        cfg.latency = Some(2);
        assert_eq!(cfg.validate(), Err(ModelError::LatencyTooLow { latency: 2, period: 3 }));
        cfg.latency = Some(3);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn duplicate_subpixel_warns() {
        let mut root = Compound::leaf("dest");
        for (i, idx) in [0, 1, 1].iter().enumerate() {
            let mut c = Compound::leaf(&format!("s{i}"));
            c.subpixel = SubpixelParam::new(*idx, 3).unwrap();
            root.children.push(c);
        }
        let mut w = Vec::new();
        root.validate_tree(&mut w).unwrap();
        assert_eq!(w.len(), 1);
        root.children[2].subpixel.index = 2;
        w.clear();
        root.validate_tree(&mut w).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn wall_restriction_is_planar() {
        let wall = Wall {
            bottom_left: [-1.0, -0.5, -1.0],
            bottom_right: [1.0, -0.5, -1.0],
            top_left: [-1.0, 0.5, -1.0],
        };
        let sub = wall.restrict(&Viewport::new(0.5, 0.5, 0.5, 0.5).unwrap());
        assert_eq!(sub.bottom_left, [0.0, 0.0, -1.0]);
        assert_eq!(sub.bottom_right, [1.0, 0.0, -1.0]);
        assert_eq!(sub.top_left, [0.0, 0.5, -1.0]);
        assert_eq!(sub.top_right(), [1.0, 0.5, -1.0]);
    }
}
