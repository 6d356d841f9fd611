use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::geom::{make_tiles, PixelParam, PixelRect, Range, SubpixelParam, Viewport};
use super::model::{ChannelDecl, Compound};
use super::ModelError;

/// Placement of one child, as computed by an equalizer.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum Region {
    Viewport(Viewport),
    Range(Range),
}

/// Child placements keyed by the path of the compound whose children they
/// place. Missing entries fall back to the configured values.
pub type Splits = BTreeMap<Vec<usize>, Vec<Region>>;

#[derive(Clone, Copy, Debug)]
pub struct TaskContext<'a> {
    pub frame: u64,
    /// Destination channel size in pixels.
    pub size: (u32, u32),
    pub splits: &'a Splits,
    pub latency: u32,
    /// Channel declarations used to resolve nodes; unmatched channels run on
    /// a node of the same name.
    pub channels: &'a [ChannelDecl],
}

impl<'a> TaskContext<'a> {
    pub fn new(frame: u64, size: (u32, u32), splits: &'a Splits) -> Self {
        TaskContext {
            frame,
            size,
            splits,
            latency: u32::MAX,
            channels: &[],
        }
    }

    fn node_of(&self, channel: &str) -> String {
        self.channels
            .iter()
            .find(|c| c.name == channel)
            .and_then(|c| c.node.clone())
            .unwrap_or_else(|| String::from(channel))
    }
}

/// One leaf rendering assignment for one frame.
#[derive(Clone, PartialEq, Debug)]
pub struct RenderTask {
    pub path: Vec<usize>,
    pub node: String,
    pub channel: String,
    pub frame: u64,
    /// Normalized area within the destination.
    pub viewport: Viewport,
    /// Pixel area within the destination.
    pub pixels: PixelRect,
    pub range: Range,
    pub pixel: PixelParam,
    pub subpixel: SubpixelParam,
    pub eyes: Vec<String>,
    /// Output stays on the rendering node (texture frame).
    pub local: bool,
    /// Set for tasks handed out by a tile queue.
    pub tile: Option<usize>,
    /// Filled in by the renderer: bounding box of rendered content.
    pub roi: Option<PixelRect>,
}

/// Accumulated attributes while descending the tree.
#[derive(Clone)]
struct Frame<'c> {
    vp: Viewport,
    range: Range,
    pixel: PixelParam,
    subpixel: SubpixelParam,
    channel: Option<&'c str>,
    active: bool,
    local: bool,
}

/// Work queue fed by an `outputtiles` compound.
#[derive(Clone, PartialEq, Debug)]
pub struct TileQueue {
    pub name: String,
    pub path: Vec<usize>,
    pub tiles: Vec<PixelRect>,
    pub consumers: Vec<RenderTask>,
}

impl TileQueue {
    /// The task `consumer` renders for tile `index`.
    pub fn task_for(&self, index: usize, consumer: usize, size: (u32, u32)) -> RenderTask {
        let mut t = self.consumers[consumer].clone();
        let rect = self.tiles[index];
        t.viewport = Viewport {
            x: rect.x as f64 / size.0 as f64,
            y: rect.y as f64 / size.1 as f64,
            w: rect.w as f64 / size.0 as f64,
            h: rect.h as f64 / size.1 as f64,
        };
        t.pixels = rect;
        t.tile = Some(index);
        t
    }
}

/// Leaf tasks and tile queues of `root` for one frame.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct FramePlan {
    pub tasks: Vec<RenderTask>,
    pub queues: Vec<TileQueue>,
}

/// Resolves the compound tree into the static tasks of one frame.
/// Leaves consuming a tile queue get no static task; see [`plan_frame`].
pub fn generate_tasks(root: &Compound, ctx: &TaskContext<'_>) -> Result<Vec<RenderTask>, ModelError> {
    Ok(plan_frame(root, ctx)?.tasks)
}

/// Static tasks plus the tile queues with their active consumers.
pub fn plan_frame(root: &Compound, ctx: &TaskContext<'_>) -> Result<FramePlan, ModelError> {
    let period = root.max_period();
    if ctx.latency < period {
        return Err(ModelError::LatencyTooLow {
            latency: ctx.latency,
            period,
        });
    }
    let dest = PixelRect::sized(ctx.size.0, ctx.size.1);
    let mut plan = FramePlan::default();
    let mut open_queues: Vec<(String, usize)> = Vec::new();
    let start = Frame {
        vp: Viewport::FULL,
        range: Range::FULL,
        pixel: PixelParam::FULL,
        subpixel: SubpixelParam::FULL,
        channel: None,
        active: true,
        local: false,
    };
    visit(root, None, &mut Vec::new(), &start, ctx, &dest, &mut plan, &mut open_queues)?;
    Ok(plan)
}

#[allow(clippy::too_many_arguments)]
fn visit<'c>(
    c: &'c Compound,
    region: Option<&Region>,
    path: &mut Vec<usize>,
    parent: &Frame<'c>,
    ctx: &TaskContext<'_>,
    dest: &PixelRect,
    plan: &mut FramePlan,
    queues: &mut Vec<(String, usize)>,
) -> Result<(), ModelError> {
    let (mut vp, mut range) = (c.viewport, c.range);
    match region {
        Some(Region::Viewport(v)) => vp = *v,
        Some(Region::Range(r)) => range = *r,
        None => {}
    }
    let f = Frame {
        vp: parent.vp.apply(&vp),
        range: parent.range.apply(&range),
        pixel: parent.pixel.apply(&c.pixel),
        subpixel: parent.subpixel.apply(&c.subpixel),
        channel: c.channel.as_deref().or(parent.channel),
        active: parent.active && c.phase.active(ctx.frame),
        local: c.output_frames.iter().any(|o| o.texture),
    };
    let channel = f.channel.ok_or(ModelError::MissingChannel)?;
    let task = || RenderTask {
        path: path.clone(),
        node: ctx.node_of(channel),
        channel: String::from(channel),
        frame: ctx.frame,
        viewport: f.vp,
        pixels: f.vp.to_pixels(dest),
        range: f.range,
        pixel: f.pixel,
        subpixel: f.subpixel,
        eyes: c.eyes.clone(),
        local: f.local,
        tile: None,
        roi: None,
    };

    let mut opened = false;
    if let Some(t) = &c.output_tiles {
        let area = f.vp.to_pixels(dest);
        queues.push((t.name.clone(), plan.queues.len()));
        plan.queues.push(TileQueue {
            name: t.name.clone(),
            path: path.clone(),
            tiles: if f.active { make_tiles(&area, t.size) } else { Vec::new() },
            consumers: Vec::new(),
        });
        opened = true;
    }

    if c.is_leaf() {
        if let Some(q) = &c.input_tiles {
            let (_, at) = queues
                .iter()
                .rev()
                .find(|(n, _)| n == q)
                .ok_or_else(|| ModelError::UnknownQueue(q.clone()))?;
            if f.active {
                plan.queues[*at].consumers.push(task());
            }
        } else if f.active {
            plan.tasks.push(task());
        }
    } else {
        let split = ctx.splits.get(path.as_slice());
        if let Some(s) = split {
            if s.len() != c.children.len() {
                return Err(ModelError::SplitShape(path.clone()));
            }
        }
        for (i, child) in c.children.iter().enumerate() {
            path.push(i);
            let r = visit(child, split.map(|s| &s[i]), path, &f, ctx, dest, plan, queues);
            path.pop();
            r?;
        }
    }
    if opened {
        queues.pop();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compound::{parse_config, PhasePeriod};
    use alloc::vec;

    fn root(text: &str) -> Compound {
        parse_config(text).unwrap().config.compounds.remove(0)
    }

    const DPLEX: &str = r#"compound { channel "d"
        compound { channel "s1" phase 0 period 3 outputframe { name "f" } }
        compound { channel "s2" phase 1 period 3 outputframe { name "f" } }
        compound { channel "s3" phase 2 period 3 outputframe { name "f" } }
        inputframe { name "f" } }"#;

    #[test]
    fn time_multiplex_rotates() {
        let c = root(DPLEX);
        let splits = Splits::new();
        let mut first = Vec::new();
        for frame in 0..9 {
            let tasks = generate_tasks(&c, &TaskContext::new(frame, (64, 64), &splits)).unwrap();
            assert_eq!(tasks.len(), 1);
            if tasks[0].channel == "s1" {
                first.push(frame);
            }
        }
        assert_eq!(first, vec![0, 3, 6]);
    }

    #[test]
    fn time_multiplex_needs_latency() {
        let c = root(DPLEX);
        let splits = Splits::new();
        let mut ctx = TaskContext::new(0, (64, 64), &splits);
        ctx.latency = 2;
        assert_eq!(
            generate_tasks(&c, &ctx),
            Err(ModelError::LatencyTooLow { latency: 2, period: 3 })
        );
    }

    #[test]
    fn split_viewports() {
        let c = root(r#"compound { channel "d" compound { channel "a" } compound { channel "b" } }"#);
        let mut splits = Splits::new();
        splits.insert(
            vec![],
            vec![
                Region::Viewport(Viewport::new(0.0, 0.0, 0.5, 1.0).unwrap()),
                Region::Viewport(Viewport::new(0.5, 0.0, 0.5, 1.0).unwrap()),
            ],
        );
        let t = generate_tasks(&c, &TaskContext::new(0, (101, 10), &splits)).unwrap();
        assert_eq!(t[0].viewport, Viewport::new(0.0, 0.0, 0.5, 1.0).unwrap());
        assert_eq!(t[1].viewport, Viewport::new(0.5, 0.0, 0.5, 1.0).unwrap());
        assert_eq!(t[0].pixels.area() + t[1].pixels.area(), 1010);
        assert_eq!(t[0].pixels.right(), t[1].pixels.x);
    }

    #[test]
    fn split_shape_mismatch() {
        let c = root(r#"compound { channel "d" compound { channel "a" } compound { channel "b" } }"#);
        let mut splits = Splits::new();
        splits.insert(vec![], vec![Region::Range(Range::FULL)]);
        assert!(matches!(
            generate_tasks(&c, &TaskContext::new(0, (8, 8), &splits)),
            Err(ModelError::SplitShape(_))
        ));
    }

    #[test]
    fn subpixel_tasks() {
        let c = root(
            r#"compound { channel "d"
            compound { channel "d" subpixel [ 0 3 ] outputframe { type texture } }
            compound { channel "a" subpixel [ 1 3 ] outputframe {} }
            compound { channel "b" subpixel [ 2 3 ] outputframe {} }
            inputframe { name "frame.d" } inputframe { name "frame.a" } inputframe { name "frame.b" } }"#,
        );
        let t = generate_tasks(&c, &TaskContext::new(0, (8, 8), &Splits::new())).unwrap();
        assert_eq!(t.len(), 3);
        assert!(t.iter().all(|t| t.viewport == Viewport::FULL));
        assert_eq!(t.iter().map(|t| t.subpixel.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        assert!(t[0].local && !t[1].local);
    }

    #[test]
    fn tile_consumers_have_no_static_tasks() {
        let c = root(
            r#"compound { channel "d" outputtiles { name "q" size [ 64 64 ] }
            compound { channel "d" inputtiles { name "q" } }
            compound { channel "a" inputtiles { name "q" } outputframe {} }
            inputframe { name "frame.a" } }"#,
        );
        let plan = plan_frame(&c, &TaskContext::new(0, (100, 60), &Splits::new())).unwrap();
        assert!(plan.tasks.is_empty());
        assert_eq!(plan.queues.len(), 1);
        assert_eq!(plan.queues[0].tiles.len(), 2);
        assert_eq!(plan.queues[0].consumers.len(), 2);
        let t = plan.queues[0].task_for(1, 1, (100, 60));
        assert_eq!(t.pixels, PixelRect::new(64, 0, 36, 60));
        assert_eq!(t.channel, "a");
    }

    #[test]
    fn nested_parameters_compose() {
        let mut c = root(r#"compound { channel "d" compound { channel "a" viewport [ .5 0 .5 1 ] compound { channel "b" viewport [ 0 .5 1 .5 ] range [ .5 1 ] } } }"#);
        c.children[0].children[0].phase = PhasePeriod::ALWAYS;
        let t = generate_tasks(&c, &TaskContext::new(0, (10, 10), &Splits::new())).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].pixels, PixelRect::new(5, 5, 5, 5));
        assert_eq!(t[0].range, Range::new(0.5, 1.0).unwrap());
        assert_eq!(t[0].channel, "b");
    }

    #[test]
    fn nodes_resolve_through_declarations() {
        let c = root(r#"compound { channel "d" }"#);
        let decls = [ChannelDecl {
            name: "d".into(),
            node: Some("n0".into()),
            size: None,
        }];
        let splits = Splits::new();
        let mut ctx = TaskContext::new(0, (4, 4), &splits);
        ctx.channels = &decls;
        assert_eq!(generate_tasks(&c, &ctx).unwrap()[0].node, "n0");
    }
}
