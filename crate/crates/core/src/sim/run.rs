use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::cluster::Cluster;
use super::render::{render_reference, render_task, TaskRender};
use super::scene::{CostField, SceneSpec};
use crate::compound::image::pixel_bytes;
use crate::compound::{
    composite, CompositeError, Compound, Config, EqualizerSpec, FrameInput, Image, ModelError, PixelRect,
    RenderTask, SplitParams, Splits, TaskContext, plan_frame,
};
use crate::equalizer::{assign_tiles_from, DfrState, FramerateEqualizer, SplitTree};

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct Scenario {
    pub frames: u64,
    /// Destination resolution.
    pub size: (u32, u32),
    pub scene: SceneSpec,
}

/// Replaces equalizer output for chosen compounds, e.g. with an oracle.
pub type SplitOverride<'a> = &'a dyn Fn(u64, &CostField, (u32, u32)) -> Splits;

#[derive(Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Composite real images every frame and compare them with a monolithic
    /// render.
    pub check_images: bool,
    pub split_override: Option<SplitOverride<'a>>,
}

#[derive(Clone, PartialEq, Debug)]
pub struct TaskStats {
    pub node: usize,
    pub path: Vec<usize>,
    pub tile: Option<usize>,
    /// Time on the node at its effective capacity.
    pub time_ms: f64,
    pub start_ms: f64,
    pub end_ms: f64,
    pub roi: PixelRect,
    pub fill_mpix: f64,
    /// Bytes read back for compositing.
    pub bytes: u64,
    /// Whether the output stays on the destination node.
    pub local: bool,
}

#[derive(Clone, PartialEq, Debug)]
pub struct FrameStats {
    pub frame: u64,
    /// Render resolution, which differs from the destination under DFR.
    pub size: (u32, u32),
    pub start_ms: f64,
    /// Time the frame was displayed.
    pub finish_ms: f64,
    /// Time since the previous frame was displayed.
    pub interval_ms: f64,
    pub tasks: Vec<TaskStats>,
    pub composite_ms: f64,
    pub transferred_bytes: u64,
    pub local_bytes: u64,
    /// Set when images were checked against a monolithic render.
    pub image_matches: Option<bool>,
}

impl FrameStats {
    /// Latency of the frame through all pipeline stages.
    pub fn frame_ms(&self) -> f64 {
        self.finish_ms - self.start_ms
    }

    pub fn max_task_ms(&self) -> f64 {
        self.tasks.iter().map(|t| t.time_ms).fold(0.0, f64::max)
    }

    pub fn fill_mpix(&self) -> f64 {
        self.tasks.iter().map(|t| t.fill_mpix).sum()
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct RunReport {
    /// Node names; indices in [`TaskStats::node`] refer to this list and to
    /// the cluster's capacities. The destination node comes first.
    pub nodes: Vec<String>,
    pub frames: Vec<FrameStats>,
    /// Summed frame durations: the display time of the last frame.
    pub total_ms: f64,
}

impl RunReport {
    pub fn images_match(&self) -> bool {
        self.frames.iter().all(|f| f.image_matches != Some(false))
    }
}

#[derive(Clone, PartialEq, Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Composite(#[from] CompositeError),
    #[error("config has no compound")]
    NoCompound,
    #[error("compound uses {needed} nodes but the cluster has {have}")]
    NodeCount { needed: usize, have: usize },
}

fn node_of(config: &Config, channel: &str) -> String {
    config
        .channel(channel)
        .and_then(|c| c.node.clone())
        .unwrap_or_else(|| String::from(channel))
}

/// Destination node first, then the nodes of leaves in tree order.
pub fn node_order(config: &Config, root: &Compound) -> Result<Vec<String>, SimError> {
    let dest = root.channel.as_deref().ok_or(ModelError::MissingChannel)?;
    let mut nodes = vec![node_of(config, dest)];
    root.walk(&mut |_, c, channel| {
        if let (true, Some(ch)) = (c.is_leaf(), channel) {
            let n = node_of(config, ch);
            if !nodes.contains(&n) {
                nodes.push(n);
            }
        }
    });
    Ok(nodes)
}

struct SplitState {
    path: Vec<usize>,
    tree_mode: bool,
    params: SplitParams,
    tree: SplitTree,
}

struct Output {
    task: RenderTask,
    image: Option<Image>,
    roi: PixelRect,
}

/// Runs the first compound of `config` over `scenario` on a virtual clock.
///
/// Per frame, tasks are generated from the current equalizer state and
/// simulated; tasks on one node run back to back, nodes run in parallel.
/// The destination node then receives and merges all outputs. Frame `f` may
/// start once frame `f - latency - 1` is displayed. Equalizers see the
/// timings of the frame just simulated.
pub fn run_frames(
    scenario: &Scenario,
    config: &Config,
    cluster: &Cluster,
    opts: &RunOptions<'_>,
) -> Result<RunReport, SimError> {
    config.validate()?;
    let root = config.compounds.first().ok_or(SimError::NoCompound)?;
    let nodes = node_order(config, root)?;
    if nodes.len() > cluster.nodes.len() {
        return Err(SimError::NodeCount {
            needed: nodes.len(),
            have: cluster.nodes.len(),
        });
    }
    let index = |name: &str| nodes.iter().position(|n| n == name).expect("node listed");
    let latency = config.effective_latency() as usize;

    let mut splits_state = Vec::new();
    let mut framerate = None;
    let mut dfr = None;
    root.walk(&mut |path, c, _| {
        for eq in &c.equalizers {
            match eq {
                EqualizerSpec::Load(p) | EqualizerSpec::Tree(p) if !c.children.is_empty() => {
                    let usages: Vec<f64> = c.children.iter().map(|k| k.usage).collect();
                    splits_state.push(SplitState {
                        path: path.to_vec(),
                        tree_mode: matches!(eq, EqualizerSpec::Tree(_)),
                        params: *p,
                        tree: SplitTree::new(p.mode, &usages, scenario.size),
                    });
                }
                EqualizerSpec::Framerate if path.is_empty() => framerate = Some(FramerateEqualizer::default()),
                EqualizerSpec::Dfr { framerate } if path.is_empty() => dfr = Some(DfrState::for_framerate(*framerate)),
                _ => {}
            }
        }
    });

    let dest = 0usize;
    let mut free = vec![0.0f64; nodes.len()];
    let mut finishes: Vec<f64> = Vec::new();
    let mut frames = Vec::new();
    let mut prev_finish = 0.0;

    for f in 0..scenario.frames {
        let size = dfr.map(|d: DfrState| d.source_size(scenario.size)).unwrap_or(scenario.size);
        let field = scenario.scene.field(f, scenario.frames, size);
        let mut splits: Splits = splits_state
            .iter()
            .map(|s| (s.path.clone(), s.tree.regions()))
            .collect();
        if let Some(o) = opts.split_override {
            splits.extend(o(f, &field, size));
        }
        let ctx = TaskContext {
            frame: f,
            size,
            splits: &splits,
            latency: latency as u32,
            channels: &config.channels,
        };
        let plan = plan_frame(root, &ctx)?;
        let fi = f as usize;
        let start = if fi > latency { finishes[fi - latency - 1] } else { 0.0 };
        let check = opts.check_images;
        let mut stats = Vec::new();
        let mut outputs: Vec<Output> = Vec::new();
        let mut record = |task: RenderTask, r: TaskRender, node: usize, t0: f64, t1: f64, stats: &mut Vec<TaskStats>| {
            let local = task.local || node == dest;
            let owned = task.pixel.owned_in(&r.roi);
            stats.push(TaskStats {
                node,
                path: task.path.clone(),
                tile: task.tile,
                time_ms: t1 - t0,
                start_ms: t0,
                end_ms: t1,
                roi: r.roi,
                fill_mpix: r.fill_mpix,
                bytes: owned * pixel_bytes(&task.range),
                local,
            });
            outputs.push(Output {
                task,
                image: r.image,
                roi: r.roi,
            });
        };

        for task in plan.tasks {
            let node = index(&task.node);
            let r = render_task(&field, &task, size, check);
            let cost = (r.time_ms + cluster.task_overhead_ms) / cluster.capacity(node, f);
            let t0 = start.max(free[node]);
            free[node] = t0 + cost;
            record(task, r, node, t0, t0 + cost, &mut stats);
        }

        for q in &plan.queues {
            if q.tiles.is_empty() || q.consumers.is_empty() {
                continue;
            }
            let renders: Vec<TaskRender> = (0..q.tiles.len())
                .map(|i| render_task(&field, &q.task_for(i, 0, size), size, false))
                .collect();
            let costs: Vec<f64> = renders.iter().map(|r| r.time_ms + cluster.task_overhead_ms).collect();
            let cnodes: Vec<usize> = q.consumers.iter().map(|c| index(&c.node)).collect();
            let speeds: Vec<f64> = cnodes.iter().map(|&n| cluster.capacity(n, f)).collect();
            let starts: Vec<f64> = cnodes.iter().map(|&n| start.max(free[n])).collect();
            let a = assign_tiles_from(&costs, &speeds, &starts, cluster.tile_prefetch);
            for (c, tiles) in a.per_source.iter().enumerate() {
                let mut clock = starts[c];
                for &i in tiles {
                    let task = q.task_for(i, c, size);
                    let r = if check || c != 0 {
                        render_task(&field, &task, size, check)
                    } else {
                        renders[i].clone()
                    };
                    let t1 = clock + costs[i] / speeds[c];
                    record(task, r, cnodes[c], clock, t1, &mut stats);
                    clock = t1;
                }
                free[cnodes[c]] = free[cnodes[c]].max(a.finish[c]);
            }
        }

        let transferred: u64 = stats.iter().filter(|t| !t.local).map(|t| t.bytes).sum();
        let local_bytes: u64 = stats.iter().filter(|t| t.local).map(|t| t.bytes).sum();
        let pixels_read: u64 = outputs.iter().map(|o| o.task.pixel.owned_in(&o.roi)).sum();
        let composite_ms =
            transferred as f64 / cluster.link_bytes_per_ms + pixels_read as f64 * cluster.merge_ms_per_mpix / 1e6;
        let ready = stats.iter().map(|t| t.end_ms).fold(start, f64::max);
        let composited = ready.max(free[dest]) + composite_ms;
        free[dest] = composited;
        let finish = match framerate.as_mut() {
            Some(eq) => {
                // The interval the sources sustain without swap stalls: the
                // frame's render span, shared by the idle source nodes.
                let first = stats.iter().map(|t| t.start_ms).fold(ready, f64::min);
                let used = stats.iter().map(|t| t.node).collect::<alloc::collections::BTreeSet<_>>().len().max(1);
                let interval = (composited - first) * used as f64 / nodes.len() as f64;
                eq.swap_with_interval(composited, (f > 0).then_some(interval))
            }
            None => composited,
        };

        let image_matches = if check {
            let inputs: Vec<FrameInput<'_>> = outputs
                .iter()
                .map(|o| FrameInput {
                    image: o.image.as_ref().expect("images rendered"),
                    pixel: o.task.pixel,
                    subpixel: o.task.subpixel,
                    range: o.task.range,
                    roi: o.roi,
                    local: o.task.local,
                })
                .collect();
            let samples = outputs.first().map(|o| o.task.subpixel.size).unwrap_or(1);
            let (img, _) = composite(PixelRect::sized(size.0, size.1), &inputs)?;
            Some(img == render_reference(&field, size, samples))
        } else {
            None
        };

        for s in &mut splits_state {
            let n = s.tree.leaves();
            let mut times = vec![0.0; n];
            for t in &stats {
                if t.path.len() > s.path.len() && t.path.starts_with(&s.path) {
                    times[t.path[s.path.len()]] += t.time_ms;
                }
            }
            s.tree = if s.tree_mode {
                s.tree.tree_update(&times, &s.params)
            } else {
                s.tree.load_update(&s.tree.work_grid(f, &times), &s.params)
            };
        }
        let interval = finish - prev_finish;
        if let Some(d) = dfr.as_mut() {
            *d = d.update(interval);
        }
        prev_finish = finish;
        finishes.push(finish);
        frames.push(FrameStats {
            frame: f,
            size,
            start_ms: start,
            finish_ms: finish,
            interval_ms: interval,
            tasks: stats,
            composite_ms,
            transferred_bytes: transferred,
            local_bytes,
            image_matches,
        });
    }
    Ok(RunReport {
        nodes,
        total_ms: prev_finish,
        frames,
    })
}

/// Summed frame time of rendering the whole scene on one reference node,
/// without any compositing.
pub fn monolithic_total(scenario: &Scenario) -> f64 {
    (0..scenario.frames)
        .map(|f| {
            let field = scenario.scene.field(f, scenario.frames, scenario.size);
            let task = super::render::full_task(scenario.size, crate::compound::SubpixelParam::FULL);
            render_task(&field, &task, scenario.size, false).time_ms
        })
        .sum()
}
