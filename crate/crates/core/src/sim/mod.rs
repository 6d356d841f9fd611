//! Synthetic render workloads on a virtual clock.
//!
//! A [`SceneSpec`] yields a [`CostField`] per frame. Render tasks are priced
//! and rasterized against it, so compound decompositions can be timed on a
//! simulated [`Cluster`] and their composited output checked against a
//! monolithic render.

mod cluster;
mod modes;
mod render;
mod run;
mod scene;

pub use cluster::{Cluster, NodeCapacity, Variation};
pub use modes::{mode_config, node_name, Mode};
pub use render::{full_task, render_reference, render_task, sample_offset, TaskRender};
pub use run::{
    monolithic_total, node_order, run_frames, FrameStats, RunOptions, RunReport, Scenario, SimError, SplitOverride,
    TaskStats,
};
pub use scene::{CostField, SceneKind, SceneObject, SceneSpec};
