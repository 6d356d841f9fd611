//! Configuration model and compound trees.
//!
//! A [`Config`] holds the display description (canvases, segments, layouts,
//! views, observers) and the compound trees that decompose rendering work for
//! a destination channel. Per frame, a compound resolves into [`RenderTask`]s
//! and tile queues; task outputs are reassembled with [`composite`].

mod channels;
mod geom;
pub(crate) mod image;
mod model;
mod parse;
mod print;
mod tasks;

pub use channels::{derive_channels, DestinationChannel};
pub use geom::{make_tiles, pixel_owner, PhasePeriod, PixelParam, PixelRect, Range, SubpixelParam, Viewport};
pub use image::{composite, CompositeError, CompositeStats, Fragment, FrameInput, Image};
pub use model::{
    Canvas, ChannelDecl, Compound, Config, EqualizerSpec, FrameSpec, Layout, Observer, Segment, SplitMode,
    SplitParams, TileSpec, View, Wall, DEFAULT_TILE_SIZE,
};
pub use parse::{parse_config, ParseError, Parsed, Pos, Warning};
pub use print::print_config;
pub use tasks::{generate_tasks, plan_frame, FramePlan, Region, RenderTask, Splits, TaskContext, TileQueue};

use alloc::string::String;
use alloc::vec::Vec;

#[derive(Clone, PartialEq, Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid viewport {0:?}")]
    Viewport(Viewport),
    #[error("invalid range {0:?}")]
    Range(Range),
    #[error("invalid pixel parameter {0:?}")]
    Pixel(PixelParam),
    #[error("invalid subpixel parameter {0:?}")]
    Subpixel(SubpixelParam),
    #[error("invalid phase {0:?}")]
    Phase(PhasePeriod),
    #[error("usage must be positive, got {0}")]
    Usage(f64),
    #[error("compound has no channel")]
    MissingChannel,
    #[error("invalid equalizer parameters")]
    EqualizerParams,
    #[error("tile size must be positive")]
    TileSize,
    #[error("input frame '{0}' has no producer")]
    UnknownFrame(String),
    #[error("frame '{0}' has several concurrent producers")]
    DuplicateProducer(String),
    #[error("input tiles '{0}' have no queue")]
    UnknownQueue(String),
    #[error("latency {latency} is below the time-multiplex period {period}")]
    LatencyTooLow { latency: u32, period: u32 },
    #[error("split for compound {0:?} does not match its children")]
    SplitShape(Vec<usize>),
    #[error("canvas '{0}' has no segments")]
    EmptyCanvas(String),
    #[error("layout '{0}' has no views")]
    EmptyLayout(String),
    #[error("unknown layout '{0}'")]
    UnknownLayout(String),
    #[error("unknown observer '{0}'")]
    UnknownObserver(String),
}
