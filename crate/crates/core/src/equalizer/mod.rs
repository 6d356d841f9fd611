//! Runtime controllers that retune compound parameters between frames.
//!
//! Split equalizers move the sort-first or sort-last partition of a compound
//! based on the previous frame's timing; the remaining controllers handle
//! tile distribution, dynamic resolution, swap smoothing and monitoring.
//!
//! Damping is the fraction of each computed move that is *not* applied:
//! 0 jumps straight to the balanced position, 1 freezes the splits.

mod dfr;
mod framerate;
mod monitor;
mod split;
mod tile;

pub use dfr::DfrState;
pub use framerate::{framerate_delay, FramerateEqualizer};
pub use monitor::{monitor_transform, MonitorTransform};
pub use split::{Axis, LoadGrid, SplitNode, SplitTree};
pub use tile::{assign_tiles, assign_tiles_from, TileAssignment};
