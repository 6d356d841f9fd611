use alloc::format;
use alloc::vec::Vec;

use crate::compound::{
    ChannelDecl, Compound, Config, EqualizerSpec, FrameSpec, PhasePeriod, PixelParam, Range, SplitParams,
    SubpixelParam, TileSpec, Viewport,
};

/// Standard decompositions of one destination over `n` nodes.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Mode {
    /// Fixed vertical strips.
    Static2D,
    Load2D,
    Tree2D,
    /// Fixed database ranges.
    Db,
    Pixel,
    Subpixel,
    Tiles,
    /// Whole frames round robin.
    DPlex,
}

impl Mode {
    pub const ALL: [Mode; 8] = [
        Mode::Static2D,
        Mode::Load2D,
        Mode::Tree2D,
        Mode::Db,
        Mode::Pixel,
        Mode::Subpixel,
        Mode::Tiles,
        Mode::DPlex,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Static2D => "2d-static",
            Mode::Load2D => "2d-load",
            Mode::Tree2D => "2d-tree",
            Mode::Db => "db",
            Mode::Pixel => "pixel",
            Mode::Subpixel => "subpixel",
            Mode::Tiles => "tiles",
            Mode::DPlex => "dplex",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }
}

pub fn node_name(i: usize) -> alloc::string::String {
    format!("node{i}")
}

/// Config with one compound: `node0` is the destination and every node,
/// the destination included, renders one child.
pub fn mode_config(mode: Mode, nodes: usize, tile_size: (u32, u32)) -> Config {
    let n = nodes.max(1);
    let mut root = Compound::leaf(&node_name(0));
    let split = SplitParams::default();
    match mode {
        Mode::Load2D => root.equalizers.push(EqualizerSpec::Load(split)),
        Mode::Tree2D => root.equalizers.push(EqualizerSpec::Tree(split)),
        Mode::DPlex => root.equalizers.push(EqualizerSpec::Framerate),
        Mode::Tiles => {
            root.output_tiles = Some(TileSpec {
                name: "queue".into(),
                size: tile_size,
            })
        }
        _ => {}
    }
    for i in 0..n {
        let (lo, hi) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
        let mut c = Compound::leaf(&node_name(i));
        match mode {
            Mode::Static2D => c.viewport = Viewport { x: lo, y: 0.0, w: hi - lo, h: 1.0 },
            Mode::Db => c.range = Range { lo, hi },
            Mode::Pixel => c.pixel = PixelParam::new(i as u32, 0, n as u32, 1).expect("valid"),
            Mode::Subpixel => c.subpixel = SubpixelParam::new(i as u32, n as u32).expect("valid"),
            Mode::Tiles => c.input_tiles = Some("queue".into()),
            Mode::DPlex => c.phase = PhasePeriod::new(i as u32, n as u32).expect("valid"),
            Mode::Load2D | Mode::Tree2D => {}
        }
        c.output_frames.push(FrameSpec::default());
        root.input_frames.push(FrameSpec {
            name: Some(format!("frame.{}", node_name(i))),
            texture: false,
        });
        root.children.push(c);
    }
    Config {
        channels: (0..n)
            .map(|i| ChannelDecl {
                name: node_name(i),
                node: Some(node_name(i)),
                size: None,
            })
            .collect::<Vec<_>>(),
        compounds: alloc::vec![root],
        ..Config::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compound::{parse_config, print_config};

    #[test]
    fn all_modes_validate_and_round_trip() {
        for mode in Mode::ALL {
            for n in [1, 2, 5] {
                let cfg = mode_config(mode, n, (16, 16));
                cfg.validate().unwrap_or_else(|e| panic!("{mode:?} {n}: {e}"));
                let back = parse_config(&print_config(&cfg)).unwrap().config;
                assert_eq!(back, cfg, "{mode:?}");
                assert_eq!(Mode::from_name(mode.name()), Some(mode));
            }
        }
    }

    #[test]
    fn dplex_latency_covers_period() {
        assert_eq!(mode_config(Mode::DPlex, 3, (64, 64)).effective_latency(), 3);
        assert_eq!(mode_config(Mode::Static2D, 3, (64, 64)).effective_latency(), 1);
    }
}
