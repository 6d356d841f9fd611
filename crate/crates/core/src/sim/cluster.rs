use alloc::vec::Vec;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// How a node's capacity varies during a run.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Variation {
    Fixed,
    /// One random slowdown per node, held for the whole run.
    PerNode,
    /// A fresh random slowdown every frame.
    PerFrame,
}

impl Variation {
    pub fn name(self) -> &'static str {
        match self {
            Variation::Fixed => "none",
            Variation::PerNode => "per-node",
            Variation::PerFrame => "per-frame",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [Variation::Fixed, Variation::PerNode, Variation::PerFrame]
            .into_iter()
            .find(|v| v.name() == s)
    }
}

/// Compute resources of one node, 1.0 being the reference machine.
///
/// Random variation divides the base capacity by an integer drawn from 1..=7,
/// the way a renderer slows down when it takes 1 to 7 samples per fragment.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct NodeCapacity {
    pub base: f64,
    pub variation: Variation,
    pub seed: u64,
}

impl NodeCapacity {
    pub fn fixed(base: f64) -> Self {
        NodeCapacity {
            base,
            variation: Variation::Fixed,
            seed: 0,
        }
    }

    pub fn divisor(&self, node: usize, frame: u64) -> u32 {
        let key = match self.variation {
            Variation::Fixed => return 1,
            Variation::PerNode => (node as u64) << 32,
            Variation::PerFrame => ((node as u64) << 32) ^ frame.wrapping_mul(0x9e37_79b9_7f4a_7c15),
        };
        ChaCha8Rng::seed_from_u64(self.seed ^ key).random_range(1..=7)
    }

    pub fn effective(&self, node: usize, frame: u64) -> f64 {
        self.base / self.divisor(node, frame) as f64
    }
}

/// Simulated render cluster.
#[derive(Clone, PartialEq, Debug)]
pub struct Cluster {
    pub nodes: Vec<NodeCapacity>,
    /// Interconnect bandwidth; 1.25e6 bytes per ms is 10 Gb/s.
    pub link_bytes_per_ms: f64,
    /// Per-pixel cost of merging a received image.
    pub merge_ms_per_mpix: f64,
    /// Setup cost of every task or tile, at unit capacity.
    pub task_overhead_ms: f64,
    /// Tiles a consumer holds locally, including the one being rendered.
    pub tile_prefetch: usize,
}

impl Cluster {
    pub fn with_capacities(caps: &[f64]) -> Self {
        Cluster {
            nodes: caps.iter().map(|&c| NodeCapacity::fixed(c)).collect(),
            link_bytes_per_ms: 1.25e6,
            merge_ms_per_mpix: 0.5,
            task_overhead_ms: 0.005,
            tile_prefetch: 1,
        }
    }

    pub fn uniform(nodes: usize) -> Self {
        Self::with_capacities(&alloc::vec![1.0; nodes])
    }

    /// `nodes` reference machines varying as given.
    pub fn varying(nodes: usize, variation: Variation, seed: u64) -> Self {
        let mut c = Self::uniform(nodes);
        for n in &mut c.nodes {
            n.variation = variation;
            n.seed = seed;
        }
        c
    }

    pub fn capacity(&self, node: usize, frame: u64) -> f64 {
        self.nodes[node].effective(node, frame)
    }
}
