//! Decomposition scalability over simulated clusters.

use eqsim_core::sim::{mode_config, run_frames, Cluster, Mode, RunOptions, Scenario, SceneKind, SceneSpec, SimError, Variation};

use super::{fmt_f64, Table};

#[derive(Debug, Clone)]
pub struct ScaleBench {
    pub modes: Vec<Mode>,
    pub nodes: Vec<usize>,
    pub heterogeneity: Vec<Variation>,
    pub seeds: Vec<u64>,
    pub scene: SceneKind,
    pub objects: usize,
    pub frames: u64,
    pub size: (u32, u32),
    pub tile: (u32, u32),
}

impl Default for ScaleBench {
    fn default() -> Self {
        Self {
            modes: Mode::ALL.to_vec(),
            nodes: (1..=8).collect(),
            heterogeneity: vec![Variation::Fixed],
            seeds: vec![1],
            scene: SceneKind::Skewed,
            objects: 8,
            frames: 200,
            size: (1280, 720),
            tile: (64, 64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleRow {
    pub mode: Mode,
    pub nodes: usize,
    pub heterogeneity: Variation,
    pub seed: u64,
    pub total_seconds: f64,
}

/// One row per cell of the matrix, in mode, node, heterogeneity, seed
/// order. Deterministic for given inputs.
pub fn run(b: &ScaleBench) -> Result<Vec<ScaleRow>, SimError> {
    let mut rows = Vec::new();
    for &mode in &b.modes {
        for &nodes in &b.nodes {
            for &het in &b.heterogeneity {
                for &seed in &b.seeds {
                    let scenario =
                        Scenario { frames: b.frames, size: b.size, scene: SceneSpec::new(b.scene, b.objects, seed) };
                    let config = mode_config(mode, nodes.max(1), b.tile);
                    let cluster = Cluster::varying(nodes.max(1), het, seed);
                    let report = run_frames(&scenario, &config, &cluster, &RunOptions::default())?;
                    rows.push(ScaleRow { mode, nodes, heterogeneity: het, seed, total_seconds: report.total_ms / 1e3 });
                }
            }
        }
    }
    Ok(rows)
}

pub fn table(rows: &[ScaleRow]) -> Table {
    let mut t = Table::new(&["mode", "nodes", "heterogeneity", "seed", "totalSeconds"]);
    for r in rows {
        t.push(vec![
            r.mode.name().to_string(),
            r.nodes.to_string(),
            r.heterogeneity.name().to_string(),
            r.seed.to_string(),
            fmt_f64(r.total_seconds),
        ]);
    }
    t
}
