use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

/// Outcome of distributing a tile queue over polling sources.
#[derive(Clone, PartialEq, Debug)]
pub struct TileAssignment {
    /// Tile indices per source, in the order they were rendered.
    pub per_source: Vec<Vec<usize>>,
    /// Time each source finished its last tile.
    pub finish: Vec<f64>,
    /// Largest number of tiles any source held locally at once.
    pub max_local: usize,
}

impl TileAssignment {
    pub fn makespan(&self) -> f64 {
        self.finish.iter().copied().fold(0.0, f64::max)
    }
}

/// First-in first-out polling of a shared tile queue.
///
/// Every source keeps up to `prefetch` tiles locally, including the one it is
/// rendering, and refills as soon as it starts on one. A tile with cost `c`
/// takes `c / speed` on a source. Faster sources drain their local queue
/// sooner and therefore poll more often, which balances the load without any
/// explicit model.
pub fn assign_tiles(costs: &[f64], speeds: &[f64], prefetch: usize) -> TileAssignment {
    assign_tiles_from(costs, speeds, &vec![0.0; speeds.len()], prefetch)
}

/// [`assign_tiles`] with sources becoming free at different times.
pub fn assign_tiles_from(costs: &[f64], speeds: &[f64], starts: &[f64], prefetch: usize) -> TileAssignment {
    assert!(!speeds.is_empty(), "at least one source");
    assert_eq!(starts.len(), speeds.len(), "one start per source");
    assert!(speeds.iter().all(|s| *s > 0.0), "speeds must be positive");
    let window = prefetch.max(1);
    let n = speeds.len();
    let mut next = 0usize;
    let mut local: Vec<VecDeque<usize>> = vec![VecDeque::new(); n];
    let mut clock = starts.to_vec();
    let mut per_source = vec![Vec::new(); n];
    let mut max_local = 0;

    // initial polls, round robin in source order
    for _ in 0..window {
        for q in local.iter_mut() {
            if next < costs.len() {
                q.push_back(next);
                next += 1;
            }
        }
    }
    loop {
        let Some(s) = (0..n)
            .filter(|&s| !local[s].is_empty())
            .min_by(|&a, &b| clock[a].total_cmp(&clock[b]).then(a.cmp(&b)))
        else {
            break;
        };
        max_local = max_local.max(local[s].len());
        let tile = local[s].pop_front().expect("non-empty");
        if next < costs.len() {
            local[s].push_back(next);
            next += 1;
        }
        clock[s] += costs[tile] / speeds[s];
        per_source[s].push(tile);
    }
    TileAssignment {
        per_source,
        finish: clock,
        max_local,
    }
}
