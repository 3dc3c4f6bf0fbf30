//! Fixed-size spatial cluster pooling.
//!
//! Nodes are binned into `cluster_w x cluster_h` cells of a grid covering
//! `extent_w x extent_h`; each non-empty cell becomes one node at the mean
//! member position, with the channelwise max or mean of member features.
//! Cells are linked when any member edge crossed between them.

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::autodiff::{Real, Tape, Var};
use crate::error::{Error, Result};
use crate::graph::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Max,
    Avg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolSpec {
    pub cluster_w: usize,
    pub cluster_h: usize,
    pub extent_w: usize,
    pub extent_h: usize,
    pub mode: PoolMode,
}

impl PoolSpec {
    /// Cells per row and per column: `ceil(W' / s_w)`, `ceil(H' / s_h)`.
    pub fn grid(&self) -> (usize, usize) {
        (self.extent_w.div_ceil(self.cluster_w), self.extent_h.div_ceil(self.cluster_h))
    }

    pub fn cells(&self) -> usize {
        let (gx, gy) = self.grid();
        gx * gy
    }

    /// Row-major cell index of a position; positions outside the extent
    /// fall in the nearest border cell.
    pub fn cell_of(&self, x: f64, y: f64) -> usize {
        let (gx, gy) = self.grid();
        let cx = ((x / self.cluster_w as f64).floor().max(0.0) as usize).min(gx - 1);
        let cy = ((y / self.cluster_h as f64).floor().max(0.0) as usize).min(gy - 1);
        cy * gx + cx
    }

    /// Centre of cell `c` in input coordinates.
    pub fn cell_centre(&self, c: usize) -> [f64; 2] {
        let (gx, _) = self.grid();
        let (cx, cy) = (c % gx, c / gx);
        [
            (cx as f64 + 0.5) * self.cluster_w as f64,
            (cy as f64 + 0.5) * self.cluster_h as f64,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        if self.cluster_w == 0 || self.cluster_h == 0 {
            return Err(Error::config("cluster", "cluster size must be at least 1"));
        }
        if self.extent_w == 0 || self.extent_h == 0 {
            return Err(Error::config("cluster", "grid extent must be positive"));
        }
        Ok(())
    }
}

/// Batch-wide cell id of every node: `graph * cells + cell`.
pub fn grid_slots(topo: &Topology, spec: &PoolSpec) -> Vec<u32> {
    let cells = spec.cells();
    topo.pos
        .iter()
        .zip(&topo.membership)
        .map(|(p, &g)| (g as usize * cells + spec.cell_of(p[0], p[1])) as u32)
        .collect()
}

/// Coarse topology of `topo` under `spec` and the output node of every
/// input node. Output nodes are ordered by graph, then row-major cell.
pub fn pool_topology(topo: &Topology, spec: &PoolSpec) -> (Topology, Vec<u32>) {
    let slots = grid_slots(topo, spec);
    let mut occupied: Vec<u32> = slots.clone();
    occupied.sort_unstable();
    occupied.dedup();
    let cluster: Vec<u32> = slots
        .iter()
        .map(|s| occupied.binary_search(s).unwrap() as u32)
        .collect();
    let m = occupied.len();

    let mut sum = vec![[0.0f64; 3]; m];
    let mut count = vec![0usize; m];
    for (p, &c) in topo.pos.iter().zip(&cluster) {
        let c = c as usize;
        for d in 0..3 {
            sum[c][d] += p[d];
        }
        count[c] += 1;
    }
    let pos = sum
        .iter()
        .zip(&count)
        .map(|(s, &k)| s.map(|v| v / k as f64))
        .collect();
    let cells = spec.cells();
    let membership = occupied.iter().map(|&s| (s as usize / cells) as u32).collect();
    let edges: BTreeSet<[u32; 2]> = topo
        .edges
        .iter()
        .map(|e| [cluster[e[0] as usize], cluster[e[1] as usize]])
        .filter(|e| e[0] != e[1])
        .collect();
    let mut out = Topology {
        pos,
        edges: edges.into_iter().collect(),
        pseudo: Vec::new(),
        membership,
        num_graphs: topo.num_graphs,
    };
    out.recompute_pseudo();
    (out, cluster)
}

/// Pools `x: [N, C]` on `topo`, returning the coarse topology and features.
pub fn graph_pool<T: Real>(
    tape: &mut Tape<T>,
    topo: &Topology,
    x: Var,
    spec: &PoolSpec,
) -> Result<(Topology, Var)> {
    spec.validate()?;
    let (n, _) = tape.value(x).dims2("graph_pool")?;
    if n != topo.num_nodes() {
        return Err(Error::shape("graph_pool", format!("{n} feature rows for {} nodes", topo.num_nodes())));
    }
    let (out, cluster) = pool_topology(topo, spec);
    let m = out.num_nodes();
    let cluster = Arc::new(cluster);
    let y = match spec.mode {
        PoolMode::Max => tape.segment_max(x, cluster, m)?,
        PoolMode::Avg => tape.segment_mean(x, cluster, m)?,
    };
    Ok((out, y))
}

/// Places every node's features in its grid cell, giving `[B, P * C]` with
/// `P = spec.cells()` and zeros for empty cells. Expects at most one node
/// per cell (the output of pooling with the same `spec`); colliding nodes
/// would be summed.
pub fn pad_to_grid<T: Real>(tape: &mut Tape<T>, topo: &Topology, x: Var, spec: &PoolSpec) -> Result<Var> {
    spec.validate()?;
    let (n, c) = tape.value(x).dims2("pad_to_grid")?;
    if n != topo.num_nodes() {
        return Err(Error::shape("pad_to_grid", format!("{n} feature rows for {} nodes", topo.num_nodes())));
    }
    let p = spec.cells();
    let slots = Arc::new(grid_slots(topo, spec));
    let padded = tape.segment_sum(x, slots, topo.num_graphs * p)?;
    tape.reshape(padded, &[topo.num_graphs, p * c])
}
