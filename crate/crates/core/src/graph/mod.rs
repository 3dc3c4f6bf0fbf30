//! Spatio-temporal radius graphs built from event streams.

mod augment;
mod batch;
mod io;

pub use augment::{augment_mirror, augment_rotate, augment_scale, random_augment, AugmentConfig};
pub use batch::{batch_graphs, GraphBatch};
pub use io::{read_graph, read_graph_from, write_graph, write_graph_to, GRAPH_MAGIC, GRAPH_VERSION};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::events::EventStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphConfig {
    /// Radius threshold on the weighted distance.
    pub radius: f64,
    /// Weight of squared pixel offsets.
    pub alpha: f64,
    /// Weight of squared time offsets (per us^2).
    pub beta: f64,
    /// Maximum out-degree.
    pub dmax: usize,
}

impl Default for GraphConfig {
    fn default() -> Self {
        Self {
            radius: 3.0,
            alpha: 1.0,
            beta: 0.5e-5,
            dmax: 32,
        }
    }
}

impl GraphConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(Error::config("radius", "must be positive and finite"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::config("alpha", "must be non-negative"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::config("beta", "must be non-negative"));
        }
        if self.alpha + self.beta <= 0.0 {
            return Err(Error::config("alpha", "alpha + beta must be positive"));
        }
        if self.dmax == 0 {
            return Err(Error::config("dmax", "must be at least 1"));
        }
        Ok(())
    }

    /// Weighted spatio-temporal distance between two `(x, y, t)` points.
    pub fn distance(&self, a: [f64; 3], b: [f64; 3]) -> f64 {
        let (dx, dy, dt) = (a[0] - b[0], a[1] - b[1], a[2] - b[2]);
        (self.alpha * (dx * dx + dy * dy) + self.beta * dt * dt).sqrt()
    }
}

/// Node positions, directed edges and per-edge pseudo-coordinates for one
/// graph or a disjoint union of graphs.
///
/// Edges are `[src, dst]`; a node aggregates over its in-edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub pos: Vec<[f64; 3]>,
    pub edges: Vec<[u32; 2]>,
    pub pseudo: Vec<[f64; 2]>,
    /// Graph index of every node.
    pub membership: Vec<u32>,
    pub num_graphs: usize,
}

impl Topology {
    pub fn num_nodes(&self) -> usize {
        self.pos.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Recomputes `(|dx|, |dy|)` per edge, scaled by the per-graph maximum of
    /// each component. A component whose maximum is zero maps to 0.5.
    pub fn recompute_pseudo(&mut self) {
        self.pseudo = normalized_pseudo(&self.pos, &self.edges, &self.membership, self.num_graphs);
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes()];
        for e in &self.edges {
            deg[e[1] as usize] += 1;
        }
        deg
    }
}

pub(crate) fn normalized_pseudo(
    pos: &[[f64; 3]],
    edges: &[[u32; 2]],
    membership: &[u32],
    num_graphs: usize,
) -> Vec<[f64; 2]> {
    let raw: Vec<[f64; 2]> = edges
        .iter()
        .map(|&[s, d]| {
            let (a, b) = (pos[s as usize], pos[d as usize]);
            [(a[0] - b[0]).abs(), (a[1] - b[1]).abs()]
        })
        .collect();
    let mut max = vec![[0.0f64; 2]; num_graphs];
    for (e, u) in edges.iter().zip(&raw) {
        let g = membership[e[0] as usize] as usize;
        max[g][0] = max[g][0].max(u[0]);
        max[g][1] = max[g][1].max(u[1]);
    }
    edges
        .iter()
        .zip(&raw)
        .map(|(e, u)| {
            let m = max[membership[e[0] as usize] as usize];
            [0, 1].map(|c| if m[c] > 0.0 { (u[c] / m[c]).min(1.0) } else { 0.5 })
        })
        .collect()
}

/// A single event graph: node `i` is event `i` of the source stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EventGraph {
    width: u16,
    height: u16,
    topo: Topology,
    features: Vec<f64>,
    feature_dim: usize,
}

impl EventGraph {
    /// Assembles a graph from parts, recomputing pseudo-coordinates.
    pub fn from_parts(
        width: u16,
        height: u16,
        pos: Vec<[f64; 3]>,
        features: Vec<f64>,
        feature_dim: usize,
        edges: Vec<[u32; 2]>,
    ) -> Result<Self> {
        let n = pos.len();
        if feature_dim == 0 || features.len() != n * feature_dim {
            return Err(Error::shape(
                "EventGraph",
                format!("{} feature values for {n} nodes x {feature_dim}", features.len()),
            ));
        }
        if let Some(e) = edges.iter().find(|e| e[0] as usize >= n || e[1] as usize >= n) {
            return Err(Error::OutOfRange(format!("edge {e:?} with {n} nodes")));
        }
        let mut topo = Topology {
            pos,
            edges,
            pseudo: Vec::new(),
            membership: vec![0; n],
            num_graphs: 1,
        };
        topo.recompute_pseudo();
        Ok(Self {
            width,
            height,
            topo,
            features,
            feature_dim,
        })
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.topo.pos
    }

    pub fn edges(&self) -> &[[u32; 2]] {
        &self.topo.edges
    }

    pub fn pseudo(&self) -> &[[f64; 2]] {
        &self.topo.pseudo
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_nodes(&self) -> usize {
        self.topo.pos.len()
    }

    pub fn num_edges(&self) -> usize {
        self.topo.edges.len()
    }

    /// Same graph with node positions replaced; pseudo-coordinates follow.
    pub fn with_positions(&self, pos: Vec<[f64; 3]>) -> EventGraph {
        assert_eq!(pos.len(), self.num_nodes());
        let mut g = self.clone();
        g.topo.pos = pos;
        g.topo.recompute_pseudo();
        g
    }
}

/// Builds the radius graph of `stream` with polarity as the single input
/// feature.
pub fn build_radius_graph(stream: &EventStream, cfg: &GraphConfig) -> Result<EventGraph> {
    if stream.is_empty() {
        return Err(Error::Empty("cannot build a graph from an empty stream".into()));
    }
    let pos: Vec<[f64; 3]> = stream
        .events()
        .iter()
        .map(|e| [f64::from(e.x), f64::from(e.y), e.t as f64])
        .collect();
    let features = stream.events().iter().map(|e| f64::from(e.p.sign())).collect();
    build_from_points(stream.width(), stream.height(), pos, features, cfg)
}

/// Radius graph over arbitrary real-valued points (sorted by time).
pub fn build_from_points(
    width: u16,
    height: u16,
    pos: Vec<[f64; 3]>,
    features: Vec<f64>,
    cfg: &GraphConfig,
) -> Result<EventGraph> {
    cfg.validate()?;
    if pos.is_empty() {
        return Err(Error::Empty("cannot build a graph without nodes".into()));
    }
    let edges = radius_edges(&pos, cfg);
    EventGraph::from_parts(width, height, pos, features, 1, edges)
}

/// Spatial hash over (x, y) with cells of edge `R / sqrt(alpha)`; members of
/// each cell are kept in time order so a time band can be cut by binary
/// search.
struct BucketIndex {
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl BucketIndex {
    fn new(pos: &[[f64; 3]], cfg: &GraphConfig) -> Self {
        let cell = if cfg.alpha > 0.0 {
            // Slight inflation keeps exact-radius pairs in adjacent cells
            // after rounding.
            cfg.radius / cfg.alpha.sqrt() * (1.0 + 1e-9)
        } else {
            f64::INFINITY
        };
        let mut order: Vec<usize> = (0..pos.len()).collect();
        order.sort_by(|&a, &b| pos[a][2].total_cmp(&pos[b][2]).then(a.cmp(&b)));
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let mut idx = Self { cell, buckets: HashMap::new() };
        for i in order {
            buckets.entry(idx.key(pos[i])).or_default().push(i);
        }
        idx.buckets = buckets;
        idx
    }

    fn key(&self, p: [f64; 3]) -> (i64, i64) {
        if self.cell.is_finite() {
            ((p[0] / self.cell).floor() as i64, (p[1] / self.cell).floor() as i64)
        } else {
            (0, 0)
        }
    }
}

fn radius_edges(pos: &[[f64; 3]], cfg: &GraphConfig) -> Vec<[u32; 2]> {
    let index = BucketIndex::new(pos, cfg);
    let t_reach = if cfg.beta > 0.0 {
        cfg.radius / cfg.beta.sqrt() * (1.0 + 1e-9)
    } else {
        f64::INFINITY
    };
    let mut edges = Vec::new();
    let mut cand: Vec<(f64, f64, usize)> = Vec::new();
    for (i, &p) in pos.iter().enumerate() {
        cand.clear();
        let (kx, ky) = index.key(p);
        let reach: i64 = if index.cell.is_finite() { 1 } else { 0 };
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                let Some(bucket) = index.buckets.get(&(kx + dx, ky + dy)) else {
                    continue;
                };
                let lo = bucket.partition_point(|&j| pos[j][2] < p[2] - t_reach);
                for &j in &bucket[lo..] {
                    let q = pos[j];
                    if q[2] > p[2] + t_reach {
                        break;
                    }
                    if j == i {
                        continue;
                    }
                    let d = cfg.distance(p, q);
                    if d <= cfg.radius {
                        cand.push((d, (p[2] - q[2]).abs(), j));
                    }
                }
            }
        }
        if cand.len() > cfg.dmax {
            cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
            cand.truncate(cfg.dmax);
        }
        let mut dst: Vec<usize> = cand.iter().map(|c| c.2).collect();
        dst.sort_unstable();
        edges.extend(dst.into_iter().map(|j| [i as u32, j as u32]));
    }
    edges
}
