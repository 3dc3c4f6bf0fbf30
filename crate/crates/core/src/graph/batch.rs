use super::{EventGraph, Topology};
use crate::error::{Error, Result};

/// Disjoint union of event graphs with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBatch {
    pub width: u16,
    pub height: u16,
    pub topo: Topology,
    pub features: Vec<f64>,
    pub feature_dim: usize,
    pub labels: Vec<usize>,
    node_offsets: Vec<usize>,
    edge_offsets: Vec<usize>,
}

pub fn batch_graphs(graphs: &[&EventGraph], labels: &[usize]) -> Result<GraphBatch> {
    let first = graphs
        .first()
        .ok_or_else(|| Error::Empty("cannot batch zero graphs".into()))?;
    if labels.len() != graphs.len() {
        return Err(Error::shape(
            "batch_graphs",
            format!("{} graphs, {} labels", graphs.len(), labels.len()),
        ));
    }
    let dim = first.feature_dim();
    let mut topo = Topology {
        pos: Vec::new(),
        edges: Vec::new(),
        pseudo: Vec::new(),
        membership: Vec::new(),
        num_graphs: graphs.len(),
    };
    let mut features = Vec::new();
    let (mut node_offsets, mut edge_offsets) = (vec![0], vec![0]);
    let (mut width, mut height) = (0u16, 0u16);
    for (gi, g) in graphs.iter().enumerate() {
        if g.feature_dim() != dim {
            return Err(Error::shape(
                "batch_graphs",
                format!("graph {gi} has {} feature channels, expected {dim}", g.feature_dim()),
            ));
        }
        width = width.max(g.width());
        height = height.max(g.height());
        let off = topo.pos.len() as u32;
        topo.pos.extend_from_slice(g.nodes());
        topo.membership.extend(std::iter::repeat(gi as u32).take(g.num_nodes()));
        topo.edges.extend(g.edges().iter().map(|e| [e[0] + off, e[1] + off]));
        topo.pseudo.extend_from_slice(g.pseudo());
        features.extend_from_slice(g.features());
        node_offsets.push(topo.pos.len());
        edge_offsets.push(topo.edges.len());
    }
    Ok(GraphBatch {
        width,
        height,
        topo,
        features,
        feature_dim: dim,
        labels: labels.to_vec(),
        node_offsets,
        edge_offsets,
    })
}

impl GraphBatch {
    pub fn num_graphs(&self) -> usize {
        self.topo.num_graphs
    }

    /// Splits the batch back into its member graphs.
    pub fn unbatch(&self) -> Vec<EventGraph> {
        (0..self.num_graphs())
            .map(|g| {
                let (n0, n1) = (self.node_offsets[g], self.node_offsets[g + 1]);
                let (e0, e1) = (self.edge_offsets[g], self.edge_offsets[g + 1]);
                let edges = self.topo.edges[e0..e1]
                    .iter()
                    .map(|e| [e[0] - n0 as u32, e[1] - n0 as u32])
                    .collect();
                EventGraph::from_parts(
                    self.width,
                    self.height,
                    self.topo.pos[n0..n1].to_vec(),
                    self.features[n0 * self.feature_dim..n1 * self.feature_dim].to_vec(),
                    self.feature_dim,
                    edges,
                )
                .expect("batched parts are consistent")
            })
            .collect()
    }
}
