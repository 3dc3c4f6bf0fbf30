//! Analytic FLOP and parameter counts for conventional and graph layers.
//!
//! All counts are exact integers; only the summary fields of a
//! [`FlopsReport`] are converted to GFLOPs and MB (4 bytes per parameter,
//! `2^20` bytes per MB). Batch normalization, pooling and activations are
//! not counted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelSpec;

/// FLOPs of a dense `K x K` convolution over an `H x W` output map:
/// `2 H W (C_in K^2 + 1) C_out`.
pub fn conv2d_flops(h: u64, w: u64, c_in: u64, k: u64, c_out: u64) -> u64 {
    2 * h * w * (c_in * k * k + 1) * c_out
}

/// Node and edge count of the graph a layer runs on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphStats {
    pub n_node: u64,
    pub n_edge: u64,
}

/// FLOPs of a spline graph convolution with `(m+1)^d` active basis functions
/// per edge:
/// `N_edge (m+1)^d (3 C_in C_out + 7 d) + (N_edge + N_node) C_out`.
pub fn graph_conv_flops(stats: GraphStats, m: u64, d: u32, c_in: u64, c_out: u64) -> u64 {
    graph_conv_flops_active(stats, (m + 1).pow(d), d, c_in, c_out)
}

/// As [`graph_conv_flops`] with the active basis count given directly
/// (1 for a kernel-size-1 layer).
pub fn graph_conv_flops_active(stats: GraphStats, active: u64, d: u32, c_in: u64, c_out: u64) -> u64 {
    stats.n_edge * active * (3 * c_in * c_out + 7 * u64::from(d)) + (stats.n_edge + stats.n_node) * c_out
}

/// `(2 I - 1) O`; zero for an empty input.
pub fn fc_flops(i: u64, o: u64) -> u64 {
    (2 * i).saturating_sub(1) * o
}

/// `(C_in K_eff + 1) C_out` where `K_eff` is `K^2` for a dense kernel or
/// `k1 k2` for a spline kernel.
pub fn conv_params(c_in: u64, k_eff: u64, c_out: u64) -> u64 {
    (c_in * k_eff + 1) * c_out
}

/// `(C_in + 1) C_out`.
pub fn fc_params(c_in: u64, c_out: u64) -> u64 {
    (c_in + 1) * c_out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCost {
    pub name: String,
    pub flops: u64,
    pub params: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlopsReport {
    pub preset: String,
    pub layers: Vec<LayerCost>,
    pub total_flops: u64,
    pub total_params: u64,
    pub gflops: f64,
    pub size_mb: f64,
    /// `"<GFLOPs> GFLOPs / <MB> MB"` with two decimals each.
    pub summary: String,
}

impl FlopsReport {
    pub fn from_layers(preset: &str, layers: Vec<LayerCost>) -> Self {
        let total_flops = layers.iter().map(|l| l.flops).sum();
        let total_params: u64 = layers.iter().map(|l| l.params).sum();
        let gflops = total_flops as f64 / 1e9;
        let size_mb = (total_params * 4) as f64 / f64::from(1u32 << 20);
        Self {
            preset: preset.to_string(),
            layers,
            total_flops,
            total_params,
            gflops,
            size_mb,
            summary: format!("{gflops:.2} GFLOPs / {size_mb:.2} MB"),
        }
    }
}

/// Costs of every layer of `spec`. `stats[s]` describes the graph seen by
/// convolution stage `s` (the input graph for stage 0, the graph after the
/// `s`-th pooling otherwise). Residual shortcuts count as kernel-size-1
/// graph convolutions.
pub fn model_report(spec: &ModelSpec, stats: &[GraphStats]) -> Result<FlopsReport> {
    let stages = spec.channels.len();
    if stats.len() < stages {
        return Err(Error::config(
            "stats",
            format!("{stages} convolution stages but statistics for {}", stats.len()),
        ));
    }
    let d = 2u32;
    let k_eff = (spec.kernel_size[0] * spec.kernel_size[1]) as u64;
    let active = if k_eff == 1 { 1 } else { (spec.degree as u64 + 1).pow(d) };
    let mut layers = Vec::new();
    let mut c_in = spec.in_channels as u64;
    for (s, &c) in spec.channels.iter().enumerate() {
        let c = c as u64;
        let residual = spec.residual && s > 0;
        let mains = if residual { spec.residual_convs.max(1) } else { 1 };
        let mut cin = c_in;
        for j in 0..mains {
            let name = if residual { format!("res{s}.main{j}") } else { format!("conv{s}") };
            layers.push(LayerCost {
                name,
                flops: graph_conv_flops_active(stats[s], active, d, cin, c),
                params: conv_params(cin, k_eff, c),
            });
            cin = c;
        }
        if residual {
            layers.push(LayerCost {
                name: format!("res{s}.shortcut"),
                flops: graph_conv_flops_active(stats[s], 1, d, c_in, c),
                params: conv_params(c_in, 1, c),
            });
        }
        c_in = c;
    }
    let flat = (spec.final_cells() as u64) * c_in;
    let hidden = spec.fc_hidden as u64;
    let q = spec.classes as u64;
    layers.push(LayerCost {
        name: "fc1".into(),
        flops: fc_flops(flat, hidden),
        params: fc_params(flat, hidden),
    });
    layers.push(LayerCost {
        name: "fc2".into(),
        flops: fc_flops(hidden, q),
        params: fc_params(hidden, q),
    });
    Ok(FlopsReport::from_layers(&spec.preset, layers))
}
