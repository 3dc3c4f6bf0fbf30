//! Spline-kernel graph convolution.
//!
//! For node `i` with in-neighbours `N(i)`:
//!
//! ```text
//! out(i)[o] = 1/|N(i)| * sum_{j in N(i)} sum_l f(j)[l] * sum_p w[p, l, o] * B_p(u(j, i)) + b[o]
//! ```
//!
//! `B_p` is the tensor-product B-spline basis. Only `(m + 1)^2` of the
//! `k1 * k2` basis functions are non-zero per edge, so the aggregation is a
//! sparse map `f -> Z` with `Z[i, p * C_in + l]` followed by one dense
//! product `Z W`. A node without in-neighbours outputs the bias.

use std::sync::Arc;

use rand::Rng;

use super::basis::kernel_basis;
use super::params::{ParamId, ParamStore, Session};
use crate::autodiff::{Real, ScatterEntry, ScatterPlan, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplineKernelSpec {
    pub degree: usize,
    pub kernel_size: [usize; 2],
    /// Adds an `i -> i` edge per node (pseudo-coordinate of zero offset).
    pub self_loops: bool,
}

impl SplineKernelSpec {
    pub fn new(degree: usize, kernel_size: usize) -> Self {
        Self {
            degree,
            kernel_size: [kernel_size; 2],
            self_loops: false,
        }
    }

    pub fn control_points(&self) -> usize {
        self.kernel_size[0] * self.kernel_size[1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree == 0 {
            return Err(Error::config("degree", "must be at least 1"));
        }
        for &k in &self.kernel_size {
            if k != 1 && k <= self.degree {
                return Err(Error::config(
                    "kernel_size",
                    format!("{k} control points cannot carry degree {}", self.degree),
                ));
            }
        }
        Ok(())
    }
}

/// Sparse aggregation plan for one topology and kernel. Also returns how
/// many pseudo-coordinates had to be clamped into `[0, 1]`.
pub fn spline_plan<T: Real>(topo: &Topology, spec: &SplineKernelSpec) -> (ScatterPlan<T>, usize) {
    let n = topo.num_nodes();
    let mut edges: Vec<([u32; 2], [f64; 2])> = topo
        .edges
        .iter()
        .copied()
        .zip(topo.pseudo.iter().copied())
        .collect();
    if spec.self_loops {
        // A zero offset normalizes to 0, or to 0.5 when the graph has no
        // extent in that component (its maximum edge then maps to exactly 1).
        let mut has_extent = vec![[false; 2]; topo.num_graphs];
        for (e, u) in topo.edges.iter().zip(&topo.pseudo) {
            let g = topo.membership[e[0] as usize] as usize;
            for c in 0..2 {
                has_extent[g][c] |= u[c] == 1.0;
            }
        }
        for i in 0..n {
            let g = topo.membership[i] as usize;
            let u = [0, 1].map(|c| if has_extent[g][c] { 0.0 } else { 0.5 });
            edges.push(([i as u32, i as u32], u));
        }
    }
    let mut deg = vec![0usize; n];
    for (e, _) in &edges {
        deg[e[1] as usize] += 1;
    }
    let mut clamped = 0;
    let mut entries = Vec::with_capacity(edges.len() * (spec.degree + 1).pow(2));
    for (e, u) in &edges {
        let (terms, c) = kernel_basis(*u, spec.degree, spec.kernel_size);
        clamped += usize::from(c);
        let norm = 1.0 / deg[e[1] as usize] as f64;
        for (p, w) in terms {
            entries.push(ScatterEntry {
                dst: e[1],
                src: e[0],
                block: p as u32,
                coef: T::from_f64_lossy(w * norm),
            });
        }
    }
    let plan = ScatterPlan {
        n_in: n,
        n_out: n,
        blocks: spec.control_points(),
        entries,
    };
    (plan, clamped)
}

/// A convolution layer: weight `[k1 * k2, C_in, C_out]`, bias `[C_out]`.
#[derive(Debug, Clone)]
pub struct SplineConv {
    pub spec: SplineKernelSpec,
    pub in_ch: usize,
    pub out_ch: usize,
    pub weight: ParamId,
    pub bias: ParamId,
}

impl SplineConv {
    /// Registers a layer with weights uniform in
    /// `+-sqrt(6 / (C_in (m+1)^2 + C_out))` and zero bias.
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        spec: SplineKernelSpec,
        in_ch: usize,
        out_ch: usize,
        rng: &mut R,
    ) -> Self {
        let active = if spec.control_points() == 1 {
            1
        } else {
            (spec.degree + 1).pow(2)
        };
        let bound = (6.0 / (in_ch * active + out_ch) as f64).sqrt();
        let shape = [spec.control_points(), in_ch, out_ch];
        let w = Tensor::from_fn(&shape, |_| T::from_f64_lossy(rng.gen_range(-bound..=bound)));
        let weight = store.add(format!("{name}.weight"), w, true);
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[out_ch]), true);
        Self {
            spec,
            in_ch,
            out_ch,
            weight,
            bias,
        }
    }

    pub fn forward<T: Real>(&self, s: &mut Session<'_, T>, x: Var, topo: &Topology) -> Result<Var> {
        let (n, c) = s.tape.value(x).dims2("spline_conv")?;
        if c != self.in_ch || n != topo.num_nodes() {
            return Err(Error::shape(
                "spline_conv",
                format!(
                    "features [{n}, {c}] for {} nodes and {} input channels",
                    topo.num_nodes(),
                    self.in_ch
                ),
            ));
        }
        let (plan, _) = spline_plan::<T>(topo, &self.spec);
        let z = s.tape.scatter(x, Arc::new(plan))?;
        let w = s.param(self.weight);
        let w = s
            .tape
            .reshape(w, &[self.spec.control_points() * self.in_ch, self.out_ch])?;
        let y = s.tape.matmul(z, w)?;
        let b = s.param(self.bias);
        s.tape.add(y, b)
    }
}
