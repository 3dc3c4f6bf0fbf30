use rand::Rng;

use super::batchnorm::BatchNorm;
use super::conv::{SplineConv, SplineKernelSpec};
use super::params::{ParamStore, Session};
use crate::autodiff::{Real, Var};
use crate::error::Result;
use crate::graph::Topology;

/// `relu(bn(conv(x)))`.
#[derive(Debug, Clone)]
pub struct ConvBlock {
    pub conv: SplineConv,
    pub bn: BatchNorm,
}

impl ConvBlock {
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        spec: SplineKernelSpec,
        in_ch: usize,
        out_ch: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            conv: SplineConv::new(store, &format!("{name}.conv"), spec, in_ch, out_ch, rng),
            bn: BatchNorm::new(store, &format!("{name}.bn"), out_ch),
        })
    }

    pub fn forward<T: Real>(&self, s: &mut Session<'_, T>, x: Var, topo: &Topology) -> Result<Var> {
        let h = self.conv.forward(s, x, topo)?;
        let h = self.bn.forward(s, h)?;
        s.tape.relu(h)
    }
}

/// Residual unit: a main path of one or two `conv -> bn` stages (ReLU
/// between stages) plus a kernel-size-1 `conv -> bn` shortcut that matches
/// channel counts; the sum goes through a final ReLU.
#[derive(Debug, Clone)]
pub struct ResidualBlock {
    pub main: Vec<(SplineConv, BatchNorm)>,
    pub shortcut: (SplineConv, BatchNorm),
}

impl ResidualBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new<T: Real, R: Rng + ?Sized>(
        store: &mut ParamStore<T>,
        name: &str,
        spec: SplineKernelSpec,
        in_ch: usize,
        out_ch: usize,
        main_convs: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let mut main = Vec::with_capacity(main_convs);
        for i in 0..main_convs.max(1) {
            let cin = if i == 0 { in_ch } else { out_ch };
            let conv = SplineConv::new(store, &format!("{name}.main{i}.conv"), spec, cin, out_ch, rng);
            let bn = BatchNorm::new(store, &format!("{name}.main{i}.bn"), out_ch);
            main.push((conv, bn));
        }
        let unit = SplineKernelSpec {
            degree: spec.degree,
            kernel_size: [1, 1],
            self_loops: spec.self_loops,
        };
        let shortcut = (
            SplineConv::new(store, &format!("{name}.shortcut.conv"), unit, in_ch, out_ch, rng),
            BatchNorm::new(store, &format!("{name}.shortcut.bn"), out_ch),
        );
        Ok(Self { main, shortcut })
    }

    pub fn forward<T: Real>(&self, s: &mut Session<'_, T>, x: Var, topo: &Topology) -> Result<Var> {
        let mut h = x;
        for (i, (conv, bn)) in self.main.iter().enumerate() {
            if i > 0 {
                h = s.tape.relu(h)?;
            }
            h = conv.forward(s, h, topo)?;
            h = bn.forward(s, h)?;
        }
        let sc = self.shortcut.0.forward(s, x, topo)?;
        let sc = self.shortcut.1.forward(s, sc)?;
        let sum = s.tape.add(h, sc)?;
        s.tape.relu(sum)
    }
}
