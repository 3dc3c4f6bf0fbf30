use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::spec::ModelSpec;
use crate::autodiff::{Real, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::{GraphBatch, Topology};
use crate::nn::{graph_pool, pad_to_grid, ConvBlock, Linear, ParamStore, PoolSpec, ResidualBlock, Session};

#[derive(Debug, Clone)]
enum Stage {
    Conv(ConvBlock),
    Res(ResidualBlock),
}

/// Parameters and layer wiring of a [`ModelSpec`].
#[derive(Debug, Clone)]
pub struct Network<T: Real = f64> {
    pub spec: ModelSpec,
    pub store: ParamStore<T>,
    stages: Vec<Stage>,
    pools: Vec<PoolSpec>,
    fc1: Linear,
    fc2: Linear,
}

const LOGIT_INIT_SCALE: f64 = 0.1;

impl<T: Real> Network<T> {
    /// Fresh network with weights drawn from `seed`.
    pub fn new(spec: &ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let kernel = spec.kernel();
        let mut stages = Vec::with_capacity(spec.channels.len());
        let mut c_in = spec.in_channels;
        for (s, &c) in spec.channels.iter().enumerate() {
            let stage = if spec.residual && s > 0 {
                Stage::Res(ResidualBlock::new(
                    &mut store,
                    &format!("res{s}"),
                    kernel,
                    c_in,
                    c,
                    spec.residual_convs,
                    &mut rng,
                )?)
            } else {
                Stage::Conv(ConvBlock::new(&mut store, &format!("conv{s}"), kernel, c_in, c, &mut rng)?)
            };
            stages.push(stage);
            c_in = c;
        }
        let fc1 = Linear::new(&mut store, "fc1", spec.flat_dim(), spec.fc_hidden, &mut rng);
        let fc2 = Linear::new(&mut store, "fc2", spec.fc_hidden, spec.classes, &mut rng);
        // Near-uniform initial predictions: the logit layer starts at a tenth
        // of the usual scale, so the first loss sits close to ln(classes).
        let w = store.get_mut(fc2.weight);
        w.value = w.value.map(|v| v * T::from_f64_lossy(LOGIT_INIT_SCALE));
        Ok(Self {
            spec: spec.clone(),
            store,
            stages,
            pools: spec.pool_specs(),
            fc1,
            fc2,
        })
    }

    /// Logits `[B, classes]`. Dropout after the first FC layer is active
    /// only in training sessions and draws its mask from `dropout_seed`.
    pub fn forward(&self, s: &mut Session<'_, T>, batch: &GraphBatch, dropout_seed: u64) -> Result<Var> {
        if batch.feature_dim != self.spec.in_channels {
            return Err(Error::shape(
                "network",
                format!("{} input features, model expects {}", batch.feature_dim, self.spec.in_channels),
            ));
        }
        let n = batch.topo.num_nodes();
        let feats = batch.features.iter().map(|&v| T::from_f64_lossy(v)).collect();
        let mut x = s.tape.constant(Tensor::from_vec(vec![n, batch.feature_dim], feats)?);
        let mut topo: Topology = batch.topo.clone();
        for (stage, pool) in self.stages.iter().zip(&self.pools) {
            x = match stage {
                Stage::Conv(b) => b.forward(s, x, &topo)?,
                Stage::Res(b) => b.forward(s, x, &topo)?,
            };
            let (coarse, y) = graph_pool(s.tape, &topo, x, pool)?;
            topo = coarse;
            x = y;
        }
        let last = self.pools.last().expect("validated spec has a pooling stage");
        let flat = pad_to_grid(s.tape, &topo, x, last)?;
        let h = self.fc1.forward(s, flat)?;
        let h = s.tape.relu(h)?;
        let h = s.tape.dropout(h, self.spec.dropout, s.train, dropout_seed)?;
        self.fc2.forward(s, h)
    }

    /// Trainable parameters excluding normalization statistics.
    pub fn num_trainable(&self) -> usize {
        self.store.trainable_count()
    }

    /// Scalars of the shortcut convolutions (zero for plain networks).
    pub fn shortcut_params(&self) -> usize {
        self.store
            .iter()
            .filter(|(_, p)| p.name.contains(".shortcut."))
            .map(|(_, p)| p.value.len())
            .sum()
    }
}
