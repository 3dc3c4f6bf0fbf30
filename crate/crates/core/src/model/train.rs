use std::sync::mpsc::sync_channel;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::{Adam, AdamConfig, LrSchedule};
use super::data::{prepare_sample, sample_rng, Dataset, PipelineConfig, Sample};
use super::network::Network;
use super::spec::ModelSpec;
use crate::autodiff::{Real, Tape};
use crate::complexity::GraphStats;
use crate::error::{Error, Result};
use crate::graph::{batch_graphs, EventGraph, GraphBatch};
use crate::nn::{pool_topology, Session};

/// Random-stream selector for evaluation passes.
const EVAL_STREAM: u64 = u64::MAX;
/// Sample-id namespace for per-epoch shuffles and per-step dropout masks.
const SHUFFLE_ID: u64 = u64::MAX;
const DROPOUT_ID: u64 = u64::MAX - 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub schedule: LrSchedule,
    pub batch: usize,
    pub seed: u64,
    /// Preprocessing threads; 1 runs everything on the calling thread.
    pub workers: usize,
    pub pipeline: PipelineConfig,
    pub adam: AdamConfig,
    /// Copied into the report so a run can be matched to its configuration.
    pub config_hash: String,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 150,
            schedule: LrSchedule {
                base: 1e-3,
                milestones: vec![60, 110],
                gamma: 0.1,
            },
            batch: 64,
            seed: 0,
            workers: 1,
            pipeline: PipelineConfig::default(),
            adam: AdamConfig::default(),
            config_hash: String::new(),
        }
    }
}

/// One line of the metrics log. Wall-clock time is deliberately absent so
/// logs of identical runs compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub final_test_acc: Option<f64>,
    pub wall_clock_s: f64,
    pub config_hash: String,
    pub seed: u64,
}

/// Preprocesses `order` in chunks of `batch` and hands each batch (with
/// the dataset indices it holds) to `f`. With more than one worker,
/// batches are built ahead on a thread pool and passed through a bounded
/// queue; the result is identical to serial execution because every
/// sample's randomness comes from [`sample_rng`].
#[allow(clippy::too_many_arguments)]
pub fn for_each_batch<F>(
    samples: &[Sample],
    order: &[usize],
    batch: usize,
    cfg: &PipelineConfig,
    seed: u64,
    epoch: Option<u64>,
    workers: usize,
    mut f: F,
) -> Result<()>
where
    F: FnMut(GraphBatch, &[usize]) -> Result<()>,
{
    if batch == 0 {
        return Err(Error::config("batch", "must be at least 1"));
    }
    let train = epoch.is_some();
    let stream = epoch.unwrap_or(EVAL_STREAM);
    let prep = |&i: &usize| -> Result<EventGraph> {
        let s = &samples[i];
        let mut rng = sample_rng(seed, s.id, stream);
        prepare_sample(&s.data, cfg, train, &mut rng)
            .map_err(|e| Error::Malformed(format!("{}: {e}", s.path.display())))
    };
    let assemble = |graphs: Vec<EventGraph>, chunk: &[usize]| -> Result<GraphBatch> {
        let refs: Vec<&EventGraph> = graphs.iter().collect();
        let labels: Vec<usize> = chunk.iter().map(|&i| samples[i].label).collect();
        batch_graphs(&refs, &labels)
    };
    if workers <= 1 {
        for chunk in order.chunks(batch) {
            let graphs = chunk.iter().map(prep).collect::<Result<Vec<_>>>()?;
            f(assemble(graphs, chunk)?, chunk)?;
        }
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    std::thread::scope(|scope| {
        let (tx, rx) = sync_channel(2);
        let (pool, prep, assemble) = (&pool, &prep, &assemble);
        scope.spawn(move || {
            for chunk in order.chunks(batch) {
                let built = pool
                    .install(|| chunk.par_iter().map(prep).collect::<Result<Vec<_>>>())
                    .and_then(|g| assemble(g, chunk));
                if tx.send((built, chunk)).is_err() {
                    break;
                }
            }
        });
        for (built, chunk) in rx {
            f(built?, chunk)?;
        }
        Ok(())
    })
}

fn argmax<T: Real>(row: &[T]) -> usize {
    let mut best = 0;
    for (j, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = j;
        }
    }
    best
}

/// Predicted class of every sample, in input order. Evaluation windows and
/// sampling depend only on `seed` and the sample id.
pub fn predict<T: Real>(
    net: &Network<T>,
    samples: &[Sample],
    cfg: &PipelineConfig,
    seed: u64,
    batch: usize,
    workers: usize,
) -> Result<Vec<usize>> {
    let order: Vec<usize> = (0..samples.len()).collect();
    let mut preds = Vec::with_capacity(samples.len());
    for_each_batch(samples, &order, batch, cfg, seed, None, workers, |b, _| {
        let mut tape = Tape::new();
        let mut s = Session::new(&mut tape, &net.store, false);
        let logits = net.forward(&mut s, &b, 0)?;
        let q = net.spec.classes;
        preds.extend(s.tape.value(logits).data().chunks(q).map(argmax));
        Ok(())
    })?;
    Ok(preds)
}

/// Top-1 accuracy on `samples`.
pub fn evaluate<T: Real>(
    net: &Network<T>,
    samples: &[Sample],
    cfg: &PipelineConfig,
    seed: u64,
    batch: usize,
    workers: usize,
) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("no samples to evaluate".into()));
    }
    let preds = predict(net, samples, cfg, seed, batch, workers)?;
    let correct = preds.iter().zip(samples).filter(|(p, s)| **p == s.label).count();
    Ok(correct as f64 / samples.len() as f64)
}

/// Trains `net` on `data.train`, evaluating on `data.test` after every
/// epoch. `on_epoch` sees each epoch's metrics as soon as they exist.
pub fn train<T: Real>(
    net: &mut Network<T>,
    data: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochMetrics) -> Result<()>,
) -> Result<TrainReport> {
    if data.train.is_empty() {
        return Err(Error::Empty("training set is empty".into()));
    }
    if let Some(s) = data.train.iter().chain(&data.test).find(|s| s.label >= net.spec.classes) {
        return Err(Error::config(
            "classes",
            format!("sample {} has label {} but the model has {} classes", s.path.display(), s.label, net.spec.classes),
        ));
    }
    cfg.pipeline.validate()?;
    let started = Instant::now();
    let mut adam = Adam::new(cfg.adam);
    let mut history = Vec::with_capacity(cfg.epochs);
    let q = net.spec.classes;
    for epoch in 0..cfg.epochs {
        let lr = cfg.schedule.lr_at(epoch);
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        order.shuffle(&mut sample_rng(cfg.seed, SHUFFLE_ID, epoch as u64));
        let (mut loss_sum, mut correct, mut step) = (0.0, 0usize, 0u64);
        let ep = epoch as u64;
        for_each_batch(&data.train, &order, cfg.batch, &cfg.pipeline, cfg.seed, Some(ep), cfg.workers, |b, chunk| {
            let dropout_seed = sample_rng(cfg.seed, DROPOUT_ID - step, ep).gen();
            let mut tape = Tape::new();
            let mut s = Session::new(&mut tape, &net.store, true);
            let logits = net.forward(&mut s, &b, dropout_seed)?;
            let loss = s.tape.softmax_cross_entropy(logits, &b.labels)?;
            let lv = s.tape.value(loss).item().to_f64_lossy();
            if !lv.is_finite() {
                let ids: Vec<String> = chunk.iter().map(|&i| data.train[i].path.display().to_string()).collect();
                return Err(Error::Numeric(format!(
                    "loss {lv} at epoch {epoch} step {step} (lr {lr}); batch samples: {}",
                    ids.join(", ")
                )));
            }
            correct += s
                .tape
                .value(logits)
                .data()
                .chunks(q)
                .zip(&b.labels)
                .filter(|(row, &y)| argmax(row) == y)
                .count();
            loss_sum += lv * chunk.len() as f64;
            let grads = s.tape.backward(loss)?;
            let param_grads = s.param_grads(&grads);
            let stats = s.take_updates();
            drop(s);
            adam.update(&mut net.store, &param_grads, lr);
            net.store.apply_updates(stats);
            step += 1;
            Ok(())
        })?;
        let n = data.train.len() as f64;
        let test_acc = if data.test.is_empty() {
            None
        } else {
            Some(evaluate(net, &data.test, &cfg.pipeline, cfg.seed, cfg.batch, cfg.workers)?)
        };
        let m = EpochMetrics {
            epoch,
            lr,
            train_loss: loss_sum / n,
            train_acc: correct as f64 / n,
            test_acc,
        };
        on_epoch(&m)?;
        history.push(m);
    }
    Ok(TrainReport {
        final_test_acc: history.last().and_then(|m| m.test_acc),
        epochs: history,
        wall_clock_s: started.elapsed().as_secs_f64(),
        config_hash: cfg.config_hash.clone(),
        seed: cfg.seed,
    })
}

/// Mean node and edge counts of the graph entering each convolution stage,
/// over the evaluation graphs of the first `count` samples.
pub fn measure_stats(
    spec: &ModelSpec,
    samples: &[Sample],
    cfg: &PipelineConfig,
    seed: u64,
    count: usize,
) -> Result<Vec<GraphStats>> {
    let used = &samples[..count.min(samples.len())];
    if used.is_empty() {
        return Err(Error::Empty("no samples to measure graph statistics on".into()));
    }
    let pools = spec.pool_specs();
    let stages = spec.channels.len();
    let mut sums = vec![(0u64, 0u64); stages];
    let graphs: Vec<EventGraph> = used
        .par_iter()
        .map(|s| prepare_sample(&s.data, cfg, false, &mut sample_rng(seed, s.id, EVAL_STREAM)))
        .collect::<Result<_>>()?;
    for g in &graphs {
        let mut topo = g.topology().clone();
        for (s, sum) in sums.iter_mut().enumerate() {
            sum.0 += topo.num_nodes() as u64;
            sum.1 += topo.num_edges() as u64;
            if s + 1 < stages {
                topo = pool_topology(&topo, &pools[s]).0;
            }
        }
    }
    let n = used.len() as u64;
    Ok(sums
        .into_iter()
        .map(|(nodes, edges)| GraphStats {
            n_node: (nodes + n / 2) / n,
            n_edge: (edges + n / 2) / n,
        })
        .collect())
}
