//! Central-difference gradient checks shared by the gradient tests and the
//! acceptance report. Each check returns its worst relative error.

use std::sync::Arc;

use nvsgraph::autodiff::{Tape, Tensor, Var};
use nvsgraph::graph::{batch_graphs, build_from_points, EventGraph, GraphBatch, GraphConfig};
use nvsgraph::model::{ModelSpec, Network};
use nvsgraph::nn::{spline_plan, BatchNorm, Linear, ParamStore, ResidualBlock, SplineConv, SplineKernelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_input_grads, check_param_grads, project, random_tensor, random_topology};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;

type Check = (String, f64);

fn seg(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Arc<Vec<u32>> {
    Arc::new((0..n).map(|_| rng.gen_range(0..k) as u32).collect())
}

/// One check per differentiable tape operation.
pub fn op_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut out = Vec::new();
    let a = random_tensor(&mut rng, &[4, 3]);
    let b = random_tensor(&mut rng, &[3, 5]);
    let row = random_tensor(&mut rng, &[3]);
    let same = random_tensor(&mut rng, &[4, 3]);

    out.push((
        "matmul".into(),
        check_input_grads(&[a.clone(), b.clone()], &|t, v| {
            let y = t.matmul(v[0], v[1]).unwrap();
            project(t, y)
        }, STEP),
    ));
    out.push((
        "add (row broadcast)".into(),
        check_input_grads(&[a.clone(), row.clone()], &|t, v| {
            let y = t.add(v[0], v[1]).unwrap();
            project(t, y)
        }, STEP),
    ));
    out.push((
        "sub".into(),
        check_input_grads(&[a.clone(), same.clone()], &|t, v| {
            let y = t.sub(v[0], v[1]).unwrap();
            project(t, y)
        }, STEP),
    ));
    out.push((
        "mul".into(),
        check_input_grads(&[a.clone(), same.clone()], &|t, v| {
            let y = t.mul(v[0], v[1]).unwrap();
            project(t, y)
        }, STEP),
    ));
    out.push((
        "relu".into(),
        check_input_grads(&[a.clone()], &|t, v| {
            let y = t.relu(v[0]).unwrap();
            project(t, y)
        }, STEP),
    ));
    out.push((
        "scale".into(),
        check_input_grads(&[a.clone()], &|t, v| {
            let y = t.scale(v[0], -1.7).unwrap();
            project(t, y)
        }, STEP),
    ));
    out.push((
        "concat".into(),
        check_input_grads(&[a.clone(), random_tensor(&mut rng, &[4, 2])], &|t, v| {
            let y = t.concat(&[v[0], v[1]], 1).unwrap();
            project(t, y)
        }, STEP),
    ));
    let idx = Arc::new(vec![3usize, 0, 0, 2, 1, 3]);
    out.push((
        "gather".into(),
        check_input_grads(&[a.clone()], &|t, v| {
            let y = t.gather(v[0], idx.clone()).unwrap();
            project(t, y)
        }, STEP),
    ));
    let x = random_tensor(&mut rng, &[9, 3]);
    let s = seg(&mut rng, 9, 4);
    for (name, which) in [("segment_sum", 0), ("segment_mean", 1), ("segment_max", 2)] {
        let s = s.clone();
        out.push((
            name.into(),
            check_input_grads(&[x.clone()], &move |t, v| {
                let y = match which {
                    0 => t.segment_sum(v[0], s.clone(), 5),
                    1 => t.segment_mean(v[0], s.clone(), 5),
                    _ => t.segment_max(v[0], s.clone(), 5),
                }
                .unwrap();
                project(t, y)
            }, STEP),
        ));
    }
    out.push((
        "dropout".into(),
        check_input_grads(&[x.clone()], &|t, v| {
            let y = t.dropout(v[0], 0.4, true, 77).unwrap();
            project(t, y)
        }, STEP),
    ));
    out.push((
        "softmax cross-entropy".into(),
        check_input_grads(&[random_tensor(&mut rng, &[5, 4])], &|t, v| {
            t.softmax_cross_entropy(v[0], &[0, 3, 1, 1, 2]).unwrap()
        }, STEP),
    ));
    out.push((
        "reshape".into(),
        check_input_grads(&[a.clone()], &|t, v| {
            let y = t.reshape(v[0], &[2, 6]).unwrap();
            project(t, y)
        }, STEP),
    ));
    out.push((
        "sum".into(),
        check_input_grads(&[a.clone()], &|t, v| {
            let y = t.mul(v[0], v[0]).unwrap();
            t.sum(y).unwrap()
        }, STEP),
    ));
    let topo = random_topology(&mut rng, 12, 2, 10.0, 0.3);
    let (plan, _) = spline_plan::<f64>(&topo, &SplineKernelSpec::new(2, 4));
    let plan = Arc::new(plan);
    out.push((
        "scatter".into(),
        check_input_grads(&[random_tensor(&mut rng, &[12, 2])], &|t, v| {
            let y = t.scatter(v[0], plan.clone()).unwrap();
            project(t, y)
        }, STEP),
    ));
    let bn_in = [random_tensor(&mut rng, &[7, 3]), random_tensor(&mut rng, &[3]), random_tensor(&mut rng, &[3])];
    out.push((
        "batch_norm (batch statistics)".into(),
        check_input_grads(&bn_in, &|t, v| {
            let (y, _, _) = t.batch_norm(v[0], v[1], v[2], 1e-5, None).unwrap();
            project(t, y)
        }, STEP),
    ));
    let (rm, rv) = (vec![0.1, -0.2, 0.3], vec![0.5, 1.5, 0.9]);
    out.push((
        "batch_norm (running statistics)".into(),
        check_input_grads(&bn_in, &|t, v| {
            let (y, _, _) = t.batch_norm(v[0], v[1], v[2], 1e-5, Some((&rm, &rv))).unwrap();
            project(t, y)
        }, STEP),
    ));
    out
}

fn input_and_params(
    store: &ParamStore,
    x: &Tensor,
    f: &dyn Fn(&mut nvsgraph::nn::Session<'_>, Var) -> Var,
) -> f64 {
    let wrt_params = check_param_grads(store, &|s| {
        let xv = s.tape.constant(x.clone());
        let y = f(s, xv);
        project(s.tape, y)
    }, STEP);
    // Input gradients with the parameters frozen.
    let wrt_input = check_input_grads(std::slice::from_ref(x), &|t: &mut Tape, v| {
        let mut s = nvsgraph::nn::Session::new(t, store, true);
        let y = f(&mut s, v[0]);
        project(s.tape, y)
    }, STEP);
    wrt_params.max(wrt_input)
}

/// Layer-level checks on a random 20-node graph.
pub fn layer_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let topo = random_topology(&mut rng, 20, 1, 12.0, 0.2);
    let x = random_tensor(&mut rng, &[20, 3]);
    let mut out = Vec::new();

    for (degree, size) in [(1, 5), (2, 4), (3, 6)] {
        let mut store = ParamStore::new();
        let conv = SplineConv::new(&mut store, "c", SplineKernelSpec::new(degree, size), 3, 4, &mut rng);
        randomize(&mut store, &mut rng);
        let topo = topo.clone();
        out.push((
            format!("spline conv (degree {degree}, kernel {size})"),
            input_and_params(&store, &x, &|s, v| conv.forward(s, v, &topo).unwrap()),
        ));
    }
    let mut store = ParamStore::new();
    let bn = BatchNorm::new(&mut store, "bn", 3);
    randomize(&mut store, &mut rng);
    out.push(("batch norm layer".into(), input_and_params(&store, &x, &|s, v| bn.forward(s, v).unwrap())));

    let mut store = ParamStore::new();
    let fc = Linear::new(&mut store, "fc", 3, 2, &mut rng);
    randomize(&mut store, &mut rng);
    out.push(("fully connected".into(), input_and_params(&store, &x, &|s, v| fc.forward(s, v).unwrap())));

    for convs in [1, 2] {
        let mut store = ParamStore::new();
        let block = ResidualBlock::new(&mut store, "r", SplineKernelSpec::new(1, 5), 3, 4, convs, &mut rng).unwrap();
        randomize(&mut store, &mut rng);
        let topo = topo.clone();
        out.push((
            format!("residual block ({convs} main conv)"),
            input_and_params(&store, &x, &|s, v| block.forward(s, v, &topo).unwrap()),
        ));
    }
    out
}

/// Moves every trainable tensor off its initial value so zero biases and
/// unit scales do not hide errors.
fn randomize(store: &mut ParamStore, rng: &mut ChaCha8Rng) {
    let ids: Vec<_> = store.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
    for id in ids {
        for v in store.get_mut(id).value.data_mut() {
            *v += rng.gen_range(-0.5..0.5);
        }
    }
}

fn tiny_batch(rng: &mut ChaCha8Rng, w: u16, h: u16) -> GraphBatch {
    let cfg = GraphConfig {
        radius: 8.0,
        ..GraphConfig::default()
    };
    let graphs: Vec<EventGraph> = (0..2)
        .map(|_| {
            let n = rng.gen_range(15..=25);
            let mut pos: Vec<[f64; 3]> = (0..n)
                .map(|_| {
                    [
                        f64::from(rng.gen_range(0..w)),
                        f64::from(rng.gen_range(0..h)),
                        rng.gen_range(0.0..8.0),
                    ]
                })
                .collect();
            pos.sort_by(|a, b| a[2].total_cmp(&b[2]));
            let feats = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            build_from_points(w, h, pos, feats, &cfg).unwrap()
        })
        .collect();
    let refs: Vec<&EventGraph> = graphs.iter().collect();
    batch_graphs(&refs, &[0, 1]).unwrap()
}

/// End-to-end parameter gradients of every preset shrunk to at most four
/// channels, on a batch of two graphs with at most 25 nodes each.
pub fn preset_checks() -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    nvsgraph::model::PRESETS
        .iter()
        .map(|name| {
            let mut spec = ModelSpec::preset(name, 3, 34, 34).unwrap();
            spec.channels = if spec.channels.len() == 3 { vec![2, 3, 4] } else { vec![2, 2, 3, 4] };
            spec.fc_hidden = 5;
            let mut net = Network::<f64>::new(&spec, 5).unwrap();
            // Zero biases on an all-zero input sit exactly on a ReLU kink.
            randomize(&mut net.store, &mut rng);
            let batch = tiny_batch(&mut rng, 34, 34);
            let worst = check_param_grads(&net.store, &|s| {
                let logits = net.forward(s, &batch, 11).unwrap();
                s.tape.softmax_cross_entropy(logits, &batch.labels).unwrap()
            }, STEP);
            (format!("preset {name} (tiny)"), worst)
        })
        .collect()
}


