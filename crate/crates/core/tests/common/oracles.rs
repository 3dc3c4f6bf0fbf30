//! Deliberately naive reference implementations.

use std::collections::{BTreeMap, BTreeSet};

use nvsgraph::autodiff::{Tape, Tensor};
use nvsgraph::events::{Event, EventStream};
use nvsgraph::graph::{GraphConfig, Topology};
use nvsgraph::nn::{graph_pool, ParamStore, PoolMode, PoolSpec, Session, SplineConv, SplineKernelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::random_topology;

/// All-pairs radius graph with the out-degree cap applied per source.
pub fn radius_edges(pos: &[[f64; 3]], cfg: &GraphConfig) -> Vec<[u32; 2]> {
    let mut edges = Vec::new();
    for i in 0..pos.len() {
        let mut near: Vec<(f64, f64, usize)> = Vec::new();
        for j in 0..pos.len() {
            if i == j {
                continue;
            }
            let dx = pos[i][0] - pos[j][0];
            let dy = pos[i][1] - pos[j][1];
            let dt = pos[i][2] - pos[j][2];
            let d = (cfg.alpha * (dx * dx + dy * dy) + cfg.beta * dt * dt).sqrt();
            if d <= cfg.radius {
                near.push((d, dt.abs(), j));
            }
        }
        near.sort_by(|a, b| a.partial_cmp(b).unwrap());
        near.truncate(cfg.dmax);
        let mut js: Vec<usize> = near.into_iter().map(|n| n.2).collect();
        js.sort();
        edges.extend(js.into_iter().map(|j| [i as u32, j as u32]));
    }
    edges
}

/// Recursive octree bisection; octants in ascending order (bit 0 = x,
/// bit 1 = y, bit 2 = t), one uniformly drawn event per leaf.
pub fn sample(stream: &EventStream, k: usize, seed: u64) -> Vec<Event> {
    let ev = stream.events();
    if ev.is_empty() {
        return Vec::new();
    }
    let c = |e: &Event| [e.x as u64, e.y as u64, e.t];
    let mut lo = [u64::MAX; 3];
    let mut hi = [0u64; 3];
    for e in ev {
        for d in 0..3 {
            lo[d] = lo[d].min(c(e)[d]);
            hi[d] = hi[d].max(c(e)[d]);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::new();
    let all: Vec<usize> = (0..ev.len()).collect();
    recurse(ev, &all, lo, hi, k, &mut rng, &mut picked);
    picked.sort();
    picked.into_iter().map(|i| ev[i]).collect()
}

fn recurse(
    ev: &[Event],
    members: &[usize],
    lo: [u64; 3],
    hi: [u64; 3],
    k: usize,
    rng: &mut ChaCha8Rng,
    picked: &mut Vec<usize>,
) {
    let min_cell = (0..3).all(|d| lo[d] == hi[d]);
    if members.len() <= k || min_cell {
        let i = if members.len() == 1 { 0 } else { rng.gen_range(0..members.len()) };
        picked.push(members[i]);
        return;
    }
    let mid: Vec<u64> = (0..3).map(|d| (lo[d] + hi[d]) / 2).collect();
    for oct in 0..8usize {
        let (mut clo, mut chi) = (lo, hi);
        for d in 0..3 {
            if lo[d] == hi[d] {
                if oct >> d & 1 == 1 {
                    clo[d] = 1;
                    chi[d] = 0;
                }
            } else if oct >> d & 1 == 1 {
                clo[d] = mid[d] + 1;
            } else {
                chi[d] = mid[d];
            }
        }
        let inside: Vec<usize> = members
            .iter()
            .copied()
            .filter(|&i| {
                let p = [ev[i].x as u64, ev[i].y as u64, ev[i].t];
                (0..3).all(|d| clo[d] <= p[d] && p[d] <= chi[d])
            })
            .collect();
        if !inside.is_empty() {
            recurse(ev, &inside, clo, chi, k, rng, picked);
        }
    }
}

/// Open uniform linear B-spline basis function `i` of `k` on [0, 1].
fn hat(u: f64, i: usize, k: usize) -> f64 {
    if k == 1 {
        return 1.0;
    }
    (1.0 - (u * (k - 1) as f64 - i as f64).abs()).max(0.0)
}

/// `out(i) = mean over in-edges (j -> i) of sum_l sum_p f(j)[l] w[p,l,o] B_p(u) + b`,
/// evaluated with a full loop over every control point.
#[allow(clippy::too_many_arguments)]
pub fn spline_conv(
    topo: &Topology,
    x: &[f64],
    c_in: usize,
    weight: &[f64],
    bias: &[f64],
    c_out: usize,
    k: [usize; 2],
) -> Vec<f64> {
    let n = topo.pos.len();
    let mut out = vec![0.0; n * c_out];
    for i in 0..n {
        let inc: Vec<usize> = (0..topo.edges.len()).filter(|&e| topo.edges[e][1] as usize == i).collect();
        for o in 0..c_out {
            let mut acc = 0.0;
            for &e in &inc {
                let j = topo.edges[e][0] as usize;
                let u = topo.pseudo[e];
                for a in 0..k[0] {
                    for b in 0..k[1] {
                        let basis = hat(u[0], a, k[0]) * hat(u[1], b, k[1]);
                        let p = a * k[1] + b;
                        for l in 0..c_in {
                            acc += x[j * c_in + l] * weight[(p * c_in + l) * c_out + o] * basis;
                        }
                    }
                }
            }
            let mean = if inc.is_empty() { 0.0 } else { acc / inc.len() as f64 };
            out[i * c_out + o] = mean + bias[o];
        }
    }
    out
}

pub struct Pooled {
    pub pos: Vec<[f64; 3]>,
    pub membership: Vec<u32>,
    pub edges: Vec<[u32; 2]>,
    pub features: Vec<f64>,
}

/// Groups nodes by `(graph, cell row, cell column)` with a map.
pub fn pool(topo: &Topology, x: &[f64], c: usize, cluster: [usize; 2], extent: [usize; 2], mode: PoolMode) -> Pooled {
    let gx = extent[0].div_ceil(cluster[0]) as i64;
    let gy = extent[1].div_ceil(cluster[1]) as i64;
    let key = |i: usize| {
        let p = topo.pos[i];
        let cx = ((p[0] / cluster[0] as f64).floor() as i64).clamp(0, gx - 1);
        let cy = ((p[1] / cluster[1] as f64).floor() as i64).clamp(0, gy - 1);
        (topo.membership[i], cy, cx)
    };
    let mut groups: BTreeMap<(u32, i64, i64), Vec<usize>> = BTreeMap::new();
    for i in 0..topo.pos.len() {
        groups.entry(key(i)).or_default().push(i);
    }
    let keys: Vec<_> = groups.keys().copied().collect();
    let index = |i: usize| keys.iter().position(|&k| k == key(i)).unwrap() as u32;
    let mut pooled = Pooled {
        pos: Vec::new(),
        membership: Vec::new(),
        edges: Vec::new(),
        features: Vec::new(),
    };
    for (k, members) in &groups {
        let m = members.len() as f64;
        let mut p = [0.0; 3];
        for &i in members {
            for d in 0..3 {
                p[d] += topo.pos[i][d];
            }
        }
        pooled.pos.push(p.map(|v| v / m));
        pooled.membership.push(k.0);
        for ch in 0..c {
            let vals = members.iter().map(|&i| x[i * c + ch]);
            pooled.features.push(match mode {
                PoolMode::Max => vals.fold(f64::NEG_INFINITY, f64::max),
                PoolMode::Avg => vals.sum::<f64>() / m,
            });
        }
    }
    let set: BTreeSet<[u32; 2]> = topo
        .edges
        .iter()
        .map(|e| [index(e[0] as usize), index(e[1] as usize)])
        .filter(|e| e[0] != e[1])
        .collect();
    pooled.edges = set.into_iter().collect();
    pooled
}

/// Largest absolute difference between the optimized spline convolution and
/// [`spline_conv`] over `cases` random graphs of at most 50 nodes.
pub fn spline_conv_worst(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for case in 0..cases {
        let n = rng.gen_range(1..=50);
        let graphs = rng.gen_range(1..=3).min(n);
        let topo = random_topology(&mut rng, n, graphs, 20.0, 0.1);
        let (c_in, c_out) = (rng.gen_range(1..4), rng.gen_range(1..4));
        let k = [rng.gen_range(2..7), rng.gen_range(2..7)];
        let spec = SplineKernelSpec { degree: 1, kernel_size: k, self_loops: false };
        let mut store = ParamStore::new();
        let conv = SplineConv::new(&mut store, "c", spec, c_in, c_out, &mut rng);
        store.get_mut(conv.bias).value = Tensor::from_fn(&[c_out], |i| i as f64 * 0.3 - 0.2 + case as f64 * 1e-3);
        let x = Tensor::from_fn(&[n, c_in], |_| rng.gen_range(-2.0..2.0));
        let mut tape = Tape::new();
        let mut s = Session::new(&mut tape, &store, false);
        let xv = s.tape.constant(x.clone());
        let y = conv.forward(&mut s, xv, &topo).unwrap();
        let want = spline_conv(
            &topo,
            x.data(),
            c_in,
            store.get(conv.weight).value.data(),
            store.get(conv.bias).value.data(),
            c_out,
            k,
        );
        let got = s.tape.value(y).data();
        if got.len() != want.len() {
            return f64::INFINITY;
        }
        for (a, b) in got.iter().zip(&want) {
            worst = worst.max((a - b).abs());
        }
    }
    worst
}

/// Compares the optimized pooling with [`pool`] over `cases` random graphs
/// of at most 50 nodes. Returns the largest feature difference, or infinity
/// if any coarse topology differs.
pub fn pool_worst(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let n = rng.gen_range(1..=50);
        let graphs = rng.gen_range(1..=3).min(n);
        let topo = random_topology(&mut rng, n, graphs, 34.0, 0.15);
        let c = rng.gen_range(1..4);
        let x = Tensor::from_fn(&[n, c], |_| rng.gen_range(-1.0..1.0));
        let mode = if rng.gen_bool(0.5) { PoolMode::Max } else { PoolMode::Avg };
        let spec = PoolSpec {
            cluster_w: rng.gen_range(1..12),
            cluster_h: rng.gen_range(1..12),
            extent_w: 34,
            extent_h: 34,
            mode,
        };
        let mut tape = Tape::new();
        let xv = tape.constant(x.clone());
        let (out, y) = graph_pool(&mut tape, &topo, xv, &spec).unwrap();
        let want = pool(&topo, x.data(), c, [spec.cluster_w, spec.cluster_h], [34, 34], mode);
        let got = tape.value(y).data();
        if out.pos != want.pos || out.membership != want.membership || out.edges != want.edges || got.len() != want.features.len() {
            return f64::INFINITY;
        }
        for (a, b) in got.iter().zip(&want.features) {
            // Max pooling copies values, so any difference there is a bug.
            let d = (a - b).abs();
            if mode == PoolMode::Max && d != 0.0 {
                return f64::INFINITY;
            }
            worst = worst.max(d);
        }
    }
    worst
}
