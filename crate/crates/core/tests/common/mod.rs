#![allow(dead_code)]

pub mod gradcheck;
pub mod oracles;

use nvsgraph::autodiff::{Tape, Tensor, Var};
use nvsgraph::events::{Event, EventStream, Polarity};
use nvsgraph::graph::Topology;
use nvsgraph::nn::{ParamStore, Session};
use rand::Rng;

/// Random events on a `w x h` sensor within `t_max` microseconds.
pub fn random_stream<R: Rng>(rng: &mut R, n: usize, w: u16, h: u16, t_max: u64) -> EventStream {
    let events = (0..n)
        .map(|_| {
            let p = if rng.gen_bool(0.5) { Polarity::On } else { Polarity::Off };
            Event::new(rng.gen_range(0..w), rng.gen_range(0..h), rng.gen_range(0..=t_max), p)
        })
        .collect();
    EventStream::new(w, h, events).unwrap()
}

/// Random directed graph (no self-loops, no duplicate edges) over `n`
/// nodes split into `graphs` consecutive blocks, edges staying inside a
/// block.
pub fn random_topology<R: Rng>(rng: &mut R, n: usize, graphs: usize, extent: f64, edge_prob: f64) -> Topology {
    let membership: Vec<u32> = (0..n).map(|i| (i * graphs / n.max(1)) as u32).collect();
    let pos = (0..n)
        .map(|_| [rng.gen_range(0.0..extent), rng.gen_range(0.0..extent), rng.gen_range(0.0..1000.0)])
        .collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && membership[i] == membership[j] && rng.gen_bool(edge_prob) {
                edges.push([i as u32, j as u32]);
            }
        }
    }
    let mut t = Topology {
        pos,
        edges,
        pseudo: Vec::new(),
        membership,
        num_graphs: graphs,
    };
    t.recompute_pseudo();
    t
}

pub fn random_tensor<R: Rng>(rng: &mut R, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Gradients smaller than this are compared absolutely (relative to it),
/// keeping finite-difference round-off from dominating near-zero entries.
pub const GRAD_FLOOR: f64 = 1e-4;

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_err(a: f64, n: f64, floor: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(floor)
}

/// Largest relative error between analytic and central-difference
/// gradients of a scalar function of `inputs`.
pub fn check_input_grads(
    inputs: &[Tensor],
    f: &dyn Fn(&mut Tape, &[Var]) -> Var,
    h: f64,
) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let loss = f(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();
    let eval = |xs: &[Tensor]| {
        let mut tape = Tape::new();
        let vars: Vec<Var> = xs.iter().map(|t| tape.leaf(t.clone())).collect();
        let l = f(&mut tape, &vars);
        tape.value(l).item()
    };
    let mut worst = 0.0f64;
    for (k, x) in inputs.iter().enumerate() {
        let g = grads.get_or_zeros(vars[k], x.shape());
        for i in 0..x.len() {
            let mut xs = inputs.to_vec();
            xs[k].data_mut()[i] += h;
            let up = eval(&xs);
            xs[k].data_mut()[i] -= 2.0 * h;
            let down = eval(&xs);
            let num = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(g.data()[i], num, GRAD_FLOOR));
        }
    }
    worst
}

/// Same check over every trainable parameter of `store`, with the loss
/// built in a training session.
pub fn check_param_grads(
    store: &ParamStore,
    f: &dyn Fn(&mut Session<'_>) -> Var,
    h: f64,
) -> f64 {
    let mut tape = Tape::new();
    let mut s = Session::new(&mut tape, store, true);
    let loss = f(&mut s);
    let grads = s.tape.backward(loss).unwrap();
    let analytic = s.param_grads(&grads);
    let eval = |st: &ParamStore| {
        let mut tape = Tape::new();
        let mut s = Session::new(&mut tape, st, true);
        let l = f(&mut s);
        s.tape.value(l).item()
    };
    let mut worst = 0.0f64;
    for (id, g) in analytic {
        for i in 0..g.len() {
            let mut st = store.clone();
            st.get_mut(id).value.data_mut()[i] += h;
            let up = eval(&st);
            st.get_mut(id).value.data_mut()[i] -= 2.0 * h;
            let down = eval(&st);
            let num = (up - down) / (2.0 * h);
            worst = worst.max(rel_err(g.data()[i], num, GRAD_FLOOR));
        }
    }
    worst
}

/// Scalar projection `sum(y * w)` with fixed pseudo-random weights, so
/// every output element influences the loss differently.
pub fn project(tape: &mut Tape, y: Var) -> Var {
    let shape = tape.shape(y).to_vec();
    let w = Tensor::from_fn(&shape, |i| ((i as f64 + 1.0) * 0.7548776662).fract() - 0.5);
    let w = tape.constant(w);
    let p = tape.mul(y, w).unwrap();
    tape.sum(p).unwrap()
}
