//! Property tests over randomized inputs.

mod common;

use common::random_topology;
use nvsgraph::autodiff::{Tape, Tensor};
use nvsgraph::events::{
    encode_nmnist_bin, extract_window, parse_nmnist_bin, read_portable_from, write_portable_to, Event, EventStream,
    Polarity,
};
use nvsgraph::graph::{build_radius_graph, read_graph_from, write_graph_to, GraphConfig};
use nvsgraph::nn::{
    graph_pool, kernel_basis, read_checkpoint_from, write_checkpoint_to, ParamStore, PoolMode, PoolSpec, Session,
    SplineConv, SplineKernelSpec,
};
use nvsgraph::sampling::{nonuniform_sample, SamplingConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn events(max_xy: u16, max_t: u64, max_n: usize) -> impl Strategy<Value = Vec<Event>> {
    prop::collection::vec(
        (0..max_xy, 0..max_xy, 0..=max_t, any::<bool>()).prop_map(|(x, y, t, on)| {
            Event::new(x, y, t, if on { Polarity::On } else { Polarity::Off })
        }),
        0..max_n,
    )
}

fn stream(max_xy: u16, max_t: u64, max_n: usize) -> impl Strategy<Value = EventStream> {
    events(max_xy, max_t, max_n).prop_map(move |e| EventStream::new(max_xy, max_xy, e).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn portable_round_trip(s in stream(40, 1 << 40, 200)) {
        let mut buf = Vec::new();
        write_portable_to(&s, &mut buf).unwrap();
        prop_assert_eq!(read_portable_from(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn nmnist_round_trip(s in stream(34, (1 << 23) - 1, 200)) {
        let raw = encode_nmnist_bin(s.events()).unwrap();
        prop_assert_eq!(raw.len(), 5 * s.len());
        prop_assert_eq!(parse_nmnist_bin(&raw).unwrap(), s);
    }

    #[test]
    fn adjacent_windows_partition(s in stream(16, 10_000, 200), cut in 1u64..5000, len in 1u64..5000) {
        let a = extract_window(&s, 0, cut).unwrap();
        let b = extract_window(&s, cut, len).unwrap();
        let rest = extract_window(&s, cut + len, u64::MAX / 2).unwrap();
        prop_assert_eq!(a.len() + b.len() + rest.len(), s.len());
        prop_assert!(b.len() <= s.len());
        prop_assert!(b.events().iter().all(|e| e.t < len));
    }

    #[test]
    fn sampling_is_a_shrinking_subset(s in stream(34, 50_000, 300), k in 1usize..10, seed in any::<u64>()) {
        let out = nonuniform_sample(&s, &SamplingConfig::new(k, seed).unwrap());
        prop_assert!(out.len() <= s.len());
        prop_assert!(out.events().iter().all(|e| s.events().contains(e)));
        prop_assert!(out.events().windows(2).all(|w| w[0].t <= w[1].t));
        let coarser = nonuniform_sample(&s, &SamplingConfig::new(k + 1, seed).unwrap());
        prop_assert!(coarser.len() <= out.len());
        prop_assert_eq!(nonuniform_sample(&s, &SamplingConfig::new(k, seed).unwrap()), out);
    }

    #[test]
    fn k1_keeps_distinct_events(s in stream(20, 10_000, 150), seed in any::<u64>()) {
        let mut ev = s.into_events();
        ev.sort_by_key(|e| (e.x, e.y, e.t));
        ev.dedup_by_key(|e| (e.x, e.y, e.t));
        let s = EventStream::new(20, 20, ev).unwrap();
        prop_assert_eq!(nonuniform_sample(&s, &SamplingConfig::new(1, seed).unwrap()), s);
    }

    #[test]
    fn graph_edges_respect_radius_and_degree(
        s in stream(34, 30_000, 250),
        radius in 0.5f64..6.0,
        alpha in 0.1f64..2.0,
        beta in 0.0f64..1e-4,
        dmax in 1usize..40,
    ) {
        prop_assume!(!s.is_empty());
        let cfg = GraphConfig { radius, alpha, beta, dmax };
        let g = build_radius_graph(&s, &cfg).unwrap();
        let mut out_deg = vec![0usize; g.num_nodes()];
        for e in g.edges() {
            prop_assert_ne!(e[0], e[1]);
            prop_assert!(cfg.distance(g.nodes()[e[0] as usize], g.nodes()[e[1] as usize]) <= radius);
            out_deg[e[0] as usize] += 1;
        }
        prop_assert!(out_deg.iter().all(|&d| d <= dmax));
        for u in g.pseudo() {
            prop_assert!((0.0..=1.0).contains(&u[0]) && (0.0..=1.0).contains(&u[1]));
        }
    }

    #[test]
    fn basis_partition_of_unity(u0 in 0.0f64..=1.0, u1 in 0.0f64..=1.0, k0 in 2usize..7, k1 in 2usize..7, m in 1usize..3) {
        prop_assume!(k0 > m && k1 > m);
        let (terms, clamped) = kernel_basis([u0, u1], m, [k0, k1]);
        prop_assert!(!clamped);
        prop_assert_eq!(terms.len(), (m + 1) * (m + 1));
        prop_assert!(terms.iter().all(|&(p, w)| p < k0 * k1 && w >= 0.0));
        let total: f64 = terms.iter().map(|t| t.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn conv_is_linear_and_permutation_invariant(seed in any::<u64>(), n in 1usize..30, a in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = random_topology(&mut rng, n, 1, 20.0, 0.2);
        let mut store = ParamStore::new();
        let conv = SplineConv::new(&mut store, "c", SplineKernelSpec::new(1, 5), 2, 3, &mut rng);
        let f = common::random_tensor(&mut rng, &[n, 2]);
        let g = common::random_tensor(&mut rng, &[n, 2]);
        let run = |topo: &nvsgraph::graph::Topology, x: &Tensor| {
            let mut tape = Tape::new();
            let mut s = Session::new(&mut tape, &store, false);
            let xv = s.tape.constant(x.clone());
            let y = conv.forward(&mut s, xv, topo).unwrap();
            s.tape.value(y).clone()
        };
        // Zero bias: conv(a f + g) = a conv(f) + conv(g).
        let mix = Tensor::from_fn(&[n, 2], |i| a * f.data()[i] + g.data()[i]);
        let (yf, yg, ym) = (run(&topo, &f), run(&topo, &g), run(&topo, &mix));
        for i in 0..ym.len() {
            prop_assert!((ym.data()[i] - (a * yf.data()[i] + yg.data()[i])).abs() < 1e-9);
        }
        // Relabel nodes by a reversal; outputs move with their nodes.
        let perm: Vec<usize> = (0..n).rev().collect();
        let mut pt = topo.clone();
        pt.pos = perm.iter().map(|&i| topo.pos[i]).collect();
        pt.edges = topo.edges.iter().map(|e| [perm[e[0] as usize] as u32, perm[e[1] as usize] as u32]).collect();
        pt.recompute_pseudo();
        let pf = Tensor::from_fn(&[n, 2], |k| f.data()[perm[k / 2] * 2 + k % 2]);
        let yp = run(&pt, &pf);
        for i in 0..n {
            for o in 0..3 {
                prop_assert!((yp.data()[i * 3 + o] - yf.data()[perm[i] * 3 + o]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn max_pool_dominates_avg_pool(seed in any::<u64>(), n in 1usize..40, cluster in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let topo = random_topology(&mut rng, n, 1, 34.0, 0.1);
        let x = Tensor::from_fn(&[n, 3], |i| ((i * 7919) % 13) as f64 * 0.25);
        let pooled = |mode| {
            let spec = PoolSpec { cluster_w: cluster, cluster_h: cluster, extent_w: 34, extent_h: 34, mode };
            let mut tape = Tape::new();
            let xv = tape.constant(x.clone());
            let (_, y) = graph_pool(&mut tape, &topo, xv, &spec).unwrap();
            tape.value(y).clone()
        };
        let (mx, av) = (pooled(PoolMode::Max), pooled(PoolMode::Avg));
        prop_assert!(mx.data().iter().zip(av.data()).all(|(m, a)| m >= a));
    }

    #[test]
    fn container_and_checkpoint_round_trips(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = common::random_stream(&mut rng, n, 34, 34, 20_000);
        let g = build_radius_graph(&s, &GraphConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_graph_to(&g, &mut buf).unwrap();
        prop_assert_eq!(read_graph_from(&mut buf.as_slice()).unwrap(), g);

        let mut store = ParamStore::new();
        SplineConv::new(&mut store, "c", SplineKernelSpec::new(1, 3), 2, 2, &mut rng);
        let mut buf = Vec::new();
        write_checkpoint_to(&store, "m", &mut buf).unwrap();
        prop_assert_eq!(read_checkpoint_from(&mut buf.as_slice()).unwrap().params, store);
    }
}
