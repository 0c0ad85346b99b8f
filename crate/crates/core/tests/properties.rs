//! Invariants checked over generated inputs.

use a2a_core::bounds::{full_tree_distance_sum, graph_distance_bound, tree_distance_sum, BoundReport};
use a2a_core::deadlock::{lash_order, lash_sequential, verify_layers};
use a2a_core::graph::{self, gen, is_strongly_connected, Digraph, PunctureMode};
use a2a_core::mcf::{mcf_decomposed, mcf_link, mcf_path, McfOptions};
use a2a_core::routes::{
    disjoint_paths, eval_link_load, extract_widest_paths, is_simple, load_aware_sp, sssp_routes, WeightedPathSet,
};
use a2a_core::schedc::{
    emit_schedule_xml, parse_schedule_xml, quantize_flows, ChunkRange, ChunkedSchedule, Instruction, ScheduleMode,
};
use a2a_core::simkit::{eval_path_alltoall, replay_timestep_schedule};
use proptest::prelude::*;

fn small_regular() -> impl Strategy<Value = Digraph> {
    (4usize..9, 2usize..4, any::<u64>()).prop_map(|(n, d, seed)| gen::gen_random_regular(n, d, seed).unwrap())
}

fn small_graph() -> impl Strategy<Value = Digraph> {
    prop_oneof![
        small_regular(),
        (4usize..10, 2usize..4).prop_map(|(n, d)| gen::gen_kautz(n, d.min(n - 1)).unwrap()),
        (3usize..7).prop_map(|n| gen::gen_torus(&[n], false).unwrap()),
        (2usize..4).prop_map(|k| gen::gen_hypercube(k).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn generators_are_regular_and_connected(n in 3usize..40, d in 2usize..5, seed in any::<u64>()) {
        let d = d.min(n - 1);
        let k = gen::gen_kautz(n, d).unwrap();
        prop_assert_eq!(k.regular_degree(), Some(d));
        prop_assert!(is_strongly_connected(&k));
        if n >= 4 && d >= 2 {
            let r = gen::gen_random_regular(n, d, seed).unwrap();
            prop_assert_eq!(r.regular_degree(), Some(d));
            prop_assert!((0..n).all(|v| r.in_degree(v) == d));
            prop_assert!(is_strongly_connected(&r));
        }
    }

    #[test]
    fn puncturing_keeps_strong_connectivity(seed in any::<u64>(), count in 1usize..5) {
        let t = gen::gen_torus(&[3, 3, 3], true).unwrap();
        let p = gen::puncture(&t, PunctureMode::Edges, count, seed).unwrap();
        prop_assert_eq!(p.num_edges(), t.num_edges() - 2 * count);
        prop_assert!(is_strongly_connected(&p));
    }

    #[test]
    fn graph_json_round_trips(g in small_graph()) {
        let back = graph::from_json(&graph::to_json(&g)).unwrap();
        prop_assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn tree_sum_is_fill_of_levels(d in 1usize..9, n in 2usize..3000) {
        let tau = tree_distance_sum(d, n).unwrap();
        // brute force: breadth-first fill of an unbounded d-ary tree
        let (mut left, mut level, mut width, mut want) = (n as u64 - 1, 0u64, 1u64, 0u64);
        while left > 0 {
            level += 1;
            width *= d as u64;
            let here = width.min(left);
            want += here * level;
            left -= here;
        }
        prop_assert_eq!(tau, want);
        let r = BoundReport::new(d, n).unwrap();
        prop_assert!(r.f_ub_tree > 0.0 && r.f_ub_degree > 0.0);
        if n > d + 1 {
            prop_assert!(r.f_ub_tree <= r.f_ub_degree + 1e-15);
        }
    }

    #[test]
    fn quantized_counts_track_rates(raw in prop::collection::vec(1u32..1000, 1..6), q_max in 1u64..2048) {
        let total: u32 = raw.iter().sum();
        let rates: Vec<f64> = raw.iter().map(|&r| r as f64 / total as f64).collect();
        let Ok(c) = quantize_flows(&rates, q_max) else {
            // only when more rates than chunks
            prop_assert!(rates.len() as u64 > q_max);
            return Ok(());
        };
        prop_assert!(c.q <= q_max);
        prop_assert_eq!(c.counts.iter().sum::<u64>(), c.q);
        prop_assert!(c.counts.iter().all(|&k| k >= 1));
        let repaired = rates.iter().any(|&r| (r * c.q as f64) < 0.5);
        let slack = if repaired { 2.0 } else { 1.0 };
        for (&r, &k) in rates.iter().zip(&c.counts) {
            prop_assert!((k as f64 / c.q as f64 - r).abs() <= slack / c.q as f64 + 1e-12);
        }
    }

    #[test]
    fn schedule_xml_round_trips(sends in prop::collection::vec((0usize..4, 0usize..5, 0usize..5, 0usize..5, 1usize..5, 0u64..8, 1u64..8), 0..40)) {
        let mut s = ChunkedSchedule { n: 5, nsteps: 4, mode: ScheduleMode::Link, chunks: 8, shard_bytes: 64, chunk_bytes: 8, replication: 2, instructions: vec![] };
        for (step, src, dst, a, b, c0, len) in sends {
            let d = (a + b) % 5;
            let c1 = (c0 + len).min(8);
            if c0 < c1 {
                s.instructions.push(Instruction::Send { step, src, dst, chunks: ChunkRange { s: a, d, c0, c1 } });
            }
        }
        s.instructions.sort();
        prop_assert_eq!(parse_schedule_xml(&emit_schedule_xml(&s)).unwrap(), s);
    }

    #[test]
    fn sssp_routes_are_simple_and_complete(g in small_graph(), seed in any::<u64>()) {
        for t in [sssp_routes(&g, seed).unwrap(), load_aware_sp(&g, seed).unwrap()] {
            prop_assert_eq!(t.routes.len(), g.n() * (g.n() - 1));
            for r in &t.routes {
                prop_assert!(is_simple(&r.nodes));
                prop_assert_eq!(r.nodes.first(), Some(&r.src));
                prop_assert_eq!(r.nodes.last(), Some(&r.dst));
            }
        }
        prop_assert_eq!(sssp_routes(&g, seed).unwrap(), sssp_routes(&g, seed).unwrap());
    }

    #[test]
    fn lash_layers_verify(g in small_graph(), seed in any::<u64>(), keep in 1usize..100) {
        let table = sssp_routes(&g, seed).unwrap();
        let paths = table.paths();
        let all = lash_sequential(&g, &paths, 64).unwrap();
        prop_assert!(verify_layers(&g, &paths, &all).unwrap().is_acyclic());
        // a prefix of the processing order never needs more layers
        let order = lash_order(&paths);
        let cut = (order.len() * keep / 100).max(1);
        let prefix: Vec<Vec<usize>> = order[..cut].iter().map(|&i| paths[i].clone()).collect();
        let part = lash_sequential(&g, &prefix, 64).unwrap();
        prop_assert!(part.count <= all.count);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn flow_solutions_respect_bounds_and_invariants(g in small_graph()) {
        let opts = McfOptions::default();
        let link = mcf_link(&g, None, &opts).unwrap();
        prop_assert!(link.check(&g).within(1e-6));
        prop_assert!(1.0 / link.f >= graph_distance_bound(&g).unwrap() - 1e-9);
        if let Some(d) = g.regular_degree() {
            prop_assert!(1.0 / link.f >= tree_distance_sum(d, g.n()).unwrap() as f64 / d as f64 - 1e-9);
        }
        let dec = mcf_decomposed(&g, None, &opts).unwrap();
        prop_assert!((dec.f - link.f).abs() <= 1e-6);
        prop_assert!(dec.check(&g).within(1e-6));
        let (fp, _) = mcf_path(&g, &disjoint_paths(&g).unwrap(), &opts).unwrap();
        prop_assert!(fp <= link.f + 1e-7);
    }

    #[test]
    fn extraction_preserves_optimal_load(g in small_graph()) {
        let link = mcf_link(&g, None, &McfOptions::default()).unwrap();
        let wps = extract_widest_paths(&g, &link).unwrap();
        wps.validate(&g).unwrap();
        for (k, e) in wps.entries.iter().enumerate() {
            prop_assert!((e.total_weight() - link.delivered(&g, k)).abs() <= 1e-6);
        }
        let t = eval_path_alltoall(&g, &wps, 1.0, 1.0).unwrap();
        prop_assert!((t * link.f - 1.0).abs() <= 1e-4);
        // an optimal weighting cannot improve by dropping a path
        for k in 0..wps.entries.len() {
            if wps.entries[k].paths.len() < 2 {
                continue;
            }
            let mut fewer: WeightedPathSet = wps.clone();
            fewer.entries[k].paths.remove(0);
            prop_assert!(eval_link_load(&g, &fewer).unwrap().max_load >= t - 1e-6);
        }
    }
}

#[test]
fn closed_form_tree_sums() {
    for d in 2..=8u64 {
        for k in 1..=6u32 {
            let n = (d.pow(k) - 1) / (d - 1);
            if n >= 2 {
                assert_eq!(full_tree_distance_sum(d, k), tree_distance_sum(d as usize, n as usize).unwrap());
            }
        }
    }
}

#[test]
fn replay_scales_with_bandwidth_and_sync() {
    use a2a_core::mcf::mcf_timestepped;
    use a2a_core::schedc::{compile_timestep_schedule, DEFAULT_Q_MAX};
    let g = gen::gen_hypercube(3).unwrap();
    let ts = mcf_timestepped(&g, 3, None, &McfOptions::default()).unwrap();
    let s = compile_timestep_schedule(&g, &ts, DEFAULT_Q_MAX, 1 << 10).unwrap();
    let base = replay_timestep_schedule(&g, &s, 1.0, 1.0, 0.0).unwrap();
    assert_eq!(base.shards, 56);
    assert!(s.nsteps <= 3);
    let fast = replay_timestep_schedule(&g, &s, 1.0, 2.0, 0.0).unwrap();
    assert!((fast.time * 2.0 - base.time).abs() < 1e-9);
    let sync = replay_timestep_schedule(&g, &s, 1.0, 1.0, 0.5).unwrap();
    assert!((sync.time - base.time - 0.5 * s.nsteps as f64).abs() < 1e-9);
    assert!(base.time <= ts.total_u() * (1.0 + 2.0 / s.chunks as f64) + 1e-9);
}
