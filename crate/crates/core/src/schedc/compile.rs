use num_integer::Integer;

use super::{quantize_groups, ChunkRange, ChunkedSchedule, Instruction, ScheduleMode};
use crate::error::{Error, Result};
use crate::graph::Digraph;
use crate::mcf::TimeExpandedSolution;
use crate::routes::{path_edges, CommodityPaths, WeightedPath, WeightedPathSet};

pub const DEFAULT_Q_MAX: u64 = 1024;

/// Flow below this is solver noise, not a route.
const FLOW_EPS: f64 = 1e-9;
/// Time paths lighter than this are dropped before quantization.
const MIN_PATH_WEIGHT: f64 = 1e-7;

/// A route through the time-expanded graph: `(edge, step)` hops with
/// strictly increasing steps (waiting happens between hops).
#[derive(Clone, Debug, PartialEq)]
pub struct TimePath {
    pub hops: Vec<(usize, usize)>,
    pub weight: f64,
}

/// Splits commodity `k` of `ts` into time paths carrying its unit shard,
/// always following the heaviest remaining arc. Weights are renormalized to
/// sum to one after dropping noise.
pub fn decompose_time_paths(g: &Digraph, ts: &TimeExpandedSolution, k: usize) -> Result<Vec<TimePath>> {
    let c = ts.commodities[k];
    let l = ts.l_max;
    let n = g.n();
    // link arcs leaving (u, t - 1) at step t, stored per (u, t)
    let mut arcs: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n * (l + 1)];
    let mut out = vec![0.0; n * (l + 1)];
    let mut inn = vec![0.0; n * (l + 1)];
    for &(e, t, x) in &ts.flows[k] {
        if x > FLOW_EPS {
            let edge = g.edge(e);
            arcs[edge.src * (l + 1) + t].push((e, x));
            out[edge.src * (l + 1) + t] += x;
            inn[edge.dst * (l + 1) + t] += x;
        }
    }
    // wait[u][t]: flow held at u from time t to t + 1
    let mut wait = vec![0.0; n * (l + 1)];
    for u in 0..n {
        let mut held = if u == c.src { 1.0 } else { 0.0 };
        for t in 0..l {
            if t > 0 {
                held += inn[u * (l + 1) + t] - out[u * (l + 1) + t];
            }
            wait[u * (l + 1) + t] = (held - out[u * (l + 1) + t + 1]).max(0.0);
        }
    }
    let mut paths = Vec::new();
    let mut total = 0.0;
    while total < 1.0 - FLOW_EPS {
        // (u, t, Some(arc index) | None for waiting)
        let mut trail: Vec<(usize, usize, Option<usize>)> = Vec::new();
        let (mut u, mut t) = (c.src, 0);
        while u != c.dst && t < l {
            let link = arcs[u * (l + 1) + t + 1]
                .iter()
                .enumerate()
                .filter(|(_, a)| a.1 > FLOW_EPS)
                .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(b.0.cmp(&a.0)));
            let hold = wait[u * (l + 1) + t];
            match link {
                Some((i, &(e, x))) if x >= hold => {
                    trail.push((u, t, Some(i)));
                    u = g.edge(e).dst;
                }
                _ if hold > FLOW_EPS => trail.push((u, t, None)),
                _ => break,
            }
            t += 1;
        }
        let width = trail
            .iter()
            .map(|&(u, t, a)| match a {
                Some(i) => arcs[u * (l + 1) + t + 1][i].1,
                None => wait[u * (l + 1) + t],
            })
            .fold(f64::INFINITY, f64::min);
        if trail.is_empty() || !width.is_finite() {
            break;
        }
        let mut hops = Vec::new();
        for &(u, t, a) in &trail {
            match a {
                Some(i) => {
                    let arc = &mut arcs[u * (l + 1) + t + 1][i];
                    arc.1 -= width;
                    hops.push((arc.0, t + 1));
                }
                None => wait[u * (l + 1) + t] -= width,
            }
        }
        if u == c.dst {
            total += width;
            if width >= MIN_PATH_WEIGHT {
                paths.push(TimePath { hops, weight: width });
            }
        }
    }
    let kept: f64 = paths.iter().map(|p| p.weight).sum();
    if kept < 1.0 - 1e-6 {
        return Err(Error::Schedule(format!(
            "time-expanded flow of ({}, {}) decomposes to only {kept} of the shard",
            c.src, c.dst
        )));
    }
    for p in &mut paths {
        p.weight /= kept;
    }
    Ok(paths)
}

/// Link-mode schedule from a time-stepped solution: each commodity's shard
/// is split over its time paths, chunk counts quantized over a common
/// denominator, and every hop becomes a send in its step. Chunks wait at a
/// node simply by not being sent. The result is replay-verified.
pub fn compile_timestep_schedule(g: &Digraph, ts: &TimeExpandedSolution, q_max: u64, shard_bytes: u64) -> Result<ChunkedSchedule> {
    let per: Vec<Vec<TimePath>> = (0..ts.commodities.len()).map(|k| decompose_time_paths(g, ts, k)).collect::<Result<_>>()?;
    let weights: Vec<Vec<f64>> = per.iter().map(|ps| ps.iter().map(|p| p.weight).collect()).collect();
    let groups: Vec<&[f64]> = weights.iter().map(|w| w.as_slice()).collect();
    let (q, counts) = if groups.is_empty() { (1, Vec::new()) } else { quantize_groups(&groups, q_max)? };
    let mut sched = ChunkedSchedule::new(g.n(), ts.l_max, ScheduleMode::Link, q, shard_bytes);
    for ((c, paths), counts) in ts.commodities.iter().zip(&per).zip(&counts) {
        let mut c0 = 0;
        for (p, &m) in paths.iter().zip(counts) {
            let chunks = ChunkRange { s: c.src, d: c.dst, c0, c1: c0 + m };
            c0 += m;
            for &(e, t) in &p.hops {
                let edge = g.edge(e);
                sched.instructions.push(Instruction::Send { step: t - 1, src: edge.src, dst: edge.dst, chunks });
            }
        }
    }
    sched.instructions.sort();
    crate::simkit::replay_timestep_schedule(g, &sched, 1.0, 1.0, 0.0)
        .map_err(|e| Error::Schedule(format!("compiled schedule fails replay: {e}")))?;
    Ok(sched)
}

/// Path-mode schedule: per-commodity weights are normalized and quantized
/// over a common denominator, then reduced by the highest common factor of
/// all counts, so a shard of `shard_bytes` splits into the fewest equal
/// chunks that realize every weight. Returns the route table (zero-weight
/// paths removed, weights replaced by their quantized values) and the
/// chunk-to-route assignment.
pub fn compile_path_schedule(g: &Digraph, wps: &WeightedPathSet, shard_bytes: u64, q_max: u64) -> Result<(WeightedPathSet, ChunkedSchedule)> {
    wps.validate(g)?;
    let mut table = WeightedPathSet { entries: Vec::with_capacity(wps.entries.len()) };
    let mut weights = Vec::with_capacity(wps.entries.len());
    for e in &wps.entries {
        let total = e.total_weight();
        if !(total > 0.0) {
            return Err(Error::Schedule(format!("commodity ({}, {}) has no weight", e.src, e.dst)));
        }
        let paths: Vec<WeightedPath> = e.paths.iter().filter(|p| p.weight > 0.0).cloned().collect();
        weights.push(paths.iter().map(|p| (p.weight / total).min(1.0)).collect::<Vec<f64>>());
        table.entries.push(CommodityPaths { src: e.src, dst: e.dst, demand: e.demand, paths });
    }
    let groups: Vec<&[f64]> = weights.iter().map(|w| w.as_slice()).collect();
    let (q, mut counts) = if groups.is_empty() { (1, Vec::new()) } else { quantize_groups(&groups, q_max)? };
    let hcf = counts.iter().flatten().fold(q, |a, &c| a.gcd(&c));
    let chunks = q / hcf;
    let mut sched = ChunkedSchedule::new(g.n(), 1, ScheduleMode::Path, chunks, shard_bytes);
    for (entry, counts) in table.entries.iter_mut().zip(&mut counts) {
        let mut c0 = 0;
        for (k, (p, m)) in entry.paths.iter_mut().zip(counts.iter_mut()).enumerate() {
            *m /= hcf;
            p.weight = *m as f64 / chunks as f64;
            let chunks = ChunkRange { s: entry.src, d: entry.dst, c0, c1: c0 + *m };
            c0 += *m;
            sched.instructions.push(Instruction::Route { route: k, chunks });
        }
    }
    sched.validate()?;
    for entry in &table.entries {
        for p in &entry.paths {
            path_edges(g, &p.nodes)?;
        }
    }
    Ok((table, sched))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::gen;
    use crate::mcf::{mcf_timestepped, McfOptions};

    fn single(nodes: Vec<usize>, weights: &[f64]) -> WeightedPathSet {
        WeightedPathSet {
            entries: vec![CommodityPaths {
                src: nodes[0],
                dst: *nodes.last().unwrap(),
                demand: 1.0,
                paths: weights.iter().map(|&w| WeightedPath { nodes: nodes.clone(), weight: w }).collect(),
            }],
        }
    }

    #[test]
    fn path_chunking_follows_hcf() {
        let g = gen::gen_complete(3).unwrap();
        let (_, s) = compile_path_schedule(&g, &single(vec![0, 1], &[1.0]), 1 << 20, DEFAULT_Q_MAX).unwrap();
        assert_eq!((s.chunks, s.instructions.len()), (1, 1));
        let (t, s) = compile_path_schedule(&g, &single(vec![0, 1], &[0.25, 0.75]), 1 << 20, DEFAULT_Q_MAX).unwrap();
        assert_eq!(s.chunks, 4);
        let sizes: Vec<u64> = s.instructions.iter().map(|i| i.chunks().c1 - i.chunks().c0).collect();
        assert_eq!(sizes, vec![1, 3]);
        assert_eq!(t.entries[0].paths[1].weight, 0.75);
        let (_, s) = compile_path_schedule(&g, &single(vec![0, 1], &[0.43, 0.57]), 1000, DEFAULT_Q_MAX).unwrap();
        assert_eq!(s.chunks, 100);
        assert_eq!(s.chunk_bytes, 10);
    }

    #[test]
    fn ring_timestep_schedule() {
        let g = gen::gen_torus(&[3], false).unwrap();
        let ts = mcf_timestepped(&g, 2, None, &McfOptions::default()).unwrap();
        let s = compile_timestep_schedule(&g, &ts, DEFAULT_Q_MAX, 1).unwrap();
        assert_eq!(s.nsteps, 2);
        // three one-hop shards plus three two-hop shards
        assert!(s.instructions.len() >= 9);
    }

    #[test]
    fn single_node_is_empty() {
        let g = Digraph::from_edges(1, []).unwrap();
        let ts = TimeExpandedSolution { l_max: 1, u: vec![0.0], commodities: vec![], flows: vec![] };
        let s = compile_timestep_schedule(&g, &ts, DEFAULT_Q_MAX, 8).unwrap();
        assert!(s.instructions.is_empty());
    }
}
