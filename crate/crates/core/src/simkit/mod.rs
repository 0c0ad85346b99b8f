//! Timing models for compiled schedules and route sets, plus topology and
//! runtime studies built on them.
//!
//! Link-mode schedules run store-and-forward in synchronized steps; a step
//! lasts as long as its busiest link. Path-mode routing is a cut-through
//! fluid: completion time is the maximum normalized link load.

mod study;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::Digraph;
use crate::routes::{eval_link_load, CommodityPaths, WeightedPath, WeightedPathSet};
use crate::schedc::{ChunkedSchedule, Instruction, ScheduleMode};

pub use study::{bench_runtimes, compare_topologies, evaluate, Algorithm, BenchRow, CompareRow, EvalReport, StudyOptions, TopologySpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    /// Completion time `T`.
    pub time: f64,
    pub step_times: Vec<f64>,
    /// Shards delivered whole; all `n (n - 1)` on success.
    pub shards: usize,
}

/// Replays a link-mode schedule moving shards of `m` bytes over links of
/// `cap * b` bytes per time unit. Every send reads chunk positions as of
/// the start of its step. Fails on the first send of a chunk its source
/// does not hold, on a chunk sent twice in one step, and on any shard not
/// fully at its destination at the end.
pub fn replay_timestep_schedule(g: &Digraph, sched: &ChunkedSchedule, m: f64, b: f64, sync_latency: f64) -> Result<ReplayReport> {
    if sched.mode != ScheduleMode::Link {
        return Err(invalid("replay needs a link-mode schedule"));
    }
    if !(m >= 0.0 && b > 0.0 && sync_latency >= 0.0) {
        return Err(invalid(format!("need m >= 0, b > 0, sync >= 0; got m={m}, b={b}, sync={sync_latency}")));
    }
    sched.validate_on(g)?;
    let n = g.n();
    let q = sched.chunks as usize;
    let chunk = m / q as f64;
    // position of chunk c of shard (s, d); shards start at their source
    let mut at: Vec<u32> = (0..n * n * q).map(|i| (i / q / n) as u32).collect();
    let slot = |s: usize, d: usize, c: u64| (s * n + d) * q + c as usize;
    let mut step_times = vec![sync_latency; sched.nsteps];
    let mut first = 0;
    while first < sched.instructions.len() {
        let Instruction::Send { step, .. } = sched.instructions[first] else { unreachable!() };
        let last = first + sched.instructions[first..].iter().take_while(|i| matches!(i, Instruction::Send { step: t, .. } if *t == step)).count();
        let mut bytes = vec![0.0; g.num_edges()];
        let mut moves = Vec::new();
        let mut sent = std::collections::HashSet::new();
        for ins in &sched.instructions[first..last] {
            let Instruction::Send { src, dst, chunks: r, .. } = *ins else { unreachable!() };
            let e = g.find_edge(src, dst).expect("validated");
            for c in r.c0..r.c1 {
                let i = slot(r.s, r.d, c);
                if at[i] as usize != src {
                    return Err(Error::Replay(format!(
                        "step {step}: chunk {c} of ({}, {}) is at node {}, not at sender {src}",
                        r.s, r.d, at[i]
                    )));
                }
                if !sent.insert(i) {
                    return Err(Error::Replay(format!("step {step}: chunk {c} of ({}, {}) sent twice", r.s, r.d)));
                }
                moves.push((i, dst as u32));
            }
            bytes[e] += (r.c1 - r.c0) as f64 * chunk;
        }
        for (i, dst) in moves {
            at[i] = dst;
        }
        let busiest = g.edges().iter().zip(&bytes).map(|(e, &x)| x / (e.cap * b)).fold(0.0, f64::max);
        step_times[step] += busiest;
        first = last;
    }
    let mut shards = 0;
    for s in 0..n {
        for d in (0..n).filter(|&d| d != s) {
            if let Some(c) = (0..q).find(|&c| at[slot(s, d, c as u64)] as usize != d) {
                return Err(Error::Replay(format!(
                    "chunk {c} of ({s}, {d}) ends at node {} after {} steps",
                    at[slot(s, d, c as u64)],
                    sched.nsteps
                )));
            }
            shards += 1;
        }
    }
    Ok(ReplayReport { time: step_times.iter().sum(), step_times, shards })
}

/// Cut-through completion time `max normalized load * m / b` of a route
/// set, each commodity's weights normalized to its demand.
pub fn eval_path_alltoall(g: &Digraph, wps: &WeightedPathSet, m: f64, b: f64) -> Result<f64> {
    if !(m >= 0.0 && b > 0.0) {
        return Err(invalid(format!("need m >= 0 and b > 0, got m={m}, b={b}")));
    }
    if let Some(e) = wps.entries.iter().find(|e| !(e.total_weight() > 0.0)) {
        return Err(invalid(format!("commodity ({}, {}) has zero weight", e.src, e.dst)));
    }
    Ok(eval_link_load(g, wps)?.max_load * m / b)
}

/// Route weights realized by a path-mode schedule: each route carries its
/// share of chunks. Fails unless every shard of `table` is assigned every
/// chunk exactly once.
pub fn realized_pathset(table: &WeightedPathSet, sched: &ChunkedSchedule) -> Result<WeightedPathSet> {
    if sched.mode != ScheduleMode::Path {
        return Err(invalid("need a path-mode schedule"));
    }
    sched.validate()?;
    let index: std::collections::HashMap<(usize, usize), usize> =
        table.entries.iter().enumerate().map(|(i, e)| ((e.src, e.dst), i)).collect();
    let mut cover: Vec<Vec<u64>> = table.entries.iter().map(|_| vec![0; sched.chunks as usize]).collect();
    let mut out: Vec<CommodityPaths> = table
        .entries
        .iter()
        .map(|e| CommodityPaths {
            src: e.src,
            dst: e.dst,
            demand: e.demand,
            paths: e.paths.iter().map(|p| WeightedPath { nodes: p.nodes.clone(), weight: 0.0 }).collect(),
        })
        .collect();
    for ins in &sched.instructions {
        let Instruction::Route { route, chunks: r } = *ins else { unreachable!("validated path mode") };
        let &k = index
            .get(&(r.s, r.d))
            .ok_or_else(|| Error::Schedule(format!("shard ({}, {}) has no routes", r.s, r.d)))?;
        let p = out[k]
            .paths
            .get_mut(route)
            .ok_or_else(|| Error::Schedule(format!("shard ({}, {}) has no route {route}", r.s, r.d)))?;
        p.weight += (r.c1 - r.c0) as f64 / sched.chunks as f64;
        for c in r.c0..r.c1 {
            cover[k][c as usize] += 1;
        }
    }
    for (e, cov) in table.entries.iter().zip(&cover) {
        if let Some(c) = cov.iter().position(|&x| x != 1) {
            return Err(Error::Schedule(format!("chunk {c} of ({}, {}) is assigned {} times", e.src, e.dst, cov[c])));
        }
    }
    for e in &mut out {
        e.paths.retain(|p| p.weight > 0.0);
    }
    Ok(WeightedPathSet { entries: out })
}
