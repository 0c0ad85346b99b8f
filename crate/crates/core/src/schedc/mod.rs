//! Lowering of flow solutions to chunked, executable schedules.
//!
//! A shard is the data one node sends to another; it is cut into `chunks`
//! equal chunks. Link-mode schedules move chunks hop by hop in synchronized
//! steps; path-mode schedules pin chunk ranges to routes.

mod compile;
mod quantize;
mod xml;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Digraph;

pub use compile::{compile_path_schedule, compile_timestep_schedule, decompose_time_paths, TimePath, DEFAULT_Q_MAX};
pub use quantize::{quantize_flows, quantize_groups, Chunking};
pub use xml::{emit_schedule_xml, parse_schedule_xml, read_schedule_xml, write_schedule_xml};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleMode {
    Link,
    Path,
}

/// One chunk range `[c0, c1)` of shard `(s, d)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChunkRange {
    pub s: usize,
    pub d: usize,
    pub c0: u64,
    pub c1: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Instruction {
    /// Move `chunks` over link `src -> dst` during `step`.
    Send { step: usize, src: usize, dst: usize, chunks: ChunkRange },
    /// Carry `chunks` along route `route` of the commodity's route list.
    Route { route: usize, chunks: ChunkRange },
}

impl Instruction {
    pub fn chunks(&self) -> ChunkRange {
        match *self {
            Instruction::Send { chunks, .. } | Instruction::Route { chunks, .. } => chunks,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChunkedSchedule {
    pub n: usize,
    pub nsteps: usize,
    pub mode: ScheduleMode,
    /// Chunks per shard.
    pub chunks: u64,
    pub shard_bytes: u64,
    /// `ceil(shard_bytes / chunks)`.
    pub chunk_bytes: u64,
    /// Parallel channels the runtime opens per link; does not change timing.
    pub replication: u32,
    /// Sorted by step, then link, then chunk range.
    pub instructions: Vec<Instruction>,
}

impl ChunkedSchedule {
    pub(crate) fn new(n: usize, nsteps: usize, mode: ScheduleMode, chunks: u64, shard_bytes: u64) -> Self {
        ChunkedSchedule {
            n,
            nsteps,
            mode,
            chunks,
            shard_bytes,
            chunk_bytes: shard_bytes.div_ceil(chunks.max(1)),
            replication: 1,
            instructions: Vec::new(),
        }
    }

    /// Structural checks that need no graph: node ids, step indices and
    /// chunk ranges are in range, and instructions match the mode.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Schedule(msg));
        if self.chunks == 0 {
            return bad("chunks per shard must be positive".into());
        }
        for (i, ins) in self.instructions.iter().enumerate() {
            let c = ins.chunks();
            if c.s >= self.n || c.d >= self.n || c.s == c.d {
                return bad(format!("instruction {i}: shard ({}, {}) is not a pair of distinct nodes below {}", c.s, c.d, self.n));
            }
            if c.c0 >= c.c1 || c.c1 > self.chunks {
                return bad(format!("instruction {i}: chunk range [{}, {}) outside [0, {})", c.c0, c.c1, self.chunks));
            }
            match (*ins, self.mode) {
                (Instruction::Send { step, src, dst, .. }, ScheduleMode::Link) => {
                    if step >= self.nsteps {
                        return bad(format!("instruction {i}: step {step} >= nsteps {}", self.nsteps));
                    }
                    if src >= self.n || dst >= self.n {
                        return bad(format!("instruction {i}: link ({src}, {dst}) names a node >= {}", self.n));
                    }
                }
                (Instruction::Route { .. }, ScheduleMode::Path) => {}
                _ => return bad(format!("instruction {i} does not belong in a {:?} schedule", self.mode)),
            }
        }
        Ok(())
    }

    /// Validation plus: every send uses a link of `g`.
    pub fn validate_on(&self, g: &Digraph) -> Result<()> {
        self.validate()?;
        if g.n() != self.n {
            return Err(Error::Schedule(format!("schedule has {} nodes, graph has {}", self.n, g.n())));
        }
        for ins in &self.instructions {
            if let Instruction::Send { src, dst, .. } = *ins {
                if g.find_edge(src, dst).is_none() {
                    return Err(Error::Schedule(format!("send over missing link ({src}, {dst})")));
                }
            }
        }
        Ok(())
    }
}
