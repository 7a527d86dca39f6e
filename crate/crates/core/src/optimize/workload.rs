//! Benchmark workload generation and the data-sieving transform.
//!
//! Generates the classic process-parallel access patterns (independent or
//! collective, contiguous or interleaved) against one shared file, and turns
//! a process's interleaved writes into the lock/read/modify/write cycles a
//! sieving implementation would perform.

use serde::{Deserialize, Serialize};

use crate::analysis::Direction;

use super::{HintSet, OptimizeError};

/// Access pattern shape of one benchmark run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    IndependentContiguous,
    IndependentNonContiguous,
    CollectiveContiguous,
    CollectiveNonContiguous,
}

impl Pattern {
    pub fn is_collective(self) -> bool {
        matches!(
            self,
            Pattern::CollectiveContiguous | Pattern::CollectiveNonContiguous
        )
    }

    pub fn is_contiguous(self) -> bool {
        matches!(
            self,
            Pattern::IndependentContiguous | Pattern::CollectiveContiguous
        )
    }
}

fn default_direction() -> Direction {
    Direction::Read
}

/// One named hint set and its simulated effect, used by learn-then-apply
/// experiments to create performance differences deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintExperiment {
    pub hints: HintSet,
    pub throughput_multiplier: f64,
}

/// Shape of a generated workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSpec {
    pub pattern: Pattern,
    pub processes: u32,
    pub blocks_per_process: u64,
    pub block_bytes: u64,
    #[serde(default = "default_direction")]
    pub direction: Direction,
    /// Distance between a process's consecutive non-contiguous blocks;
    /// defaults to `processes * block_bytes` (round-robin interleaving).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sieve_buffer_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hint_sets: Vec<HintExperiment>,
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), OptimizeError> {
        if self.processes < 1 || self.blocks_per_process < 1 || self.block_bytes < 1 {
            return Err(OptimizeError::BadSpec(
                "processes, blocks_per_process and block_bytes must be >= 1".into(),
            ));
        }
        if self.stride_bytes == Some(0) {
            return Err(OptimizeError::BadSpec("stride_bytes must be >= 1".into()));
        }
        for h in &self.hint_sets {
            if !(h.throughput_multiplier > 0.0 && h.throughput_multiplier.is_finite()) {
                return Err(OptimizeError::BadSpec(
                    "throughput_multiplier must be > 0".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, OptimizeError> {
        let spec: WorkloadSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn total_bytes(&self) -> u64 {
        self.processes as u64 * self.blocks_per_process * self.block_bytes
    }
}

/// One block access of a generated workload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Access {
    pub offset: u64,
    pub len: u64,
    pub direction: Direction,
    /// Synchronization round this access belongs to, for collective patterns.
    pub barrier: Option<u64>,
}

/// The access sequence of one process.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessTrace {
    pub rank: u32,
    pub accesses: Vec<Access>,
}

/// A whole generated workload against one shared file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessTrace {
    pub processes: Vec<ProcessTrace>,
}

impl AccessTrace {
    pub fn total_bytes(&self) -> u64 {
        self.processes
            .iter()
            .flat_map(|p| &p.accesses)
            .map(|a| a.len)
            .sum()
    }

    pub fn has_barriers(&self) -> bool {
        self.processes
            .iter()
            .any(|p| p.accesses.iter().any(|a| a.barrier.is_some()))
    }
}

/// Generates the per-process access sequences of a workload.
///
/// Contiguous patterns give each process one dense range of the file;
/// non-contiguous patterns interleave the processes' blocks round-robin.
/// Collective patterns additionally tag each block round as a barrier.
pub fn gen_workload(spec: &WorkloadSpec) -> Result<AccessTrace, OptimizeError> {
    spec.validate()?;
    let (p_count, n, b) = (
        spec.processes,
        spec.blocks_per_process,
        spec.block_bytes,
    );
    let stride = spec.stride_bytes.unwrap_or(p_count as u64 * b);
    let collective = spec.pattern.is_collective();
    let contiguous = spec.pattern.is_contiguous();
    let mut processes = Vec::with_capacity(p_count as usize);
    for rank in 0..p_count {
        let base = if contiguous {
            rank as u64 * n * b
        } else {
            rank as u64 * b
        };
        let accesses = (0..n)
            .map(|i| Access {
                offset: if contiguous { base + i * b } else { base + i * stride },
                len: b,
                direction: spec.direction,
                barrier: collective.then_some(i),
            })
            .collect();
        processes.push(ProcessTrace { rank, accesses });
    }
    Ok(AccessTrace { processes })
}

/// One lock/read/modify/write cycle of a data-sieving write.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SieveCycle {
    pub lock_offset: u64,
    pub lock_bytes: u64,
    /// Blocks of the original access list merged into this cycle.
    pub merged_blocks: u64,
    /// Bytes of actual payload inside the locked extent.
    pub payload_bytes: u64,
}

impl SieveCycle {
    /// The cycle reads the whole locked extent before modifying it.
    pub fn read_bytes(&self) -> u64 {
        self.lock_bytes
    }

    /// The cycle writes the whole locked extent back.
    pub fn write_bytes(&self) -> u64 {
        self.lock_bytes
    }
}

/// Turns one process's non-contiguous writes into sieving cycles.
///
/// The extent covered by the writes is walked in consecutive buffer-sized
/// regions starting at the lowest written offset; a region boundary that
/// would split a block is pulled back to the block's start. Every region
/// containing at least one block becomes a cycle that locks, reads and
/// rewrites the region. Blocks must be disjoint and no larger than the
/// buffer.
pub fn apply_data_sieving(
    blocks: &[Access],
    sieve_buffer_bytes: u64,
) -> Result<Vec<SieveCycle>, OptimizeError> {
    if blocks.is_empty() {
        return Ok(Vec::new());
    }
    let mut sorted: Vec<(u64, u64)> = blocks.iter().map(|a| (a.offset, a.len)).collect();
    sorted.sort_unstable();
    let mut prev_end = 0u64;
    for (i, &(offset, len)) in sorted.iter().enumerate() {
        if len > sieve_buffer_bytes {
            return Err(OptimizeError::BufferTooSmall {
                block: len,
                buffer: sieve_buffer_bytes,
            });
        }
        if i > 0 && offset < prev_end {
            return Err(OptimizeError::BadSpec(
                "sieving requires disjoint write extents".into(),
            ));
        }
        prev_end = offset + len;
    }
    let extent_end = prev_end;
    let mut cycles = Vec::new();
    let mut region_start = sorted[0].0;
    let mut idx = 0;
    while idx < sorted.len() {
        // skip whole empty regions in one step, keeping the grid spacing
        let next_offset = sorted[idx].0;
        if next_offset >= region_start + sieve_buffer_bytes {
            let skip = (next_offset - region_start) / sieve_buffer_bytes;
            region_start += skip * sieve_buffer_bytes;
        }
        let mut region_end = (region_start + sieve_buffer_bytes).min(extent_end);
        if let Some(&(o, _)) = sorted[idx..]
            .iter()
            .find(|&&(o, l)| o < region_end && o + l > region_end)
        {
            region_end = o;
        }
        let mut merged = 0u64;
        let mut payload = 0u64;
        while idx < sorted.len() && sorted[idx].0 + sorted[idx].1 <= region_end {
            merged += 1;
            payload += sorted[idx].1;
            idx += 1;
        }
        if merged > 0 {
            cycles.push(SieveCycle {
                lock_offset: region_start,
                lock_bytes: region_end - region_start,
                merged_blocks: merged,
                payload_bytes: payload,
            });
        }
        region_start = region_end;
    }
    Ok(cycles)
}
