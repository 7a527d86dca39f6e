//! Stride-predictive read-ahead advice.
//!
//! Each handle's access stream is watched for a constant stride. After the
//! stride has predicted enough consecutive offsets, advice for the next
//! predicted extent is emitted and keeps coming while predictions hold.
//! Only forward strides are advised; constant repeats and backward scans
//! carry no useful prefetch.

use std::collections::HashMap;

/// Correct consecutive predictions required before advising.
pub const DEFAULT_ADVICE_THRESHOLD: u32 = 4;

/// Prefetch advice: the predicted next access extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReadAheadAdvice {
    pub offset: u64,
    pub len: u64,
}

#[derive(Debug, Clone, Copy)]
struct StreamState {
    last_offset: u64,
    last_len: u64,
    stride: Option<i64>,
    correct: u32,
}

/// Per-handle stride predictor.
#[derive(Debug, Clone, Default)]
pub struct StreamTracker {
    threshold: u32,
    streams: HashMap<u64, StreamState>,
}

impl StreamTracker {
    pub fn new(threshold: u32) -> Self {
        StreamTracker {
            threshold: threshold.max(1),
            streams: HashMap::new(),
        }
    }

    /// Feeds one access of `handle`'s stream, returning advice for the next
    /// access once the stride has proven itself.
    pub fn track_and_advise(
        &mut self,
        handle: u64,
        offset: u64,
        len: u64,
    ) -> Option<ReadAheadAdvice> {
        let state = match self.streams.get_mut(&handle) {
            None => {
                self.streams.insert(
                    handle,
                    StreamState {
                        last_offset: offset,
                        last_len: len,
                        stride: None,
                        correct: 0,
                    },
                );
                return None;
            }
            Some(state) => state,
        };
        if len != state.last_len {
            // a different request size starts a new stream shape
            *state = StreamState {
                last_offset: offset,
                last_len: len,
                stride: None,
                correct: 0,
            };
            return None;
        }
        let delta = offset as i64 - state.last_offset as i64;
        match state.stride {
            Some(s) if s == delta => state.correct += 1,
            _ => {
                state.stride = Some(delta);
                state.correct = 0;
            }
        }
        state.last_offset = offset;
        let stride = state.stride.unwrap();
        if state.correct >= self.threshold && stride > 0 {
            Some(ReadAheadAdvice {
                offset: offset.checked_add_signed(stride)?,
                len,
            })
        } else {
            None
        }
    }

    /// Drops all state of one handle, e.g. on close.
    pub fn forget(&mut self, handle: u64) {
        self.streams.remove(&handle);
    }
}
