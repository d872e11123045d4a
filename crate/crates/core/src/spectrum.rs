//! First-fit spectrum assignment over boolean slot-availability vectors
//! (a set bit means the slot is free).

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::state::NetworkState;
use crate::topology::FiberId;

/// A contiguous run of slots `[start, start + len)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SlotInterval {
    pub start: u32,
    pub len: u32,
}

impl SlotInterval {
    pub fn new(start: u32, len: u32) -> Self {
        SlotInterval { start, len }
    }

    pub fn end(&self) -> u32 {
        self.start + self.len
    }

    pub fn slots(&self) -> std::ops::Range<usize> {
        self.start as usize..self.end() as usize
    }
}

/// Lowest-indexed window of `b` consecutive free slots.
pub fn first_fit(free: &FixedBitSet, b: u32) -> Option<SlotInterval> {
    if b == 0 {
        return None;
    }
    let b = b as usize;
    let mut run_start = 0;
    let mut run = 0;
    for i in 0..free.len() {
        if free.contains(i) {
            if run == 0 {
                run_start = i;
            }
            run += 1;
            if run == b {
                return Some(SlotInterval::new(run_start as u32, b as u32));
            }
        } else {
            run = 0;
        }
    }
    None
}

pub fn has_free_run(free: &FixedBitSet, b: u32) -> bool {
    first_fit(free, b).is_some()
}

/// First fit on the intersection of all fibers' availability, giving the same
/// interval on every fiber of a transparent lightpath.
pub fn segment_first_fit(state: &NetworkState, fibers: &[FiberId], b: u32) -> Option<SlotInterval> {
    let (first, rest) = fibers.split_first()?;
    let mut common = state.fiber_free(*first).clone();
    for f in rest {
        common.intersect_with(state.fiber_free(*f));
    }
    first_fit(&common, b)
}

/// Builds an availability vector from a `'1'` (free) / `'0'` (used) string.
pub fn mask_from_str(bits: &str) -> Option<FixedBitSet> {
    let mut m = FixedBitSet::with_capacity(bits.len());
    for (i, c) in bits.chars().enumerate() {
        match c {
            '1' => m.insert(i),
            '0' => {}
            _ => return None,
        }
    }
    Some(m)
}

pub fn mask_to_string(mask: &FixedBitSet) -> String {
    (0..mask.len()).map(|i| if mask.contains(i) { '1' } else { '0' }).collect()
}
