//! Change-point representation of interval sequences.
//!
//! An interval sequence is equivalently a sparse list of *changes*: interval
//! `[s, e)` with value `v` contributes `+v` at `s` and `-v` at `e`. A dilated
//! convolution then only needs this list replicated with per-tap time shifts;
//! the merged, time-sorted result is what the feature sweep walks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::data::IntervalSequence;

/// A single change: `channel`'s signal moves by `delta` at `timestamp`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChangePoint {
    pub timestamp: f64,
    pub delta: f64,
    pub channel: usize,
}

/// A change annotated with the kernel tap (0-based) whose shift produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergedChange {
    pub timestamp: f64,
    pub delta: f64,
    pub channel: usize,
    pub tap: usize,
}

/// The time-sorted union of `taps` copies of a base change list, copy `k`
/// shifted by `dilation * k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DilatedList {
    pub entries: Vec<MergedChange>,
    pub dilation: f64,
    pub taps: usize,
}

/// Build the base change list for one sequence: two entries per non-empty
/// interval, coalesced per channel at equal timestamps (touching intervals of
/// equal value cancel and disappear), sorted by timestamp. Zero-length
/// intervals and zero values contribute nothing.
pub fn build_change_list(seq: &IntervalSequence) -> Vec<ChangePoint> {
    let mut out: Vec<ChangePoint> = Vec::new();
    for (&channel, ivs) in &seq.channels {
        // Within a channel the intervals are sorted and non-overlapping, so
        // the start/end events below are already in time order; only touching
        // endpoints can collide, and only with their immediate neighbour.
        let mut events: Vec<(f64, f64)> = Vec::with_capacity(ivs.len() * 2);
        for iv in ivs {
            if iv.end > iv.start && iv.value != 0.0 {
                events.push((iv.start, iv.value));
                events.push((iv.end, -iv.value));
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut i = 0;
        while i < events.len() {
            let t = events[i].0;
            let mut delta = 0.0;
            while i < events.len() && events[i].0 == t {
                delta += events[i].1;
                i += 1;
            }
            if delta != 0.0 {
                out.push(ChangePoint { timestamp: t, delta, channel });
            }
        }
    }
    out.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    out
}

/// Scaled copy of a change list with every timestamp divided by `scale`.
/// Order is preserved (the map is monotone), so the result is still sorted.
pub(crate) fn scale_change_list(l0: &[ChangePoint], inv_scale: f64) -> Vec<ChangePoint> {
    l0.iter()
        .map(|c| ChangePoint { timestamp: c.timestamp * inv_scale, ..*c })
        .collect()
}

/// Head of one shifted stream, ordered for a min-heap: earliest timestamp
/// first, ties broken by tap index so the merge matches a stable sort of the
/// concatenated shifted copies.
struct StreamHead {
    timestamp: f64,
    tap: usize,
    pos: usize,
}

impl PartialEq for StreamHead {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for StreamHead {}
impl PartialOrd for StreamHead {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for StreamHead {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap and we pop smallest first.
        other
            .timestamp
            .total_cmp(&self.timestamp)
            .then_with(|| other.tap.cmp(&self.tap))
    }
}

/// K-way merge of the `taps` shifted copies of `l0` (copy `k` shifted by
/// `dilation * k`). Each copy is already sorted, so a heap of stream heads
/// merges them in `O(taps * |l0| * log taps)`.
pub fn dilate_and_merge(l0: &[ChangePoint], dilation: f64, taps: usize) -> DilatedList {
    assert!(taps >= 1, "a kernel needs at least one tap");
    assert!(dilation > 0.0, "dilation must be positive");
    let mut entries = Vec::with_capacity(l0.len() * taps);
    let mut heap: BinaryHeap<StreamHead> = BinaryHeap::with_capacity(taps);
    for tap in 0..taps {
        if !l0.is_empty() {
            heap.push(StreamHead {
                timestamp: l0[0].timestamp + dilation * tap as f64,
                tap,
                pos: 0,
            });
        }
    }
    while let Some(head) = heap.pop() {
        let c = l0[head.pos];
        entries.push(MergedChange {
            timestamp: head.timestamp,
            delta: c.delta,
            channel: c.channel,
            tap: head.tap,
        });
        let next = head.pos + 1;
        if next < l0.len() {
            heap.push(StreamHead {
                timestamp: l0[next].timestamp + dilation * head.tap as f64,
                tap: head.tap,
                pos: next,
            });
        }
    }
    DilatedList { entries, dilation, taps }
}
