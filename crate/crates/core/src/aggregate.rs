//! Chunked, data-parallel spend aggregation under a frozen activation.
//!
//! Events are cut into fixed `CHUNK`-sized chunks, each chunk is reduced on
//! its own into an [`ExactVec`], and chunk results are merged in chunk order.
//! Because the accumulators are exact, the totals do not depend on the worker
//! count or on the chunk size.

use std::ops::Range;

use rayon::prelude::*;

use crate::exact::ExactVec;
use crate::model::{ActivationVector, AuctionRule, Event};

pub const CHUNK: usize = 2048;

/// Per-chunk sums of `f(e, active)` over `events[range]`. Chunk `i` covers
/// `range.start + i * CHUNK ..` up to `CHUNK` events.
pub fn chunk_sums<R: AuctionRule>(
    events: &[Event<R::Payload>],
    range: Range<usize>,
    active: &ActivationVector,
    rule: &R,
) -> Vec<ExactVec> {
    let k = rule.num_campaigns();
    events[range]
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut buf = vec![0.0; k];
            let mut acc = ExactVec::zeros(k);
            for e in chunk {
                rule.spend(e, active, &mut buf);
                acc.add_dense(&buf);
            }
            acc
        })
        .collect()
}

/// Sum of `f(e, active)` over `events[range]`.
pub fn segment_sum<R: AuctionRule>(
    events: &[Event<R::Payload>],
    range: Range<usize>,
    active: &ActivationVector,
    rule: &R,
) -> ExactVec {
    let mut total = ExactVec::zeros(rule.num_campaigns());
    for part in chunk_sums(events, range, active, rule) {
        total.merge(&part);
    }
    total
}

/// Sum over a list of events given by reference (used for subsamples).
pub fn indexed_sum<R: AuctionRule>(
    events: &[Event<R::Payload>],
    indices: &[usize],
    active: &ActivationVector,
    rule: &R,
) -> ExactVec {
    let k = rule.num_campaigns();
    let parts: Vec<ExactVec> = indices
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut buf = vec![0.0; k];
            let mut acc = ExactVec::zeros(k);
            for &i in chunk {
                rule.spend(&events[i], active, &mut buf);
                acc.add_dense(&buf);
            }
            acc
        })
        .collect();
    let mut total = ExactVec::zeros(k);
    for p in &parts {
        total.merge(p);
    }
    total
}
