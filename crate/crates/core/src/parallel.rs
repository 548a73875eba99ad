//! Segment-wise simulation: predict which campaign caps next from expected
//! spend rates, then aggregate the whole segment under a frozen activation.
//!
//! Each iteration estimates the mean per-event spend `F` under the current
//! activation, picks the active campaign with the smallest remaining
//! `(b - s) / F`, advances by `floor((b - s) / F)` events (at least one) and
//! sums the segment in parallel. The outer loop runs at most K times.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::aggregate::{chunk_sums, indexed_sum, segment_sum, CHUNK};
use crate::error::{invalid, Result, SimError};
use crate::exact::ExactVec;
use crate::model::{ActivationVector, AuctionRule, CampaignSet, Event, Trajectory};
use crate::rng::{derive_seed, rng, tags};

/// How the expected spend rate of the next event is estimated.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RateBasis {
    /// Mean over all events not yet consumed. Exact under random order.
    #[default]
    ExactRemainingMean,
    /// Mean over a uniform subsample of the unconsumed events.
    Subsampled { rate: f64, seed: u64 },
    /// Mean over the consumed prefix, evaluated under the current activation.
    /// Falls back to the remaining mean before any event is consumed.
    ConsumedPrefix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub rates: Vec<f64>,
    pub basis: RateBasis,
}

/// Estimate of `E[f(e, active)]` for the event following position `from`
/// (`from` events already consumed).
pub fn estimate_mean_rate<R: AuctionRule>(
    events: &[Event<R::Payload>],
    from: usize,
    active: &ActivationVector,
    rule: &R,
    basis: RateBasis,
) -> Result<RateEstimate> {
    let n = events.len();
    if from >= n {
        return Err(SimError::Empty("remaining events"));
    }
    if active.len() != rule.num_campaigns() {
        return Err(SimError::DimensionMismatch {
            expected: rule.num_campaigns(),
            got: active.len(),
        });
    }
    let (sum, count) = match basis {
        RateBasis::ExactRemainingMean => (segment_sum(events, from..n, active, rule), n - from),
        RateBasis::ConsumedPrefix if from == 0 => {
            (segment_sum(events, from..n, active, rule), n - from)
        }
        RateBasis::ConsumedPrefix => (segment_sum(events, 0..from, active, rule), from),
        RateBasis::Subsampled { rate, seed } => {
            if !(rate > 0.0 && rate <= 1.0) {
                return Err(invalid("rate", format!("{rate} is outside (0, 1]")));
            }
            let remaining = n - from;
            let k = ((remaining as f64 * rate).round() as usize).clamp(1, remaining);
            if k == remaining {
                (segment_sum(events, from..n, active, rule), remaining)
            } else {
                let mut r = rng(derive_seed(derive_seed(seed, tags::RATE_SUBSAMPLE), from as u64));
                let mut idx: Vec<usize> =
                    sample(&mut r, remaining, k).into_iter().map(|i| i + from).collect();
                idx.sort_unstable();
                (indexed_sum(events, &idx, active, rule), k)
            }
        }
    };
    Ok(RateEstimate {
        rates: mean_rates(&sum, count, active),
        basis,
    })
}

fn mean_rates(sum: &ExactVec, count: usize, active: &ActivationVector) -> Vec<f64> {
    (0..sum.len())
        .map(|c| {
            if active.is_active(c) {
                sum.value(c) / count as f64
            } else {
                0.0
            }
        })
        .collect()
}

/// One constant-activation stretch of the parallel run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    /// First event of the segment (1-based).
    pub start: usize,
    /// Last event of the segment (1-based, inclusive).
    pub end: usize,
    pub activation: ActivationVector,
    /// Campaign predicted to cap at `end`; `None` when no active campaign
    /// has a positive rate and the run was finished frozen.
    pub capper: Option<usize>,
    pub spends_at_end: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelSimReport {
    pub trajectory: Trajectory,
    pub segments: Vec<SegmentRecord>,
    pub iterations: usize,
}

pub fn parallel_simulate<R: AuctionRule>(
    events: &[Event<R::Payload>],
    campaigns: &CampaignSet,
    rule: &R,
    basis: RateBasis,
) -> Result<ParallelSimReport> {
    campaigns.check_rule(rule)?;
    let n = events.len();
    if n == 0 {
        return Err(SimError::Empty("event sequence"));
    }
    let k = campaigns.len();
    let budgets = campaigns.budgets();
    let mut spends = ExactVec::zeros(k);
    let mut active = ActivationVector::all_active(k);
    let mut capping = vec![None; k];
    let mut segments = Vec::new();
    let mut consumed = 0usize;

    while consumed < n && active.any_active() {
        let current = spends.values();
        // The remaining-mean basis shares its chunk sums with the segment sum.
        let (rates, chunks) = match basis {
            RateBasis::ExactRemainingMean => {
                let chunks = chunk_sums(events, consumed..n, &active, rule);
                let mut total = ExactVec::zeros(k);
                for ch in &chunks {
                    total.merge(ch);
                }
                (mean_rates(&total, n - consumed, &active), Some(chunks))
            }
            other => (
                estimate_mean_rate(events, consumed, &active, rule, other)?.rates,
                None,
            ),
        };

        let capper = active
            .active_indices()
            .filter(|&c| rates[c] > 0.0)
            .map(|c| (c, (budgets[c] - current[c]) / rates[c]))
            .fold(None::<(usize, f64)>, |best, (c, t)| match best {
                Some((_, bt)) if bt <= t => best,
                _ => Some((c, t)),
            });

        let next = match capper {
            Some((_, t)) => {
                // absorb the few-ulp error of the mean before flooring
                let steps = if t.is_finite() { (t + t.abs() * 1e-9).floor() } else { n as f64 };
                let steps = if steps < 1.0 { 1 } else { steps.min(n as f64) as usize };
                (consumed + steps).min(n)
            }
            None => n,
        };

        let seg = match &chunks {
            Some(chunks) => {
                let full = (next - consumed) / CHUNK;
                let mut seg = ExactVec::zeros(k);
                for ch in &chunks[..full] {
                    seg.merge(ch);
                }
                let tail_start = consumed + full * CHUNK;
                if tail_start < next {
                    seg.merge(&segment_sum(events, tail_start..next, &active, rule));
                }
                seg
            }
            None => segment_sum(events, consumed..next, &active, rule),
        };
        spends.merge(&seg);
        let at_end = spends.values();

        segments.push(SegmentRecord {
            start: consumed + 1,
            end: next,
            activation: active.clone(),
            capper: capper.map(|(c, _)| c),
            spends_at_end: at_end.clone(),
        });

        match capper {
            Some((c, _)) => {
                if next < n || at_end[c] >= budgets[c] {
                    capping[c] = Some(next);
                }
                active.deactivate_in_place(c)?;
            }
            None => break,
        }
        consumed = next;
    }

    let iterations = segments.len();
    Ok(ParallelSimReport {
        trajectory: Trajectory::new(spends.values(), capping),
        segments,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequential::simulate_sequential;
    use crate::testing::{unit_events, CoupledPair, ToyRule, ZeroRule};

    #[test]
    fn constant_stream_rate() {
        let rule = ToyRule::constant(&[0.3, 0.2], 50);
        let events = rule.events();
        let a = ActivationVector::all_active(2);
        for from in [0, 17, 49] {
            let f = estimate_mean_rate(&events, from, &a, &rule, RateBasis::ExactRemainingMean)
                .unwrap();
            assert!((f.rates[0] - 0.3).abs() < 1e-15);
            assert!((f.rates[1] - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn coupled_rate_after_first_exit() {
        let a = ActivationVector::from_bits(vec![false, true]);
        let f = estimate_mean_rate(&unit_events(4), 1, &a, &CoupledPair, Default::default())
            .unwrap();
        assert_eq!(f.rates[0], 0.0);
        assert!((f.rates[1] - 0.4).abs() < 1e-15);
    }

    #[test]
    fn full_rate_subsample_is_exact_mean() {
        let rule = ToyRule::scattered(3, 1000);
        let events = rule.events();
        let a = ActivationVector::all_active(3);
        let exact = estimate_mean_rate(&events, 100, &a, &rule, RateBasis::ExactRemainingMean)
            .unwrap();
        let sub = estimate_mean_rate(
            &events,
            100,
            &a,
            &rule,
            RateBasis::Subsampled { rate: 1.0, seed: 3 },
        )
        .unwrap();
        assert_eq!(exact.rates, sub.rates);
    }

    #[test]
    fn no_remaining_events_is_an_error() {
        let a = ActivationVector::all_active(1);
        assert!(estimate_mean_rate(&unit_events(3), 3, &a, &ZeroRule(1), Default::default())
            .is_err());
    }

    #[test]
    fn uncapped_run_is_one_segment_and_bitwise_equal() {
        let rule = ToyRule::scattered(5, 7_000);
        let events = rule.events();
        let campaigns = CampaignSet::new(vec![1e9; 5]).unwrap();
        let truth = simulate_sequential(&events, &campaigns, &rule, Default::default()).unwrap();
        let rep = parallel_simulate(&events, &campaigns, &rule, Default::default()).unwrap();
        assert_eq!(rep.segments.len(), 1);
        assert_eq!((rep.segments[0].start, rep.segments[0].end), (1, 7_000));
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&truth.final_spends), bits(&rep.trajectory.final_spends));
        assert!(rep.trajectory.capping_order.is_empty());
    }

    #[test]
    fn coupled_toy_hand_execution() {
        // F=(0.3,0.2); c0 time 0.5/0.3 -> floor 1, c1 time 5 -> c0 predicted at 1.
        // Then F=(0,0.4), s1=0.2, (1-0.2)/0.4 = 2 -> N2 = 3, s1 = 1.0.
        // Third iteration: no active campaign left.
        let campaigns = CampaignSet::new(vec![0.5, 1.0]).unwrap();
        let rep = parallel_simulate(&unit_events(4), &campaigns, &CoupledPair, Default::default())
            .unwrap();
        assert_eq!(rep.iterations, 2);
        assert_eq!(rep.segments[0].capper, Some(0));
        assert_eq!(rep.segments[0].end, 1);
        assert_eq!(rep.segments[1].capper, Some(1));
        assert!((rep.trajectory.final_spends[0] - 0.3).abs() < 1e-12);
        assert!((rep.trajectory.final_spends[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rates_finish_frozen() {
        let campaigns = CampaignSet::new(vec![1.0, 1.0]).unwrap();
        let rep = parallel_simulate(&unit_events(10), &campaigns, &ZeroRule(2), Default::default())
            .unwrap();
        assert_eq!(rep.segments.len(), 1);
        assert_eq!(rep.segments[0].capper, None);
        assert_eq!(rep.segments[0].end, 10);
    }

    #[test]
    fn one_exit_per_iteration() {
        let rule = ToyRule::scattered(6, 5_000);
        let events = rule.events();
        let campaigns = CampaignSet::new(vec![100.0, 300.0, 500.0, 900.0, 1500.0, 4000.0]).unwrap();
        for basis in [
            RateBasis::ExactRemainingMean,
            RateBasis::ConsumedPrefix,
            RateBasis::Subsampled { rate: 0.2, seed: 1 },
        ] {
            let rep = parallel_simulate(&events, &campaigns, &rule, basis).unwrap();
            assert!(rep.iterations <= 6);
            let mut expect_start = 1;
            for w in rep.segments.windows(2) {
                assert_eq!(w[0].activation.count_active(), w[1].activation.count_active() + 1);
            }
            for s in &rep.segments {
                assert_eq!(s.start, expect_start);
                expect_start = s.end + 1;
            }
        }
    }
}
