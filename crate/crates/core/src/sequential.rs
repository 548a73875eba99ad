//! Exact event-by-event replay of the spend dynamics. This is the ground
//! truth every other estimator is measured against.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::exact::{ExactSum, ExactVec};
use crate::model::{ActivationVector, AuctionRule, CampaignSet, Event, Trajectory};
use crate::rng::{derive_seed, rng, tags};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequentialConfig {
    /// Record spends every `checkpoint_stride` events; 0 disables.
    pub checkpoint_stride: usize,
}

/// Checks one evaluation of `f` against the rule contract.
pub(crate) fn check_increments(
    event: usize,
    active: &ActivationVector,
    increments: &[f64],
    bound: f64,
) -> Result<()> {
    for (c, &x) in increments.iter().enumerate() {
        let reason = if !x.is_finite() || x < 0.0 {
            "negative or non-finite"
        } else if x > bound {
            "exceeds the declared per-event bound"
        } else if x != 0.0 && !active.is_active(c) {
            "inactive campaign charged"
        } else {
            continue;
        };
        return Err(SimError::ContractViolation {
            event,
            campaign: c,
            value: x,
            reason,
        });
    }
    Ok(())
}

/// Replays `events` in order. Increments are validated unscaled, then
/// multiplied by `scale`; capping
/// times are reported through `time_of(position, event)`.
fn replay<'a, R, I>(
    events: I,
    campaigns: &CampaignSet,
    rule: &R,
    scale: f64,
    stride: usize,
    time_of: impl Fn(usize, &Event<R::Payload>) -> usize,
) -> Result<Trajectory>
where
    R: AuctionRule,
    R::Payload: 'a,
    I: IntoIterator<Item = &'a Event<R::Payload>>,
{
    campaigns.check_rule(rule)?;
    let k = campaigns.len();
    let budgets = campaigns.budgets();
    let bound = rule.max_increment();
    let mut active = ActivationVector::all_active(k);
    let mut sums = ExactVec::zeros(k);
    let mut current = vec![0.0; k];
    let mut capping = vec![None; k];
    let mut checkpoints = Vec::new();
    let mut buf = vec![0.0; k];
    let mut seen = 0usize;

    for (pos, e) in events.into_iter().enumerate() {
        seen += 1;
        rule.spend(e, &active, &mut buf);
        check_increments(e.id, &active, &buf, bound)?;
        for c in 0..k {
            let x = buf[c];
            if x == 0.0 {
                continue;
            }
            sums.add_at(c, x * scale);
            current[c] = sums.value(c);
            if active.is_active(c) && current[c] >= budgets[c] {
                active.set(c, false);
                capping[c] = Some(time_of(pos, e));
            }
        }
        if stride > 0 && (pos + 1) % stride == 0 {
            checkpoints.push((pos + 1, current.clone()));
        }
    }
    if seen == 0 {
        return Err(SimError::Empty("event sequence"));
    }
    let mut t = Trajectory::new(current, capping);
    t.checkpoints = checkpoints;
    Ok(t)
}

/// `s_0 = 0`, `s_n = s_{n-1} + f(e_n, a_{n-1})`. A campaign spends the whole
/// increment of the event that takes it over budget and is inactive from
/// the next event on.
pub fn simulate_sequential<R: AuctionRule>(
    events: &[Event<R::Payload>],
    campaigns: &CampaignSet,
    rule: &R,
    cfg: SequentialConfig,
) -> Result<Trajectory> {
    replay(events, campaigns, rule, 1.0, cfg.checkpoint_stride, |pos, _| pos + 1)
}

/// `min(B, sum xs)`, with the sum taken exactly and in no particular order.
pub fn trivial_capped_sum(budget: f64, xs: &[f64]) -> f64 {
    let total: ExactSum = xs.iter().copied().collect();
    total.value().min(budget)
}

/// Baseline: replay a uniform subsample of `round(rho * N)` events (original
/// order kept) with every increment scaled by `1 / rho`. Capping times are
/// reported as positions in the full stream.
pub fn naive_sampled_sequential<R: AuctionRule>(
    events: &[Event<R::Payload>],
    campaigns: &CampaignSet,
    rule: &R,
    rho: f64,
    seed: u64,
) -> Result<Trajectory> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid("rho", format!("{rho} is outside (0, 1]")));
    }
    if events.is_empty() {
        return Err(SimError::Empty("event sequence"));
    }
    let n = events.len();
    let k = ((n as f64 * rho).round() as usize).clamp(1, n);
    let mut picked = if k == n {
        (0..n).collect::<Vec<_>>()
    } else {
        sample(&mut rng(derive_seed(seed, tags::NAIVE)), n, k).into_vec()
    };
    picked.sort_unstable();
    let scale = 1.0 / rho;
    let sampled = picked.iter().map(|&i| &events[i]);
    let positions = picked.clone();
    replay(
        sampled,
        campaigns,
        rule,
        scale,
        0,
        move |pos, _| positions[pos] + 1,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{unit_events, CoupledPair, ToyRule, ZeroRule};

    #[test]
    fn coupled_toy_matches_hand_execution() {
        // step 1: (0.3,0.2); step 2: (0.6,0.4) -> c0 caps at 2;
        // steps 3,4 add 0.4 each to c1: 0.8, 1.2 -> c1 caps at 4.
        let campaigns = CampaignSet::new(vec![0.5, 1.0]).unwrap();
        let t = simulate_sequential(&unit_events(4), &campaigns, &CoupledPair, Default::default())
            .unwrap();
        assert!((t.final_spends[0] - 0.6).abs() < 1e-12);
        assert!((t.final_spends[1] - 1.2).abs() < 1e-12);
        assert_eq!(t.capping_times, vec![Some(2), Some(4)]);
        assert_eq!(t.capping_order, vec![(0, 2), (1, 4)]);
    }

    #[test]
    fn huge_budgets_never_cap() {
        let rule = ToyRule::scattered(3, 500);
        let events = rule.events();
        let campaigns = CampaignSet::new(vec![1e6; 3]).unwrap();
        let t = simulate_sequential(&events, &campaigns, &rule, Default::default()).unwrap();
        assert!(t.capping_order.is_empty());
        let mut buf = vec![0.0; 3];
        let mut sums = ExactVec::zeros(3);
        for e in &events {
            rule.spend(e, &ActivationVector::all_active(3), &mut buf);
            sums.add_dense(&buf);
        }
        assert_eq!(t.final_spends, sums.values());
    }

    #[test]
    fn zero_rule_spends_nothing() {
        let campaigns = CampaignSet::new(vec![1.0, 2.0]).unwrap();
        let t = simulate_sequential(&unit_events(10), &campaigns, &ZeroRule(2), Default::default())
            .unwrap();
        assert_eq!(t.final_spends, vec![0.0, 0.0]);
        assert!(t.capping_order.is_empty());
    }

    #[test]
    fn trivial_algorithm_examples() {
        assert_eq!(trivial_capped_sum(10.0, &[3.0, 4.0, 5.0]), 10.0);
        assert_eq!(trivial_capped_sum(100.0, &[3.0, 4.0, 5.0]), 12.0);
        assert_eq!(trivial_capped_sum(0.0, &[3.0, 1.5]), 0.0);
    }

    #[test]
    fn checkpoints_follow_stride() {
        let rule = ToyRule::constant(&[0.1], 10);
        let campaigns = CampaignSet::new(vec![100.0]).unwrap();
        let t = simulate_sequential(
            &rule.events(),
            &campaigns,
            &rule,
            SequentialConfig {
                checkpoint_stride: 4,
            },
        )
        .unwrap();
        let at: Vec<usize> = t.checkpoints.iter().map(|(n, _)| *n).collect();
        assert_eq!(at, vec![4, 8]);
    }

    #[test]
    fn contract_violations_are_reported() {
        struct Bad;
        impl AuctionRule for Bad {
            type Payload = ();
            fn num_campaigns(&self) -> usize {
                1
            }
            fn max_increment(&self) -> f64 {
                0.5
            }
            fn spend(&self, _: &Event<()>, _: &ActivationVector, out: &mut [f64]) {
                out[0] = 0.75;
            }
        }
        let campaigns = CampaignSet::new(vec![10.0]).unwrap();
        let err = simulate_sequential(&unit_events(3), &campaigns, &Bad, Default::default());
        assert!(matches!(err, Err(SimError::ContractViolation { .. })));
    }

    #[test]
    fn empty_events_rejected() {
        let campaigns = CampaignSet::new(vec![1.0]).unwrap();
        assert!(simulate_sequential(&unit_events(0), &campaigns, &ZeroRule(1), Default::default())
            .is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let campaigns = CampaignSet::new(vec![1.0]).unwrap();
        assert!(matches!(
            simulate_sequential(&unit_events(2), &campaigns, &CoupledPair, Default::default()),
            Err(SimError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn naive_at_full_rate_is_the_oracle() {
        let rule = ToyRule::scattered(4, 3_000);
        let events = rule.events();
        let campaigns = CampaignSet::new(vec![200.0, 400.0, 800.0, 1600.0]).unwrap();
        let truth = simulate_sequential(&events, &campaigns, &rule, Default::default()).unwrap();
        let naive = naive_sampled_sequential(&events, &campaigns, &rule, 1.0, 9).unwrap();
        assert_eq!(truth, naive);
    }

    #[test]
    fn naive_constant_stream_half_rate() {
        // 1000 events of 0.01 each; budget 3 caps after 300 events.
        let rule = ToyRule::constant(&[0.01], 1000);
        let campaigns = CampaignSet::new(vec![3.0]).unwrap();
        let events = rule.events();
        let truth = simulate_sequential(&events, &campaigns, &rule, Default::default()).unwrap();
        let naive = naive_sampled_sequential(&events, &campaigns, &rule, 0.5, 3).unwrap();
        let c_over_rho_n = 0.01 * 1000.0 / (0.5 * 1000.0);
        assert!((truth.final_spends[0] - naive.final_spends[0]).abs() <= c_over_rho_n + 1e-12);
    }

    #[test]
    fn naive_rejects_bad_rate() {
        let campaigns = CampaignSet::new(vec![1.0]).unwrap();
        for rho in [0.0, -0.1, 1.5] {
            assert!(naive_sampled_sequential(&unit_events(5), &campaigns, &ZeroRule(1), rho, 0)
                .is_err());
        }
    }
}
