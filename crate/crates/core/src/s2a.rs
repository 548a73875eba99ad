//! Estimate capping order and times, optionally refine them against the
//! events, then aggregate spends over constant-activation segments.
//!
//! Once the capping schedule is fixed every segment is an independent,
//! order-free sum, so step three is a plain data-parallel reduction. A wrong
//! schedule shows up as a capper whose reconstructed spend at its boundary is
//! far from its budget; those boundaries are flagged in the report.
//!
//! Refinement keeps the capping order and moves the times. For capper `c_i`
//! it scans forward from the previous boundary under the plan's activation,
//! using chunk partial sums and a prefix search, to the first event at which
//! `c_i`'s cumulative spend reaches its budget. The scan beyond the estimated
//! time proceeds in windows so that at most one window of events past the
//! crossing is evaluated speculatively. The part of each scan that ends up
//! inside the refined segment doubles as that segment's aggregate.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::aggregate::{chunk_sums, segment_sum, CHUNK};
use crate::error::{invalid, Result, SimError};
use crate::estimator::{estimate_pi, pi_to_capping_schedule, EstimatorConfig, PiVector};
use crate::exact::{ExactSum, ExactVec};
use crate::model::{ActivationVector, AuctionRule, CampaignSet, Event, Trajectory};

/// Ordered deactivation schedule over `N` events. Boundary `(c, t)` means
/// campaign `c` takes part in events `1..=t` and is off afterwards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPlan {
    n: usize,
    k: usize,
    boundaries: Vec<(usize, usize)>,
}

/// One segment of a plan, as 0-based half-open event positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanSegment {
    pub range: Range<usize>,
    pub activation: ActivationVector,
}

impl SegmentPlan {
    pub fn num_events(&self) -> usize {
        self.n
    }

    pub fn num_campaigns(&self) -> usize {
        self.k
    }

    pub fn boundaries(&self) -> &[(usize, usize)] {
        &self.boundaries
    }

    pub fn num_segments(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn segments(&self) -> Vec<PlanSegment> {
        let mut out = Vec::with_capacity(self.num_segments());
        let mut active = ActivationVector::all_active(self.k);
        let mut start = 0;
        for &(c, t) in &self.boundaries {
            out.push(PlanSegment {
                range: start..t,
                activation: active.clone(),
            });
            active.set(c, false);
            start = t;
        }
        out.push(PlanSegment {
            range: start..self.n,
            activation: active,
        });
        out
    }
}

/// Builds the plan for a capping schedule. Entries are ordered by time (ties
/// by campaign index); equal times are then spread into consecutive events so
/// that every boundary is distinct.
pub fn build_segment_plan(schedule: &[(usize, usize)], k: usize, n: usize) -> Result<SegmentPlan> {
    let mut seen = vec![false; k];
    for &(c, t) in schedule {
        if c >= k {
            return Err(SimError::CampaignOutOfRange { index: c, count: k });
        }
        if seen[c] {
            return Err(SimError::InvalidPlan(format!("campaign {c} scheduled twice")));
        }
        seen[c] = true;
        if t == 0 || t > n {
            return Err(SimError::InvalidPlan(format!(
                "capping time {t} for campaign {c} outside 1..={n}"
            )));
        }
    }
    let mut boundaries = schedule.to_vec();
    boundaries.sort_by_key(|&(c, t)| (t, c));
    for i in 1..boundaries.len() {
        let prev = boundaries[i - 1].1;
        if boundaries[i].1 <= prev {
            boundaries[i].1 = (prev + 1).min(n);
        }
    }
    Ok(SegmentPlan { n, k, boundaries })
}

/// Per-segment sums of `f(e, a_segment)` for every segment of `plan`.
pub fn aggregate_segments<R: AuctionRule>(
    events: &[Event<R::Payload>],
    plan: &SegmentPlan,
    rule: &R,
) -> Result<Vec<ExactVec>> {
    check_plan(events, plan, rule)?;
    Ok(plan
        .segments()
        .iter()
        .map(|s| segment_sum(events, s.range.clone(), &s.activation, rule))
        .collect())
}

fn check_plan<R: AuctionRule>(
    events: &[Event<R::Payload>],
    plan: &SegmentPlan,
    rule: &R,
) -> Result<()> {
    if plan.n != events.len() {
        return Err(SimError::InvalidPlan(format!(
            "plan covers {} events, stream has {}",
            plan.n,
            events.len()
        )));
    }
    if plan.k != rule.num_campaigns() {
        return Err(SimError::DimensionMismatch {
            expected: rule.num_campaigns(),
            got: plan.k,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RefineStatus {
    /// The budget was crossed before the next boundary; time is exact.
    Exact,
    /// Not crossed before the next boundary: pushed there. The estimated
    /// order is probably wrong around this boundary.
    Pushed,
    /// Last capper whose budget is never reached: removed from the plan.
    Dropped,
    /// The budget was already exhausted when the segment began, so the
    /// campaign should have capped earlier in the order.
    AlreadyCapped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryRefinement {
    pub campaign: usize,
    pub estimated: usize,
    pub refined: usize,
    pub status: RefineStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub plan: SegmentPlan,
    pub boundaries: Vec<BoundaryRefinement>,
    /// Sums for every segment of the refined plan except the last one.
    pub segment_sums: Vec<ExactVec>,
    /// Events scanned in chunk passes, including speculative ones.
    pub scanned_evaluations: u64,
    /// Scanned events that fell after a crossing, outside `segment_sums`.
    pub speculative_evaluations: u64,
    /// Event-by-event re-evaluation inside crossing chunks.
    pub rescan_evaluations: u64,
}

impl Refinement {
    /// Evaluations that do not contribute to `segment_sums`.
    pub fn extra_evaluations(&self) -> u64 {
        self.speculative_evaluations + self.rescan_evaluations
    }
}

/// Default search window: 5% of the horizon, at least one chunk.
pub fn default_window(n: usize) -> usize {
    (n / 20).max(CHUNK)
}

pub fn refine_boundaries<R: AuctionRule>(
    events: &[Event<R::Payload>],
    campaigns: &CampaignSet,
    rule: &R,
    plan: &SegmentPlan,
    window: usize,
) -> Result<Refinement> {
    campaigns.check_rule(rule)?;
    check_plan(events, plan, rule)?;
    if window == 0 {
        return Err(invalid("window", "must be at least 1"));
    }
    let n = plan.n;
    let k = plan.k;
    let mut cum = ExactVec::zeros(k);
    let mut active = ActivationVector::all_active(k);
    let mut prev = 0usize;
    let mut out_bounds: Vec<(usize, usize)> = Vec::new();
    let mut records = Vec::new();
    let mut sums = Vec::new();
    let mut speculative = 0u64;
    let mut rescans = 0u64;
    let mut scanned_total = 0u64;
    let m = plan.boundaries.len();

    for i in 0..m {
        let (c, estimated) = plan.boundaries[i];
        let budget = campaigns.budget(c);
        let limit = if i + 1 < m { plan.boundaries[i + 1].1.max(prev) } else { n };

        let mut seg = ExactVec::zeros(k);
        let mut running = cum.get(c).clone();
        let mut pos = prev;
        let mut crossing = None;
        let mut target = estimated.saturating_add(window).max(prev + 1).min(limit);
        let already_capped = running.value() >= budget;
        if already_capped {
            crossing = Some(prev);
        }
        while crossing.is_none() && pos < limit {
            let chunks = chunk_sums(events, pos..target, &active, rule);
            scanned_total += (target - pos) as u64;
            let mut found = None;
            for (j, ch) in chunks.iter().enumerate() {
                let mut probe = running.clone();
                probe.merge(ch.get(c));
                if probe.value() >= budget {
                    found = Some(j);
                    break;
                }
                running = probe;
                seg.merge(ch);
            }
            match found {
                Some(j) => {
                    let chunk_start = pos + j * CHUNK;
                    let chunk_end = (chunk_start + CHUNK).min(target);
                    let (t, part, evals) =
                        scan_chunk(events, chunk_start..chunk_end, &active, rule, c, running.clone(), budget);
                    seg.merge(&part);
                    speculative += (target - t) as u64;
                    rescans += evals;
                    crossing = Some(t);
                }
                None => {
                    pos = target;
                    target = (target + window).min(limit);
                }
            }
        }

        let status;
        let refined = match crossing {
            Some(t) if already_capped => {
                status = RefineStatus::AlreadyCapped;
                t
            }
            Some(t) => {
                status = RefineStatus::Exact;
                t
            }
            None if i + 1 == m => {
                // never reaches its budget: it does not cap at all
                records.push(BoundaryRefinement {
                    campaign: c,
                    estimated,
                    refined: n,
                    status: RefineStatus::Dropped,
                });
                // the scanned tail is the final segment, which the caller
                // aggregates itself
                speculative += (n - prev) as u64;
                break;
            }
            None => {
                status = RefineStatus::Pushed;
                limit
            }
        };
        cum.merge(&seg);
        sums.push(seg);
        out_bounds.push((c, refined));
        records.push(BoundaryRefinement {
            campaign: c,
            estimated,
            refined,
            status,
        });
        active.set(c, false);
        prev = refined;
    }

    Ok(Refinement {
        plan: SegmentPlan {
            n,
            k,
            boundaries: out_bounds,
        },
        boundaries: records,
        segment_sums: sums,
        scanned_evaluations: scanned_total,
        speculative_evaluations: speculative,
        rescan_evaluations: rescans,
    })
}

/// Walks `range` one event at a time until campaign `c` reaches `budget`.
/// Returns the crossing time (1-based), the sums up to it and the number of
/// evaluations made.
fn scan_chunk<R: AuctionRule>(
    events: &[Event<R::Payload>],
    range: Range<usize>,
    active: &ActivationVector,
    rule: &R,
    c: usize,
    mut running: ExactSum,
    budget: f64,
) -> (usize, ExactVec, u64) {
    let k = rule.num_campaigns();
    let mut part = ExactVec::zeros(k);
    let mut buf = vec![0.0; k];
    let mut evals = 0;
    for p in range.clone() {
        rule.spend(&events[p], active, &mut buf);
        evals += 1;
        part.add_dense(&buf);
        if buf[c] != 0.0 {
            running.add(buf[c]);
        }
        if running.value() >= budget {
            return (p + 1, part, evals);
        }
    }
    // unreachable when the chunk sum crossed; keep the end as a fallback
    (range.end, part, evals)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct S2aConfig {
    pub refine: bool,
    /// Refinement window in events; `None` uses [`default_window`].
    pub window: Option<usize>,
    /// Boundary tolerance; `None` uses `C/N + eta * N * max_rate`.
    pub tolerance: Option<f64>,
}

impl Default for S2aConfig {
    fn default() -> Self {
        Self {
            refine: true,
            window: None,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCheck {
    pub campaign: usize,
    pub time: usize,
    pub spend_at_boundary: f64,
    pub budget: f64,
    pub passed: bool,
    /// `spend - budget` when the check fails, else 0.
    pub discrepancy: f64,
    pub status: Option<RefineStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnscheduledCheck {
    pub campaign: usize,
    pub final_spend: f64,
    pub budget: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationCounts {
    pub estimation: u64,
    pub refinement_extra: u64,
    pub aggregation: u64,
}

impl EvaluationCounts {
    pub fn total(&self) -> u64 {
        self.estimation + self.refinement_extra + self.aggregation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub trajectory: Trajectory,
    pub pi: PiVector,
    pub boundaries: Vec<(usize, usize)>,
    pub segment_sums: Vec<Vec<f64>>,
    pub checks: Vec<BoundaryCheck>,
    pub unscheduled: Vec<UnscheduledCheck>,
    pub tolerance: f64,
    pub evaluations: EvaluationCounts,
}

impl AggregateReport {
    pub fn all_checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed) && self.unscheduled.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `campaign,budget,estimate,truth,relative_error`; the last two columns
    /// are empty without a reference trajectory.
    pub fn write_comparison_csv<W: std::io::Write>(
        &self,
        campaigns: &CampaignSet,
        truth: Option<&Trajectory>,
        w: W,
    ) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["campaign", "budget", "estimate", "truth", "relative_error"])?;
        for (c, est) in self.trajectory.final_spends.iter().enumerate() {
            let (t, e) = match truth {
                Some(tr) => {
                    let s = tr.final_spends[c];
                    let err = if s > 0.0 {
                        ((est - s).abs() / s).to_string()
                    } else {
                        String::new()
                    };
                    (s.to_string(), err)
                }
                None => (String::new(), String::new()),
            };
            out.write_record([
                c.to_string(),
                campaigns.budget(c).to_string(),
                est.to_string(),
                t,
                e,
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Estimate, optionally refine, then aggregate.
pub fn sort2aggregate<R: AuctionRule>(
    events: &[Event<R::Payload>],
    campaigns: &CampaignSet,
    rule: &R,
    est_cfg: &EstimatorConfig,
    cfg: &S2aConfig,
) -> Result<AggregateReport> {
    campaigns.check_rule(rule)?;
    let n = events.len();
    if n == 0 {
        return Err(SimError::Empty("event sequence"));
    }
    let k = campaigns.len();
    let estimate = estimate_pi(events, campaigns, rule, est_cfg)?;
    let schedule = pi_to_capping_schedule(&estimate.pi, n);
    let plan = build_segment_plan(&schedule.entries, k, n)?;

    let mut counts = EvaluationCounts {
        estimation: estimate.evaluations,
        ..Default::default()
    };
    let (plan, mut sums, statuses) = if cfg.refine {
        let window = cfg.window.unwrap_or_else(|| default_window(n));
        let r = refine_boundaries(events, campaigns, rule, &plan, window)?;
        counts.refinement_extra = r.extra_evaluations();
        // scanned events that landed inside refined segments are aggregation work
        counts.aggregation = r.scanned_evaluations - r.speculative_evaluations;
        let statuses: Vec<Option<RefineStatus>> = r
            .boundaries
            .iter()
            .filter(|b| b.status != RefineStatus::Dropped)
            .map(|b| Some(b.status))
            .collect();
        (r.plan, r.segment_sums, statuses)
    } else {
        let m = plan.boundaries.len();
        (plan, Vec::new(), vec![None; m])
    };

    // whatever the refinement did not cover
    let segments = plan.segments();
    for seg in &segments[sums.len()..] {
        counts.aggregation += seg.range.len() as u64;
        sums.push(segment_sum(events, seg.range.clone(), &seg.activation, rule));
    }

    let mut total = ExactVec::zeros(k);
    let mut at_boundary = Vec::with_capacity(plan.boundaries.len());
    for (i, s) in sums.iter().enumerate() {
        total.merge(s);
        if let Some(&(c, _)) = plan.boundaries.get(i) {
            at_boundary.push(total.value(c));
        }
    }
    let final_spends = total.values();

    let max_inc = rule.max_increment();
    let tolerance = cfg.tolerance.unwrap_or_else(|| {
        let first = &segments[0];
        let len = first.range.len().max(1) as f64;
        let max_rate = (0..k)
            .map(|c| sums[0].value(c) / len)
            .fold(0.0, f64::max);
        max_inc + est_cfg.eta * n as f64 * max_rate
    });

    let checks: Vec<BoundaryCheck> = plan
        .boundaries
        .iter()
        .zip(&at_boundary)
        .zip(&statuses)
        .map(|((&(c, t), &spend), status)| {
            let budget = campaigns.budget(c);
            let passed = spend >= budget - tolerance && spend <= budget + max_inc;
            BoundaryCheck {
                campaign: c,
                time: t,
                spend_at_boundary: spend,
                budget,
                passed,
                discrepancy: if passed { 0.0 } else { spend - budget },
                status: *status,
            }
        })
        .collect();

    let mut scheduled = vec![false; k];
    for &(c, _) in &plan.boundaries {
        scheduled[c] = true;
    }
    let unscheduled = (0..k)
        .filter(|&c| !scheduled[c])
        .map(|c| UnscheduledCheck {
            campaign: c,
            final_spend: final_spends[c],
            budget: campaigns.budget(c),
            passed: final_spends[c] < campaigns.budget(c) + tolerance,
        })
        .collect();

    let mut capping = vec![None; k];
    for (&(c, t), &spend) in plan.boundaries.iter().zip(&at_boundary) {
        if t < n || spend >= campaigns.budget(c) {
            capping[c] = Some(t);
        }
    }

    Ok(AggregateReport {
        trajectory: Trajectory::new(final_spends, capping),
        pi: estimate.pi,
        boundaries: plan.boundaries.clone(),
        segment_sums: sums.iter().map(ExactVec::values).collect(),
        checks,
        unscheduled,
        tolerance,
        evaluations: counts,
    })
}

/// Wall-clock prediction for one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub estimation_secs: f64,
    pub aggregation_secs: f64,
    pub sequential_secs: f64,
    /// `T * round(rho * N)` rule evaluations.
    pub estimation_evaluations: u64,
    /// `N` rule evaluations.
    pub aggregation_evaluations: u64,
}

impl CostModel {
    pub fn total_secs(&self) -> f64 {
        self.estimation_secs + self.aggregation_secs
    }

    pub fn speedup(&self) -> f64 {
        self.sequential_secs / self.total_secs()
    }
}

/// `A` is the wall-clock time of one auction evaluation.
pub fn cost_model(n: usize, auction_secs: f64, sweeps: usize, rho: f64, cores: usize) -> Result<CostModel> {
    if n == 0 || sweeps == 0 || cores == 0 {
        return Err(invalid("cost_model", "N, T and cores must be positive"));
    }
    if !(auction_secs > 0.0) || !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid("cost_model", "A must be positive and rho in (0, 1]"));
    }
    let base = n as f64 * auction_secs;
    Ok(CostModel {
        estimation_secs: base * sweeps as f64 * rho / cores as f64,
        aggregation_secs: base / cores as f64,
        sequential_secs: base,
        estimation_evaluations: sweeps as u64 * (n as f64 * rho).round() as u64,
        aggregation_evaluations: n as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CountingRule;
    use crate::sequential::simulate_sequential;
    use crate::testing::{unit_events, CoupledPair, ToyRule};

    #[test]
    fn empty_schedule_is_one_segment() {
        let plan = build_segment_plan(&[], 3, 1000).unwrap();
        let segs = plan.segments();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].range, 0..1000);
        assert_eq!(segs[0].activation, ActivationVector::all_active(3));
    }

    #[test]
    fn plan_construction() {
        let plan = build_segment_plan(&[(1, 100), (0, 400)], 3, 1000).unwrap();
        let segs = plan.segments();
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[0].range, 0..100);
        assert_eq!(segs[0].activation.bits(), &[true, true, true]);
        assert_eq!(segs[1].range, 100..400);
        assert_eq!(segs[1].activation.bits(), &[true, false, true]);
        assert_eq!(segs[2].range, 400..1000);
        assert_eq!(segs[2].activation.bits(), &[false, false, true]);
    }

    #[test]
    fn plan_errors_and_ties() {
        assert!(build_segment_plan(&[(0, 5), (0, 9)], 2, 10).is_err());
        assert!(build_segment_plan(&[(0, 0)], 2, 10).is_err());
        assert!(build_segment_plan(&[(0, 11)], 2, 10).is_err());
        assert!(build_segment_plan(&[(2, 5)], 2, 10).is_err());
        let plan = build_segment_plan(&[(1, 5), (0, 5), (2, 5)], 3, 10).unwrap();
        assert_eq!(plan.boundaries(), &[(0, 5), (1, 6), (2, 7)]);
    }

    #[test]
    fn toy_aggregation() {
        let plan = build_segment_plan(&[], 2, 4).unwrap();
        let sums = aggregate_segments(&unit_events(4), &plan, &CoupledPair).unwrap();
        let v = sums[0].values();
        assert!((v[0] - 1.2).abs() < 1e-12 && (v[1] - 0.8).abs() < 1e-12);

        // every campaign scheduled out: the last segment spends nothing
        let plan = build_segment_plan(&[(0, 1), (1, 2)], 2, 4).unwrap();
        let sums = aggregate_segments(&unit_events(4), &plan, &CoupledPair).unwrap();
        assert_eq!(sums[2].values(), vec![0.0, 0.0]);
    }

    fn staggered() -> (ToyRule, CampaignSet) {
        let rule = ToyRule::scattered(5, 20_000);
        let campaigns = CampaignSet::new(vec![1500.0, 3000.0, 4500.0, 8000.0, 20_000.0]).unwrap();
        (rule, campaigns)
    }

    fn oracle_plan(rule: &ToyRule, campaigns: &CampaignSet) -> (Trajectory, SegmentPlan) {
        let truth =
            simulate_sequential(&rule.events(), campaigns, rule, Default::default()).unwrap();
        let plan = build_segment_plan(&truth.capping_order, campaigns.len(), rule.len()).unwrap();
        (truth, plan)
    }

    #[test]
    fn oracle_plan_reconstructs_oracle() {
        let (rule, campaigns) = staggered();
        let (truth, plan) = oracle_plan(&rule, &campaigns);
        assert!(!plan.boundaries().is_empty());
        let sums = aggregate_segments(&rule.events(), &plan, &rule).unwrap();
        let mut total = ExactVec::zeros(5);
        for s in &sums {
            total.merge(s);
        }
        let bound = 5.0 * rule.max_increment();
        for (a, b) in total.values().iter().zip(&truth.final_spends) {
            assert!((a - b).abs() <= bound);
        }
        assert_eq!(total.values(), truth.final_spends);
    }

    #[test]
    fn refining_an_exact_plan_changes_nothing() {
        let (rule, campaigns) = staggered();
        let (_, plan) = oracle_plan(&rule, &campaigns);
        let r = refine_boundaries(&rule.events(), &campaigns, &rule, &plan, 500).unwrap();
        assert_eq!(r.plan, plan);
        assert!(r.boundaries.iter().all(|b| b.status == RefineStatus::Exact));
    }

    #[test]
    fn refinement_recovers_perturbed_first_boundary() {
        let (rule, campaigns) = staggered();
        let (truth, plan) = oracle_plan(&rule, &campaigns);
        let mut shifted = plan.boundaries().to_vec();
        let (c0, t0) = shifted[0];
        shifted[0] = (c0, t0 + t0 / 20);
        let perturbed = build_segment_plan(&shifted, 5, rule.len()).unwrap();
        let r = refine_boundaries(&rule.events(), &campaigns, &rule, &perturbed, 1000).unwrap();
        let refined = r.plan.boundaries()[0].1;
        assert!(refined.abs_diff(truth.capping_times[c0].unwrap()) <= 1);
        assert_eq!(r.plan, plan);
    }

    #[test]
    fn refinement_is_idempotent() {
        let (rule, campaigns) = staggered();
        let events = rule.events();
        let noisy = build_segment_plan(&[(0, 2000), (2, 9000), (1, 9100), (3, 15000)], 5, 20_000)
            .unwrap();
        let once = refine_boundaries(&events, &campaigns, &rule, &noisy, 700).unwrap();
        let twice = refine_boundaries(&events, &campaigns, &rule, &once.plan, 700).unwrap();
        assert_eq!(once.plan, twice.plan);
    }

    #[test]
    fn swapped_order_is_flagged() {
        // c0 caps at 200 and c1 at 500 on their own.
        let rule = ToyRule::constant(&[0.01, 0.01], 1000);
        let campaigns = CampaignSet::new(vec![2.0, 5.0]).unwrap();
        let swapped = build_segment_plan(&[(1, 200), (0, 500)], 2, 1000).unwrap();
        let r = refine_boundaries(&rule.events(), &campaigns, &rule, &swapped, 50).unwrap();
        assert!(r
            .boundaries
            .iter()
            .any(|b| matches!(b.status, RefineStatus::Pushed | RefineStatus::AlreadyCapped)));
        assert_eq!(r.boundaries[1].status, RefineStatus::AlreadyCapped);
    }

    #[test]
    fn non_capping_last_boundary_is_dropped() {
        let rule = ToyRule::constant(&[0.01, 0.01], 1000);
        let campaigns = CampaignSet::new(vec![2.0, 50.0]).unwrap();
        let plan = build_segment_plan(&[(0, 190), (1, 900)], 2, 1000).unwrap();
        let r = refine_boundaries(&rule.events(), &campaigns, &rule, &plan, 50).unwrap();
        assert_eq!(r.plan.boundaries(), &[(0, 200)]);
        assert_eq!(r.boundaries[1].status, RefineStatus::Dropped);
    }

    #[test]
    fn uncapped_pipeline_matches_oracle_bitwise() {
        let rule = ToyRule::scattered(4, 10_000);
        let events = rule.events();
        // per-event budget 2 > any increment
        let campaigns = CampaignSet::new(vec![20_000.0; 4]).unwrap();
        let truth = simulate_sequential(&events, &campaigns, &rule, Default::default()).unwrap();
        for refine in [false, true] {
            let rep = sort2aggregate(
                &events,
                &campaigns,
                &rule,
                &EstimatorConfig::default(),
                &S2aConfig {
                    refine,
                    ..Default::default()
                },
            )
            .unwrap();
            assert!(rep.boundaries.is_empty());
            assert_eq!(rep.trajectory.final_spends, truth.final_spends);
            assert!(rep.all_checks_pass());
        }
    }

    #[test]
    fn evaluation_counts_are_exact() {
        let (rule, campaigns) = staggered();
        let events = rule.events();
        let counting = CountingRule::new(&rule);
        let est = EstimatorConfig {
            rho: 0.05,
            eta: 0.5,
            sweeps: 20,
            seed: 2,
            ..Default::default()
        };
        for refine in [false, true] {
            counting.reset();
            let rep = sort2aggregate(
                &events,
                &campaigns,
                &counting,
                &est,
                &S2aConfig {
                    refine,
                    ..Default::default()
                },
            )
            .unwrap();
            assert_eq!(counting.evaluations(), rep.evaluations.total());
            assert_eq!(rep.evaluations.estimation, 20 * 1000);
            assert_eq!(rep.evaluations.aggregation, 20_000);
            if !refine {
                assert_eq!(rep.evaluations.refinement_extra, 0);
            }
        }
    }

    #[test]
    fn cost_model_examples() {
        let m = cost_model(1000, 1e-3, 1, 1.0, 1).unwrap();
        assert_eq!(m.estimation_secs, m.sequential_secs);
        let m = cost_model(1_000_000, 1e-6, 50, 0.001, 8).unwrap();
        assert!((m.estimation_secs - 0.00625).abs() < 1e-12);
        assert!((m.aggregation_secs - 0.125).abs() < 1e-12);
        assert!((m.sequential_secs - 1.0).abs() < 1e-12);
        assert_eq!(m.estimation_evaluations, 50_000);
        assert!(cost_model(0, 1e-6, 1, 0.5, 1).is_err());
        assert!(cost_model(10, 1e-6, 1, 1.5, 1).is_err());
    }
}
