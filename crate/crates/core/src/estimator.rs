//! Stochastic projected fixed-point iteration for scaled capping-out times.
//!
//! `pi[c]` approximates `N^c / N`; `pi[c] == 1` means the campaign survives the
//! whole horizon. Each update draws an activation with
//! `P(a_c = 1) = pi[c]` independently per campaign, evaluates the rule on a
//! sampled event, and moves `pi` by `eta * (b / N - f(e, a))` before clipping
//! back into `[0, 1]^K`. At a fixed point the expected per-event spend matches
//! the per-event budget for every campaign with `pi[c] < 1`.
//!
//! Residuals are reported in budget units: `G(pi) = F(pi) - b` where `F` is
//! the expected spend over all `N` events under Bernoulli(`pi`) activations.
//! [`relative_residual`] divides by the budgets, which is the scale used by
//! the convergence trace and early stopping.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::exact::ExactVec;
use crate::model::{ActivationVector, AuctionRule, CampaignSet, Event};
use crate::rng::{derive_seed, rng, substream, tags};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiVector(Vec<f64>);

impl PiVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(invalid("pi", format!("component {v} outside [0, 1]")));
        }
        Ok(Self(values))
    }

    pub fn ones(k: usize) -> Self {
        Self(vec![1.0; k])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PiInit {
    Ones,
    WarmStart(PiVector),
}

/// How activations are drawn from `pi` for each sampled event.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActivationDraw {
    /// Independent `u_c` per campaign.
    #[default]
    Independent,
    /// One `u` shared by all campaigns: the event sits at relative time `u`
    /// and sees exactly the campaigns with `pi_c > u`.
    Shared,
}

impl ActivationDraw {
    fn fill(self, a: &mut ActivationVector, pi: &[f64], r: &mut impl Rng) {
        match self {
            Self::Independent => {
                for (c, p) in pi.iter().enumerate() {
                    let u: f64 = r.random();
                    a.set(c, u < *p);
                }
            }
            Self::Shared => {
                let u: f64 = r.random();
                for (c, p) in pi.iter().enumerate() {
                    a.set(c, u < *p);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Fraction of events sampled once and reused by every sweep.
    pub rho: f64,
    pub eta: f64,
    /// Number of sweeps over the sample.
    pub sweeps: usize,
    pub seed: u64,
    /// Events per projected step; increments are averaged over the batch.
    pub batch: usize,
    pub init: PiInit,
    /// Use `eta / sqrt(sweep)` instead of a constant step.
    pub decay: bool,
    /// Stop once the relative complementarity violation stays below this for
    /// three consecutive sweeps.
    pub early_stop: Option<f64>,
    pub draw: ActivationDraw,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            rho: 0.01,
            eta: 0.05,
            sweeps: 50,
            seed: 0,
            batch: 1,
            init: PiInit::Ones,
            decay: false,
            early_stop: None,
            draw: ActivationDraw::Independent,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(invalid("rho", format!("{} is outside (0, 1]", self.rho)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(invalid("eta", "must be positive"));
        }
        if self.sweeps == 0 {
            return Err(invalid("sweeps", "must be at least 1"));
        }
        if self.batch == 0 {
            return Err(invalid("batch", "must be at least 1"));
        }
        if let PiInit::WarmStart(pi) = &self.init {
            if pi.len() != k {
                return Err(SimError::DimensionMismatch {
                    expected: k,
                    got: pi.len(),
                });
            }
        }
        if let Some(tol) = self.early_stop {
            if !(tol > 0.0) {
                return Err(invalid("early_stop", "tolerance must be positive"));
            }
        }
        Ok(())
    }

    /// `round(N * rho)`, the number of sampled events.
    pub fn sample_size(&self, n: usize) -> usize {
        (n as f64 * self.rho).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub pi: Vec<f64>,
    /// In-sweep estimate of `G(pi) / b` from the sweep's own evaluations.
    pub relative_residual: Vec<f64>,
    pub complementarity: f64,
    pub mean_abs_delta: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub sweeps: Vec<SweepRecord>,
}

impl ConvergenceTrace {
    pub fn len(&self) -> usize {
        self.sweeps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sweeps.is_empty()
    }

    /// Writes `sweep,campaign,pi,residual` rows (campaigns 0-based).
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["sweep", "campaign", "pi", "residual"])?;
        for s in &self.sweeps {
            for (c, (p, r)) in s.pi.iter().zip(&s.relative_residual).enumerate() {
                out.write_record([
                    s.sweep.to_string(),
                    c.to_string(),
                    p.to_string(),
                    r.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiEstimate {
    pub pi: PiVector,
    pub trace: ConvergenceTrace,
    /// Positions of the sampled events in the input stream.
    pub sample: Vec<usize>,
    pub evaluations: u64,
}

pub fn estimate_pi<R: AuctionRule>(
    events: &[Event<R::Payload>],
    campaigns: &CampaignSet,
    rule: &R,
    cfg: &EstimatorConfig,
) -> Result<PiEstimate> {
    campaigns.check_rule(rule)?;
    let k_campaigns = campaigns.len();
    cfg.validate(k_campaigns)?;
    let n = events.len();
    let k = cfg.sample_size(n);
    if k == 0 {
        return Err(invalid("rho", format!("round(N * rho) = 0 for N = {n}")));
    }
    let sample_idx = if k >= n {
        (0..n).collect::<Vec<_>>()
    } else {
        sample(&mut rng(derive_seed(cfg.seed, tags::ESTIMATOR_SAMPLE)), n, k).into_vec()
    };

    let budgets = campaigns.budgets();
    let per_event_budget: Vec<f64> = budgets.iter().map(|b| b / n as f64).collect();
    let mut pi = match &cfg.init {
        PiInit::Ones => vec![1.0; k_campaigns],
        PiInit::WarmStart(p) => p.as_slice().to_vec(),
    };
    let draw_seed = derive_seed(cfg.seed, tags::ESTIMATOR_DRAWS);
    let mut trace = ConvergenceTrace::default();
    let mut evaluations = 0u64;
    let mut below = 0usize;

    let mut activations: Vec<ActivationVector> =
        vec![ActivationVector::all_active(k_campaigns); cfg.batch];
    let mut spends: Vec<Vec<f64>> = vec![vec![0.0; k_campaigns]; cfg.batch];

    for sweep in 1..=cfg.sweeps {
        let eta = if cfg.decay {
            cfg.eta / (sweep as f64).sqrt()
        } else {
            cfg.eta
        };
        let mut draws = substream(draw_seed, sweep as u64);
        let mut sweep_spend = ExactVec::zeros(k_campaigns);
        let mut abs_delta = 0.0;

        for batch in sample_idx.chunks(cfg.batch) {
            let m = batch.len();
            for a in activations.iter_mut().take(m) {
                cfg.draw.fill(a, &pi, &mut draws);
            }
            if m == 1 {
                rule.spend(&events[batch[0]], &activations[0], &mut spends[0]);
            } else {
                spends[..m]
                    .par_iter_mut()
                    .zip(&activations[..m])
                    .zip(batch)
                    .for_each(|((out, a), &i)| rule.spend(&events[i], a, out));
            }
            evaluations += m as u64;

            for c in 0..k_campaigns {
                let mut delta = 0.0;
                for s in &spends[..m] {
                    delta += per_event_budget[c] - s[c];
                }
                delta /= m as f64;
                abs_delta += delta.abs() * m as f64;
                pi[c] = (pi[c] + eta * delta).clamp(0.0, 1.0);
            }
            for s in &spends[..m] {
                sweep_spend.add_dense(s);
            }
        }

        let rel: Vec<f64> = (0..k_campaigns)
            .map(|c| (sweep_spend.value(c) / k as f64 * n as f64 - budgets[c]) / budgets[c])
            .collect();
        let comp = complementarity_violation(&pi, &rel);
        trace.sweeps.push(SweepRecord {
            sweep,
            pi: pi.clone(),
            relative_residual: rel,
            complementarity: comp,
            mean_abs_delta: abs_delta / (k * k_campaigns) as f64,
        });
        if let Some(tol) = cfg.early_stop {
            below = if comp < tol { below + 1 } else { 0 };
            if below >= 3 {
                break;
            }
        }
    }

    Ok(PiEstimate {
        pi: PiVector(pi),
        trace,
        sample: sample_idx,
        evaluations,
    })
}

/// Monte-Carlo estimate of `G(pi) = F(pi) - b` where `F(pi)` is the expected
/// spend over `total_events` events with independent Bernoulli(`pi`)
/// activations, estimated from `events` and `mc_draws` activations per event.
pub fn vi_residual<R: AuctionRule>(
    pi: &PiVector,
    events: &[Event<R::Payload>],
    total_events: usize,
    campaigns: &CampaignSet,
    rule: &R,
    mc_draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    vi_residual_with(pi, events, total_events, campaigns, rule, mc_draws, seed, ActivationDraw::Independent)
}

/// [`vi_residual`] with the activations drawn as in [`ActivationDraw`].
#[allow(clippy::too_many_arguments)]
pub fn vi_residual_with<R: AuctionRule>(
    pi: &PiVector,
    events: &[Event<R::Payload>],
    total_events: usize,
    campaigns: &CampaignSet,
    rule: &R,
    mc_draws: usize,
    seed: u64,
    draw: ActivationDraw,
) -> Result<Vec<f64>> {
    campaigns.check_rule(rule)?;
    if events.is_empty() {
        return Err(SimError::Empty("event sample"));
    }
    if mc_draws == 0 {
        return Err(invalid("mc_draws", "must be at least 1"));
    }
    let k = campaigns.len();
    if pi.len() != k {
        return Err(SimError::DimensionMismatch {
            expected: k,
            got: pi.len(),
        });
    }
    let seed = derive_seed(seed, tags::RESIDUAL);
    let parts: Vec<ExactVec> = events
        .par_iter()
        .enumerate()
        .chunks(crate::aggregate::CHUNK / 8)
        .map(|chunk| {
            let mut acc = ExactVec::zeros(k);
            let mut a = ActivationVector::all_active(k);
            let mut buf = vec![0.0; k];
            for (j, e) in chunk {
                let mut r = substream(seed, j as u64);
                for _ in 0..mc_draws {
                    draw.fill(&mut a, pi.as_slice(), &mut r);
                    rule.spend(e, &a, &mut buf);
                    acc.add_dense(&buf);
                }
            }
            acc
        })
        .collect();
    let mut total = ExactVec::zeros(k);
    for p in &parts {
        total.merge(p);
    }
    let samples = (events.len() * mc_draws) as f64;
    Ok((0..k)
        .map(|c| total.value(c) / samples * total_events as f64 - campaigns.budget(c))
        .collect())
}

/// `G_c / b_c`.
pub fn relative_residual(g: &[f64], campaigns: &CampaignSet) -> Vec<f64> {
    g.iter().zip(campaigns.budgets()).map(|(g, b)| g / b).collect()
}

/// Largest violation of `0 <= 1 - pi_c`, `G_c <= 0` and
/// `(1 - pi_c) * G_c = 0` over all campaigns.
pub fn complementarity_violation(pi: &[f64], g: &[f64]) -> f64 {
    assert_eq!(pi.len(), g.len(), "pi and G must have the same length");
    pi.iter()
        .zip(g)
        .map(|(p, g)| {
            let slack = 1.0 - p;
            (slack * g.abs()).max(g.max(0.0)).max((-slack).max(0.0))
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CappingSchedule {
    /// `(campaign, estimated capping time)`, ascending by time then campaign.
    pub entries: Vec<(usize, usize)>,
    pub never_caps: Vec<usize>,
}

/// `N^c = round(pi_c * N)` (kept within `1..=N`) for every `pi_c < 1`.
pub fn pi_to_capping_schedule(pi: &PiVector, n: usize) -> CappingSchedule {
    let mut entries = Vec::new();
    let mut never_caps = Vec::new();
    for (c, &p) in pi.as_slice().iter().enumerate() {
        if p >= 1.0 {
            never_caps.push(c);
        } else {
            let t = ((p * n as f64).round() as usize).clamp(1, n.max(1));
            entries.push((c, t));
        }
    }
    entries.sort_by_key(|&(c, t)| (t, c));
    CappingSchedule {
        entries,
        never_caps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::ToyRule;

    #[test]
    fn huge_budgets_keep_pi_at_one() {
        let rule = ToyRule::scattered(3, 2_000);
        let events = rule.events();
        // per-event budget 10 exceeds any increment (< 1)
        let campaigns = CampaignSet::new(vec![20_000.0; 3]).unwrap();
        let cfg = EstimatorConfig {
            rho: 0.1,
            sweeps: 5,
            ..Default::default()
        };
        let est = estimate_pi(&events, &campaigns, &rule, &cfg).unwrap();
        for s in &est.trace.sweeps {
            assert_eq!(s.pi, vec![1.0; 3]);
        }
        assert_eq!(est.evaluations, 5 * 200);
    }

    #[test]
    fn single_campaign_fixed_point() {
        // x = 1 per event, b / N = 0.3 -> pi* = 0.3
        let n = 10_000;
        let rule = ToyRule::constant(&[1.0], n);
        let campaigns = CampaignSet::new(vec![0.3 * n as f64]).unwrap();
        let cfg = EstimatorConfig {
            rho: 0.05,
            eta: 0.002,
            sweeps: 40,
            seed: 4,
            ..Default::default()
        };
        let est = estimate_pi(&rule.events(), &campaigns, &rule, &cfg).unwrap();
        let p = est.pi.as_slice()[0];
        assert!((p - 0.3).abs() < 0.03, "pi = {p}");
    }

    #[test]
    fn pi_stays_in_box_every_step() {
        let rule = ToyRule::scattered(4, 500);
        let campaigns = CampaignSet::new(vec![5.0, 20.0, 60.0, 400.0]).unwrap();
        for batch in [1, 7] {
            let cfg = EstimatorConfig {
                rho: 1.0,
                eta: 0.5,
                sweeps: 10,
                batch,
                ..Default::default()
            };
            let est = estimate_pi(&rule.events(), &campaigns, &rule, &cfg).unwrap();
            for s in &est.trace.sweeps {
                assert!(s.pi.iter().all(|p| (0.0..=1.0).contains(p)));
            }
        }
    }

    #[test]
    fn config_validation() {
        let rule = ToyRule::constant(&[0.5], 10);
        let campaigns = CampaignSet::new(vec![1.0]).unwrap();
        let ev = rule.events();
        for cfg in [
            EstimatorConfig { rho: 0.0, ..Default::default() },
            EstimatorConfig { rho: 1.5, ..Default::default() },
            EstimatorConfig { eta: 0.0, ..Default::default() },
            EstimatorConfig { sweeps: 0, ..Default::default() },
            EstimatorConfig { batch: 0, ..Default::default() },
            // round(10 * 0.01) = 0 sampled events
            EstimatorConfig { rho: 0.01, ..Default::default() },
            EstimatorConfig {
                rho: 1.0,
                init: PiInit::WarmStart(PiVector::ones(2)),
                ..Default::default()
            },
        ] {
            assert!(estimate_pi(&ev, &campaigns, &rule, &cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn residual_at_zero_pi_is_minus_budget() {
        let rule = ToyRule::scattered(3, 100);
        let campaigns = CampaignSet::new(vec![1.0, 2.0, 3.0]).unwrap();
        let g = vi_residual(
            &PiVector::new(vec![0.0; 3]).unwrap(),
            &rule.events(),
            100,
            &campaigns,
            &rule,
            4,
            0,
        )
        .unwrap();
        assert_eq!(g, vec![-1.0, -2.0, -3.0]);
    }

    #[test]
    fn residual_vanishes_at_analytic_fixed_point() {
        let n = 2_000;
        let rule = ToyRule::constant(&[0.5], n);
        // b/N = 0.2, x = 0.5 -> pi* = 0.4
        let campaigns = CampaignSet::new(vec![0.2 * n as f64]).unwrap();
        let g = vi_residual(
            &PiVector::new(vec![0.4]).unwrap(),
            &rule.events(),
            n,
            &campaigns,
            &rule,
            50,
            1,
        )
        .unwrap();
        // F = N * 0.5 * Bernoulli mean; sd of the mean ~ sqrt(.24 / 1e5)
        let rel = g[0] / campaigns.budget(0);
        assert!(rel.abs() < 0.02, "relative residual {rel}");
    }

    #[test]
    fn residual_positive_when_everyone_overspends() {
        let rule = ToyRule::scattered(3, 1_000);
        let campaigns = CampaignSet::new(vec![50.0, 60.0, 70.0]).unwrap();
        let g = vi_residual(&PiVector::ones(3), &rule.events(), 1_000, &campaigns, &rule, 1, 0)
            .unwrap();
        assert!(g.iter().all(|g| *g > 0.0));
    }

    #[test]
    fn complementarity_examples() {
        assert_eq!(complementarity_violation(&[1.0, 1.0], &[-3.0, 0.0]), 0.0);
        assert_eq!(complementarity_violation(&[0.5], &[0.0]), 0.0);
        assert!(complementarity_violation(&[0.5], &[0.2]) >= 0.2);
        assert_eq!(complementarity_violation(&[1.0], &[0.7]), 0.7);
        assert_eq!(complementarity_violation(&[0.25], &[-0.4]), 0.75 * 0.4);
    }

    #[test]
    fn schedule_examples() {
        assert!(pi_to_capping_schedule(&PiVector::ones(2), 1000).entries.is_empty());
        let s = pi_to_capping_schedule(&PiVector::new(vec![0.25, 0.5]).unwrap(), 1000);
        assert_eq!(s.entries, vec![(0, 250), (1, 500)]);
        let s = pi_to_capping_schedule(&PiVector::new(vec![0.5, 1.0, 0.5, 0.0]).unwrap(), 10);
        assert_eq!(s.entries, vec![(3, 1), (0, 5), (2, 5)]);
        assert_eq!(s.never_caps, vec![1]);
    }

    #[test]
    fn pi_vector_rejects_out_of_box() {
        assert!(PiVector::new(vec![0.5, 1.2]).is_err());
        assert!(PiVector::new(vec![-0.1]).is_err());
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let rule = ToyRule::constant(&[0.5, 0.5], 100);
        let campaigns = CampaignSet::new(vec![10.0, 100.0]).unwrap();
        let cfg = EstimatorConfig {
            rho: 0.5,
            sweeps: 3,
            ..Default::default()
        };
        let est = estimate_pi(&rule.events(), &campaigns, &rule, &cfg).unwrap();
        let mut buf = Vec::new();
        est.trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("sweep,campaign,pi,residual\n"));
        assert_eq!(text.lines().count(), 1 + 3 * 2);
    }
}
