//! Domain types: events, campaigns, activation, spend state and the auction
//! rule contract.
//!
//! Campaigns are indexed `0..K`. Event positions are 0-based; a capping time
//! `n` counts events, i.e. campaign `c` has capping time `n` when its spend
//! first reaches its budget after the `n`-th event (`1 <= n <= N`).

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};

/// One auction opportunity. `id` is the index the rule may use to look up
/// precomputed data; `payload` is interpreted by the rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Event<P> {
    pub id: usize,
    pub payload: P,
}

impl<P> Event<P> {
    pub fn new(id: usize, payload: P) -> Self {
        Self { id, payload }
    }
}

/// Wraps payloads into events with contiguous ids `0..n`.
pub fn events_from_payloads<P>(payloads: impl IntoIterator<Item = P>) -> Vec<Event<P>> {
    payloads
        .into_iter()
        .enumerate()
        .map(|(id, payload)| Event { id, payload })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSet {
    budgets: Vec<f64>,
}

impl CampaignSet {
    pub fn new(budgets: Vec<f64>) -> Result<Self> {
        if budgets.is_empty() {
            return Err(SimError::Empty("campaign set"));
        }
        if let Some((c, b)) = budgets
            .iter()
            .enumerate()
            .find(|(_, b)| !(b.is_finite() && **b > 0.0))
        {
            return Err(invalid("budgets", format!("campaign {c} has budget {b}")));
        }
        Ok(Self { budgets })
    }

    pub fn len(&self) -> usize {
        self.budgets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.budgets.is_empty()
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }

    pub fn budget(&self, c: usize) -> f64 {
        self.budgets[c]
    }

    pub(crate) fn check_rule<R: AuctionRule + ?Sized>(&self, rule: &R) -> Result<()> {
        if rule.num_campaigns() != self.len() {
            return Err(SimError::DimensionMismatch {
                expected: self.len(),
                got: rule.num_campaigns(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ActivationVector {
    bits: Vec<bool>,
}

impl ActivationVector {
    pub fn all_active(k: usize) -> Self {
        Self {
            bits: vec![true; k],
        }
    }

    pub fn none_active(k: usize) -> Self {
        Self {
            bits: vec![false; k],
        }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_active(&self, c: usize) -> bool {
        self.bits[c]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count_active(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn any_active(&self) -> bool {
        self.bits.iter().any(|b| *b)
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(c, b)| b.then_some(c))
    }

    /// `a - {c}`: campaign `c` switched off, everything else unchanged.
    pub fn deactivate(&self, c: usize) -> Result<Self> {
        let mut out = self.clone();
        out.deactivate_in_place(c)?;
        Ok(out)
    }

    pub fn deactivate_in_place(&mut self, c: usize) -> Result<()> {
        match self.bits.get_mut(c) {
            Some(bit) => {
                *bit = false;
                Ok(())
            }
            None => Err(SimError::CampaignOutOfRange {
                index: c,
                count: self.bits.len(),
            }),
        }
    }

    pub(crate) fn set(&mut self, c: usize, active: bool) {
        self.bits[c] = active;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpendState {
    pub spends: Vec<f64>,
    pub event_index: usize,
}

impl SpendState {
    pub fn zero(k: usize) -> Self {
        Self {
            spends: vec![0.0; k],
            event_index: 0,
        }
    }
}

/// Bit `c` is set iff `spends[c] < budgets[c]`; reaching the budget exactly
/// counts as capped.
pub fn activation_from_state(state: &SpendState, campaigns: &CampaignSet) -> Result<ActivationVector> {
    if state.spends.len() != campaigns.len() {
        return Err(SimError::DimensionMismatch {
            expected: campaigns.len(),
            got: state.spends.len(),
        });
    }
    Ok(ActivationVector {
        bits: state
            .spends
            .iter()
            .zip(campaigns.budgets())
            .map(|(s, b)| s < b)
            .collect(),
    })
}

/// The auction mechanism `f(e, a)`: per-campaign spend increments for one
/// event under an activation vector.
///
/// Implementations must be pure functions of `(event, active)`, must never
/// charge an inactive campaign, and must keep every increment within
/// `[0, max_increment()]`. `max_increment` is the per-event bound `C / N`.
pub trait AuctionRule: Sync {
    type Payload: Sync;

    fn num_campaigns(&self) -> usize;

    fn max_increment(&self) -> f64;

    /// Writes every component of `f(event, active)` into `out` (length K).
    fn spend(&self, event: &Event<Self::Payload>, active: &ActivationVector, out: &mut [f64]);
}

impl<R: AuctionRule + ?Sized> AuctionRule for &R {
    type Payload = R::Payload;

    fn num_campaigns(&self) -> usize {
        (**self).num_campaigns()
    }

    fn max_increment(&self) -> f64 {
        (**self).max_increment()
    }

    fn spend(&self, event: &Event<Self::Payload>, active: &ActivationVector, out: &mut [f64]) {
        (**self).spend(event, active, out)
    }
}

/// Counts rule evaluations; used for cost accounting.
#[derive(Debug)]
pub struct CountingRule<R> {
    inner: R,
    evaluations: AtomicU64,
}

impl<R> CountingRule<R> {
    pub fn new(inner: R) -> Self {
        Self {
            inner,
            evaluations: AtomicU64::new(0),
        }
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    pub fn inner(&self) -> &R {
        &self.inner
    }
}

impl<R: AuctionRule> AuctionRule for CountingRule<R> {
    type Payload = R::Payload;

    fn num_campaigns(&self) -> usize {
        self.inner.num_campaigns()
    }

    fn max_increment(&self) -> f64 {
        self.inner.max_increment()
    }

    fn spend(&self, event: &Event<Self::Payload>, active: &ActivationVector, out: &mut [f64]) {
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        self.inner.spend(event, active, out)
    }
}

/// Constants of the three modelling assumptions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionParams {
    /// Small-contribution constant: every increment is below `c / N`.
    pub c: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
}

impl AssumptionParams {
    pub fn new(c: f64, gamma: f64, delta: f64, epsilon: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(invalid("C", "must be positive"));
        }
        if !(gamma > 0.0) {
            return Err(invalid("gamma", "must be positive"));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(invalid("delta", "must lie in (0, 1)"));
        }
        if !(epsilon > 0.0) {
            return Err(invalid("epsilon", "must be positive"));
        }
        Ok(Self {
            c,
            gamma,
            delta,
            epsilon,
        })
    }
}

/// Outcome of a replay (exact or estimated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub final_spends: Vec<f64>,
    /// Event count after which the campaign first reached its budget.
    pub capping_times: Vec<Option<usize>>,
    /// `(campaign, capping time)` sorted by time, then campaign.
    pub capping_order: Vec<(usize, usize)>,
    pub checkpoints: Vec<(usize, Vec<f64>)>,
}

impl Trajectory {
    pub fn new(final_spends: Vec<f64>, capping_times: Vec<Option<usize>>) -> Self {
        let mut capping_order: Vec<(usize, usize)> = capping_times
            .iter()
            .enumerate()
            .filter_map(|(c, t)| t.map(|t| (c, t)))
            .collect();
        capping_order.sort_by_key(|&(c, t)| (t, c));
        Self {
            final_spends,
            capping_times,
            capping_order,
            checkpoints: Vec::new(),
        }
    }

    pub fn num_campaigns(&self) -> usize {
        self.final_spends.len()
    }

    pub fn capped_count(&self) -> usize {
        self.capping_order.len()
    }

    pub fn capped_fraction(&self) -> f64 {
        self.capped_count() as f64 / self.num_campaigns().max(1) as f64
    }

    /// Rows `campaign,final_spend,capping_time`; the capping time is empty
    /// for campaigns that never capped.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["campaign", "final_spend", "capping_time"])?;
        for (c, (s, t)) in self.final_spends.iter().zip(&self.capping_times).enumerate() {
            out.write_record([c.to_string(), s.to_string(), t.map(|t| t.to_string()).unwrap_or_default()])?;
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(spends: &[f64]) -> SpendState {
        SpendState {
            spends: spends.to_vec(),
            event_index: 0,
        }
    }

    #[test]
    fn activation_examples() {
        let ones = CampaignSet::new(vec![1.0, 1.0]).unwrap();
        let a = activation_from_state(&state(&[0.0, 0.0]), &ones).unwrap();
        assert_eq!(a.bits(), &[true, true]);
        let a = activation_from_state(&state(&[1.0, 0.2]), &ones).unwrap();
        assert_eq!(a.bits(), &[false, true]);
        let a = activation_from_state(&state(&[0.999, 1.001]), &ones).unwrap();
        assert_eq!(a.bits(), &[true, false]);
    }

    #[test]
    fn activation_dimension_mismatch() {
        let ones = CampaignSet::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            activation_from_state(&state(&[0.0]), &ones),
            Err(SimError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn deactivate_examples() {
        let a = ActivationVector::from_bits(vec![true, true, true]);
        assert_eq!(a.deactivate(1).unwrap().bits(), &[true, false, true]);
        let a = ActivationVector::from_bits(vec![true, false, true]);
        assert_eq!(a.deactivate(1).unwrap().bits(), &[true, false, true]);
        let a = ActivationVector::none_active(2);
        assert_eq!(a.deactivate(0).unwrap(), a);
        assert!(matches!(
            a.deactivate(2),
            Err(SimError::CampaignOutOfRange { index: 2, count: 2 })
        ));
    }

    #[test]
    fn deactivate_commutes() {
        let a = ActivationVector::all_active(5);
        let x = a.deactivate(1).unwrap().deactivate(3).unwrap();
        let y = a.deactivate(3).unwrap().deactivate(1).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.deactivate(3).unwrap(), x);
    }

    #[test]
    fn campaign_set_rejects_bad_budgets() {
        assert!(CampaignSet::new(vec![]).is_err());
        assert!(CampaignSet::new(vec![1.0, 0.0]).is_err());
        assert!(CampaignSet::new(vec![-1.0]).is_err());
        assert!(CampaignSet::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn assumption_params_validation() {
        assert!(AssumptionParams::new(1.0, 1.0, 0.1, 0.01).is_ok());
        assert!(AssumptionParams::new(0.0, 1.0, 0.1, 0.01).is_err());
        assert!(AssumptionParams::new(1.0, 1.0, 1.0, 0.01).is_err());
        assert!(AssumptionParams::new(1.0, -1.0, 0.5, 0.01).is_err());
    }

    #[test]
    fn trajectory_orders_by_time_then_index() {
        let t = Trajectory::new(vec![1.0, 2.0, 3.0], vec![Some(5), None, Some(5)]);
        assert_eq!(t.capping_order, vec![(0, 5), (2, 5)]);
        assert_eq!(t.capped_count(), 2);
    }
}
