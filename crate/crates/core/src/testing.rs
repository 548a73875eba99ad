//! Small hand-checkable auction rules used by tests and examples.

use crate::model::{events_from_payloads, ActivationVector, AuctionRule, Event};
use crate::rng::{derive_seed, substream};
use rand::Rng;

/// Uncoupled rule: campaign `c` spends a fixed per-event amount `w[e][c]`
/// whenever it is active, independently of the others.
#[derive(Debug, Clone)]
pub struct ToyRule {
    k: usize,
    weights: Vec<f64>,
    bound: f64,
}

impl ToyRule {
    /// Per-event weights drawn uniformly from `[0, 1)`.
    pub fn scattered(k: usize, n: usize) -> Self {
        let seed = derive_seed(0x70_7e, (k * 1_000_003 + n) as u64);
        let weights = (0..n)
            .flat_map(|e| {
                let mut r = substream(seed, e as u64);
                (0..k).map(move |_| r.random::<f64>()).collect::<Vec<_>>()
            })
            .collect();
        Self {
            k,
            weights,
            bound: 1.0,
        }
    }

    /// Every event pays `per_event[c]` to each active campaign.
    pub fn constant(per_event: &[f64], n: usize) -> Self {
        let k = per_event.len();
        let weights = (0..n).flat_map(|_| per_event.iter().copied()).collect();
        let bound = per_event.iter().copied().fold(0.0, f64::max);
        Self { k, weights, bound }
    }

    pub fn from_weights(k: usize, weights: Vec<f64>) -> Self {
        assert_eq!(weights.len() % k, 0);
        let bound = weights.iter().copied().fold(0.0, f64::max);
        Self { k, weights, bound }
    }

    pub fn len(&self) -> usize {
        self.weights.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn events(&self) -> Vec<Event<()>> {
        events_from_payloads(std::iter::repeat_n((), self.len()))
    }
}

impl AuctionRule for ToyRule {
    type Payload = ();

    fn num_campaigns(&self) -> usize {
        self.k
    }

    fn max_increment(&self) -> f64 {
        self.bound
    }

    fn spend(&self, event: &Event<()>, active: &ActivationVector, out: &mut [f64]) {
        let row = &self.weights[event.id * self.k..(event.id + 1) * self.k];
        for (c, o) in out.iter_mut().enumerate() {
            *o = if active.is_active(c) { row[c] } else { 0.0 };
        }
    }
}

/// Two campaigns where the first one's exit speeds up the second:
/// `f = (0.3, 0.2)` while campaign 0 is active, `(0, 0.4)` once it is not.
#[derive(Debug, Clone, Copy, Default)]
pub struct CoupledPair;

impl AuctionRule for CoupledPair {
    type Payload = ();

    fn num_campaigns(&self) -> usize {
        2
    }

    fn max_increment(&self) -> f64 {
        0.4
    }

    fn spend(&self, _event: &Event<()>, active: &ActivationVector, out: &mut [f64]) {
        let a1 = if active.is_active(1) { 1.0 } else { 0.0 };
        if active.is_active(0) {
            out[0] = 0.3;
            out[1] = 0.2 * a1;
        } else {
            out[0] = 0.0;
            out[1] = 0.4 * a1;
        }
    }
}

/// Spends nothing, ever.
#[derive(Debug, Clone, Copy)]
pub struct ZeroRule(pub usize);

impl AuctionRule for ZeroRule {
    type Payload = ();

    fn num_campaigns(&self) -> usize {
        self.0
    }

    fn max_increment(&self) -> f64 {
        1.0
    }

    fn spend(&self, _event: &Event<()>, _active: &ActivationVector, out: &mut [f64]) {
        out.fill(0.0);
    }
}

pub fn unit_events(n: usize) -> Vec<Event<()>> {
    events_from_payloads(std::iter::repeat_n((), n))
}
