//! Empirical checks of the modelling assumptions: the per-event bound `C`,
//! smoothness of spend reallocation, and concentration of partial sums
//! under random event order.

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SimError};
use crate::exact::ExactSum;
use crate::model::{ActivationVector, AuctionRule, Event};
use crate::rng::{derive_seed, rng, substream, tags};

/// `N * max f^c(e, a)` over all events, the given activations and all
/// campaigns. Any valid `C` is at least this large.
pub fn estimate_c<R: AuctionRule>(
    events: &[Event<R::Payload>],
    rule: &R,
    activations: &[ActivationVector],
) -> Result<f64> {
    if events.is_empty() {
        return Err(SimError::Empty("event sample"));
    }
    if activations.is_empty() {
        return Err(SimError::Empty("activation sample"));
    }
    let k = rule.num_campaigns();
    for a in activations {
        if a.len() != k {
            return Err(SimError::DimensionMismatch {
                expected: k,
                got: a.len(),
            });
        }
    }
    let max = events
        .par_iter()
        .map_init(
            || vec![0.0; k],
            |buf, e| {
                activations.iter().fold(0.0f64, |m, a| {
                    rule.spend(e, a, buf);
                    buf.iter().copied().fold(m, f64::max)
                })
            },
        )
        .reduce(|| 0.0, f64::max);
    Ok(events.len() as f64 * max)
}

/// `count` activations with each bit independently on with probability `p`.
pub fn random_activations(k: usize, count: usize, p: f64, seed: u64) -> Vec<ActivationVector> {
    let mut r = rng(derive_seed(seed, tags::ACTIVATIONS));
    (0..count)
        .map(|_| ActivationVector::from_bits((0..k).map(|_| r.random_bool(p)).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CDiagnosis {
    pub declared: f64,
    pub empirical: f64,
    /// False when the rule exceeded its own declared bound somewhere.
    pub declared_ok: bool,
}

/// Compares the declared `C = N * max_increment` with [`estimate_c`] over
/// full activation plus `extra` random activations.
pub fn diagnose_c<R: AuctionRule>(events: &[Event<R::Payload>], rule: &R, extra: usize, seed: u64) -> Result<CDiagnosis> {
    let k = rule.num_campaigns();
    let mut acts = vec![ActivationVector::all_active(k)];
    acts.extend(random_activations(k, extra, 0.5, seed));
    let empirical = estimate_c(events, rule, &acts)?;
    let declared = events.len() as f64 * rule.max_increment();
    Ok(CDiagnosis {
        declared,
        empirical,
        declared_ok: empirical <= declared,
    })
}

/// Monte-Carlo estimate of the probability that
///
/// ```text
/// sum_{i=m..n} [f^{c'}(e_i, a - {c}) - f^{c'}(e_i, a)] <= gamma * sum_{i=m..n} f^c(e_i, a) + epsilon
/// ```
///
/// fails, over uniformly drawn `c != c'`, intervals `m <= n` and activations
/// with each bit on with probability 1/2 (bit `c` forced on).
pub fn check_smoothness<R: AuctionRule>(
    events: &[Event<R::Payload>],
    rule: &R,
    gamma: f64,
    epsilon: f64,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(invalid("gamma", "must be nonnegative"));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(invalid("epsilon", "must be nonnegative"));
    }
    if trials == 0 {
        return Err(invalid("trials", "must be at least 1"));
    }
    if events.is_empty() {
        return Err(SimError::Empty("event sequence"));
    }
    let k = rule.num_campaigns();
    if k < 2 {
        // there is no other campaign to disturb
        return Ok(0.0);
    }
    let n = events.len();
    let base = derive_seed(seed, tags::SMOOTHNESS);
    let violations: usize = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut r = substream(base, trial as u64);
            let c = r.random_range(0..k);
            let other = r.random_range(0..k - 1);
            let c2 = if other >= c { other + 1 } else { other };
            let (x, y) = (r.random_range(0..n), r.random_range(0..n));
            let (lo, hi) = (x.min(y), x.max(y));
            let mut bits: Vec<bool> = (0..k).map(|_| r.random_bool(0.5)).collect();
            bits[c] = true;
            let a = ActivationVector::from_bits(bits.clone());
            bits[c] = false;
            let without = ActivationVector::from_bits(bits);
            let mut with_buf = vec![0.0; k];
            let mut without_buf = vec![0.0; k];
            let mut lhs = ExactSum::default();
            let mut speed = ExactSum::default();
            for e in &events[lo..=hi] {
                rule.spend(e, &a, &mut with_buf);
                rule.spend(e, &without, &mut without_buf);
                lhs.add(without_buf[c2]);
                lhs.add(-with_buf[c2]);
                speed.add(with_buf[c]);
            }
            usize::from(lhs.value() > gamma * speed.value() + epsilon)
        })
        .sum();
    Ok(violations as f64 / trials as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingConfig {
    pub campaign: usize,
    /// Defaults to full activation.
    pub activation: Option<ActivationVector>,
    /// Prefix length; defaults to `N / 2`.
    pub prefix: Option<usize>,
    /// Defaults to ten points from 0 to `2 C / sqrt(N)`.
    pub t_grid: Option<Vec<f64>>,
    pub permutations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingRow {
    pub t: f64,
    pub empirical_tail: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoeffdingTable {
    pub n: usize,
    pub prefix: usize,
    pub campaign: usize,
    /// Effective `C` used in the bound.
    pub c: f64,
    pub mean: f64,
    pub permutations: usize,
    pub rows: Vec<HoeffdingRow>,
}

impl HoeffdingTable {
    pub fn all_within_bound(&self) -> bool {
        self.rows.iter().all(|r| r.empirical_tail <= r.bound)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "empirical_tail", "bound"])?;
        for r in &self.rows {
            out.write_record([r.t.to_string(), r.empirical_tail.to_string(), r.bound.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Tail frequencies of `|sum_{i<=n} f^c(e_{sigma(i)}, alpha) - n F|` over
/// random orderings `sigma`, tabulated against `2 exp(-2 N t^2 / C^2)`.
pub fn hoeffding_suite<R: AuctionRule>(
    events: &[Event<R::Payload>],
    rule: &R,
    cfg: &HoeffdingConfig,
) -> Result<HoeffdingTable> {
    if cfg.permutations < 100 {
        return Err(invalid("permutations", "need at least 100"));
    }
    if events.is_empty() {
        return Err(SimError::Empty("event sequence"));
    }
    let k = rule.num_campaigns();
    if cfg.campaign >= k {
        return Err(SimError::CampaignOutOfRange {
            index: cfg.campaign,
            count: k,
        });
    }
    let n_total = events.len();
    let prefix = cfg.prefix.unwrap_or(n_total / 2).clamp(1, n_total);
    let alpha = cfg
        .activation
        .clone()
        .unwrap_or_else(|| ActivationVector::all_active(k));
    let c_eff = estimate_c(events, rule, std::slice::from_ref(&alpha))?;

    let xs: Vec<f64> = events
        .par_iter()
        .map_init(
            || vec![0.0; k],
            |buf, e| {
                rule.spend(e, &alpha, buf);
                buf[cfg.campaign]
            },
        )
        .collect();
    let total: ExactSum = xs.iter().copied().collect();
    let mean = total.value() / n_total as f64;
    let centre = prefix as f64 * mean;

    let base = derive_seed(cfg.seed, tags::HOEFFDING);
    let deviations: Vec<f64> = (0..cfg.permutations)
        .into_par_iter()
        .map(|p| {
            let mut r = substream(base, p as u64);
            let s: ExactSum = sample(&mut r, n_total, prefix).into_iter().map(|i| xs[i]).collect();
            (s.value() - centre).abs()
        })
        .collect();

    let grid = cfg.t_grid.clone().unwrap_or_else(|| {
        let t_max = 2.0 * c_eff / (n_total as f64).sqrt();
        (0..10).map(|j| t_max * j as f64 / 9.0).collect()
    });
    let rows = grid
        .into_iter()
        .map(|t| {
            let hits = deviations.iter().filter(|&&d| d >= t).count();
            let bound = if c_eff > 0.0 {
                2.0 * (-2.0 * n_total as f64 * t * t / (c_eff * c_eff)).exp()
            } else if t > 0.0 {
                0.0
            } else {
                2.0
            };
            HoeffdingRow {
                t,
                empirical_tail: hits as f64 / cfg.permutations as f64,
                bound,
            }
        })
        .collect();
    Ok(HoeffdingTable {
        n: n_total,
        prefix,
        campaign: cfg.campaign,
        c: c_eff,
        mean,
        permutations: cfg.permutations,
        rows,
    })
}
