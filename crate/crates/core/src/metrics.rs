//! Error metrics between an oracle trajectory and an estimate.
//!
//! The relative error of campaign `c` is `|s^c - s_hat^c| / s^c`, with `s`
//! the oracle's final spend. Campaigns with `s^c = 0` have no relative error;
//! they are excluded from every aggregate and counted.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::model::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignError {
    pub campaign: usize,
    pub truth: f64,
    pub estimate: f64,
    pub relative_error: Option<f64>,
    pub truth_capping: Option<usize>,
    pub estimate_capping: Option<usize>,
    /// `estimate - truth` when both capped.
    pub capping_delta: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryComparison {
    pub campaigns: Vec<CampaignError>,
    pub max: f64,
    pub median: f64,
    pub mean: f64,
    pub spend_weighted: f64,
    pub zero_spend_excluded: usize,
    /// Campaigns that capped in exactly one of the two trajectories.
    pub capping_mismatches: usize,
}

pub fn relative_error(truth: f64, estimate: f64) -> Option<f64> {
    (truth != 0.0).then(|| (estimate - truth).abs() / truth.abs())
}

/// `sum_c w_c |s_hat^c - s^c| / s^c` with `w_c = s^c / sum s`, over campaigns
/// with nonzero truth. Returns the metric and the number excluded.
pub fn spend_weighted_error(truth: &[f64], estimate: &[f64]) -> Result<(f64, usize)> {
    if truth.len() != estimate.len() {
        return Err(SimError::DimensionMismatch {
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    let mut num = 0.0;
    let mut den = 0.0;
    let mut excluded = 0;
    for (&s, &e) in truth.iter().zip(estimate) {
        if s == 0.0 {
            excluded += 1;
        } else {
            // w * |e - s| / s == |e - s| / sum s
            num += (e - s).abs();
            den += s.abs();
        }
    }
    Ok((if den > 0.0 { num / den } else { 0.0 }, excluded))
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

pub fn compare_trajectories(truth: &Trajectory, estimate: &Trajectory) -> Result<TrajectoryComparison> {
    let k = truth.final_spends.len();
    if estimate.final_spends.len() != k {
        return Err(SimError::DimensionMismatch {
            expected: k,
            got: estimate.final_spends.len(),
        });
    }
    let campaigns: Vec<CampaignError> = (0..k)
        .map(|c| {
            let (s, e) = (truth.final_spends[c], estimate.final_spends[c]);
            let (tc, ec) = (truth.capping_times[c], estimate.capping_times[c]);
            CampaignError {
                campaign: c,
                truth: s,
                estimate: e,
                relative_error: relative_error(s, e),
                truth_capping: tc,
                estimate_capping: ec,
                capping_delta: tc.zip(ec).map(|(a, b)| b as i64 - a as i64),
            }
        })
        .collect();
    let errs: Vec<f64> = campaigns.iter().filter_map(|c| c.relative_error).collect();
    let (spend_weighted, zero_spend_excluded) = spend_weighted_error(&truth.final_spends, &estimate.final_spends)?;
    Ok(TrajectoryComparison {
        max: errs.iter().copied().fold(0.0, f64::max),
        median: median(&errs),
        mean: if errs.is_empty() { 0.0 } else { errs.iter().sum::<f64>() / errs.len() as f64 },
        spend_weighted,
        zero_spend_excluded,
        capping_mismatches: campaigns
            .iter()
            .filter(|c| c.truth_capping.is_some() != c.estimate_capping.is_some())
            .count(),
        campaigns,
    })
}
