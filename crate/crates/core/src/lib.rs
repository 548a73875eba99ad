//! Counterfactual replay of budget-capped auction systems.
//!
//! Campaigns spend on a stream of auction events until their budgets run
//! out; once capped they stop bidding, which reallocates spend to the rest.
//! This crate provides
//!
//! * an exact sequential replay ([`sequential`]), the ground truth;
//! * a segment-wise parallel simulation ([`parallel`]);
//! * a stochastic fixed-point estimator of capping times ([`estimator`]);
//! * the estimate / refine / aggregate pipeline built on it ([`s2a`]);
//! * a synthetic first-price environment ([`synthetic`]) and a keyword
//!   bid-log environment ([`bidlog`]);
//! * assumption diagnostics ([`diagnostics`]), comparison metrics
//!   ([`metrics`]) and an experiment registry ([`experiments`]).
//!
//! All spend totals are accumulated exactly ([`exact`]), so results are
//! bit-identical whatever the number of worker threads.

pub mod aggregate;
pub mod bidlog;
pub mod diagnostics;
pub mod error;
pub mod estimator;
pub mod exact;
pub mod experiments;
pub mod metrics;
pub mod model;
pub mod parallel;
pub mod rng;
pub mod s2a;
pub mod sequential;
pub mod synthetic;
pub mod testing;

pub use error::{Result, SimError};
pub use model::{
    activation_from_state, ActivationVector, AssumptionParams, AuctionRule, CampaignSet,
    CountingRule, Event, SpendState, Trajectory,
};
