//! Capping proportions from a 1% sample, compared with the oracle's.

use burnout_sim::estimator::{estimate_pi, pi_to_capping_schedule, ActivationDraw, EstimatorConfig};
use burnout_sim::sequential::simulate_sequential;
use burnout_sim::synthetic::{SyntheticConfig, SyntheticInstance};

fn main() -> burnout_sim::Result<()> {
    let inst = SyntheticInstance::generate(&SyntheticConfig { n: 50_000, ..Default::default() })?;
    let rule = inst.rule();
    let cfg = EstimatorConfig {
        rho: 0.01,
        eta: 0.5,
        batch: 10,
        sweeps: 200,
        decay: true,
        draw: ActivationDraw::Shared,
        ..Default::default()
    };
    let est = estimate_pi(&inst.events, &inst.campaigns, &rule, &cfg)?;
    for s in est.trace.sweeps.iter().step_by(40) {
        println!("sweep {:>3}: complementarity {:.4}", s.sweep, s.complementarity);
    }

    let truth = simulate_sequential(&inst.events, &inst.campaigns, &rule, Default::default())?;
    let n = inst.events.len() as f64;
    println!("campaign  pi_hat  oracle");
    for (c, p) in est.pi.as_slice().iter().enumerate() {
        let oracle = truth.capping_times[c].map_or(1.0, |t| t as f64 / n);
        println!("{c:>8}  {p:.3}   {oracle:.3}");
    }
    let sched = pi_to_capping_schedule(&est.pi, inst.events.len());
    println!("{} campaigns scheduled to cap, {} never", sched.entries.len(), sched.never_caps.len());
    println!("{} rule evaluations", est.evaluations);
    Ok(())
}
