//! Full estimate / refine / aggregate pipeline with its consistency checks
//! and evaluation accounting.

use burnout_sim::estimator::{ActivationDraw, EstimatorConfig};
use burnout_sim::metrics::compare_trajectories;
use burnout_sim::s2a::{cost_model, sort2aggregate, S2aConfig};
use burnout_sim::sequential::simulate_sequential;
use burnout_sim::synthetic::{SyntheticConfig, SyntheticInstance};
use burnout_sim::CountingRule;

fn main() -> burnout_sim::Result<()> {
    let inst = SyntheticInstance::generate(&SyntheticConfig {
        n: 100_000,
        k: 50,
        seed: 3,
        ..Default::default()
    })?;
    let rule = CountingRule::new(inst.rule());
    let est = EstimatorConfig {
        rho: 0.1,
        eta: 0.5,
        batch: 10,
        sweeps: 50,
        decay: true,
        draw: ActivationDraw::Shared,
        ..Default::default()
    };
    let report = sort2aggregate(&inst.events, &inst.campaigns, &rule, &est, &S2aConfig::default())?;
    let measured = rule.evaluations();

    rule.reset();
    let truth = simulate_sequential(&inst.events, &inst.campaigns, &rule, Default::default())?;
    let cmp = compare_trajectories(&truth, &report.trajectory)?;
    println!("spend-weighted error {:.4}, median {:.4}", cmp.spend_weighted, cmp.median);
    println!(
        "{} / {} boundary checks pass (tolerance {:.3})",
        report.checks.iter().filter(|c| c.passed).count(),
        report.checks.len(),
        report.tolerance
    );

    let model = cost_model(inst.events.len(), 1e-6, est.sweeps, est.rho, rayon::current_num_threads())?;
    println!(
        "evaluations: estimation {} (model {}), aggregation {} (model {}), refinement {}; total measured {measured}",
        report.evaluations.estimation,
        model.estimation_evaluations,
        report.evaluations.aggregation,
        model.aggregation_evaluations,
        report.evaluations.refinement_extra
    );
    println!("modelled speedup over a sequential replay: {:.1}x", model.speedup());

    let mut csv = Vec::new();
    report.write_comparison_csv(&inst.campaigns, Some(&truth), &mut csv)?;
    print!("{}", String::from_utf8_lossy(&csv).lines().take(4).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
