//! Segment-wise parallel simulation against the sequential oracle.

use burnout_sim::metrics::compare_trajectories;
use burnout_sim::parallel::{parallel_simulate, RateBasis};
use burnout_sim::sequential::simulate_sequential;
use burnout_sim::synthetic::{SyntheticConfig, SyntheticInstance};

fn main() -> burnout_sim::Result<()> {
    for n in [1_000, 10_000, 100_000] {
        let inst = SyntheticInstance::generate(&SyntheticConfig { n, ..Default::default() })?;
        let rule = inst.rule();
        let truth = simulate_sequential(&inst.events, &inst.campaigns, &rule, Default::default())?;
        let par = parallel_simulate(&inst.events, &inst.campaigns, &rule, RateBasis::ExactRemainingMean)?;
        let cmp = compare_trajectories(&truth, &par.trajectory)?;
        println!(
            "N={n:>6}: {} segments, max relative error {:.4}, median {:.4}",
            par.segments.len(),
            cmp.max,
            cmp.median
        );
    }
    Ok(())
}
