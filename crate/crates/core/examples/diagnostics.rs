//! Empirical checks of the modelling assumptions on a synthetic instance.

use burnout_sim::diagnostics::{check_smoothness, diagnose_c, hoeffding_suite, HoeffdingConfig};
use burnout_sim::synthetic::{SyntheticConfig, SyntheticInstance};

fn main() -> burnout_sim::Result<()> {
    let inst = SyntheticInstance::generate(&SyntheticConfig { n: 20_000, ..Default::default() })?;
    let rule = inst.rule();

    let c = diagnose_c(&inst.events, &rule, 50, 1)?;
    println!("C: declared {:.0}, empirical {:.1}, declared bound holds: {}", c.declared, c.empirical, c.declared_ok);

    let eps = 0.01 * inst.campaigns.budget(0);
    for gamma in [0.0, 0.25, 0.5, 1.0] {
        let v = check_smoothness(&inst.events, &rule, gamma, eps, 500, 1)?;
        println!("smoothness gamma={gamma:<4}: violation frequency {v:.3}");
    }

    let table = hoeffding_suite(
        &inst.events,
        &rule,
        &HoeffdingConfig {
            campaign: 0,
            activation: None,
            prefix: None,
            t_grid: None,
            permutations: 500,
            seed: 1,
        },
    )?;
    for r in &table.rows {
        println!("t={:.3}  tail {:.3}  bound {:.3}", r.t, r.empirical_tail, r.bound);
    }
    println!("all within bound: {}", table.all_within_bound());
    Ok(())
}
