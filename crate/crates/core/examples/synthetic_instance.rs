//! Generate a synthetic first-price instance, calibrate its budgets so that
//! about half of the campaigns cap, and round-trip it through a file.

use burnout_sim::synthetic::{calibrate_base_budget, BaseBudget, SyntheticConfig, SyntheticInstance};

fn main() -> burnout_sim::Result<()> {
    let cfg = SyntheticConfig {
        n: 20_000,
        k: 20,
        d: 10,
        b_base: BaseBudget::Auto,
        seed: 7,
    };
    let inst = SyntheticInstance::generate(&cfg)?;
    println!("calibrated b_base = {:.3}", inst.b_base);
    println!("budgets: {:?}", &inst.campaigns.budgets()[..5]);

    let cal = calibrate_base_budget(&inst.events, &inst.rule(), 0.25, 0.05)?;
    println!(
        "b_base for 25% capped: {:.3} ({} probes, capped fraction {:.2})",
        cal.scale,
        cal.probes.len(),
        cal.capped_fraction
    );

    let dir = tempfile_dir();
    let path = dir.join("instance.txt");
    inst.save(&path)?;
    let back = SyntheticInstance::load(&path)?;
    println!("reloaded {} events, identical: {}", back.events.len(), back.events == inst.events);
    Ok(())
}

fn tempfile_dir() -> std::path::PathBuf {
    let d = std::env::temp_dir().join("burnout-example");
    std::fs::create_dir_all(&d).unwrap();
    d
}
