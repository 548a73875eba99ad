//! Declarative experiments: a TOML spec names the experiment and overrides
//! defaults; the run writes CSV tables and a summary JSON.

use burnout_sim::experiments::{run_experiment, ExperimentSpec};

const SPEC: &str = r#"
name = "sampling-error"
repetitions = 3
rates = [0.01, 0.1, 1.0]

[instance]
n = 20000
k = 20
b_base = "auto"

[estimator]
sweeps = 30
"#;

fn main() -> burnout_sim::Result<()> {
    let mut spec = ExperimentSpec::from_toml(SPEC)?;
    spec.out_dir = std::env::temp_dir().join("burnout-registry");
    let out = run_experiment(&spec)?;
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    println!("{}", serde_json::to_string_pretty(&out.summary["summary"]["by_rate"]).unwrap());
    Ok(())
}
