use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use burnout_sim::diagnostics::{check_smoothness, diagnose_c, hoeffding_suite, HoeffdingConfig};
use burnout_sim::estimator::estimate_pi;
use burnout_sim::experiments::{run_experiment, ExperimentName, ExperimentSpec};
use burnout_sim::parallel::{parallel_simulate, RateBasis};
use burnout_sim::s2a::sort2aggregate;
use burnout_sim::sequential::{naive_sampled_sequential, simulate_sequential};
use burnout_sim::synthetic::{BaseBudget, SyntheticInstance};
use burnout_sim::{Result, SimError};

/// Counterfactual replay of budget-capped auctions.
#[derive(Parser)]
#[command(name = "burnout", version)]
struct Cli {
    /// TOML experiment spec; its `instance`, `estimator` and `s2a` tables
    /// configure every subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides both the spec seed and the instance seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic instance file to `<out-dir>/instance.txt`.
    Generate {
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
        /// A number or `auto`.
        #[arg(long)]
        b_base: Option<BaseBudget>,
    },
    /// Replay an instance and write `simulate_<method>.csv`.
    Simulate {
        #[arg(long, value_enum)]
        method: Method,
        /// Instance file; generated from the config when absent.
        #[arg(long)]
        instance: Option<PathBuf>,
        /// Sampling rate of the naive method; defaults to the estimator's.
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Estimate capping proportions; writes `pi.csv` and `pi_trace.csv`.
    EstimatePi {
        #[arg(long)]
        instance: Option<PathBuf>,
    },
    /// Run a registered experiment.
    Experiment { name: String },
    /// Assumption and concentration checks.
    Diagnose {
        #[arg(value_enum)]
        kind: Diagnosis,
        #[arg(long)]
        instance: Option<PathBuf>,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// Defaults to 1% of the smallest budget.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1000)]
        permutations: usize,
        #[arg(long, default_value_t = 0)]
        campaign: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Sequential,
    Parallel,
    S2a,
    Naive,
}

#[derive(Clone, Copy, ValueEnum)]
enum Diagnosis {
    #[value(alias = "C")]
    C,
    Smoothness,
    Hoeffding,
}

fn spec(cli: &Cli) -> Result<ExperimentSpec> {
    let mut spec = match &cli.config {
        Some(p) => ExperimentSpec::load(p)?,
        None => ExperimentSpec::default(),
    };
    if let Some(s) = cli.seed {
        spec.seed = s;
        spec.instance.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        spec.out_dir = d.clone();
    }
    Ok(spec)
}

fn instance(spec: &ExperimentSpec, path: &Option<PathBuf>) -> Result<SyntheticInstance> {
    match path {
        Some(p) => SyntheticInstance::load(p),
        None => SyntheticInstance::generate(&spec.instance),
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    Ok((path.clone(), BufWriter::new(File::create(path)?)))
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    let mut spec = spec(&cli)?;
    let dir = spec.out_dir.clone();
    match cli.command {
        Command::Generate { n, k, d, b_base } => {
            let cfg = &mut spec.instance;
            cfg.n = n.unwrap_or(cfg.n);
            cfg.k = k.unwrap_or(cfg.k);
            cfg.d = d.unwrap_or(cfg.d);
            cfg.b_base = b_base.unwrap_or(cfg.b_base);
            let inst = SyntheticInstance::generate(cfg)?;
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("instance.txt");
            inst.save(&path)?;
            Ok(json!({ "instance": path, "b_base": inst.b_base }))
        }
        Command::Simulate { method, instance: p, rho } => {
            let inst = instance(&spec, &p)?;
            let rule = inst.rule();
            let (events, campaigns) = (&inst.events, &inst.campaigns);
            let mut extra = json!({});
            let (name, traj) = match method {
                Method::Sequential => ("sequential", simulate_sequential(events, campaigns, &rule, Default::default())?),
                Method::Parallel => {
                    let r = parallel_simulate(events, campaigns, &rule, RateBasis::ExactRemainingMean)?;
                    extra = json!({ "iterations": r.iterations });
                    ("parallel", r.trajectory)
                }
                Method::Naive => {
                    let rho = rho.unwrap_or(spec.estimator.rho);
                    ("naive", naive_sampled_sequential(events, campaigns, &rule, rho, spec.seed)?)
                }
                Method::S2a => {
                    let est = burnout_sim::estimator::EstimatorConfig {
                        seed: spec.seed,
                        ..spec.estimator.clone()
                    };
                    let r = sort2aggregate(events, campaigns, &rule, &est, &spec.s2a)?;
                    let (rp, mut w) = create(&dir, "s2a_report.json")?;
                    std::io::Write::write_all(&mut w, r.to_json()?.as_bytes())?;
                    extra = json!({ "report": rp, "all_checks_pass": r.all_checks_pass() });
                    ("s2a", r.trajectory)
                }
            };
            let (path, w) = create(&dir, &format!("simulate_{name}.csv"))?;
            traj.write_csv(w)?;
            Ok(json!({ "trajectory": path, "capped_fraction": traj.capped_fraction(), "details": extra }))
        }
        Command::EstimatePi { instance: p } => {
            let inst = instance(&spec, &p)?;
            spec.estimator.seed = spec.seed;
            let est = estimate_pi(&inst.events, &inst.campaigns, &inst.rule(), &spec.estimator)?;
            let (pi_path, w) = create(&dir, "pi.csv")?;
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["campaign", "pi"])?;
            for (c, v) in est.pi.as_slice().iter().enumerate() {
                out.write_record([c.to_string(), v.to_string()])?;
            }
            out.flush()?;
            let (trace_path, w) = create(&dir, "pi_trace.csv")?;
            est.trace.write_csv(w)?;
            Ok(json!({ "pi": pi_path, "trace": trace_path, "evaluations": est.evaluations }))
        }
        Command::Experiment { name } => {
            spec.name = name.parse::<ExperimentName>()?;
            let out = run_experiment(&spec)?;
            Ok(json!({ "files": out.files }))
        }
        Command::Diagnose {
            kind,
            instance: p,
            gamma,
            epsilon,
            trials,
            permutations,
            campaign,
        } => {
            let inst = instance(&spec, &p)?;
            let rule = inst.rule();
            match kind {
                Diagnosis::C => Ok(serde_json::to_value(diagnose_c(&inst.events, &rule, 100, spec.seed)?)?),
                Diagnosis::Smoothness => {
                    let eps = epsilon.unwrap_or(0.01 * inst.campaigns.budget(0));
                    let v = check_smoothness(&inst.events, &rule, gamma, eps, trials, spec.seed)?;
                    Ok(json!({ "gamma": gamma, "epsilon": eps, "trials": trials, "violation_frequency": v }))
                }
                Diagnosis::Hoeffding => {
                    let cfg = HoeffdingConfig {
                        campaign,
                        activation: None,
                        prefix: None,
                        t_grid: None,
                        permutations,
                        seed: spec.seed,
                    };
                    let table = hoeffding_suite(&inst.events, &rule, &cfg)?;
                    let (path, w) = create(&dir, "hoeffding.csv")?;
                    table.write_csv(w)?;
                    Ok(json!({ "table": path, "c": table.c, "all_within_bound": table.all_within_bound() }))
                }
            }
        }
    }
}

fn fail(kind: &str, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message.to_string() }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.render()),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.unwrap_or(0))
        .build()
        .map_err(|e| SimError::Config(e.to_string()));
    let result = pool.and_then(|p| p.install(|| run(cli)));
    match result {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), e),
    }
}
