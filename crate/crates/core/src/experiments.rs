//! Declarative experiment registry.
//!
//! An [`ExperimentSpec`] names an experiment and overrides any defaults;
//! specs load from TOML. [`run_experiment`] writes one plot-ready CSV per
//! output (header row names every column) and a `<name>_summary.json` that
//! embeds the full spec. Outputs depend only on the spec: the same spec
//! produces byte-identical files whatever the thread count.
//!
//! Relative errors are `|s - s_hat| / s` against the sequential oracle. The
//! headline error rate of the sampling experiment is the one of the last
//! campaign (largest budget).

use std::fmt;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::bidlog::{
    build_keyword_model, calibrate_uniform_budget, day_shift_experiment, generate_fixture,
    keyword_first_price_rule, sample_event_stream, DayShiftConfig, DayShiftReport, FixtureConfig,
};
use crate::diagnostics::{check_smoothness, diagnose_c, hoeffding_suite, HoeffdingConfig};
use crate::error::{invalid, Result, SimError};
use crate::estimator::{estimate_pi, ActivationDraw, EstimatorConfig};
use crate::metrics::{compare_trajectories, median};
use crate::model::Trajectory;
use crate::parallel::{parallel_simulate, RateBasis};
use crate::rng::derive_seed;
use crate::s2a::{cost_model, sort2aggregate, S2aConfig};
use crate::sequential::{naive_sampled_sequential, simulate_sequential};
use crate::synthetic::{SyntheticConfig, SyntheticInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentName {
    SamplingError,
    ParallelVsSequential,
    PiConvergence,
    S2aVsTruth,
    DayShift,
    Hoeffding,
    Smoothness,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 7] = [
        Self::SamplingError,
        Self::ParallelVsSequential,
        Self::PiConvergence,
        Self::S2aVsTruth,
        Self::DayShift,
        Self::Hoeffding,
        Self::Smoothness,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::SamplingError => "sampling-error",
            Self::ParallelVsSequential => "parallel-vs-sequential",
            Self::PiConvergence => "pi-convergence",
            Self::S2aVsTruth => "s2a-vs-truth",
            Self::DayShift => "day-shift",
            Self::Hoeffding => "hoeffding",
            Self::Smoothness => "smoothness",
        }
    }
}

impl fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentName {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| SimError::UnknownExperiment(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DayShiftSpec {
    pub fixture: FixtureConfig,
    pub n1: usize,
    pub n2: usize,
    /// Uniform budget; `None` calibrates it on a day-1 stream.
    pub budget: Option<f64>,
    /// Day-1 capped fraction targeted by the calibration.
    pub capped_target: f64,
    /// Use the log's second day as the day-2 model.
    pub distinct_day2: bool,
}

impl Default for DayShiftSpec {
    fn default() -> Self {
        Self {
            fixture: FixtureConfig::default(),
            n1: 20_000,
            n2: 30_000,
            budget: None,
            capped_target: 0.2,
            distinct_day2: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HoeffdingSpec {
    pub permutations: usize,
    /// Campaign whose partial sums are tested; `None` picks the largest
    /// spender under full activation.
    pub campaign: Option<usize>,
}

impl Default for HoeffdingSpec {
    fn default() -> Self {
        Self {
            permutations: 1000,
            campaign: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothnessSpec {
    pub gammas: Vec<f64>,
    /// `epsilon = epsilon_fraction * smallest budget`.
    pub epsilon_fraction: f64,
    pub trials: usize,
}

impl Default for SmoothnessSpec {
    fn default() -> Self {
        Self {
            gammas: vec![0.0, 0.25, 0.5, 1.0],
            epsilon_fraction: 0.01,
            trials: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    pub instance: SyntheticConfig,
    pub repetitions: usize,
    /// One seed per repetition; defaults to `seed, seed + 1, ...`.
    pub seeds: Option<Vec<u64>>,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Fields left out keep the values of [`experiment_estimator`].
    #[serde(deserialize_with = "estimator_overrides")]
    pub estimator: EstimatorConfig,
    pub s2a: S2aConfig,
    /// Sampling rates of the sampling-error experiment.
    pub rates: Vec<f64>,
    /// Horizons of the parallel-vs-sequential experiment; empty uses the
    /// instance's `n`.
    pub sizes: Vec<usize>,
    pub day_shift: DayShiftSpec,
    pub hoeffding: HoeffdingSpec,
    pub smoothness: SmoothnessSpec,
}

/// Estimator settings used by the experiments unless overridden.
pub fn experiment_estimator() -> EstimatorConfig {
    EstimatorConfig {
        rho: 0.1,
        eta: 0.5,
        sweeps: 50,
        batch: 10,
        decay: true,
        draw: ActivationDraw::Shared,
        ..EstimatorConfig::default()
    }
}

fn estimator_overrides<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<EstimatorConfig, D::Error> {
    use serde::de::Error;
    let overrides = serde_json::Value::deserialize(d)?;
    let mut base = serde_json::to_value(experiment_estimator()).map_err(D::Error::custom)?;
    match (&mut base, overrides) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => b.extend(o),
        _ => return Err(D::Error::custom("estimator must be a table")),
    }
    serde_json::from_value(base).map_err(D::Error::custom)
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: ExperimentName::S2aVsTruth,
            instance: SyntheticConfig::default(),
            repetitions: 1,
            seeds: None,
            seed: 0,
            out_dir: PathBuf::from("out"),
            estimator: experiment_estimator(),
            s2a: S2aConfig::default(),
            rates: vec![0.001, 0.01, 0.1],
            sizes: Vec::new(),
            day_shift: DayShiftSpec::default(),
            hoeffding: HoeffdingSpec::default(),
            smoothness: SmoothnessSpec::default(),
        }
    }
}

impl ExperimentSpec {
    pub fn new(name: ExperimentName) -> Self {
        Self {
            name,
            ..Self::default()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds
            .clone()
            .unwrap_or_else(|| (0..self.repetitions as u64).map(|r| self.seed + r).collect())
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(invalid("repetitions", "must be at least 1"));
        }
        if let Some(s) = &self.seeds {
            if s.len() != self.repetitions {
                return Err(SimError::Config(format!(
                    "{} seeds given for {} repetitions",
                    s.len(),
                    self.repetitions
                )));
            }
        }
        self.instance.validate()?;
        self.estimator.validate(self.instance.k)?;
        if self.name == ExperimentName::SamplingError && self.rates.is_empty() {
            return Err(SimError::Config("sampling-error needs at least one rate".into()));
        }
        if let Some(r) = self.rates.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(invalid("rates", format!("{r} is outside (0, 1]")));
        }
        Ok(())
    }

    pub fn csv_path(&self, suffix: &str) -> PathBuf {
        self.out_dir.join(format!("{}{suffix}.csv", self.name))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.out_dir.join(format!("{}_summary.json", self.name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub files: Vec<PathBuf>,
    pub summary: serde_json::Value,
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(File::create(path)?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn oracle(inst: &SyntheticInstance) -> Result<Trajectory> {
    simulate_sequential(&inst.events, &inst.campaigns, &inst.rule(), Default::default())
}

fn last_campaign_error(truth: &Trajectory, est: &Trajectory) -> Option<f64> {
    let k = truth.final_spends.len();
    crate::metrics::relative_error(truth.final_spends[k - 1], est.final_spends[k - 1])
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    std::fs::create_dir_all(&spec.out_dir)?;
    let (files, summary) = match spec.name {
        ExperimentName::SamplingError => sampling_error(spec)?,
        ExperimentName::ParallelVsSequential => parallel_vs_sequential(spec)?,
        ExperimentName::PiConvergence => pi_convergence(spec)?,
        ExperimentName::S2aVsTruth => s2a_vs_truth(spec)?,
        ExperimentName::DayShift => day_shift(spec)?,
        ExperimentName::Hoeffding => hoeffding(spec)?,
        ExperimentName::Smoothness => smoothness(spec)?,
    };
    let summary = json!({ "experiment": spec.name.as_str(), "spec": spec, "summary": summary });
    let path = spec.summary_path();
    std::fs::write(&path, serde_json::to_string_pretty(&summary)?)?;
    let mut files = files;
    files.push(path);
    Ok(ExperimentOutput { files, summary })
}

type Outcome = (Vec<PathBuf>, serde_json::Value);

#[derive(Serialize)]
struct SamplingRow {
    rho: f64,
    repetition: usize,
    seed: u64,
    method: &'static str,
    last_campaign_error: Option<f64>,
    median_error: f64,
    spend_weighted_error: f64,
}

fn sampling_error(spec: &ExperimentSpec) -> Result<Outcome> {
    let inst = SyntheticInstance::generate(&spec.instance)?;
    let rule = inst.rule();
    let truth = oracle(&inst)?;
    let seeds = spec.seeds();
    let jobs: Vec<(f64, usize, u64)> = spec
        .rates
        .iter()
        .flat_map(|&rho| seeds.iter().enumerate().map(move |(r, &s)| (rho, r, s)))
        .collect();
    let rows: Vec<Vec<SamplingRow>> = jobs
        .par_iter()
        .map(|&(rho, repetition, seed)| -> Result<Vec<SamplingRow>> {
            let naive = naive_sampled_sequential(&inst.events, &inst.campaigns, &rule, rho, seed)?;
            let est = EstimatorConfig {
                rho,
                seed,
                ..spec.estimator.clone()
            };
            let s2a = sort2aggregate(&inst.events, &inst.campaigns, &rule, &est, &spec.s2a)?.trajectory;
            [("naive", naive), ("sort2aggregate", s2a)]
                .into_iter()
                .map(|(method, t)| {
                    let c = compare_trajectories(&truth, &t)?;
                    Ok(SamplingRow {
                        rho,
                        repetition,
                        seed,
                        method,
                        last_campaign_error: last_campaign_error(&truth, &t),
                        median_error: c.median,
                        spend_weighted_error: c.spend_weighted,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SamplingRow> = rows.into_iter().flatten().collect();
    let path = spec.csv_path("");
    write_rows(&path, &rows)?;
    let mut table = Vec::new();
    for &rho in &spec.rates {
        for method in ["naive", "sort2aggregate"] {
            let sel: Vec<&SamplingRow> = rows.iter().filter(|r| r.rho == rho && r.method == method).collect();
            let last: Vec<f64> = sel.iter().filter_map(|r| r.last_campaign_error).collect();
            let med: Vec<f64> = sel.iter().map(|r| r.median_error).collect();
            table.push(json!({
                "rho": rho,
                "method": method,
                "median_last_campaign_error": median(&last),
                "median_of_median_errors": median(&med),
            }));
        }
    }
    Ok((
        vec![path],
        json!({ "b_base": inst.b_base, "capped_fraction": truth.capped_fraction(), "by_rate": table }),
    ))
}

#[derive(Serialize)]
struct ParallelRow {
    n: usize,
    repetition: usize,
    seed: u64,
    campaign: usize,
    truth: f64,
    estimate: f64,
    relative_error: Option<f64>,
}

fn parallel_vs_sequential(spec: &ExperimentSpec) -> Result<Outcome> {
    let sizes = if spec.sizes.is_empty() { vec![spec.instance.n] } else { spec.sizes.clone() };
    let seeds = spec.seeds();
    let jobs: Vec<(usize, usize, u64)> = sizes
        .iter()
        .flat_map(|&n| seeds.iter().enumerate().map(move |(r, &s)| (n, r, s)))
        .collect();
    let results: Vec<(usize, Vec<ParallelRow>, f64, f64, usize)> = jobs
        .par_iter()
        .map(|&(n, repetition, seed)| -> Result<_> {
            let cfg = SyntheticConfig {
                n,
                seed,
                ..spec.instance.clone()
            };
            let inst = SyntheticInstance::generate(&cfg)?;
            let truth = oracle(&inst)?;
            let rep = parallel_simulate(&inst.events, &inst.campaigns, &inst.rule(), RateBasis::ExactRemainingMean)?;
            let c = compare_trajectories(&truth, &rep.trajectory)?;
            let rows = c
                .campaigns
                .iter()
                .map(|e| ParallelRow {
                    n,
                    repetition,
                    seed,
                    campaign: e.campaign,
                    truth: e.truth,
                    estimate: e.estimate,
                    relative_error: e.relative_error,
                })
                .collect();
            Ok((n, rows, c.max, c.median, rep.iterations))
        })
        .collect::<Result<_>>()?;
    let path = spec.csv_path("");
    let rows: Vec<&ParallelRow> = results.iter().flat_map(|r| &r.1).collect();
    write_rows(&path, &rows)?;
    let by_n: Vec<_> = sizes
        .iter()
        .map(|&n| {
            let sel: Vec<_> = results.iter().filter(|r| r.0 == n).collect();
            let maxes: Vec<f64> = sel.iter().map(|r| r.2).collect();
            let meds: Vec<f64> = sel.iter().map(|r| r.3).collect();
            json!({
                "n": n,
                "median_max_relative_error": median(&maxes),
                "median_median_relative_error": median(&meds),
                "max_relative_error_per_repetition": maxes,
            })
        })
        .collect();
    Ok((vec![path], json!({ "by_n": by_n })))
}

#[derive(Serialize)]
struct ConvergenceRow {
    repetition: usize,
    seed: u64,
    sweep: usize,
    campaign: usize,
    pi: f64,
    residual: f64,
    oracle_pi: f64,
}

fn pi_convergence(spec: &ExperimentSpec) -> Result<Outcome> {
    let inst = SyntheticInstance::generate(&spec.instance)?;
    let rule = inst.rule();
    let truth = oracle(&inst)?;
    let n = inst.events.len() as f64;
    let oracle_pi: Vec<f64> = truth
        .capping_times
        .iter()
        .map(|t| t.map_or(1.0, |t| t as f64 / n))
        .collect();
    let seeds = spec.seeds();
    let runs: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            let est = EstimatorConfig {
                seed,
                ..spec.estimator.clone()
            };
            estimate_pi(&inst.events, &inst.campaigns, &rule, &est)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut finals = Vec::new();
    for (repetition, (run, &seed)) in runs.iter().zip(&seeds).enumerate() {
        for s in &run.trace.sweeps {
            for (c, (&pi, &oracle)) in s.pi.iter().zip(&oracle_pi).enumerate() {
                rows.push(ConvergenceRow {
                    repetition,
                    seed,
                    sweep: s.sweep,
                    campaign: c,
                    pi,
                    residual: s.relative_residual[c],
                    oracle_pi: oracle,
                });
            }
        }
        let pi = run.pi.as_slice();
        let mae = pi.iter().zip(&oracle_pi).map(|(a, b)| (a - b).abs()).sum::<f64>() / pi.len() as f64;
        finals.push(json!({
            "seed": seed,
            "mean_abs_error_vs_oracle": mae,
            "final_complementarity": run.trace.sweeps.last().map(|s| s.complementarity),
            "evaluations": run.evaluations,
        }));
    }
    let path = spec.csv_path("");
    write_rows(&path, &rows)?;
    Ok((vec![path], json!({ "b_base": inst.b_base, "repetitions": finals })))
}

#[derive(Serialize)]
struct S2aRow {
    repetition: usize,
    seed: u64,
    campaign: usize,
    budget: f64,
    estimate: f64,
    truth: f64,
    relative_error: Option<f64>,
}

fn s2a_vs_truth(spec: &ExperimentSpec) -> Result<Outcome> {
    let inst = SyntheticInstance::generate(&spec.instance)?;
    let rule = inst.rule();
    let truth = oracle(&inst)?;
    let seeds = spec.seeds();
    let reports: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            let est = EstimatorConfig {
                seed,
                ..spec.estimator.clone()
            };
            sort2aggregate(&inst.events, &inst.campaigns, &rule, &est, &spec.s2a)
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut reps = Vec::new();
    let model = cost_model(
        inst.events.len(),
        1.0,
        spec.estimator.sweeps,
        spec.estimator.rho,
        1,
    )?;
    for (repetition, (r, &seed)) in reports.iter().zip(&seeds).enumerate() {
        let c = compare_trajectories(&truth, &r.trajectory)?;
        for e in &c.campaigns {
            rows.push(S2aRow {
                repetition,
                seed,
                campaign: e.campaign,
                budget: inst.campaigns.budget(e.campaign),
                estimate: e.estimate,
                truth: e.truth,
                relative_error: e.relative_error,
            });
        }
        reps.push(json!({
            "seed": seed,
            "spend_weighted_error": c.spend_weighted,
            "median_relative_error": c.median,
            "max_relative_error": c.max,
            "checks_passed": r.checks.iter().filter(|b| b.passed).count(),
            "checks_total": r.checks.len(),
            "unscheduled_failures": r.unscheduled.iter().filter(|u| !u.passed).count(),
            "tolerance": r.tolerance,
            "evaluations": r.evaluations,
            "predicted_evaluations": {
                "estimation": model.estimation_evaluations,
                "aggregation": model.aggregation_evaluations,
            },
        }));
    }
    let path = spec.csv_path("");
    write_rows(&path, &rows)?;
    Ok((
        vec![path],
        json!({ "b_base": inst.b_base, "capped_fraction": truth.capped_fraction(), "repetitions": reps }),
    ))
}

#[derive(Serialize)]
struct DayShiftRow<'a> {
    repetition: usize,
    seed: u64,
    method: &'a str,
    campaign: usize,
    truth: f64,
    predicted: f64,
    relative_error: Option<f64>,
}

#[derive(Serialize)]
struct CurveRow<'a> {
    repetition: usize,
    seed: u64,
    method: &'a str,
    campaigns: usize,
    spend_share: f64,
    weighted_error: f64,
}

/// One day-shift repetition on the fixture generated from `seed`.
pub fn day_shift_repetition(spec: &DayShiftSpec, estimator: &EstimatorConfig, s2a: &S2aConfig, seed: u64) -> Result<(f64, DayShiftReport)> {
    let fixture = FixtureConfig {
        seed,
        ..spec.fixture.clone()
    };
    let (log, _) = generate_fixture(&fixture)?;
    let day1 = build_keyword_model(&log, 1)?;
    let day2 = if spec.distinct_day2 { Some(build_keyword_model(&log, 2)?) } else { None };
    let k = day1.num_advertisers();
    let budget = match spec.budget {
        Some(b) => b,
        None => {
            let rule = keyword_first_price_rule(&day1)?;
            let events = sample_event_stream(&day1, spec.n1, derive_seed(seed, 0xCA1))?;
            calibrate_uniform_budget(&events, &rule, spec.capped_target, 0.05)?.scale
        }
    };
    let cfg = DayShiftConfig {
        seed,
        estimator: EstimatorConfig {
            seed,
            ..estimator.clone()
        },
        s2a: s2a.clone(),
        shared_stream: false,
    };
    let report = day_shift_experiment(&day1, day2.as_ref(), spec.n1, spec.n2, &vec![budget; k], &cfg)?;
    Ok((budget, report))
}

fn day_shift(spec: &ExperimentSpec) -> Result<Outcome> {
    let seeds = spec.seeds();
    let runs: Vec<(f64, DayShiftReport)> = seeds
        .par_iter()
        .map(|&seed| day_shift_repetition(&spec.day_shift, &spec.estimator, &spec.s2a, seed))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut curve = Vec::new();
    let mut reps = Vec::new();
    for (repetition, ((budget, r), &seed)) in runs.iter().zip(&seeds).enumerate() {
        for m in &r.methods {
            for (c, (&p, e)) in m.predicted.iter().zip(&m.relative_errors).enumerate() {
                rows.push(DayShiftRow {
                    repetition,
                    seed,
                    method: &m.method,
                    campaign: c,
                    truth: r.day2.final_spends[c],
                    predicted: p,
                    relative_error: *e,
                });
            }
            for pt in &m.curve {
                curve.push(CurveRow {
                    repetition,
                    seed,
                    method: &m.method,
                    campaigns: pt.campaigns,
                    spend_share: pt.spend_share,
                    weighted_error: pt.weighted_error,
                });
            }
        }
        let errors: serde_json::Map<String, serde_json::Value> = r
            .methods
            .iter()
            .map(|m| (m.method.clone(), json!(m.spend_weighted_error)))
            .collect();
        reps.push(json!({
            "seed": seed,
            "budget": budget,
            "day1_capped_fraction": r.day1.capped_fraction(),
            "day2_capped_fraction": r.day2.capped_fraction(),
            "spend_weighted_error": errors,
            "s2a_checks_pass": r.s2a_checks_pass,
        }));
    }
    let path = spec.csv_path("");
    let curve_path = spec.csv_path("_curve");
    write_rows(&path, &rows)?;
    write_rows(&curve_path, &curve)?;
    Ok((vec![path, curve_path], json!({ "repetitions": reps })))
}

#[derive(Serialize)]
struct HoeffdingRowOut {
    repetition: usize,
    seed: u64,
    t: f64,
    empirical_tail: f64,
    bound: f64,
}

fn hoeffding(spec: &ExperimentSpec) -> Result<Outcome> {
    let inst = SyntheticInstance::generate(&spec.instance)?;
    let rule = inst.rule();
    let campaign = match spec.hoeffding.campaign {
        Some(c) => c,
        None => {
            let full = crate::sequential::simulate_sequential(
                &inst.events,
                &crate::model::CampaignSet::new(vec![f64::MAX; inst.config.k])?,
                &rule,
                Default::default(),
            )?;
            full.final_spends
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(c, _)| c)
                .unwrap_or(0)
        }
    };
    let seeds = spec.seeds();
    let tables: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            hoeffding_suite(
                &inst.events,
                &rule,
                &HoeffdingConfig {
                    campaign,
                    activation: None,
                    prefix: None,
                    t_grid: None,
                    permutations: spec.hoeffding.permutations,
                    seed,
                },
            )
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (repetition, (t, &seed)) in tables.iter().zip(&seeds).enumerate() {
        for r in &t.rows {
            rows.push(HoeffdingRowOut {
                repetition,
                seed,
                t: r.t,
                empirical_tail: r.empirical_tail,
                bound: r.bound,
            });
        }
    }
    let path = spec.csv_path("");
    write_rows(&path, &rows)?;
    let c = diagnose_c(&inst.events, &rule, 10, spec.seed)?;
    Ok((
        vec![path],
        json!({
            "campaign": campaign,
            "effective_c": tables.first().map(|t| t.c),
            "declared_c": c.declared,
            "all_within_bound": tables.iter().all(|t| t.all_within_bound()),
        }),
    ))
}

#[derive(Serialize)]
struct SmoothnessRow {
    repetition: usize,
    seed: u64,
    gamma: f64,
    epsilon: f64,
    trials: usize,
    violation_frequency: f64,
}

fn smoothness(spec: &ExperimentSpec) -> Result<Outcome> {
    let inst = SyntheticInstance::generate(&spec.instance)?;
    let rule = inst.rule();
    let epsilon = spec.smoothness.epsilon_fraction * inst.campaigns.budget(0);
    let seeds = spec.seeds();
    let jobs: Vec<(usize, u64, f64)> = seeds
        .iter()
        .enumerate()
        .flat_map(|(r, &s)| spec.smoothness.gammas.iter().map(move |&g| (r, s, g)))
        .collect();
    let rows: Vec<SmoothnessRow> = jobs
        .par_iter()
        .map(|&(repetition, seed, gamma)| {
            Ok(SmoothnessRow {
                repetition,
                seed,
                gamma,
                epsilon,
                trials: spec.smoothness.trials,
                violation_frequency: check_smoothness(&inst.events, &rule, gamma, epsilon, spec.smoothness.trials, seed)?,
            })
        })
        .collect::<Result<_>>()?;
    let path = spec.csv_path("");
    write_rows(&path, &rows)?;
    Ok((vec![path], json!({ "epsilon": epsilon, "b_base": inst.b_base })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::BaseBudget;

    fn small(name: ExperimentName, dir: &Path) -> ExperimentSpec {
        ExperimentSpec {
            name,
            instance: SyntheticConfig {
                n: 2_000,
                k: 5,
                d: 4,
                b_base: BaseBudget::Auto,
                seed: 1,
            },
            repetitions: 2,
            out_dir: dir.to_path_buf(),
            rates: vec![0.5, 1.0],
            sizes: vec![500, 1_000],
            day_shift: DayShiftSpec {
                fixture: FixtureConfig {
                    keywords: 60,
                    advertisers: 8,
                    ..Default::default()
                },
                n1: 2_000,
                n2: 3_000,
                ..Default::default()
            },
            hoeffding: HoeffdingSpec {
                permutations: 100,
                campaign: None,
            },
            smoothness: SmoothnessSpec {
                trials: 50,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn names_roundtrip() {
        for n in ExperimentName::ALL {
            assert_eq!(n.as_str().parse::<ExperimentName>().unwrap(), n);
        }
        assert!(matches!("nope".parse::<ExperimentName>(), Err(SimError::UnknownExperiment(_))));
    }

    #[test]
    fn toml_overrides_defaults() {
        let spec = ExperimentSpec::from_toml(
            "name = \"sampling-error\"\nrepetitions = 7\nrates = [0.01]\n[instance]\nn = 1000\nb_base = 70.0\n[estimator]\neta = 0.2\n",
        )
        .unwrap();
        assert_eq!(spec.name, ExperimentName::SamplingError);
        assert_eq!(spec.repetitions, 7);
        assert_eq!(spec.instance.n, 1000);
        assert_eq!(spec.instance.k, 20);
        assert_eq!(spec.instance.b_base, BaseBudget::Fixed(70.0));
        assert_eq!(spec.estimator.eta, 0.2);
        assert_eq!(spec.estimator.batch, experiment_estimator().batch);
        let auto = ExperimentSpec::from_toml("[instance]\nb_base = \"auto\"\n").unwrap();
        assert_eq!(auto.instance.b_base, BaseBudget::Auto);
        assert!(ExperimentSpec::from_toml("name = \"bogus\"").is_err());
        let back = ExperimentSpec::from_toml(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn validation_rejects_inconsistent_specs() {
        let mut s = ExperimentSpec::new(ExperimentName::SamplingError);
        s.repetitions = 0;
        assert!(s.validate().is_err());
        s.repetitions = 2;
        s.seeds = Some(vec![1]);
        assert!(s.validate().is_err());
        s.seeds = None;
        s.rates = vec![];
        assert!(s.validate().is_err());
    }

    #[test]
    fn naive_at_full_rate_has_zero_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut spec = small(ExperimentName::SamplingError, dir.path());
        spec.rates = vec![1.0];
        let out = run_experiment(&spec).unwrap();
        let text = std::fs::read_to_string(&out.files[0]).unwrap();
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr.headers().unwrap().clone();
        let mi = headers.iter().position(|h| h == "method").unwrap();
        let ei = headers.iter().position(|h| h == "median_error").unwrap();
        for r in rdr.records() {
            let r = r.unwrap();
            if &r[mi] == "naive" {
                assert_eq!(r[ei].parse::<f64>().unwrap(), 0.0);
            }
        }
        assert!(out.summary["spec"]["name"] == "sampling-error");
    }

    #[test]
    fn every_experiment_runs_and_is_reproducible() {
        for name in ExperimentName::ALL {
            let a = tempfile::tempdir().unwrap();
            let b = tempfile::tempdir().unwrap();
            let oa = run_experiment(&small(name, a.path())).unwrap();
            let ob = run_experiment(&small(name, b.path())).unwrap();
            assert_eq!(oa.files.len(), ob.files.len());
            for (fa, fb) in oa.files.iter().zip(&ob.files) {
                if fa.extension().unwrap() == "csv" {
                    assert_eq!(std::fs::read(fa).unwrap(), std::fs::read(fb).unwrap(), "{name}");
                }
            }
        }
    }
}
