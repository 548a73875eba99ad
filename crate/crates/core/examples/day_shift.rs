//! Synthetic keyword bid log, per-day keyword models, and the day-1 to day-2
//! prediction comparison.

use burnout_sim::bidlog::{
    build_keyword_model, calibrate_uniform_budget, day_shift_experiment, generate_fixture, keyword_first_price_rule,
    sample_event_stream, DayShiftConfig, FixtureConfig, AS_IS, RESCALED, SORT2AGGREGATE,
};
use burnout_sim::estimator::EstimatorConfig;
use burnout_sim::experiments::experiment_estimator;

fn main() -> burnout_sim::Result<()> {
    let (log, manifest) = generate_fixture(&FixtureConfig { seed: 2, ..Default::default() })?;
    println!(
        "{} records, {} keywords, {} advertisers",
        manifest.records, manifest.keywords, manifest.advertisers
    );
    let day1 = build_keyword_model(&log, 1)?;
    let (n1, n2) = (20_000, 30_000);

    let rule = keyword_first_price_rule(&day1)?;
    let stream = sample_event_stream(&day1, n1, 99)?;
    let budget = calibrate_uniform_budget(&stream, &rule, 0.2, 0.05)?.scale;
    println!("uniform budget {budget:.1}");

    let cfg = DayShiftConfig {
        seed: 2,
        estimator: EstimatorConfig {
            eta: 0.2,
            ..experiment_estimator()
        },
        ..Default::default()
    };
    let report = day_shift_experiment(&day1, None, n1, n2, &vec![budget; day1.num_advertisers()], &cfg)?;
    println!(
        "capped on day 1: {:.2}, day 2: {:.2}",
        report.day1.capped_fraction(),
        report.day2.capped_fraction()
    );
    for m in [AS_IS, RESCALED, SORT2AGGREGATE] {
        println!("{m:>15}: spend-weighted error {:.4}", report.method(m).unwrap().spend_weighted_error);
    }
    Ok(())
}
