//! Exact replay of a small hand-written instance, plus the single-campaign
//! closed form it must agree with.

use burnout_sim::sequential::{simulate_sequential, trivial_capped_sum, SequentialConfig};
use burnout_sim::testing::ToyRule;
use burnout_sim::{AuctionRule, CampaignSet};

fn main() -> burnout_sim::Result<()> {
    // Three events, two campaigns; row e holds the spend of each campaign.
    let rule = ToyRule::from_weights(2, vec![0.3, 0.5, 0.3, 0.4, 0.3, 0.3]);
    let campaigns = CampaignSet::new(vec![0.6, 1.0])?;
    let traj = simulate_sequential(&rule.events(), &campaigns, &rule, SequentialConfig { checkpoint_stride: 1 })?;
    for (n, spends) in &traj.checkpoints {
        println!("after event {n}: {spends:?}");
    }
    println!("final spends   {:?}", traj.final_spends);
    println!("capping times  {:?}", traj.capping_times);

    let xs = [0.25, 0.5, 0.75, 1.0];
    let single = ToyRule::from_weights(1, xs.to_vec());
    let t = simulate_sequential(&single.events(), &CampaignSet::new(vec![1.2])?, &single, Default::default())?;
    // The replay may overshoot min(B, sum) by less than one increment.
    println!(
        "K=1 replay {} vs min(B, sum) {} (max increment {})",
        t.final_spends[0],
        trivial_capped_sum(1.2, &xs),
        single.max_increment()
    );
    Ok(())
}
