//! Plugging a user-defined mechanism into the simulators: a second-price
//! auction where the winner pays the runner-up's bid.

use burnout_sim::parallel::{parallel_simulate, RateBasis};
use burnout_sim::sequential::simulate_sequential;
use burnout_sim::{ActivationVector, AuctionRule, CampaignSet, Event};
use rand::{Rng, SeedableRng};

struct SecondPrice {
    k: usize,
}

impl AuctionRule for SecondPrice {
    /// Bids of every campaign for this event.
    type Payload = Vec<f64>;

    fn num_campaigns(&self) -> usize {
        self.k
    }

    fn max_increment(&self) -> f64 {
        1.0
    }

    fn spend(&self, event: &Event<Vec<f64>>, active: &ActivationVector, out: &mut [f64]) {
        out.fill(0.0);
        let mut best: Option<(usize, f64)> = None;
        let mut second = 0.0;
        for c in active.active_indices() {
            let b = event.payload[c];
            match best {
                Some((_, top)) if b <= top => second = f64::max(second, b),
                _ => {
                    if let Some((_, top)) = best {
                        second = top;
                    }
                    best = Some((c, b));
                }
            }
        }
        if let Some((c, _)) = best {
            out[c] = second;
        }
    }
}

fn main() -> burnout_sim::Result<()> {
    let k = 5;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
    let events: Vec<Event<Vec<f64>>> = (0..50_000)
        .map(|i| Event::new(i, (0..k).map(|_| rng.random::<f64>()).collect()))
        .collect();
    let rule = SecondPrice { k };
    let campaigns = CampaignSet::new(vec![1500.0, 2500.0, 3500.0, 4500.0, 1e9])?;
    let truth = simulate_sequential(&events, &campaigns, &rule, Default::default())?;
    let par = parallel_simulate(&events, &campaigns, &rule, RateBasis::ExactRemainingMean)?;
    for c in 0..k {
        println!(
            "campaign {c}: oracle {:>9.1} (capped at {:?}), parallel {:>9.1}",
            truth.final_spends[c], truth.capping_times[c], par.trajectory.final_spends[c]
        );
    }
    Ok(())
}
