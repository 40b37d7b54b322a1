//! Greedy EHVI batch with Kriging-believer fantasies on the bundled data.
//!
//!     cargo run --release --example ehvi_batch

use hitl_mobo::acquisition::{ehvi_greedy_batch, AcquisitionConfig, CandidatePool, Strategy};
use hitl_mobo::campaign::{bundled_campaign, CampaignConfig};
use hitl_mobo::design_space::{CandidateGrid, Refinement};
use hitl_mobo::pareto::ParetoFront;
use rand::SeedableRng;

fn main() -> hitl_mobo::Result<()> {
    let state = bundled_campaign(CampaignConfig::default())?;
    let models = state.fit_models(false, 1)?;
    let grid = CandidateGrid::new(state.space(), &Refinement::fine())?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let pool = grid.sample(20_000, &Default::default(), &mut rng);
    let pts: Vec<_> = state.measured_points().into_iter().map(|(_, p)| p).collect();
    let front = ParetoFront::from_points(&pts, state.config().reference);
    let config = AcquisitionConfig {
        strategy: Strategy::EhviGreedy,
        batch_size: 5,
        ..AcquisitionConfig::default()
    };

    println!("current hypervolume {:.4}", front.hypervolume());
    let picks = ehvi_greedy_batch(
        (&models.dispersion, &models.leakage),
        CandidatePool::List(&pool),
        &front,
        &config,
        None,
    )?;
    for (k, s) in picks.iter().enumerate() {
        let (m1, s1) = models.dispersion.predict(&s.condition);
        let (m2, s2) = models.leakage.predict(&s.condition);
        println!(
            "{k}: {}  EHVI {:.4}  dispersion {m1:.2} ± {s1:.2}  leakage {m2:.2} ± {s2:.2}",
            s.condition, s.value.0
        );
    }
    Ok(())
}
