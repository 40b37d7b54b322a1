//! Pareto-UCB batch on the bundled data over the full refined grid,
//! streamed in chunks rather than materialized.
//!
//!     cargo run --release --example pareto_ucb

use std::collections::HashSet;

use hitl_mobo::acquisition::{pareto_ucb_batch, AcquisitionConfig, CandidatePool};
use hitl_mobo::campaign::{bundled_campaign, CampaignConfig};
use hitl_mobo::design_space::{CandidateGrid, Refinement};

fn main() -> hitl_mobo::Result<()> {
    let state = bundled_campaign(CampaignConfig::default())?;
    let models = state.fit_models(false, 1)?;
    let grid = CandidateGrid::new(state.space(), &Refinement::fine())?;
    let exclude: HashSet<_> = state.observations().iter().map(|o| o.condition.key()).collect();
    println!("scoring {} grid conditions", grid.len());

    let config = AcquisitionConfig::default();
    let picks = pareto_ucb_batch(
        (&models.dispersion, &models.leakage),
        CandidatePool::Grid {
            grid: &grid,
            exclude: &exclude,
        },
        &config,
        None,
    )?;
    for s in &picks {
        println!("{}  UCB ({:.3}, {:.3})", s.condition, s.value.0, s.value.1);
    }
    Ok(())
}
