//! A complete campaign against the synthetic lab: initial design, then
//! rounds of suggest, grade, measure, saved to disk after every step.
//!
//!     cargo run --release --example campaign_loop -- /tmp/campaign.json

use hitl_mobo::campaign::{CampaignConfig, CampaignState, SuggestOptions};
use hitl_mobo::design_space::ParameterSpace;
use hitl_mobo::oracle_sim::SyntheticLab;

fn main() -> hitl_mobo::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "campaign.json".into());
    let path = std::path::Path::new(&path);
    let lab = SyntheticLab::default().with_seed(42);
    let mut state = CampaignState::start(ParameterSpace::photonic_curing(), CampaignConfig::default(), 30)?;
    lab.complete_latest_round(&mut state)?;
    state.save(path)?;

    for _ in 0..4 {
        let round = state.suggest_round(&SuggestOptions::default())?.clone();
        lab.complete_latest_round(&mut state)?;
        state.save(path)?;
        let functional = round
            .suggested
            .iter()
            .filter(|id| state.observation(id).is_ok_and(|o| o.is_functional()))
            .count();
        let hv = state.hypervolume_history().last().unwrap().hypervolume;
        let conv = state.check_convergence(round.index);
        println!(
            "round {}: {functional}/{} functional, hypervolume {hv:.4}, converged {}",
            round.index,
            round.suggested.len(),
            conv.map_or("n/a".into(), |c| c.converged.to_string())
        );
    }
    println!("front:");
    for m in state.measured_front() {
        println!("  {:>4}  dispersion {:.3}  leakage {:.3}", m.id, m.point.f1, m.point.f2);
    }
    println!("saved {}", path.display());
    Ok(())
}
