//! Pareto front and dominated hypervolume of the bundled initial design.
//!
//!     cargo run --example pareto_hypervolume

use hitl_mobo::campaign::{CampaignConfig, CampaignState, LHS_INITIAL_CSV};
use hitl_mobo::design_space::ParameterSpace;
use hitl_mobo::pareto::{greedy_hv_subset, hypervolume_2d, nondominated_layers};

fn main() -> hitl_mobo::Result<()> {
    let mut state = CampaignState::new(ParameterSpace::photonic_curing(), CampaignConfig::default())?;
    state.ingest_csv(LHS_INITIAL_CSV)?;
    let (ids, points): (Vec<String>, Vec<_>) = state.measured_points().into_iter().unzip();
    let reference = state.config().reference;

    println!(
        "{} functional of {} conditions",
        points.len(),
        state.observations().len()
    );
    for (k, layer) in nondominated_layers(&points).iter().enumerate() {
        let names: Vec<&str> = layer.iter().map(|&i| ids[i].as_str()).collect();
        println!("layer {k}: {}", names.join(" "));
    }
    println!(
        "hypervolume above ({}, {}): {:.4}",
        reference.f1,
        reference.f2,
        hypervolume_2d(&points, reference)
    );
    for q in 1..=3 {
        let pick = greedy_hv_subset(&points, reference, q);
        let sub: Vec<_> = pick.iter().map(|&i| points[i]).collect();
        let names: Vec<&str> = pick.iter().map(|&i| ids[i].as_str()).collect();
        println!(
            "best {q} by greedy hypervolume: {} ({:.4})",
            names.join(" "),
            hypervolume_2d(&sub, reference)
        );
    }
    Ok(())
}
