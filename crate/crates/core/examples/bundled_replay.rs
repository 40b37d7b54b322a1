//! Replay the bundled experimental data: hypervolume after each round,
//! yield per round, and the training fit of both objective models.
//!
//!     cargo run --release --example bundled_replay

use hitl_mobo::campaign::{bundled_campaign, CampaignConfig, Target};
use hitl_mobo::stats::linear_fit;

fn main() -> hitl_mobo::Result<()> {
    let state = bundled_campaign(CampaignConfig::default())?;
    println!(
        "{:<5} {:<11} {:>5} {:>10} {:>12}",
        "round", "strategy", "hitl", "functional", "hypervolume"
    );
    for (r, h) in state.rounds().iter().zip(state.hypervolume_history()) {
        let functional = r
            .suggested
            .iter()
            .filter(|id| state.observation(id).is_ok_and(|o| o.is_functional()))
            .count();
        println!(
            "{:<5} {:<11} {:>5} {:>6}/{:<3} {:>12.4}",
            r.label,
            format!("{:?}", r.strategy),
            r.hitl_enabled,
            functional,
            r.suggested.len(),
            h.hypervolume
        );
    }

    for noise_floor in [false, true] {
        let mut s = state.clone();
        s.set_config(CampaignConfig {
            measurement_noise_floor: noise_floor,
            ..CampaignConfig::default()
        })?;
        let models = s.current_models()?;
        println!(
            "\ntraining fit ({}):",
            if noise_floor {
                "noise floored at measurement variance"
            } else {
                "fitted noise"
            }
        );
        for (target, model) in [
            (Target::Dispersion, &models.dispersion),
            (Target::Leakage, &models.leakage),
        ] {
            let (measured, predicted): (Vec<f64>, Vec<f64>) = s
                .functional()
                .map(|o| (o.measurement(target).unwrap(), model.posterior_mean(&o.condition)))
                .unzip();
            let fit = linear_fit(&measured, &predicted).unwrap();
            println!(
                "  {:<10} slope {:.3}  R² {:.3}",
                target.as_str(),
                fit.slope,
                fit.r_squared
            );
        }
    }
    Ok(())
}
