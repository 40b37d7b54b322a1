//! Conversion-score model from human grades and the feasibility weight it
//! puts on candidates.
//!
//!     cargo run --release --example hitl_constraint

use hitl_mobo::campaign::{bundled_campaign, CampaignConfig};
use hitl_mobo::gpr::FitConfig;
use hitl_mobo::hitl::{fit_conversion_model, p_constraint, ConversionLabel};

fn main() -> hitl_mobo::Result<()> {
    let tau = 0.2;
    println!("feasibility weight by score (tau = {tau}):");
    for l in ConversionLabel::ALL {
        println!(
            "  {:<20} {:+.1}  p = {:.3e}",
            l.as_str(),
            l.score(),
            p_constraint(l.score(), tau)?
        );
    }

    let state = bundled_campaign(CampaignConfig::default())?;
    let scored: Vec<_> = state
        .observations()
        .iter()
        .filter_map(|o| o.label.map(|l| (o.condition, l.score())))
        .collect();
    let model = fit_conversion_model(state.space(), &scored, &FitConfig::default().with_seed(2))?;
    println!("\nconversion model on {} graded films:", scored.len());
    println!("  {:<6} {:<22} {:>8} {:>8}", "id", "label", "mu_conv", "p");
    for o in state.observations().iter().take(12) {
        let mu = model.posterior_mean(&o.condition);
        println!(
            "  {:<6} {:<22} {:>8.3} {:>8.3}",
            o.id,
            o.label.map_or("-", |l| l.as_str()),
            mu,
            p_constraint(mu, tau)?
        );
    }
    Ok(())
}
