//! Shapley attributions for both objective models on the bundled data.
//!
//!     cargo run --release --example shap_report [out.csv]

use hitl_mobo::campaign::{bundled_campaign, CampaignConfig, Target};
use hitl_mobo::reports::shap_report;

fn main() -> hitl_mobo::Result<()> {
    let state = bundled_campaign(CampaignConfig::default())?;
    let models = state.current_models()?;
    for target in [Target::Dispersion, Target::Leakage] {
        let (summary, ids) = shap_report(&state, &models, target)?;
        println!("{} (base value {:.3})", target.as_str(), summary.base_value);
        for name in &summary.ranking {
            let f = summary.features.iter().find(|f| &f.name == name).unwrap();
            let trend = match f.spearman {
                Some(r) if r > 0.3 => "rises with the input",
                Some(r) if r < -0.3 => "falls with the input",
                _ => "no clear direction",
            };
            println!("  {:<16} mean|φ| {:.4}  {trend}", f.name, f.mean_abs_phi);
        }
        if let Some(path) = std::env::args().nth(1) {
            let path = format!("{}_{path}", target.as_str());
            std::fs::write(&path, summary.to_csv(Some(&ids)))?;
            println!("  wrote {path}");
        }
    }
    Ok(())
}
