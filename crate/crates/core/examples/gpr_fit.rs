//! Fit a Matérn 5/2 GP to a smooth synthetic response and compare its
//! held-out predictions with the truth.
//!
//!     cargo run --release --example gpr_fit

use hitl_mobo::design_space::{lhs_sample, ParameterSpace, ProcessCondition};
use hitl_mobo::gpr::{fit, FitConfig};
use hitl_mobo::stats::linear_fit;

fn truth(space: &ParameterSpace, c: &ProcessCondition) -> f64 {
    let u = space.normalize(c).unwrap();
    2.0 + u[0] - 1.5 * (u[1] - 0.4).powi(2) + 0.5 * (4.0 * u[2]).sin() + 0.2 * u[3] * u[4]
}

fn main() -> hitl_mobo::Result<()> {
    let space = ParameterSpace::photonic_curing();
    let train = lhs_sample(&space, 40, 1)?;
    let y: Vec<f64> = train.iter().map(|c| truth(&space, c)).collect();
    let model = fit(&space, &train, &y, &FitConfig::default().with_seed(3))?;

    let hp = model.hyperparams();
    println!("lengthscales (unit cube):");
    for (name, l) in space.names().iter().zip(hp.lengthscales) {
        println!("  {name:<16} {l:.3}");
    }
    println!(
        "signal variance {:.3}, noise variance {:.2e}",
        hp.signal_variance, hp.noise_variance
    );
    println!("log marginal likelihood {:.3}", model.log_marginal_likelihood());

    let test = lhs_sample(&space, 200, 99)?;
    let (mean, std) = model.posterior(&test);
    let actual: Vec<f64> = test.iter().map(|c| truth(&space, c)).collect();
    let covered = actual
        .iter()
        .zip(mean.iter().zip(&std))
        .filter(|(a, (m, s))| (*a - *m).abs() <= 2.0 * *s)
        .count();
    let fit = linear_fit(&actual, &mean).unwrap();
    println!(
        "held-out: slope {:.3}, R² {:.3}, {covered}/200 within 2σ",
        fit.slope, fit.r_squared
    );
    Ok(())
}
