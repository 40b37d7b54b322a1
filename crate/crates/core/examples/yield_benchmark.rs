//! A/B yield benchmark on the synthetic lab, with and without the
//! feasibility model.
//!
//!     cargo run --release --example yield_benchmark -- 20

use hitl_mobo::oracle_sim::{run_benchmark, Arm, BenchmarkConfig, SyntheticLab};

fn main() -> hitl_mobo::Result<()> {
    let seeds: u64 = std::env::args().nth(1).map_or(20, |a| a.parse().expect("seed count"));
    let lab = SyntheticLab::default();
    let config = BenchmarkConfig::default();
    let start = std::time::Instant::now();
    let report = run_benchmark(&lab, &config, &[Arm::Hitl, Arm::Baseline], seeds)?;
    for (arm, y) in &report.mean_yield {
        println!("{:<8} mean post-initial yield {:.3}", arm.as_str(), y);
    }
    for round in 1..=config.rounds {
        let per_arm: Vec<String> = [Arm::Hitl, Arm::Baseline]
            .iter()
            .map(|&arm| {
                let rows: Vec<_> = report
                    .rows
                    .iter()
                    .filter(|r| r.arm == arm && r.round == round)
                    .collect();
                let y = rows.iter().map(|r| r.yield_fraction).sum::<f64>() / rows.len() as f64;
                format!("{} {y:.3}", arm.as_str())
            })
            .collect();
        println!("round {round}: {}", per_arm.join(", "));
    }
    println!("{seeds} seeds in {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
