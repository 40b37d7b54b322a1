//! Draw a Latin hypercube over the photonic-curing space and check its
//! one-per-stratum property.
//!
//!     cargo run --example lhs_design -- 30 7

use hitl_mobo::design_space::{lhs_design, ParameterSpace, DIMS};

fn main() -> hitl_mobo::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(Ok(30), |a| a.parse()).expect("n must be an integer");
    let seed: u64 = args
        .next()
        .map_or(Ok(7), |a| a.parse())
        .expect("seed must be an integer");
    let space = ParameterSpace::photonic_curing();
    let design = lhs_design(&space, n, seed)?;

    println!("{}", space.names().join(","));
    for c in &design.conditions {
        let row: Vec<String> = c.0.iter().map(|v| v.to_string()).collect();
        println!("{}", row.join(","));
    }
    for d in 0..DIMS {
        let mut strata: Vec<usize> = design.unit.iter().map(|u| (u[d] * n as f64) as usize).collect();
        strata.sort_unstable();
        assert_eq!(strata, (0..n).collect::<Vec<_>>());
    }
    eprintln!("{n} conditions, every dimension covers each of its {n} strata once");
    Ok(())
}
