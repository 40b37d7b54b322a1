//! Library routines checked against independent reference implementations.

mod common;

use common::*;
use hitl_mobo::acquisition::{ehvi_2d, pareto_ucb_batch, AcquisitionConfig, CandidatePool, Feasibility, Strategy};
use hitl_mobo::design_space::{lhs_sample, ParameterSpace, ProcessCondition};
use hitl_mobo::gpr::{self, matern52_ard, FitConfig, KernelHyperparams, SurrogateModel};
use hitl_mobo::pareto::{
    greedy_hv_subset, hypervolume_2d, nondominated, nondominated_layers, ObjectivePoint, ParetoFront,
};
use rand::Rng;

fn space() -> ParameterSpace {
    ParameterSpace::photonic_curing()
}

#[test]
fn matern_kernel_spot_value() {
    let hp = KernelHyperparams::new([1.0; 5], 1.0, 0.0);
    let k = matern52_ard(&[0.0; 5], &[1.0, 0.0, 0.0, 0.0, 0.0], &hp).unwrap();
    assert!((k - 0.52399).abs() < 1e-5, "{k}");
    assert!((k - matern(&[0.0; 5], &[1.0, 0.0, 0.0, 0.0, 0.0], &hp)).abs() < 1e-15);
}

#[test]
fn three_point_posterior_matches_dense_inverse() {
    let s = space();
    let conds = [
        ProcessCondition([2.0, 5.0, 3.0, 10.0, 40.0]),
        ProcessCondition([6.0, 20.0, 8.0, 30.0, 65.0]),
        ProcessCondition([4.0, 12.0, 5.0, 18.0, 60.0]),
    ];
    let y = [1.2, 3.4, 2.1];
    let hp = KernelHyperparams::new([0.4, 0.9, 0.6, 1.3, 0.7], 1.3, 2e-3);
    let (m, sd) = (2.0, 0.8);
    let model = SurrogateModel::from_parts(&s, &conds, &y, hp.clone(), m, sd).unwrap();
    let mut r = rng(5);
    let queries: Vec<ProcessCondition> = (0..20)
        .map(|_| ProcessCondition(std::array::from_fn(|i| r.gen_range(s.param(i).min..=s.param(i).max))))
        .chain(conds)
        .collect();
    for q in &queries {
        let (mu, std) = model.predict(q);
        let (mu_o, std_o) = dense_posterior(&s, &conds, &y, &hp, m, sd, q);
        assert!((mu - mu_o).abs() < 1e-8, "{mu} vs {mu_o}");
        assert!((std - std_o).abs() < 1e-8, "{std} vs {std_o}");
    }
}

#[test]
fn noiseless_model_interpolates() {
    let s = space();
    let conds = lhs_sample(&s, 8, 3).unwrap();
    let y: Vec<f64> = conds.iter().map(|c| c.0[0].sin() + 0.1 * c.0[1]).collect();
    let hp = KernelHyperparams::new([0.5; 5], 1.0, 0.0);
    let model = SurrogateModel::from_parts(&s, &conds, &y, hp, 0.0, 1.0).unwrap();
    for (c, t) in conds.iter().zip(&y) {
        let (mu, sd) = model.predict(c);
        assert!((mu - t).abs() < 1e-4, "{mu} vs {t}");
        assert!(sd < 1e-3);
    }
}

#[test]
fn fitted_model_agrees_with_oracle_at_its_hyperparameters() {
    let s = space();
    let conds = lhs_sample(&s, 12, 8).unwrap();
    let y: Vec<f64> = conds
        .iter()
        .map(|c| 0.3 * c.0[0] - 0.02 * c.0[3] + (0.1 * c.0[4]).cos())
        .collect();
    let model = gpr::fit(&s, &conds, &y, &FitConfig::default().with_seed(4)).unwrap();
    let hp = model.hyperparams();
    for q in lhs_sample(&s, 10, 99).unwrap() {
        let (mu, sd) = model.predict(&q);
        let (mu_o, sd_o) = dense_posterior(&s, &conds, &y, hp, model.target_mean(), model.target_std(), &q);
        assert!((mu - mu_o).abs() < 1e-6 * (1.0 + mu_o.abs()), "{mu} vs {mu_o}");
        assert!((sd - sd_o).abs() < 1e-6, "{sd} vs {sd_o}");
    }
}

/// Improvement from adding `p` to `front`, via the grid oracle.
fn hv_gain(front: &[ObjectivePoint], p: ObjectivePoint, r: ObjectivePoint) -> f64 {
    let mut with = front.to_vec();
    with.push(p);
    grid_hypervolume(&with, r) - grid_hypervolume(front, r)
}

#[test]
fn ehvi_matches_monte_carlo() {
    let r = ObjectivePoint::new(1.0, 0.0);
    let mut g = rng(2024);
    let mut states = 0;
    while states < 10 {
        let k = g.gen_range(1..=5);
        let mut xs: Vec<f64> = (0..k).map(|_| g.gen_range(1.2..3.0)).collect();
        let mut ys: Vec<f64> = (0..k).map(|_| g.gen_range(0.2..2.0)).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(|a, b| b.total_cmp(a));
        let pts: Vec<ObjectivePoint> = xs.iter().zip(&ys).map(|(x, y)| ObjectivePoint::new(*x, *y)).collect();
        let front = ParetoFront::from_points(&pts, r);
        let (mu1, mu2) = (g.gen_range(1.5..3.2), g.gen_range(0.5..2.2));
        let (sd1, sd2) = (g.gen_range(0.1..0.6), g.gen_range(0.1..0.6));
        let exact = ehvi_2d(mu1, sd1, mu2, sd2, &front);
        if exact < 0.02 {
            continue;
        }
        states += 1;
        let mc = monte_carlo_ehvi(mu1, sd1, mu2, sd2, &front, 1_000_000, &mut g);
        let rel = (exact - mc).abs() / mc;
        assert!(rel < 0.01, "state {states}: exact {exact} mc {mc} rel {rel}");
    }
}

#[test]
fn ehvi_with_zero_std_is_deterministic_gain() {
    let r = ObjectivePoint::new(1.0, 0.0);
    let mut g = rng(77);
    for _ in 0..200 {
        let k = g.gen_range(0..=6);
        let pts: Vec<ObjectivePoint> = (0..k)
            .map(|_| ObjectivePoint::new(g.gen_range(0.5..3.0), g.gen_range(-0.5..2.0)))
            .collect();
        let front = ParetoFront::from_points(&pts, r);
        let p = ObjectivePoint::new(g.gen_range(0.5..3.5), g.gen_range(-0.5..2.5));
        let exact = ehvi_2d(p.f1, 0.0, p.f2, 0.0, &front);
        let gain = hv_gain(front.points(), p, r);
        assert!((exact - gain).abs() < 1e-8, "{exact} vs {gain}");
        let tiny = ehvi_2d(p.f1, 1e-12, p.f2, 1e-12, &front);
        assert!((tiny - gain).abs() < 1e-8, "{tiny} vs {gain}");
    }
}

#[test]
fn pareto_ucb_matches_reference_implementation() {
    let s = space();
    for seed in 0..12u64 {
        let m1 = random_model(&s, 10, seed);
        let m2 = random_model(&s, 10, seed + 100);
        let candidates = lhs_sample(&s, 100, seed + 7).unwrap();
        let mut g = rng(seed);
        let feas: Vec<f64> = (0..100).map(|_| g.gen_range(0.0..1.0)).collect();
        for (q, use_feas) in [(1, false), (5, false), (5, true), (12, true)] {
            let cfg = AcquisitionConfig {
                strategy: Strategy::ParetoUcb,
                batch_size: q,
                ..AcquisitionConfig::default()
            };
            let f: Option<&dyn Feasibility> = use_feas.then_some(&feas as &dyn Feasibility);
            let got: Vec<usize> = pareto_ucb_batch((&m1, &m2), CandidatePool::List(&candidates), &cfg, f)
                .unwrap()
                .iter()
                .map(|s| s.index as usize)
                .collect();
            let want = reference_pareto_ucb(
                (&m1, &m2),
                &candidates,
                use_feas.then_some(&feas[..]),
                cfg.beta,
                cfg.ucb_reference,
                q,
            );
            assert_eq!(got, want, "seed {seed} q {q} feasibility {use_feas}");
        }
    }
}

#[test]
fn greedy_single_pick_is_exhaustive_argmax() {
    let r = ObjectivePoint::new(0.0, 0.0);
    let mut g = rng(11);
    for _ in 0..100 {
        let n = g.gen_range(1..40);
        let pts: Vec<ObjectivePoint> = (0..n)
            .map(|_| ObjectivePoint::new(g.gen_range(-0.5..3.0), g.gen_range(-0.5..3.0)))
            .collect();
        let greedy = greedy_hv_subset(&pts, r, 1)[0];
        let mut best = (0, f64::NEG_INFINITY);
        for (i, p) in pts.iter().enumerate() {
            let hv = grid_hypervolume(&[*p], r);
            if hv > best.1 {
                best = (i, hv);
            }
        }
        assert_eq!(greedy, best.0);
    }
}

#[test]
fn nondominated_matches_brute_force() {
    let mut g = rng(3);
    for n in (0..=500).step_by(7) {
        // integer coordinates force ties and duplicates
        let pts: Vec<ObjectivePoint> = (0..n)
            .map(|_| ObjectivePoint::new(g.gen_range(0..25) as f64, g.gen_range(0..25) as f64))
            .collect();
        assert_eq!(nondominated(&pts), brute_nondominated(&pts), "n = {n}");
        let layers = nondominated_layers(&pts);
        let mut all: Vec<usize> = layers.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}

#[test]
fn hypervolume_matches_grid_integration() {
    let mut g = rng(9);
    for _ in 0..300 {
        let n = g.gen_range(0..60);
        let r = ObjectivePoint::new(g.gen_range(-1.0..1.0), g.gen_range(-1.0..1.0));
        let pts: Vec<ObjectivePoint> = (0..n)
            .map(|_| ObjectivePoint::new(g.gen_range(-1.0..4.0), g.gen_range(-1.0..4.0)))
            .collect();
        let fast = hypervolume_2d(&pts, r);
        let grid = grid_hypervolume(&pts, r);
        assert!((fast - grid).abs() <= 1e-9 * grid.max(1.0), "{fast} vs {grid}");
    }
}
