//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use hitl_mobo::design_space::{lhs_sample, ParameterSpace, ProcessCondition, DIMS};
use hitl_mobo::gpr::{KernelHyperparams, SurrogateModel};
use hitl_mobo::pareto::{ObjectivePoint, ParetoFront};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// O(n²) dominance check under joint maximization.
pub fn brute_nondominated(points: &[ObjectivePoint]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            !points.iter().any(|q| {
                let p = &points[i];
                q.f1 >= p.f1 && q.f2 >= p.f2 && (q.f1 > p.f1 || q.f2 > p.f2)
            })
        })
        .collect()
}

/// Exact area of the dominated region by integrating over the grid of all
/// distinct coordinates.
pub fn grid_hypervolume(points: &[ObjectivePoint], r: ObjectivePoint) -> f64 {
    let pts: Vec<&ObjectivePoint> = points.iter().filter(|p| p.f1 > r.f1 && p.f2 > r.f2).collect();
    let mut xs: Vec<f64> = pts.iter().map(|p| p.f1).chain([r.f1]).collect();
    let mut ys: Vec<f64> = pts.iter().map(|p| p.f2).chain([r.f2]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut area = 0.0;
    for i in 1..xs.len() {
        for j in 1..ys.len() {
            if pts.iter().any(|p| p.f1 >= xs[i] && p.f2 >= ys[j]) {
                area += (xs[i] - xs[i - 1]) * (ys[j] - ys[j - 1]);
            }
        }
    }
    area
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let d = m[col][col];
        for v in m[col].iter_mut() {
            *v /= d;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Matérn 5/2 with ARD lengthscales, written out from the closed form.
pub fn matern(u: &[f64; DIMS], v: &[f64; DIMS], hp: &KernelHyperparams) -> f64 {
    let r = (0..DIMS)
        .map(|i| ((u[i] - v[i]) / hp.lengthscales[i]).powi(2))
        .sum::<f64>()
        .sqrt();
    let s5 = 5f64.sqrt();
    hp.signal_variance * (1.0 + s5 * r + 5.0 * r * r / 3.0) * (-s5 * r).exp()
}

/// Dense posterior (mean, std) in raw units for a standardized GP.
pub fn dense_posterior(
    space: &ParameterSpace,
    conds: &[ProcessCondition],
    y: &[f64],
    hp: &KernelHyperparams,
    mean: f64,
    std: f64,
    query: &ProcessCondition,
) -> (f64, f64) {
    let u: Vec<[f64; DIMS]> = conds.iter().map(|c| space.normalize(c).unwrap()).collect();
    let uq = space.normalize(query).unwrap();
    let n = u.len();
    let k: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| matern(&u[i], &u[j], hp) + if i == j { hp.noise_variance } else { 0.0 })
                .collect()
        })
        .collect();
    let kinv = gauss_jordan_inverse(&k);
    let ks: Vec<f64> = u.iter().map(|x| matern(&uq, x, hp)).collect();
    let ys: Vec<f64> = y.iter().map(|v| (v - mean) / std).collect();
    let mut m = 0.0;
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            m += ks[i] * kinv[i][j] * ys[j];
            q += ks[i] * kinv[i][j] * ks[j];
        }
    }
    (mean + std * m, std * (hp.signal_variance - q).max(0.0).sqrt())
}

pub fn random_hyperparams<R: Rng>(rng: &mut R) -> KernelHyperparams {
    KernelHyperparams::new(
        std::array::from_fn(|_| rng.gen_range(0.2..1.5)),
        rng.gen_range(0.5..2.0),
        rng.gen_range(1e-4..1e-2),
    )
}

/// A model over `n` LHS points with smooth random targets.
pub fn random_model(space: &ParameterSpace, n: usize, seed: u64) -> SurrogateModel {
    let mut r = rng(seed);
    let conds = lhs_sample(space, n, seed).unwrap();
    let w: [f64; DIMS] = std::array::from_fn(|_| r.gen_range(-1.0..1.0));
    let y: Vec<f64> = conds
        .iter()
        .map(|c| {
            let u = space.normalize(c).unwrap();
            2.0 + (0..DIMS).map(|i| w[i] * u[i]).sum::<f64>() + 0.3 * (3.0 * u[0]).sin()
        })
        .collect();
    let m = y.iter().sum::<f64>() / n as f64;
    let s = (y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64).sqrt();
    SurrogateModel::from_parts(space, &conds, &y, random_hyperparams(&mut r), m, s).unwrap()
}

/// Hypervolume of points sorted by descending `f1`.
pub fn staircase_hv(sorted_desc_f1: &[ObjectivePoint], r: ObjectivePoint) -> f64 {
    // points sorted by descending f1; a running ceiling over f2
    let mut area = 0.0;
    let mut ceiling = r.f2;
    for p in sorted_desc_f1 {
        if p.f1 > r.f1 && p.f2 > ceiling {
            area += (p.f1 - r.f1) * (p.f2 - ceiling);
            ceiling = p.f2;
        }
    }
    area
}

/// Mean hypervolume improvement over `n` Gaussian draws.
pub fn monte_carlo_ehvi<R: Rng>(
    mu1: f64,
    sd1: f64,
    mu2: f64,
    sd2: f64,
    front: &ParetoFront,
    n: usize,
    g: &mut R,
) -> f64 {
    let r = front.reference();
    let mut sorted = front.points().to_vec();
    sorted.sort_by(|a, b| b.f1.total_cmp(&a.f1));
    let base_hv = staircase_hv(&sorted, r);
    let (n1, n2) = (Normal::new(mu1, sd1).unwrap(), Normal::new(mu2, sd2).unwrap());
    let mut scratch = Vec::with_capacity(sorted.len() + 1);
    let mut total = 0.0;
    for _ in 0..n {
        let p = ObjectivePoint::new(n1.sample(g), n2.sample(g));
        scratch.clear();
        let pos = sorted.partition_point(|q| q.f1 > p.f1);
        scratch.extend_from_slice(&sorted[..pos]);
        scratch.push(p);
        scratch.extend_from_slice(&sorted[pos..]);
        total += staircase_hv(&scratch, r) - base_hv;
    }
    total / n as f64
}

/// Pareto-UCB written out from its definition: explicit UCB pairs,
/// brute-force layers, exhaustive greedy hypervolume within each layer.
pub fn reference_pareto_ucb(
    models: (&SurrogateModel, &SurrogateModel),
    candidates: &[ProcessCondition],
    p: Option<&[f64]>,
    beta: f64,
    r: ObjectivePoint,
    q: usize,
) -> Vec<usize> {
    let ucb: Vec<ObjectivePoint> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (m1, s1) = models.0.predict(c);
            let (m2, s2) = models.1.predict(c);
            let w = p.map_or(1.0, |p| p[i]);
            ObjectivePoint::new((m1 + beta.sqrt() * s1) * w, (m2 + beta.sqrt() * s2) * w)
        })
        .collect();
    let mut remaining: Vec<usize> = (0..candidates.len()).collect();
    let mut picks = Vec::new();
    while picks.len() < q && !remaining.is_empty() {
        let sub: Vec<ObjectivePoint> = remaining.iter().map(|&i| ucb[i]).collect();
        let layer: Vec<usize> = brute_nondominated(&sub).into_iter().map(|k| remaining[k]).collect();
        remaining.retain(|i| !layer.contains(i));
        let mut chosen: Vec<ObjectivePoint> = Vec::new();
        let mut left = layer.clone();
        while picks.len() < q && !left.is_empty() {
            let base = grid_hypervolume(&chosen, r);
            let mut best = (left[0], f64::NEG_INFINITY);
            for &i in &left {
                let mut with = chosen.clone();
                with.push(ucb[i]);
                let gain = grid_hypervolume(&with, r) - base;
                if gain > best.1 + 1e-12 {
                    best = (i, gain);
                }
            }
            picks.push(best.0);
            chosen.push(ucb[best.0]);
            left.retain(|&i| i != best.0);
        }
    }
    picks
}
