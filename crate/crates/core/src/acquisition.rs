//! Batch selection: UCB, exact bi-objective EHVI with Kriging-believer
//! batching, and Pareto-UCB picking. Both pickers compose with an optional
//! feasibility weight.

use std::collections::HashSet;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::design_space::{CandidateGrid, ConditionKey, ParameterSpace, ProcessCondition, DIMS};
use crate::error::{Error, Result};
use crate::gpr::SurrogateModel;
use crate::hitl::p_constraint;
use crate::pareto::{greedy_hv_subset, nondominated, nondominated_layers, ObjectivePoint, ParetoFront};

const CHUNK: u64 = 4096;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Strategy {
    EhviGreedy,
    ParetoUcb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub strategy: Strategy,
    pub beta: f64,
    pub batch_size: usize,
    /// Hypervolume reference in objective space (EHVI).
    pub reference: ObjectivePoint,
    /// Hypervolume reference in (constrained) UCB space (Pareto-UCB).
    pub ucb_reference: ObjectivePoint,
    pub constraint_enabled: bool,
    /// Sample count for the Monte Carlo cross-check of EHVI; 0 disables it.
    #[serde(default)]
    pub mc_validation_samples: usize,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::ParetoUcb,
            beta: 2.0,
            batch_size: 5,
            reference: ObjectivePoint::new(1.0, 0.0),
            ucb_reference: ObjectivePoint::new(0.0, 0.0),
            constraint_enabled: false,
            mc_validation_samples: 0,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be at least 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("beta {} must be non-negative", self.beta)));
        }
        Ok(())
    }
}

/// `mean + √beta · std`.
pub fn ucb(mean: f64, std: f64, beta: f64) -> Result<f64> {
    if std < 0.0 {
        return Err(Error::Parameter(format!("negative std {std}")));
    }
    if beta < 0.0 {
        return Err(Error::Parameter(format!("negative beta {beta}")));
    }
    Ok(mean + beta.sqrt() * std)
}

/// `E[(Y - a)⁺]` for `Y ~ N(mu, sd²)`.
fn expected_excess(mu: f64, sd: f64, a: f64) -> f64 {
    if sd <= 0.0 {
        return (mu - a).max(0.0);
    }
    let t = (a - mu) / sd;
    let pdf = INV_SQRT_2PI * (-0.5 * t * t).exp();
    let upper = 0.5 * erfc(t / std::f64::consts::SQRT_2);
    (sd * pdf + (mu - a) * upper).max(0.0)
}

/// Exact expected hypervolume improvement of a point with independent
/// Gaussian objectives over `front`.
///
/// The region above the reference that the front does not dominate splits
/// into vertical strips. Over the strip `[a, b) × [c, ∞)` the expected
/// covered area factorizes into `(ψ₁(a) - ψ₁(b)) · ψ₂(c)` with
/// `ψ(a) = E[(Y - a)⁺]`.
pub fn ehvi_2d(mu1: f64, sd1: f64, mu2: f64, sd2: f64, front: &ParetoFront) -> f64 {
    let r = front.reference();
    // points() is sorted by ascending f1 and strictly descending f2
    let pts: Vec<&ObjectivePoint> = front.points().iter().filter(|p| p.f1 > r.f1 && p.f2 > r.f2).collect();
    let psi1 = |a: f64| expected_excess(mu1, sd1, a);
    let psi2 = |a: f64| expected_excess(mu2, sd2, a);
    let mut total = 0.0;
    let mut left = r.f1;
    let mut psi_left = psi1(left);
    for p in pts {
        let psi_right = psi1(p.f1);
        let width = psi_left - psi_right;
        if width > 0.0 {
            total += width * psi2(p.f2);
        }
        left = p.f1;
        psi_left = psi_right;
    }
    debug_assert!(left >= r.f1);
    total + psi_left * psi2(r.f2)
}

/// Where candidates come from: an explicit list or a (refined) grid
/// streamed by index with exclusions.
#[derive(Clone, Copy)]
pub enum CandidatePool<'a> {
    List(&'a [ProcessCondition]),
    Grid {
        grid: &'a CandidateGrid,
        exclude: &'a HashSet<ConditionKey>,
    },
}

impl CandidatePool<'_> {
    fn index_bound(&self) -> u64 {
        match self {
            CandidatePool::List(l) => l.len() as u64,
            CandidatePool::Grid { grid, .. } => grid.len(),
        }
    }

    fn get(&self, index: u64) -> Option<ProcessCondition> {
        match self {
            CandidatePool::List(l) => l.get(index as usize).copied(),
            CandidatePool::Grid { grid, exclude } => {
                let c = grid.condition_at(index);
                (!exclude.contains(&c.key())).then_some(c)
            }
        }
    }

    fn chunks(&self) -> Vec<Range<u64>> {
        let n = self.index_bound();
        (0..n.div_ceil(CHUNK))
            .map(|k| k * CHUNK..((k + 1) * CHUNK).min(n))
            .collect()
    }
}

/// Per-candidate success probability multiplying acquisition values.
pub trait Feasibility: Sync {
    fn probability(&self, index: u64, condition: &ProcessCondition) -> f64;
}

/// A precomputed map aligned with a [`CandidatePool::List`].
impl Feasibility for [f64] {
    fn probability(&self, index: u64, _: &ProcessCondition) -> f64 {
        self[index as usize]
    }
}

impl Feasibility for Vec<f64> {
    fn probability(&self, index: u64, c: &ProcessCondition) -> f64 {
        self.as_slice().probability(index, c)
    }
}

/// Feasibility from the conversion-score model, evaluated on the fly.
pub struct ConversionConstraint<'a> {
    pub model: &'a SurrogateModel,
    pub tau: f64,
}

impl Feasibility for ConversionConstraint<'_> {
    fn probability(&self, _: u64, c: &ProcessCondition) -> f64 {
        p_constraint(self.model.posterior_mean(c), self.tau).unwrap_or(0.0)
    }
}

/// One picked candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    /// Position in the candidate pool (list index or grid index).
    pub index: u64,
    pub condition: ProcessCondition,
    /// Constrained acquisition value(s) at selection time.
    pub value: (f64, f64),
}

fn weight(feasibility: Option<&dyn Feasibility>, index: u64, c: &ProcessCondition) -> f64 {
    feasibility.map_or(1.0, |f| f.probability(index, c))
}

/// Greedy EHVI batch with Kriging-believer fantasies: after each pick
/// both models are conditioned on their own posterior means there and the
/// front absorbs the fantasized point.
pub fn ehvi_greedy_batch(
    models: (&SurrogateModel, &SurrogateModel),
    pool: CandidatePool<'_>,
    front: &ParetoFront,
    config: &AcquisitionConfig,
    feasibility: Option<&dyn Feasibility>,
) -> Result<Vec<Selection>> {
    config.validate()?;
    let mut m1 = models.0.clone();
    let mut m2 = models.1.clone();
    let mut front = front.clone();
    let mut taken: HashSet<u64> = HashSet::new();
    let mut picks = Vec::with_capacity(config.batch_size);
    let chunks = pool.chunks();

    for _ in 0..config.batch_size {
        let best = chunks
            .par_iter()
            .map(|range| {
                let mut best: Option<(f64, u64, ProcessCondition)> = None;
                for i in range.clone() {
                    if taken.contains(&i) {
                        continue;
                    }
                    let Some(c) = pool.get(i) else { continue };
                    let (mu1, sd1) = m1.predict(&c);
                    let (mu2, sd2) = m2.predict(&c);
                    let mut v = ehvi_2d(mu1, sd1, mu2, sd2, &front) * weight(feasibility, i, &c);
                    if v.is_nan() {
                        v = f64::NEG_INFINITY;
                    }
                    if best.map_or(true, |(b, _, _)| v > b) {
                        best = Some((v, i, c));
                    }
                }
                best
            })
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            // chunks are in index order, so strict > keeps the lowest index on ties
            .fold(None, |acc: Option<(f64, u64, ProcessCondition)>, cur| match acc {
                Some(a) if a.0 >= cur.0 => Some(a),
                _ => Some(cur),
            });
        let Some((value, index, condition)) = best else {
            if picks.is_empty() {
                return Err(Error::Exhausted);
            }
            break;
        };
        let (mu1, _) = m1.predict(&condition);
        let (mu2, _) = m2.predict(&condition);
        m1 = m1.with_fantasy(&condition, mu1)?;
        m2 = m2.with_fantasy(&condition, mu2)?;
        front = front.with_point(ObjectivePoint::new(mu1, mu2));
        taken.insert(index);
        picks.push(Selection {
            index,
            condition,
            value: (value, value),
        });
    }
    Ok(picks)
}

fn ucb_pair(models: (&SurrogateModel, &SurrogateModel), beta: f64, p: f64, c: &ProcessCondition) -> ObjectivePoint {
    let (mu1, sd1) = models.0.predict(c);
    let (mu2, sd2) = models.1.predict(c);
    let s = beta.sqrt();
    ObjectivePoint::new((mu1 + s * sd1) * p, (mu2 + s * sd2) * p)
}

/// First `depth` nondominated layers of `points` (keys kept alongside).
fn top_layers(
    points: Vec<(u64, ProcessCondition, ObjectivePoint)>,
    depth: usize,
) -> Vec<(u64, ProcessCondition, ObjectivePoint)> {
    let mut remaining = points;
    let mut kept = Vec::new();
    for _ in 0..depth {
        if remaining.is_empty() {
            break;
        }
        let objs: Vec<ObjectivePoint> = remaining.iter().map(|t| t.2).collect();
        let front = nondominated(&objs);
        let mut in_front = vec![false; remaining.len()];
        for &k in &front {
            in_front[k] = true;
        }
        let mut rest = Vec::with_capacity(remaining.len() - front.len());
        for (t, f) in remaining.into_iter().zip(in_front) {
            if f {
                kept.push(t);
            } else {
                rest.push(t);
            }
        }
        remaining = rest;
    }
    kept.sort_by_key(|t| t.0);
    kept
}

/// Pareto-UCB: nondominated set of (constrained) UCB pairs, then greedy
/// hypervolume selection. When the first layer holds fewer than `q`
/// points, later layers are peeled and selected greedily in turn.
pub fn pareto_ucb_batch(
    models: (&SurrogateModel, &SurrogateModel),
    pool: CandidatePool<'_>,
    config: &AcquisitionConfig,
    feasibility: Option<&dyn Feasibility>,
) -> Result<Vec<Selection>> {
    config.validate()?;
    let q = config.batch_size;
    // Only the first q layers can contribute, so each chunk is pruned to its
    // own first q layers before merging.
    let partials: Vec<Vec<(u64, ProcessCondition, ObjectivePoint)>> = pool
        .chunks()
        .par_iter()
        .map(|range| {
            let pts: Vec<_> = range
                .clone()
                .filter_map(|i| pool.get(i).map(|c| (i, c)))
                .map(|(i, c)| {
                    let p = weight(feasibility, i, &c);
                    (i, c, ucb_pair(models, config.beta, p, &c))
                })
                .collect();
            top_layers(pts, q)
        })
        .collect();
    let merged: Vec<_> = partials.into_iter().flatten().collect();
    if merged.is_empty() {
        return Err(Error::Exhausted);
    }
    let candidates = top_layers(merged, q);

    let objs: Vec<ObjectivePoint> = candidates.iter().map(|t| t.2).collect();
    let mut picks = Vec::with_capacity(q);
    for layer in nondominated_layers(&objs) {
        if picks.len() == q {
            break;
        }
        let layer_pts: Vec<ObjectivePoint> = layer.iter().map(|&k| objs[k]).collect();
        for k in greedy_hv_subset(&layer_pts, config.ucb_reference, q - picks.len()) {
            let (index, condition, v) = candidates[layer[k]];
            picks.push(Selection {
                index,
                condition,
                value: (v.f1, v.f2),
            });
        }
    }
    Ok(picks)
}

/// One cell of a two-parameter acquisition sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapCell {
    pub x: f64,
    pub y: f64,
    pub mean: [f64; 2],
    pub std: [f64; 2],
    pub ucb: [f64; 2],
    pub mu_conv: Option<f64>,
    pub p_constraint: f64,
    pub constrained: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionMap {
    pub x_param: String,
    pub y_param: String,
    pub fixed: Vec<(String, f64)>,
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// Row-major: `cells[iy * x_values.len() + ix]`.
    pub cells: Vec<MapCell>,
}

impl AcquisitionMap {
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "{},{},mean_dispersion,std_dispersion,mean_leakage,std_leakage,ucb_dispersion,ucb_leakage,mu_conv,p_constraint,constrained_dispersion,constrained_leakage\n",
            self.x_param, self.y_param
        );
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                c.x,
                c.y,
                c.mean[0],
                c.std[0],
                c.mean[1],
                c.std[1],
                c.ucb[0],
                c.ucb[1],
                c.mu_conv.map_or(String::new(), |m| m.to_string()),
                c.p_constraint,
                c.constrained[0],
                c.constrained[1]
            ));
        }
        out
    }
}

/// Sweeps two parameters over their grid values with the other three held
/// at `fixed` (in ascending parameter order). Returns raw and constrained
/// UCB for both objectives at every cell.
pub fn acquisition_map(
    models: (&SurrogateModel, &SurrogateModel),
    space: &ParameterSpace,
    fixed: [f64; 3],
    sweep: (usize, usize),
    beta: f64,
    constraint: Option<(&SurrogateModel, f64)>,
) -> Result<AcquisitionMap> {
    let (ix, iy) = sweep;
    if ix == iy || ix >= DIMS || iy >= DIMS {
        return Err(Error::Parameter(format!(
            "sweep indices ({ix}, {iy}) must be distinct and < {DIMS}"
        )));
    }
    let others: Vec<usize> = (0..DIMS).filter(|d| *d != ix && *d != iy).collect();
    let axis = |d: usize| -> Vec<f64> {
        let p = space.param(d);
        (0..p.step_count()).map(|k| p.value_at(k)).collect()
    };
    let x_values = axis(ix);
    let y_values = axis(iy);
    let mut base = [0.0; DIMS];
    for (k, &d) in others.iter().enumerate() {
        base[d] = fixed[k];
    }
    let mut cells = Vec::with_capacity(x_values.len() * y_values.len());
    for &y in &y_values {
        for &x in &x_values {
            let mut v = base;
            v[ix] = x;
            v[iy] = y;
            let c = ProcessCondition(v);
            space.check_bounds(&c)?;
            let (m1, s1) = models.0.predict(&c);
            let (m2, s2) = models.1.predict(&c);
            let u = [ucb(m1, s1, beta)?, ucb(m2, s2, beta)?];
            let (mu_conv, p) = match constraint {
                Some((model, tau)) => {
                    let m = model.posterior_mean(&c);
                    (Some(m), p_constraint(m, tau)?)
                }
                None => (None, 1.0),
            };
            cells.push(MapCell {
                x,
                y,
                mean: [m1, m2],
                std: [s1, s2],
                ucb: u,
                mu_conv,
                p_constraint: p,
                constrained: [u[0] * p, u[1] * p],
            });
        }
    }
    let names = space.names();
    Ok(AcquisitionMap {
        x_param: names[ix].to_string(),
        y_param: names[iy].to_string(),
        fixed: others
            .iter()
            .zip(fixed)
            .map(|(&d, v)| (names[d].to_string(), v))
            .collect(),
        x_values,
        y_values,
        cells,
    })
}
