//! Read-only views over a campaign shared by the CLI and the HTTP API.

use serde::{Deserialize, Serialize};

use crate::acquisition::{acquisition_map, AcquisitionMap};
use crate::campaign::{CampaignState, FittedModels, FrontMember, Target};
use crate::design_space::{CandidateGrid, ProcessCondition, DIMS};
use crate::error::{Error, Result};
use crate::explain::{shap_summary, ShapSummary};
use crate::hitl::p_constraint;
use crate::pareto::{nondominated, ObjectivePoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasuredPoint {
    pub id: String,
    pub round: usize,
    pub condition: ProcessCondition,
    pub point: ObjectivePoint,
    pub std: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFrontPoint {
    pub condition: ProcessCondition,
    pub mean: [f64; 2],
    /// Posterior std at the generating condition; the plotted band is mean ± std.
    pub std: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParetoView {
    pub reference: ObjectivePoint,
    pub measured: Vec<MeasuredPoint>,
    pub measured_front: Vec<FrontMember>,
    /// Nondominated posterior means over a seeded sample of the candidate
    /// grid, sorted by dispersion. Empty when models cannot be fitted.
    pub model_front: Vec<ModelFrontPoint>,
}

pub fn measured_points(state: &CampaignState) -> Vec<MeasuredPoint> {
    state
        .functional()
        .map(|o| MeasuredPoint {
            id: o.id.clone(),
            round: o.round,
            condition: o.condition,
            point: o.objectives().unwrap(),
            std: [o.dispersion.unwrap().std, o.leakage.unwrap().std],
        })
        .collect()
}

/// Model-predicted front: posterior means over the candidate pool, reduced
/// to their nondominated set.
pub fn model_front(state: &CampaignState, models: &FittedModels, sample: usize) -> Result<Vec<ModelFrontPoint>> {
    use rand::SeedableRng;
    let grid = CandidateGrid::new(state.space(), &state.config().refinement)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(state.config().seed);
    let mut pool = grid.sample(sample, &Default::default(), &mut rng);
    pool.extend(state.functional().map(|o| o.condition));
    let (m1, s1) = models.dispersion.posterior(&pool);
    let (m2, s2) = models.leakage.posterior(&pool);
    let pts: Vec<ObjectivePoint> = m1.iter().zip(&m2).map(|(a, b)| ObjectivePoint::new(*a, *b)).collect();
    let mut front: Vec<ModelFrontPoint> = nondominated(&pts)
        .into_iter()
        .map(|i| ModelFrontPoint {
            condition: pool[i],
            mean: [m1[i], m2[i]],
            std: [s1[i], s2[i]],
        })
        .collect();
    front.sort_by(|a, b| a.mean[0].total_cmp(&b.mean[0]));
    Ok(front)
}

pub fn pareto_view(state: &CampaignState, models: Option<&FittedModels>) -> Result<ParetoView> {
    let model_front = match models {
        Some(m) => model_front(state, m, state.config().pool_size.unwrap_or(20_000).min(20_000))?,
        None => Vec::new(),
    };
    Ok(ParetoView {
        reference: state.config().reference,
        measured: measured_points(state),
        measured_front: state.measured_front(),
        model_front,
    })
}

/// Shapley summary of one model over its own training set.
pub fn shap_report(state: &CampaignState, models: &FittedModels, target: Target) -> Result<(ShapSummary, Vec<String>)> {
    let (model, ids) = match target {
        Target::Dispersion => (&models.dispersion, &models.objective_ids),
        Target::Leakage => (&models.leakage, &models.objective_ids),
        Target::Conversion => (
            models.conversion.as_ref().ok_or_else(|| {
                Error::InsufficientData("no conversion model (fewer than 2 scored conditions)".into())
            })?,
            &models.conversion_ids,
        ),
    };
    let conditions = ids
        .iter()
        .map(|id| state.observation(id).map(|o| o.condition))
        .collect::<Result<Vec<_>>>()?;
    Ok((shap_summary(model, state.space(), &conditions, None)?, ids.clone()))
}

/// Default values for the three non-swept parameters: medians of the latest
/// round's suggestions, or of every observation when no round exists.
pub fn default_fixed(state: &CampaignState, pair: (usize, usize)) -> [f64; 3] {
    let conditions: Vec<ProcessCondition> = match state.latest_round() {
        Some(r) if !r.suggested.is_empty() => r
            .suggested
            .iter()
            .filter_map(|id| state.observation(id).ok().map(|o| o.condition))
            .collect(),
        _ => state.observations().iter().map(|o| o.condition).collect(),
    };
    let others: Vec<usize> = (0..DIMS).filter(|d| *d != pair.0 && *d != pair.1).collect();
    std::array::from_fn(|k| {
        let d = others[k];
        let p = state.space().param(d);
        let mut v: Vec<f64> = conditions.iter().map(|c| c.0[d]).collect();
        if v.is_empty() {
            return p.snap((p.min + p.max) / 2.0);
        }
        v.sort_by(f64::total_cmp);
        p.snap(v[v.len() / 2])
    })
}

pub fn acq_map(
    state: &CampaignState,
    models: &FittedModels,
    pair: (usize, usize),
    fixed: Option<[f64; 3]>,
) -> Result<AcquisitionMap> {
    let fixed = fixed.unwrap_or_else(|| default_fixed(state, pair));
    let constraint = models.conversion.as_ref().map(|m| (m, state.config().tau));
    acquisition_map(
        (&models.dispersion, &models.leakage),
        state.space(),
        fixed,
        pair,
        state.config().beta,
        constraint,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCell {
    pub x: f64,
    pub y: f64,
    pub mu_conv: f64,
    pub sd_conv: f64,
    pub p_constraint: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstraintMap {
    pub x_param: String,
    pub y_param: String,
    pub fixed: Vec<(String, f64)>,
    pub tau: f64,
    pub x_values: Vec<f64>,
    pub y_values: Vec<f64>,
    /// Row-major: `cells[iy * x_values.len() + ix]`.
    pub cells: Vec<ConstraintCell>,
}

impl ConstraintMap {
    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{},mu_conv,sd_conv,p_constraint\n", self.x_param, self.y_param);
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                c.x, c.y, c.mu_conv, c.sd_conv, c.p_constraint
            ));
        }
        out
    }
}

/// Conversion-score posterior and feasibility over a two-parameter sweep.
pub fn constraint_map(
    state: &CampaignState,
    models: &FittedModels,
    pair: (usize, usize),
    fixed: Option<[f64; 3]>,
) -> Result<ConstraintMap> {
    let conv = models
        .conversion
        .as_ref()
        .ok_or_else(|| Error::InsufficientData("no conversion model (fewer than 2 scored conditions)".into()))?;
    let base = acq_map(state, models, pair, fixed)?;
    let tau = state.config().tau;
    let space = state.space();
    let (ix, iy) = pair;
    let mut v = [0.0; DIMS];
    let others: Vec<usize> = (0..DIMS).filter(|d| *d != ix && *d != iy).collect();
    for (k, &d) in others.iter().enumerate() {
        v[d] = base.fixed[k].1;
    }
    let cells = base
        .cells
        .iter()
        .map(|c| {
            let mut u = v;
            u[ix] = c.x;
            u[iy] = c.y;
            let (mu, sd) = conv.predict(&ProcessCondition(u));
            Ok(ConstraintCell {
                x: c.x,
                y: c.y,
                mu_conv: mu,
                sd_conv: sd,
                p_constraint: p_constraint(mu, tau)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let names = space.names();
    Ok(ConstraintMap {
        x_param: names[ix].to_string(),
        y_param: names[iy].to_string(),
        fixed: base.fixed,
        tau,
        x_values: base.x_values,
        y_values: base.y_values,
        cells,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    pub condition: ProcessCondition,
    pub dispersion: [f64; 2],
    pub leakage: [f64; 2],
    pub conversion: Option<[f64; 2]>,
    pub p_constraint: Option<f64>,
}

pub fn whatif(state: &CampaignState, models: &FittedModels, c: &ProcessCondition) -> Result<WhatIf> {
    state.space().check_bounds(c)?;
    let (m1, s1) = models.dispersion.predict(c);
    let (m2, s2) = models.leakage.predict(c);
    let conversion = models.conversion.as_ref().map(|m| m.predict(c));
    Ok(WhatIf {
        condition: *c,
        dispersion: [m1, s1],
        leakage: [m2, s2],
        conversion: conversion.map(|(m, s)| [m, s]),
        p_constraint: conversion
            .map(|(m, _)| p_constraint(m, state.config().tau))
            .transpose()?,
    })
}

/// Parses `i,j` parameter indices or names.
pub fn parse_pair(state: &CampaignState, text: &str) -> Result<(usize, usize)> {
    let names = state.space().names();
    let idx = |s: &str| -> Result<usize> {
        let s = s.trim();
        s.parse::<usize>()
            .ok()
            .filter(|i| *i < DIMS)
            .or_else(|| names.iter().position(|n| n.eq_ignore_ascii_case(s)))
            .ok_or_else(|| Error::Parameter(format!("`{s}` is not a parameter index (0-4) or name")))
    };
    let (a, b) = text
        .split_once(',')
        .ok_or_else(|| Error::Parameter(format!("pair `{text}` must look like `0,1`")))?;
    let pair = (idx(a)?, idx(b)?);
    if pair.0 == pair.1 {
        return Err(Error::Parameter("pair indices must differ".into()));
    }
    Ok(pair)
}

pub fn parse_reals<const N: usize>(text: &str) -> Result<[f64; N]> {
    let v: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Parameter(format!("`{text}` must be {N} comma-separated numbers")))?;
    v.try_into()
        .map_err(|_| Error::Parameter(format!("`{text}` must be {N} comma-separated numbers")))
}

pub fn observations_csv(state: &CampaignState) -> String {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| x.to_string());
    let mut out = String::from(
        "condition_id,radiant_energy_J_cm2,pulse_count,pulse_length_ms,micropulse_count,duty_cycle_pct,pulse_voltage_V,conversion_score,dispersion_mean,dispersion_std,leakage_mean,leakage_std,round\n",
    );
    for o in state.observations() {
        let c = o.condition.0;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            o.id,
            c[0],
            c[1],
            c[2],
            c[3],
            c[4],
            opt(o.pulse_voltage),
            opt(o.label.map(|l| l.score())),
            opt(o.dispersion.map(|m| m.mean)),
            opt(o.dispersion.map(|m| m.std)),
            opt(o.leakage.map(|m| m.mean)),
            opt(o.leakage.map(|m| m.std)),
            state.rounds()[o.round].label
        ));
    }
    out
}

pub fn pareto_csv(view: &ParetoView) -> String {
    let front: std::collections::HashSet<&str> = view.measured_front.iter().map(|m| m.id.as_str()).collect();
    let mut out = String::from("kind,id,dispersion,dispersion_std,leakage,leakage_std,pareto\n");
    for m in &view.measured {
        out.push_str(&format!(
            "measured,{},{},{},{},{},{}\n",
            m.id,
            m.point.f1,
            m.std[0],
            m.point.f2,
            m.std[1],
            front.contains(m.id.as_str())
        ));
    }
    for (k, m) in view.model_front.iter().enumerate() {
        out.push_str(&format!(
            "model,m{k},{},{},{},{},true\n",
            m.mean[0], m.std[0], m.mean[1], m.std[1]
        ));
    }
    out
}

pub fn hypervolume_csv(state: &CampaignState) -> String {
    let mut out = String::from("round,label,hypervolume,functional,pareto_size\n");
    for h in state.hypervolume_history() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            h.round, h.label, h.hypervolume, h.functional, h.pareto_size
        ));
    }
    out
}
