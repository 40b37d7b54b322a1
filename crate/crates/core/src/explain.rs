//! Exact interventional Shapley attribution of a surrogate's posterior mean.
//!
//! With five features there are only 32 coalitions, so every coalition value
//! is computed directly: `v(S)` averages the model over background rows with
//! the instance's values swapped in on `S`.

use serde::{Deserialize, Serialize};

use crate::design_space::{ParameterSpace, ProcessCondition, DIMS};
use crate::error::{Error, Result};
use crate::gpr::SurrogateModel;
use crate::stats::spearman;

const COALITIONS: usize = 1 << DIMS;

/// Anything with a scalar prediction over process conditions.
pub trait Predictor: Sync {
    fn predict_mean(&self, c: &ProcessCondition) -> f64;
}

impl Predictor for SurrogateModel {
    fn predict_mean(&self, c: &ProcessCondition) -> f64 {
        self.posterior_mean(c)
    }
}

/// Adapts a closure into a [`Predictor`].
pub struct FnPredictor<F>(pub F);

impl<F: Fn(&ProcessCondition) -> f64 + Sync> Predictor for FnPredictor<F> {
    fn predict_mean(&self, c: &ProcessCondition) -> f64 {
        (self.0)(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttributionResult {
    /// Mean prediction over the background.
    pub base_value: f64,
    pub phi: [f64; DIMS],
    pub instance: ProcessCondition,
}

impl AttributionResult {
    pub fn prediction(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>()
    }
}

/// `|S|! (n - |S| - 1)! / n!` indexed by `|S|`.
fn shapley_weights() -> [f64; DIMS] {
    let fact = |k: usize| (1..=k).product::<usize>() as f64;
    std::array::from_fn(|s| fact(s) * fact(DIMS - s - 1) / fact(DIMS))
}

fn coalition_values<P: Predictor + ?Sized>(
    model: &P,
    instance: &ProcessCondition,
    background: &[ProcessCondition],
) -> [f64; COALITIONS] {
    std::array::from_fn(|mask| {
        let total: f64 = background
            .iter()
            .map(|b| {
                let x = ProcessCondition(std::array::from_fn(|i| {
                    if mask & (1 << i) != 0 {
                        instance.0[i]
                    } else {
                        b.0[i]
                    }
                }));
                model.predict_mean(&x)
            })
            .sum();
        total / background.len() as f64
    })
}

pub fn shapley_attributions<P: Predictor + ?Sized>(
    model: &P,
    instance: &ProcessCondition,
    background: &[ProcessCondition],
) -> Result<AttributionResult> {
    if background.is_empty() {
        return Err(Error::Parameter("Shapley background set is empty".into()));
    }
    let v = coalition_values(model, instance, background);
    let w = shapley_weights();
    let phi = std::array::from_fn(|i| {
        let bit = 1 << i;
        (0..COALITIONS)
            .filter(|s| s & bit == 0)
            .map(|s| w[(s as u32).count_ones() as usize] * (v[s | bit] - v[s]))
            .sum()
    });
    Ok(AttributionResult {
        base_value: v[0],
        phi,
        instance: *instance,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScatterPoint {
    pub value: f64,
    pub normalized: f64,
    pub phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub index: usize,
    pub mean_abs_phi: f64,
    /// 1 = largest mean |φ|.
    pub rank: usize,
    /// Rank correlation between feature value and φ; `None` when either is constant.
    pub spearman: Option<f64>,
    pub points: Vec<ScatterPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapSummary {
    pub base_value: f64,
    /// Features in parameter order.
    pub features: Vec<FeatureSummary>,
    /// Feature names from most to least influential.
    pub ranking: Vec<String>,
    pub attributions: Vec<AttributionResult>,
}

impl ShapSummary {
    /// One row per (instance, feature).
    pub fn to_csv(&self, ids: Option<&[String]>) -> String {
        let mut out = String::from("instance,feature,value,normalized_value,phi\n");
        for (k, attr) in self.attributions.iter().enumerate() {
            let id = ids.and_then(|ids| ids.get(k)).cloned().unwrap_or_else(|| k.to_string());
            for f in &self.features {
                let p = &f.points[k];
                out.push_str(&format!(
                    "{id},{},{},{},{}\n",
                    f.name, p.value, p.normalized, attr.phi[f.index]
                ));
            }
        }
        out
    }
}

/// Attributions for every dataset row plus per-feature ranking and scatter
/// data. The background defaults to the dataset itself.
pub fn shap_summary<P: Predictor + ?Sized>(
    model: &P,
    space: &ParameterSpace,
    dataset: &[ProcessCondition],
    background: Option<&[ProcessCondition]>,
) -> Result<ShapSummary> {
    if dataset.is_empty() {
        return Err(Error::Parameter("SHAP dataset is empty".into()));
    }
    let background = background.unwrap_or(dataset);
    let attributions = {
        use rayon::prelude::*;
        dataset
            .par_iter()
            .map(|c| shapley_attributions(model, c, background))
            .collect::<Result<Vec<_>>>()?
    };
    let names = space.names();
    let mut features: Vec<FeatureSummary> = (0..DIMS)
        .map(|i| {
            let points: Vec<ScatterPoint> = attributions
                .iter()
                .map(|a| {
                    let p = space.param(i);
                    ScatterPoint {
                        value: a.instance.0[i],
                        normalized: (a.instance.0[i] - p.min) / p.width(),
                        phi: a.phi[i],
                    }
                })
                .collect();
            let values: Vec<f64> = points.iter().map(|p| p.value).collect();
            let phis: Vec<f64> = points.iter().map(|p| p.phi).collect();
            FeatureSummary {
                name: names[i].to_string(),
                index: i,
                mean_abs_phi: phis.iter().map(|p| p.abs()).sum::<f64>() / phis.len() as f64,
                rank: 0,
                spearman: spearman(&values, &phis),
                points,
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..DIMS).collect();
    order.sort_by(|&a, &b| {
        features[b]
            .mean_abs_phi
            .total_cmp(&features[a].mean_abs_phi)
            .then(a.cmp(&b))
    });
    for (r, &i) in order.iter().enumerate() {
        features[i].rank = r + 1;
    }
    Ok(ShapSummary {
        base_value: attributions[0].base_value,
        ranking: order.iter().map(|&i| features[i].name.clone()).collect(),
        features,
        attributions,
    })
}
