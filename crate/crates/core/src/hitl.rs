//! Human conversion scores and the feasibility weight derived from them.
//!
//! Scientists grade each processed film on a five-level scale. A GP fitted
//! to those grades (failures included) gives `μ_conv`, and the Gaussian
//! transform `exp(-½ (μ_conv / τ)²)` turns it into a success probability
//! that multiplies the acquisition values. Under- and over-processing are
//! suppressed symmetrically.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design_space::{ParameterSpace, ProcessCondition};
use crate::error::{Error, Result};
use crate::gpr::{self, FitConfig, SurrogateModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConversionLabel {
    Unconverted,
    PartiallyConverted,
    Converted,
    PartiallyBurned,
    Burned,
}

impl ConversionLabel {
    pub const ALL: [ConversionLabel; 5] = [
        ConversionLabel::Unconverted,
        ConversionLabel::PartiallyConverted,
        ConversionLabel::Converted,
        ConversionLabel::PartiallyBurned,
        ConversionLabel::Burned,
    ];

    pub fn score(self) -> f64 {
        match self {
            ConversionLabel::Unconverted => -1.0,
            ConversionLabel::PartiallyConverted => -0.5,
            ConversionLabel::Converted => 0.0,
            ConversionLabel::PartiallyBurned => 0.5,
            ConversionLabel::Burned => 1.0,
        }
    }

    /// Nearest of the five scores; ties resolve toward zero.
    pub fn from_score(value: f64) -> Self {
        // ordered by |score| so the first hit on a tie is the one nearer zero
        const BY_MAGNITUDE: [ConversionLabel; 5] = [
            ConversionLabel::Converted,
            ConversionLabel::PartiallyConverted,
            ConversionLabel::PartiallyBurned,
            ConversionLabel::Unconverted,
            ConversionLabel::Burned,
        ];
        let mut best = BY_MAGNITUDE[0];
        let mut best_d = (value - best.score()).abs();
        for label in &BY_MAGNITUDE[1..] {
            let d = (value - label.score()).abs();
            if d < best_d {
                best = *label;
                best_d = d;
            }
        }
        best
    }

    /// Films graded within half a step of fully converted can be built
    /// into devices and measured.
    pub fn admits_measurement(self) -> bool {
        self.score().abs() <= 0.5
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ConversionLabel::Unconverted => "UNCONVERTED",
            ConversionLabel::PartiallyConverted => "PARTIALLY_CONVERTED",
            ConversionLabel::Converted => "CONVERTED",
            ConversionLabel::PartiallyBurned => "PARTIALLY_BURNED",
            ConversionLabel::Burned => "BURNED",
        }
    }
}

pub fn score_to_value(label: ConversionLabel) -> f64 {
    label.score()
}

pub fn value_to_nearest_label(value: f64) -> ConversionLabel {
    ConversionLabel::from_score(value)
}

impl fmt::Display for ConversionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConversionLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['-', ' '], "_");
        if let Some(l) = Self::ALL.iter().find(|l| l.as_str() == norm) {
            return Ok(*l);
        }
        match s.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Self::from_score(v)),
            _ => Err(Error::Parameter(format!(
                "unknown conversion label `{s}` (expected one of unconverted, partially_converted, converted, partially_burned, burned, or a score)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitlConfig {
    pub tau: f64,
}

impl Default for HitlConfig {
    fn default() -> Self {
        Self { tau: 0.2 }
    }
}

impl HitlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Parameter(format!("tau {} must be positive", self.tau)));
        }
        Ok(())
    }
}

/// `exp(-½ (μ_conv / τ)²)`.
pub fn p_constraint(mu_conv: f64, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::Parameter(format!("tau {tau} must be positive")));
    }
    let z = mu_conv / tau;
    Ok((-0.5 * z * z).exp())
}

/// Fits the conversion-score GP on every graded condition. Scores are
/// clamped to [-1, 1] and left unstandardized so `μ_conv` stays on the
/// grading scale.
pub fn fit_conversion_model(
    space: &ParameterSpace,
    scored: &[(ProcessCondition, f64)],
    config: &FitConfig,
) -> Result<SurrogateModel> {
    if scored.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "conversion model needs at least 2 scored conditions, got {}",
            scored.len()
        )));
    }
    let conditions: Vec<ProcessCondition> = scored.iter().map(|(c, _)| *c).collect();
    let scores: Vec<f64> = scored.iter().map(|(_, s)| s.clamp(-1.0, 1.0)).collect();
    let config = FitConfig {
        standardize: false,
        ..config.clone()
    };
    gpr::fit(space, &conditions, &scores, &config)
}

/// Feasibility probability at each candidate, from the posterior mean only.
pub fn constraint_map(model: &SurrogateModel, candidates: &[ProcessCondition], tau: f64) -> Result<Vec<f64>> {
    HitlConfig { tau }.validate()?;
    let means: Vec<f64> = if candidates.len() >= 1024 {
        use rayon::prelude::*;
        candidates.par_iter().map(|c| model.posterior_mean(c)).collect()
    } else {
        candidates.iter().map(|c| model.posterior_mean(c)).collect()
    };
    means.into_iter().map(|m| p_constraint(m, tau)).collect()
}
