//! A seeded stand-in for processing, human grading and device measurement.
//!
//! A latent dose `d = wᵀ·u` over normalized inputs decides the conversion
//! band. Films in the measurable bands get two objectives that trade off
//! along the dose: dispersion falls and leakage magnitude rises with it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::acquisition::Strategy;
use crate::campaign::{CampaignConfig, CampaignState, Measurement, ResultEntry, SuggestOptions};
use crate::design_space::{ParameterSpace, ProcessCondition, DIMS};
use crate::error::{Error, Result};
use crate::hitl::ConversionLabel;

/// `offset + slope·s + curvature·s² + secondaryᵀ·u`, where `s` is the
/// position of the dose across the measurable band (0 at its lower edge,
/// 1 at its upper edge).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveShape {
    pub offset: f64,
    pub slope: f64,
    pub curvature: f64,
    pub secondary: [f64; DIMS],
}

impl ObjectiveShape {
    fn eval(&self, s: f64, u: &[f64; DIMS]) -> f64 {
        let extra: f64 = self.secondary.iter().zip(u).map(|(a, b)| a * b).sum();
        self.offset + self.slope * s + self.curvature * s * s + extra
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLab {
    pub space: ParameterSpace,
    pub weights: [f64; DIMS],
    /// Band edges: below `t[0]` unconverted, then partially converted,
    /// converted, partially burned, and burned above `t[3]`.
    pub thresholds: [f64; 4],
    pub dispersion: ObjectiveShape,
    pub leakage: ObjectiveShape,
    /// Measurement noise std per objective.
    pub noise: [f64; 2],
    /// Chance a measurable film yields working devices.
    #[serde(default = "one")]
    pub measurable_probability: f64,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

/// Outcome of processing one condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabResult {
    pub dose: f64,
    pub label: ConversionLabel,
    pub dispersion: Option<Measurement>,
    pub leakage: Option<Measurement>,
}

impl LabResult {
    pub fn entry(&self, id: &str) -> ResultEntry {
        ResultEntry {
            id: id.to_string(),
            label: Some(self.label),
            dispersion: self.dispersion,
            leakage: self.leakage,
            unmeasurable: self.label.admits_measurement() && self.dispersion.is_none(),
        }
    }
}

impl Default for SyntheticLab {
    /// Roughly one third of the photonic-curing space lies in the
    /// measurable bands, with the remainder split between under- and
    /// over-processing.
    fn default() -> Self {
        Self {
            space: ParameterSpace::photonic_curing(),
            weights: [1.0, 0.6, 0.6, 0.3, 0.3],
            thresholds: [1.23, 1.33, 1.47, 1.57],
            dispersion: ObjectiveShape {
                offset: 3.0,
                slope: -1.8,
                curvature: 0.2,
                secondary: [0.0, 0.0, 0.5, 0.1, 0.0],
            },
            leakage: ObjectiveShape {
                offset: 2.5,
                slope: 3.0,
                curvature: -0.4,
                secondary: [0.0, 0.0, -0.6, 0.1, 0.3],
            },
            noise: [0.05, 0.1],
            measurable_probability: 1.0,
            seed: 0,
        }
    }
}

impl SyntheticLab {
    pub fn validate(&self) -> Result<()> {
        self.space.validate()?;
        if !self.thresholds.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Parameter(format!(
                "thresholds {:?} must be strictly increasing",
                self.thresholds
            )));
        }
        if self.noise.iter().any(|n| !(*n >= 0.0 && n.is_finite())) {
            return Err(Error::Parameter(format!("noise {:?} must be non-negative", self.noise)));
        }
        if !(0.0..=1.0).contains(&self.measurable_probability) {
            return Err(Error::Parameter(format!(
                "measurable probability {} must lie in [0, 1]",
                self.measurable_probability
            )));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let lab: Self = serde_json::from_str(text)?;
        lab.validate()?;
        Ok(lab)
    }

    pub fn dose(&self, c: &ProcessCondition) -> Result<f64> {
        let u = self.space.normalize(c)?;
        Ok(self.weights.iter().zip(&u).map(|(w, x)| w * x).sum())
    }

    pub fn label_for_dose(&self, d: f64) -> ConversionLabel {
        let [t1, t2, t3, t4] = self.thresholds;
        if d < t1 {
            ConversionLabel::Unconverted
        } else if d < t2 {
            ConversionLabel::PartiallyConverted
        } else if d < t3 {
            ConversionLabel::Converted
        } else if d <= t4 {
            ConversionLabel::PartiallyBurned
        } else {
            ConversionLabel::Burned
        }
    }

    /// Noise-free objective pair at a condition.
    pub fn objective_means(&self, c: &ProcessCondition) -> Result<(f64, f64)> {
        let u = self.space.normalize(c)?;
        let d: f64 = self.weights.iter().zip(&u).map(|(w, x)| w * x).sum();
        let [t1, .., t4] = self.thresholds;
        let s = ((d - t1) / (t4 - t1)).clamp(0.0, 1.0);
        Ok((self.dispersion.eval(s, &u), self.leakage.eval(s, &u)))
    }

    /// Per-condition generator, so results do not depend on call order.
    fn rng_for(&self, c: &ProcessCondition) -> ChaCha8Rng {
        let key = c.key().0;
        let mut h = self.seed ^ 0x9e37_79b9_7f4a_7c15;
        for k in key {
            h = (h ^ k as u64).wrapping_mul(0x0000_0100_0000_01b3).rotate_left(23);
        }
        ChaCha8Rng::seed_from_u64(h)
    }

    pub fn simulate_condition(&self, c: &ProcessCondition) -> Result<LabResult> {
        self.space.check_bounds(c)?;
        let dose = self.dose(c)?;
        let label = self.label_for_dose(dose);
        let mut rng = self.rng_for(c);
        let measured = label.admits_measurement() && rng.gen::<f64>() < self.measurable_probability;
        let (dispersion, leakage) = if measured {
            let (m1, m2) = self.objective_means(c)?;
            let draw = |rng: &mut ChaCha8Rng, mean: f64, sd: f64| {
                if sd > 0.0 {
                    mean + Normal::new(0.0, sd).expect("validated std").sample(rng)
                } else {
                    mean
                }
            };
            let y1 = draw(&mut rng, m1, self.noise[0]);
            let y2 = draw(&mut rng, m2, self.noise[1]);
            (
                Some(Measurement::new(y1, self.noise[0])),
                Some(Measurement::new(y2, self.noise[1])),
            )
        } else {
            (None, None)
        };
        Ok(LabResult {
            dose,
            label,
            dispersion,
            leakage,
        })
    }

    /// Fraction of conditions in `conditions` whose label admits measurement.
    pub fn feasible_fraction(&self, conditions: &[ProcessCondition]) -> Result<f64> {
        let mut ok = 0usize;
        for c in conditions {
            if self.label_for_dose(self.dose(c)?).admits_measurement() {
                ok += 1;
            }
        }
        Ok(ok as f64 / conditions.len().max(1) as f64)
    }

    /// Scores and measures every pending condition of the latest round.
    pub fn complete_latest_round(&self, state: &mut CampaignState) -> Result<()> {
        let round = state
            .latest_round()
            .ok_or_else(|| Error::State("campaign has no rounds".into()))?;
        let index = round.index;
        let entries = round
            .suggested
            .iter()
            .map(|id| {
                let o = state.observation(id)?;
                Ok(self.simulate_condition(&o.condition)?.entry(id))
            })
            .collect::<Result<Vec<_>>>()?;
        state.record_results(index, &entries)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub n_init: usize,
    pub rounds: usize,
    pub q: usize,
    pub strategy: Strategy,
    pub seed: u64,
    pub pool_size: usize,
    pub restarts: usize,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            n_init: 30,
            rounds: 2,
            q: 5,
            strategy: Strategy::ParetoUcb,
            seed: 0,
            pool_size: 20_000,
            restarts: 8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Hitl,
    Baseline,
}

impl Arm {
    pub fn as_str(self) -> &'static str {
        match self {
            Arm::Hitl => "hitl",
            Arm::Baseline => "baseline",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub arm: Arm,
    pub seed: u64,
    pub round: usize,
    /// Fraction of the round's suggestions that produced measurable films.
    pub yield_fraction: f64,
    pub hypervolume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmRun {
    pub arm: Arm,
    pub seed: u64,
    pub rows: Vec<BenchmarkRow>,
    /// Yield pooled over all post-LHS rounds.
    pub post_init_yield: f64,
    pub final_state: CampaignState,
}

/// LHS initialization followed by `rounds` suggestion rounds, each
/// completed by the lab. The two arms differ only in the feasibility model.
pub fn run_arm(lab: &SyntheticLab, config: &BenchmarkConfig, arm: Arm) -> Result<ArmRun> {
    lab.validate()?;
    let lab = lab.clone().with_seed(lab.seed ^ config.seed);
    let campaign_config = CampaignConfig {
        strategy: config.strategy,
        q: config.q,
        hitl: arm == Arm::Hitl,
        seed: config.seed,
        restarts: config.restarts,
        pool_size: Some(config.pool_size),
        ..CampaignConfig::default()
    };
    let mut state = CampaignState::start(lab.space.clone(), campaign_config, config.n_init)?;
    lab.complete_latest_round(&mut state)?;
    let mut suggested = 0usize;
    let mut feasible = 0usize;
    for _ in 0..config.rounds {
        state.suggest_round(&SuggestOptions::default())?;
        lab.complete_latest_round(&mut state)?;
        let r = state.latest_round().unwrap();
        suggested += r.suggested.len();
        feasible += r
            .suggested
            .iter()
            .filter(|id| {
                state
                    .observation(id)
                    .is_ok_and(|o| o.label.is_some_and(|l| l.admits_measurement()))
            })
            .count();
    }
    let history = state.hypervolume_history();
    let rows = state
        .rounds()
        .iter()
        .zip(&history)
        .map(|(r, h)| {
            let ok = r
                .suggested
                .iter()
                .filter(|id| {
                    state
                        .observation(id)
                        .is_ok_and(|o| o.label.is_some_and(|l| l.admits_measurement()))
                })
                .count();
            BenchmarkRow {
                arm,
                seed: config.seed,
                round: r.index,
                yield_fraction: ok as f64 / r.suggested.len().max(1) as f64,
                hypervolume: h.hypervolume,
            }
        })
        .collect();
    Ok(ArmRun {
        arm,
        seed: config.seed,
        rows,
        post_init_yield: feasible as f64 / suggested.max(1) as f64,
        final_state: state,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    /// Mean post-LHS yield per arm, over seeds.
    pub mean_yield: Vec<(Arm, f64)>,
}

impl BenchmarkReport {
    pub fn yield_of(&self, arm: Arm) -> Option<f64> {
        self.mean_yield.iter().find(|(a, _)| *a == arm).map(|(_, y)| *y)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("arm,seed,round,yield,hypervolume\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.arm.as_str(),
                r.seed,
                r.round,
                r.yield_fraction,
                r.hypervolume
            ));
        }
        out
    }
}

/// Runs each arm over `seeds` consecutive seeds starting at `config.seed`.
pub fn run_benchmark(
    lab: &SyntheticLab,
    config: &BenchmarkConfig,
    arms: &[Arm],
    seeds: u64,
) -> Result<BenchmarkReport> {
    use rayon::prelude::*;
    let jobs: Vec<(Arm, u64)> = arms
        .iter()
        .flat_map(|&a| (0..seeds).map(move |k| (a, config.seed + k)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|&(arm, seed)| {
            let cfg = BenchmarkConfig { seed, ..config.clone() };
            run_arm(lab, &cfg, arm)
        })
        .collect::<Result<Vec<_>>>()?;
    let mean_yield = arms
        .iter()
        .map(|&a| {
            let ys: Vec<f64> = runs.iter().filter(|r| r.arm == a).map(|r| r.post_init_yield).collect();
            (a, ys.iter().sum::<f64>() / ys.len().max(1) as f64)
        })
        .collect();
    Ok(BenchmarkReport {
        rows: runs.into_iter().flat_map(|r| r.rows).collect(),
        mean_yield,
    })
}
