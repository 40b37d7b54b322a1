//! Campaign state: observations, rounds, model snapshots and persistence.
//!
//! Every mutation runs on a copy of the state that is validated before it
//! replaces the original, so a failed operation leaves the campaign as it
//! was.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    ehvi_greedy_batch, pareto_ucb_batch, AcquisitionConfig, CandidatePool, ConversionConstraint, Feasibility,
    Selection, Strategy,
};
use crate::design_space::{lhs_sample, CandidateGrid, ConditionKey, ParameterSpace, ProcessCondition, Refinement};
use crate::error::{Error, Result};
use crate::gpr::{self, FitConfig, KernelHyperparams, SurrogateModel};
use crate::hitl::{fit_conversion_model, p_constraint, ConversionLabel};
use crate::pareto::{hypervolume_2d, nondominated, ObjectivePoint, ParetoFront};

pub const SCHEMA_VERSION: &str = "1.0.0";
const SCHEMA_MAJOR: u64 = 1;

/// The initial LHS round of the photonic-curing study (30 conditions).
pub const LHS_INITIAL_CSV: &str = include_str!("../data/lhs_initial.csv");
/// Rounds 1a, 1b, 2 (no feasibility model) and 1', 2' (with it).
pub const COMPARISON_ROUNDS_CSV: &str = include_str!("../data/comparison_rounds.csv");

/// A measured objective as mean and standard deviation over devices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub mean: f64,
    pub std: f64,
}

impl Measurement {
    pub fn new(mean: f64, std: f64) -> Self {
        Self { mean, std }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !self.mean.is_finite() {
            return Err(format!("mean {} is not finite", self.mean));
        }
        if !(self.std >= 0.0 && self.std.is_finite()) {
            return Err(format!("std {} must be finite and non-negative", self.std));
        }
        Ok(())
    }
}

impl fmt::Display for Measurement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {}", self.mean, self.std)
    }
}

/// Parses `mean±std`, `mean +- std`, `mean +/- std` or a bare mean (std 0).
impl FromStr for Measurement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |m: &str| Error::Parameter(format!("cannot parse measurement `{s}`: {m}"));
        let t = s.trim();
        let (mean, std) = match ["±", "+/-", "+-"].iter().find_map(|sep| t.split_once(sep)) {
            Some((m, d)) => (m.trim(), d.trim()),
            None => (t, "0"),
        };
        let mean: f64 = mean.parse().map_err(|_| bad("mean is not a number"))?;
        let std: f64 = std.parse().map_err(|_| bad("std is not a number"))?;
        let m = Measurement { mean, std };
        m.validate().map_err(|e| bad(&e))?;
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Dispersion,
    Leakage,
    Conversion,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Dispersion => "dispersion",
            Target::Leakage => "leakage",
            Target::Conversion => "conversion",
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dispersion" | "cf" | "c-f" => Ok(Target::Dispersion),
            "leakage" => Ok(Target::Leakage),
            "conversion" | "score" => Ok(Target::Conversion),
            _ => Err(Error::Parameter(format!(
                "unknown target `{s}` (expected dispersion, leakage or conversion)"
            ))),
        }
    }
}

fn default_device_count() -> u32 {
    5
}

/// A tested (or pending) condition with its human score and measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub id: String,
    pub condition: ProcessCondition,
    #[serde(default)]
    pub pulse_voltage: Option<f64>,
    pub label: Option<ConversionLabel>,
    /// Low- to high-frequency capacitance ratio.
    pub dispersion: Option<Measurement>,
    /// |log10| of the mean areal leakage current.
    pub leakage: Option<Measurement>,
    /// Converted well enough to score but no device could be measured.
    #[serde(default)]
    pub unmeasurable: bool,
    pub round: usize,
    #[serde(default = "default_device_count")]
    pub device_count: u32,
}

impl Observation {
    pub fn pending(id: String, condition: ProcessCondition, round: usize) -> Self {
        Self {
            id,
            condition,
            pulse_voltage: None,
            label: None,
            dispersion: None,
            leakage: None,
            unmeasurable: false,
            round,
            device_count: default_device_count(),
        }
    }

    pub fn is_functional(&self) -> bool {
        self.dispersion.is_some() && self.leakage.is_some()
    }

    pub fn objectives(&self) -> Option<ObjectivePoint> {
        Some(ObjectivePoint::new(self.dispersion?.mean, self.leakage?.mean))
    }

    pub fn measurement(&self, target: Target) -> Option<f64> {
        match target {
            Target::Dispersion => self.dispersion.map(|m| m.mean),
            Target::Leakage => self.leakage.map(|m| m.mean),
            Target::Conversion => self.label.map(|l| l.score()),
        }
    }

    /// Scored, and either measured or explicitly unmeasurable when the
    /// label admits measurement.
    pub fn is_complete(&self) -> bool {
        match self.label {
            None => false,
            Some(l) => !l.admits_measurement() || self.is_functional() || self.unmeasurable,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.dispersion.is_some() != self.leakage.is_some() {
            return Err("both objectives must be present or both absent".into());
        }
        for m in [self.dispersion, self.leakage].into_iter().flatten() {
            m.validate()?;
        }
        if let Some(l) = self.label {
            if !l.admits_measurement() && self.is_functional() {
                return Err(format!("{l} films cannot carry device measurements"));
            }
        }
        if self.unmeasurable && self.is_functional() {
            return Err("marked unmeasurable but has measurements".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RoundStrategy {
    Lhs,
    EhviGreedy,
    ParetoUcb,
}

impl From<Strategy> for RoundStrategy {
    fn from(s: Strategy) -> Self {
        match s {
            Strategy::EhviGreedy => RoundStrategy::EhviGreedy,
            Strategy::ParetoUcb => RoundStrategy::ParetoUcb,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RoundStatus {
    PendingScores,
    PendingObjectives,
    Complete,
}

/// Model outputs at a suggested condition when it was picked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub dispersion: [f64; 2],
    pub leakage: [f64; 2],
    pub p_constraint: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub index: usize,
    /// Display tag, e.g. `0`, `1a`, `2'`.
    pub label: String,
    pub strategy: RoundStrategy,
    pub hitl_enabled: bool,
    pub suggested: Vec<String>,
    pub status: RoundStatus,
    #[serde(default)]
    pub predictions: Vec<Prediction>,
}

/// Enough to rebuild a fitted model without refitting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    pub round: usize,
    pub target: Target,
    pub hyperparams: KernelHyperparams,
    pub target_mean: f64,
    pub target_std: f64,
    pub training_ids: Vec<String>,
    pub log_marginal_likelihood: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub strategy: Strategy,
    pub beta: f64,
    pub q: usize,
    pub tau: f64,
    pub hitl: bool,
    #[serde(rename = "ref")]
    pub reference: ObjectivePoint,
    pub ucb_reference: ObjectivePoint,
    pub seed: u64,
    pub restarts: usize,
    pub refinement: Refinement,
    /// Candidates drawn from the refined grid each round; `None` scores
    /// the entire refined grid.
    pub pool_size: Option<usize>,
    pub noise_floor: Option<f64>,
    /// Floor each objective model's noise at the mean reported
    /// measurement variance (converted to standardized units).
    pub measurement_noise_floor: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        let acq = AcquisitionConfig::default();
        Self {
            strategy: acq.strategy,
            beta: acq.beta,
            q: acq.batch_size,
            tau: 0.2,
            hitl: true,
            reference: acq.reference,
            ucb_reference: acq.ucb_reference,
            seed: 0,
            restarts: 8,
            refinement: Refinement::fine(),
            pool_size: Some(20_000),
            noise_floor: None,
            measurement_noise_floor: false,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self, space: &ParameterSpace) -> Result<()> {
        self.acquisition(self.strategy, self.q, self.hitl).validate()?;
        crate::hitl::HitlConfig { tau: self.tau }.validate()?;
        if self.restarts == 0 {
            return Err(Error::Parameter("restarts must be at least 1".into()));
        }
        if self.pool_size == Some(0) {
            return Err(Error::Parameter("pool size must be positive".into()));
        }
        CandidateGrid::new(space, &self.refinement)?;
        Ok(())
    }

    pub fn acquisition(&self, strategy: Strategy, q: usize, hitl: bool) -> AcquisitionConfig {
        AcquisitionConfig {
            strategy,
            beta: self.beta,
            batch_size: q,
            reference: self.reference,
            ucb_reference: self.ucb_reference,
            constraint_enabled: hitl,
            mc_validation_samples: 0,
        }
    }

    fn fit_config(&self, seed: u64) -> FitConfig {
        FitConfig {
            restarts: self.restarts,
            seed,
            noise_floor: self.noise_floor,
            ..FitConfig::default()
        }
    }

    fn objective_fit_config(&self, seed: u64, measurements: &[Measurement]) -> FitConfig {
        let mut config = self.fit_config(seed);
        if self.measurement_noise_floor {
            let n = measurements.len() as f64;
            let mean = measurements.iter().map(|m| m.mean).sum::<f64>() / n;
            let var = measurements.iter().map(|m| (m.mean - mean).powi(2)).sum::<f64>() / n;
            let reported = measurements.iter().map(|m| m.std * m.std).sum::<f64>() / n;
            if var > 0.0 {
                let floor = reported / var;
                config.noise_floor = Some(config.noise_floor.map_or(floor, |f| f.max(floor)));
            }
        }
        config
    }
}

/// Overrides for a single suggestion round.
#[derive(Clone, Debug, Default)]
pub struct SuggestOptions {
    pub strategy: Option<Strategy>,
    pub hitl: Option<bool>,
    pub q: Option<usize>,
    pub label: Option<String>,
    /// Allow suggesting while the latest round is still open, picking from
    /// the same data (the 1a/1b pattern).
    pub concurrent: bool,
}

/// Models fitted on the current data.
#[derive(Clone, Debug)]
pub struct FittedModels {
    pub dispersion: SurrogateModel,
    pub leakage: SurrogateModel,
    pub conversion: Option<SurrogateModel>,
    pub objective_ids: Vec<String>,
    pub conversion_ids: Vec<String>,
}

/// Per-id result entry for [`CampaignState::record_results`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    pub id: String,
    pub label: Option<ConversionLabel>,
    pub dispersion: Option<Measurement>,
    pub leakage: Option<Measurement>,
    #[serde(default)]
    pub unmeasurable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointCheck {
    pub id: String,
    pub target: Target,
    pub measured: f64,
    pub predicted_mean: f64,
    pub predicted_std: f64,
    pub within: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub round: usize,
    pub checks: Vec<PointCheck>,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypervolumeEntry {
    pub round: usize,
    pub label: String,
    pub hypervolume: f64,
    pub functional: usize,
    pub pareto_size: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontMember {
    pub id: String,
    pub point: ObjectivePoint,
    pub std: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub index: usize,
    pub label: String,
    pub strategy: RoundStrategy,
    pub hitl_enabled: bool,
    pub status: RoundStatus,
    pub suggested: usize,
    pub functional: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignStatus {
    pub observations: usize,
    pub scored: usize,
    pub functional: usize,
    pub rounds: Vec<RoundSummary>,
    pub pending_scores: Vec<String>,
    pub pending_objectives: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignState {
    version: String,
    space: ParameterSpace,
    config: CampaignConfig,
    observations: Vec<Observation>,
    rounds: Vec<RoundRecord>,
    model_snapshots: Vec<ModelSnapshot>,
    /// Number of seeded draws taken so far; each suggestion consumes one.
    rng_counter: u64,
}

/// Strategy and feasibility flag for a round tag in the study's schedule.
pub fn scheduled_round(tag: &str) -> Option<(RoundStrategy, bool)> {
    let t = tag.trim().to_ascii_lowercase();
    if let Some(base) = t.strip_suffix('\'') {
        return matches!(base, "1" | "2").then_some((RoundStrategy::ParetoUcb, true));
    }
    Some(match t.as_str() {
        "0" | "lhs" => (RoundStrategy::Lhs, false),
        "1a" | "2" => (RoundStrategy::EhviGreedy, false),
        "1b" => (RoundStrategy::ParetoUcb, false),
        "3" | "4" | "5" => (RoundStrategy::EhviGreedy, true),
        "6" | "7" => (RoundStrategy::ParetoUcb, true),
        _ => return None,
    })
}

fn round_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn derived_seed(seed: u64, stream: u64, purpose: u32) -> u64 {
    let mut rng = round_rng(seed, stream);
    rng.set_word_pos(u128::from(purpose) * 16);
    rand::RngCore::next_u64(&mut rng)
}

impl CampaignState {
    /// An empty campaign with no rounds.
    pub fn new(space: ParameterSpace, config: CampaignConfig) -> Result<Self> {
        space.validate()?;
        config.validate(&space)?;
        Ok(Self {
            version: SCHEMA_VERSION.to_string(),
            space,
            config,
            observations: Vec::new(),
            rounds: Vec::new(),
            model_snapshots: Vec::new(),
            rng_counter: 0,
        })
    }

    /// Round 0: `n_init` Latin hypercube conditions awaiting scores.
    pub fn start(space: ParameterSpace, config: CampaignConfig, n_init: usize) -> Result<Self> {
        if n_init < 2 {
            return Err(Error::Parameter(format!("n_init must be at least 2, got {n_init}")));
        }
        let mut state = Self::new(space, config)?;
        let conditions = lhs_sample(&state.space, n_init, state.config.seed)?;
        let ids: Vec<String> = (1..=n_init).map(|k| k.to_string()).collect();
        for (id, c) in ids.iter().zip(conditions) {
            state.observations.push(Observation::pending(id.clone(), c, 0));
        }
        state.rounds.push(RoundRecord {
            index: 0,
            label: "0".into(),
            strategy: RoundStrategy::Lhs,
            hitl_enabled: false,
            suggested: ids,
            status: RoundStatus::PendingScores,
            predictions: Vec::new(),
        });
        state.validate()?;
        Ok(state)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn config(&self) -> &CampaignConfig {
        &self.config
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn rounds(&self) -> &[RoundRecord] {
        &self.rounds
    }

    pub fn model_snapshots(&self) -> &[ModelSnapshot] {
        &self.model_snapshots
    }

    pub fn rng_counter(&self) -> u64 {
        self.rng_counter
    }

    pub fn observation(&self, id: &str) -> Result<&Observation> {
        self.observations
            .iter()
            .find(|o| o.id == id)
            .ok_or_else(|| Error::NotFound(format!("no observation with id `{id}`")))
    }

    pub fn round(&self, index: usize) -> Result<&RoundRecord> {
        self.rounds
            .get(index)
            .ok_or_else(|| Error::NotFound(format!("no round {index} (campaign has {})", self.rounds.len())))
    }

    pub fn latest_round(&self) -> Option<&RoundRecord> {
        self.rounds.last()
    }

    pub fn functional(&self) -> impl Iterator<Item = &Observation> {
        self.observations.iter().filter(|o| o.is_functional())
    }

    /// Replaces tunable settings (strategy, beta, q, tau, ...).
    pub fn set_config(&mut self, config: CampaignConfig) -> Result<()> {
        config.validate(&self.space)?;
        self.config = config;
        Ok(())
    }

    /// Checks every structural invariant of the state.
    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        let mut keys: BTreeMap<ConditionKey, &str> = BTreeMap::new();
        for o in &self.observations {
            if !ids.insert(o.id.as_str()) {
                return Err(Error::Invariant(format!("duplicate observation id `{}`", o.id)));
            }
            if let Some(prev) = keys.insert(o.condition.key(), &o.id) {
                return Err(Error::Invariant(format!(
                    "observations `{prev}` and `{}` share condition {}",
                    o.id, o.condition
                )));
            }
            self.space.check_bounds(&o.condition)?;
            o.validate()
                .map_err(|m| Error::Invariant(format!("observation `{}`: {m}", o.id)))?;
            if o.round >= self.rounds.len() {
                return Err(Error::Invariant(format!(
                    "observation `{}` names missing round {}",
                    o.id, o.round
                )));
            }
        }
        for (k, r) in self.rounds.iter().enumerate() {
            if r.index != k {
                return Err(Error::Invariant(format!("round at position {k} has index {}", r.index)));
            }
            for id in &r.suggested {
                let o = self
                    .observation(id)
                    .map_err(|_| Error::Invariant(format!("round {k} suggests unknown id `{id}`")))?;
                if o.round != k {
                    return Err(Error::Invariant(format!(
                        "`{id}` listed in round {k} but belongs to {}",
                        o.round
                    )));
                }
            }
            if r.status != self.compute_status(r) {
                return Err(Error::Invariant(format!("round {k} status is stale")));
            }
        }
        Ok(())
    }

    fn compute_status(&self, round: &RoundRecord) -> RoundStatus {
        let obs: Vec<&Observation> = round
            .suggested
            .iter()
            .filter_map(|id| self.observations.iter().find(|o| &o.id == id))
            .collect();
        if obs.iter().any(|o| o.label.is_none()) {
            RoundStatus::PendingScores
        } else if obs.iter().any(|o| !o.is_complete()) {
            RoundStatus::PendingObjectives
        } else {
            RoundStatus::Complete
        }
    }

    fn refresh_status(&mut self) {
        let statuses: Vec<RoundStatus> = self.rounds.iter().map(|r| self.compute_status(r)).collect();
        for (r, s) in self.rounds.iter_mut().zip(statuses) {
            r.status = s;
        }
    }

    /// Applies `f` to a copy and commits only if the result validates.
    fn transact<T>(&mut self, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let mut next = self.clone();
        let out = f(&mut next)?;
        next.refresh_status();
        next.validate()?;
        *self = next;
        Ok(out)
    }

    fn next_numeric_id(&self) -> u64 {
        self.observations
            .iter()
            .filter_map(|o| o.id.parse::<u64>().ok())
            .max()
            .unwrap_or(0)
            + 1
    }

    // ---- ingestion ----

    /// Adds every row of a dataset CSV; returns the number of observations
    /// added. Rows go to the round named in the optional `round` column, or
    /// round `0` without one.
    pub fn ingest_csv(&mut self, text: &str) -> Result<usize> {
        let rows = parse_dataset(text, &self.space)?;
        let n = rows.len();
        self.transact(|s| {
            for row in rows {
                let index = match s.rounds.iter().position(|r| r.label == row.round) {
                    Some(i) => i,
                    None => {
                        let (strategy, hitl) =
                            scheduled_round(&row.round).unwrap_or((s.config.strategy.into(), s.config.hitl));
                        s.rounds.push(RoundRecord {
                            index: s.rounds.len(),
                            label: row.round.clone(),
                            strategy,
                            hitl_enabled: hitl,
                            suggested: Vec::new(),
                            status: RoundStatus::PendingScores,
                            predictions: Vec::new(),
                        });
                        s.rounds.len() - 1
                    }
                };
                if let Ok(prev) = s.observation(&row.observation.id) {
                    return Err(Error::Invariant(format!(
                        "row {}: id `{}` already exists (round {})",
                        row.line, prev.id, prev.round
                    )));
                }
                let mut o = row.observation;
                o.round = index;
                s.rounds[index].suggested.push(o.id.clone());
                s.observations.push(o);
            }
            Ok(())
        })?;
        Ok(n)
    }

    pub fn ingest_path(&mut self, path: &Path) -> Result<usize> {
        let text = std::fs::read_to_string(path)?;
        self.ingest_csv(&text)
    }

    // ---- models ----

    /// Fits both objective models on functional observations and, when
    /// asked, the conversion model on every scored observation.
    pub fn fit_models(&self, with_conversion: bool, seed: u64) -> Result<FittedModels> {
        let functional: Vec<&Observation> = self.functional().collect();
        if functional.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "objective models need at least 2 functional observations, have {}; \
                 score and measure more initial conditions (e.g. a larger --n-init)",
                functional.len()
            )));
        }
        let conditions: Vec<ProcessCondition> = functional.iter().map(|o| o.condition).collect();
        let disp_m: Vec<Measurement> = functional.iter().map(|o| o.dispersion.unwrap()).collect();
        let leak_m: Vec<Measurement> = functional.iter().map(|o| o.leakage.unwrap()).collect();
        let disp: Vec<f64> = disp_m.iter().map(|m| m.mean).collect();
        let leak: Vec<f64> = leak_m.iter().map(|m| m.mean).collect();
        let seeds = [seed, seed.wrapping_add(1), seed.wrapping_add(2)];
        let (dispersion, leakage) = rayon::join(
            || {
                gpr::fit(
                    &self.space,
                    &conditions,
                    &disp,
                    &self.config.objective_fit_config(seeds[0], &disp_m),
                )
            },
            || {
                gpr::fit(
                    &self.space,
                    &conditions,
                    &leak,
                    &self.config.objective_fit_config(seeds[1], &leak_m),
                )
            },
        );
        let scored: Vec<&Observation> = self.observations.iter().filter(|o| o.label.is_some()).collect();
        let conversion = if with_conversion {
            let pairs: Vec<(ProcessCondition, f64)> =
                scored.iter().map(|o| (o.condition, o.label.unwrap().score())).collect();
            Some(fit_conversion_model(
                &self.space,
                &pairs,
                &self.config.fit_config(seeds[2]),
            )?)
        } else {
            None
        };
        Ok(FittedModels {
            dispersion: dispersion?,
            leakage: leakage?,
            conversion,
            objective_ids: functional.iter().map(|o| o.id.clone()).collect(),
            conversion_ids: scored.iter().map(|o| o.id.clone()).collect(),
        })
    }

    /// Models on all current data with a seed tied to the data size, so
    /// repeated calls on the same state agree.
    pub fn current_models(&self) -> Result<FittedModels> {
        let scored = self.observations.iter().filter(|o| o.label.is_some()).count();
        self.fit_models(
            scored >= 2,
            derived_seed(self.config.seed, u64::MAX, self.observations.len() as u32),
        )
    }

    /// Rebuilds the model that suggested `round`.
    pub fn snapshot_model(&self, round: usize, target: Target) -> Result<SurrogateModel> {
        let snap = self
            .model_snapshots
            .iter()
            .find(|s| s.round == round && s.target == target)
            .ok_or_else(|| {
                Error::State(format!(
                    "round {round} has no {target} model snapshot (rounds imported from a dataset carry none)"
                ))
            })?;
        let mut conditions = Vec::with_capacity(snap.training_ids.len());
        let mut targets = Vec::with_capacity(snap.training_ids.len());
        for id in &snap.training_ids {
            let o = self.observation(id)?;
            conditions.push(o.condition);
            targets.push(o.measurement(target).ok_or_else(|| {
                Error::State(format!("snapshot training point `{id}` no longer has a {target} value"))
            })?);
        }
        SurrogateModel::from_parts(
            &self.space,
            &conditions,
            &targets,
            snap.hyperparams.clone(),
            snap.target_mean,
            snap.target_std,
        )
    }

    pub fn measured_points(&self) -> Vec<(String, ObjectivePoint)> {
        self.functional()
            .map(|o| (o.id.clone(), o.objectives().unwrap()))
            .collect()
    }

    /// Nondominated measured points sorted by dispersion.
    pub fn measured_front(&self) -> Vec<FrontMember> {
        let obs: Vec<&Observation> = self.functional().collect();
        let pts: Vec<ObjectivePoint> = obs.iter().map(|o| o.objectives().unwrap()).collect();
        let mut members: Vec<FrontMember> = nondominated(&pts)
            .into_iter()
            .map(|i| FrontMember {
                id: obs[i].id.clone(),
                point: pts[i],
                std: [obs[i].dispersion.unwrap().std, obs[i].leakage.unwrap().std],
            })
            .collect();
        members.sort_by(|a, b| a.point.f1.total_cmp(&b.point.f1));
        members
    }

    // ---- suggestion ----

    /// Fits the models, picks a batch and opens a new round.
    pub fn suggest_round(&mut self, options: &SuggestOptions) -> Result<&RoundRecord> {
        let strategy = options.strategy.unwrap_or(self.config.strategy);
        let hitl = options.hitl.unwrap_or(self.config.hitl);
        let q = options.q.unwrap_or(self.config.q);
        if q == 0 {
            return Err(Error::Parameter("a round needs at least one suggestion (q = 0)".into()));
        }
        if let Some(last) = self.rounds.last() {
            if last.status != RoundStatus::Complete && !options.concurrent {
                return Err(Error::State(format!(
                    "round {} ({}) is {:?}; finish it before suggesting",
                    last.index, last.label, last.status
                )));
            }
        }
        let acq = self.config.acquisition(strategy, q, hitl);
        acq.validate()?;

        let stream = self.rng_counter;
        let models = self.fit_models(hitl, derived_seed(self.config.seed, stream, 1))?;
        let exclude: HashSet<ConditionKey> = self.observations.iter().map(|o| o.condition.key()).collect();
        let grid = CandidateGrid::new(&self.space, &self.config.refinement)?;
        let sampled: Vec<ProcessCondition>;
        let pool = match self.config.pool_size {
            Some(n) => {
                let mut rng = round_rng(self.config.seed, stream);
                sampled = grid.sample(n, &exclude, &mut rng);
                CandidatePool::List(&sampled)
            }
            None => CandidatePool::Grid {
                grid: &grid,
                exclude: &exclude,
            },
        };
        let constraint = models.conversion.as_ref().map(|m| ConversionConstraint {
            model: m,
            tau: self.config.tau,
        });
        let feasibility = constraint.as_ref().map(|c| c as &dyn Feasibility);
        let pair = (&models.dispersion, &models.leakage);
        let picks: Vec<Selection> = match strategy {
            Strategy::EhviGreedy => {
                let pts: Vec<ObjectivePoint> = self.functional().map(|o| o.objectives().unwrap()).collect();
                let front = ParetoFront::from_points(&pts, self.config.reference);
                ehvi_greedy_batch(pair, pool, &front, &acq, feasibility)?
            }
            Strategy::ParetoUcb => pareto_ucb_batch(pair, pool, &acq, feasibility)?,
        };

        let index = self.rounds.len();
        let label = options.label.clone().unwrap_or_else(|| index.to_string());
        if self.rounds.iter().any(|r| r.label == label) {
            return Err(Error::Conflict(format!("a round labelled `{label}` already exists")));
        }
        let mut snapshots = vec![snapshot(
            index,
            Target::Dispersion,
            &models.dispersion,
            &models.objective_ids,
        )];
        snapshots.push(snapshot(index, Target::Leakage, &models.leakage, &models.objective_ids));
        if let Some(m) = &models.conversion {
            snapshots.push(snapshot(index, Target::Conversion, m, &models.conversion_ids));
        }
        let mut next_id = self.next_numeric_id();
        let mut observations = Vec::with_capacity(picks.len());
        let mut predictions = Vec::with_capacity(picks.len());
        for sel in &picks {
            let id = next_id.to_string();
            next_id += 1;
            let (m1, s1) = models.dispersion.predict(&sel.condition);
            let (m2, s2) = models.leakage.predict(&sel.condition);
            let p = models
                .conversion
                .as_ref()
                .map(|m| p_constraint(m.posterior_mean(&sel.condition), self.config.tau))
                .transpose()?;
            predictions.push(Prediction {
                id: id.clone(),
                dispersion: [m1, s1],
                leakage: [m2, s2],
                p_constraint: p,
            });
            observations.push(Observation::pending(id, sel.condition, index));
        }
        let record = RoundRecord {
            index,
            label,
            strategy: strategy.into(),
            hitl_enabled: hitl,
            suggested: observations.iter().map(|o| o.id.clone()).collect(),
            status: RoundStatus::PendingScores,
            predictions,
        };
        self.transact(move |s| {
            s.observations.extend(observations);
            s.rounds.push(record);
            s.model_snapshots.extend(snapshots);
            s.rng_counter += 1;
            Ok(())
        })?;
        Ok(self.rounds.last().unwrap())
    }

    // ---- recording ----

    fn editable(&self, id: &str) -> Result<usize> {
        let pos = self
            .observations
            .iter()
            .position(|o| o.id == id)
            .ok_or_else(|| Error::NotFound(format!("no observation with id `{id}`")))?;
        let r = self.observations[pos].round;
        let latest = self.rounds.len() - 1;
        if r != latest && self.rounds[r].status == RoundStatus::Complete {
            return Err(Error::Conflict(format!(
                "`{id}` belongs to completed round {} ({}); only open rounds or the latest round accept edits",
                r, self.rounds[r].label
            )));
        }
        Ok(pos)
    }

    pub fn set_score(&mut self, id: &str, label: ConversionLabel) -> Result<()> {
        self.transact(|s| {
            let i = s.editable(id)?;
            let o = &mut s.observations[i];
            if !label.admits_measurement() && o.is_functional() {
                return Err(Error::Invariant(format!(
                    "`{id}` has measurements; a {label} film cannot carry them"
                )));
            }
            o.label = Some(label);
            if !label.admits_measurement() {
                o.unmeasurable = false;
            }
            Ok(())
        })
    }

    pub fn set_objectives(&mut self, id: &str, dispersion: Measurement, leakage: Measurement) -> Result<()> {
        self.transact(|s| {
            let i = s.editable(id)?;
            let o = &mut s.observations[i];
            match o.label {
                None => {
                    return Err(Error::State(format!("score `{id}` before recording measurements")));
                }
                Some(l) if !l.admits_measurement() => {
                    return Err(Error::Invariant(format!(
                        "`{id}` is scored {l}; such films cannot carry measurements"
                    )));
                }
                Some(_) => {}
            }
            o.dispersion = Some(dispersion);
            o.leakage = Some(leakage);
            o.unmeasurable = false;
            Ok(())
        })
    }

    pub fn mark_unmeasurable(&mut self, id: &str) -> Result<()> {
        self.transact(|s| {
            let i = s.editable(id)?;
            let o = &mut s.observations[i];
            if o.label.is_none() {
                return Err(Error::State(format!("score `{id}` before marking it unmeasurable")));
            }
            if o.is_functional() {
                return Err(Error::Invariant(format!("`{id}` already has measurements")));
            }
            o.unmeasurable = true;
            Ok(())
        })
    }

    /// Applies a batch of results to `round`, which must be the latest.
    pub fn record_results(&mut self, round: usize, entries: &[ResultEntry]) -> Result<RoundStatus> {
        let latest = self
            .rounds
            .len()
            .checked_sub(1)
            .ok_or_else(|| Error::State("campaign has no rounds".into()))?;
        if round != latest {
            return Err(Error::Conflict(format!(
                "round {round} is not the latest round ({latest})"
            )));
        }
        self.transact(|s| {
            for e in entries {
                let o = s.observation(&e.id)?;
                if o.round != round {
                    return Err(Error::Conflict(format!(
                        "`{}` belongs to round {}, not {round}",
                        e.id, o.round
                    )));
                }
                if let Some(l) = e.label {
                    s.set_score(&e.id, l)?;
                }
                match (e.dispersion, e.leakage) {
                    (Some(d), Some(l)) => s.set_objectives(&e.id, d, l)?,
                    (None, None) => {}
                    _ => {
                        return Err(Error::Invariant(format!(
                            "`{}`: both objectives are required together",
                            e.id
                        )))
                    }
                }
                if e.unmeasurable {
                    s.mark_unmeasurable(&e.id)?;
                }
            }
            Ok(())
        })?;
        Ok(self.rounds[round].status)
    }

    // ---- reports ----

    /// Compares each measured point of `round` with the snapshot model that
    /// suggested it: within when |measured − μ| ≤ σ.
    pub fn check_convergence(&self, round: usize) -> Result<ConvergenceReport> {
        let r = self.round(round)?;
        if r.status != RoundStatus::Complete {
            return Err(Error::State(format!("round {round} is {:?}, not complete", r.status)));
        }
        let measured: Vec<&Observation> = r
            .suggested
            .iter()
            .filter_map(|id| self.observation(id).ok())
            .filter(|o| o.is_functional())
            .collect();
        if measured.is_empty() {
            return Err(Error::InsufficientData(format!(
                "round {round} produced no functional devices"
            )));
        }
        let mut checks = Vec::new();
        for target in [Target::Dispersion, Target::Leakage] {
            let model = self.snapshot_model(round, target)?;
            for o in &measured {
                let (mu, sd) = model.predict(&o.condition);
                let y = o.measurement(target).unwrap();
                checks.push(PointCheck {
                    id: o.id.clone(),
                    target,
                    measured: y,
                    predicted_mean: mu,
                    predicted_std: sd,
                    within: (y - mu).abs() <= sd,
                });
            }
        }
        Ok(ConvergenceReport {
            round,
            converged: checks.iter().all(|c| c.within),
            checks,
        })
    }

    /// Dominated hypervolume of measured points up to and including each round.
    pub fn hypervolume_history(&self) -> Vec<HypervolumeEntry> {
        self.rounds
            .iter()
            .map(|r| {
                let pts: Vec<ObjectivePoint> = self
                    .functional()
                    .filter(|o| o.round <= r.index)
                    .map(|o| o.objectives().unwrap())
                    .collect();
                HypervolumeEntry {
                    round: r.index,
                    label: r.label.clone(),
                    hypervolume: hypervolume_2d(&pts, self.config.reference),
                    functional: pts.len(),
                    pareto_size: nondominated(&pts).len(),
                }
            })
            .collect()
    }

    pub fn status(&self) -> CampaignStatus {
        let by_id = |id: &String| self.observations.iter().find(|o| &o.id == id);
        CampaignStatus {
            observations: self.observations.len(),
            scored: self.observations.iter().filter(|o| o.label.is_some()).count(),
            functional: self.functional().count(),
            rounds: self
                .rounds
                .iter()
                .map(|r| RoundSummary {
                    index: r.index,
                    label: r.label.clone(),
                    strategy: r.strategy,
                    hitl_enabled: r.hitl_enabled,
                    status: r.status,
                    suggested: r.suggested.len(),
                    functional: r
                        .suggested
                        .iter()
                        .filter_map(by_id)
                        .filter(|o| o.is_functional())
                        .count(),
                })
                .collect(),
            pending_scores: self
                .observations
                .iter()
                .filter(|o| o.label.is_none())
                .map(|o| o.id.clone())
                .collect(),
            pending_objectives: self
                .observations
                .iter()
                .filter(|o| o.label.is_some() && !o.is_complete())
                .map(|o| o.id.clone())
                .collect(),
        }
    }

    // ---- persistence ----

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("version")
            .and_then(|v| v.as_str())
            .ok_or_else(|| Error::State("campaign file has no `version` string".into()))?;
        let major = version.split('.').next().and_then(|m| m.parse::<u64>().ok());
        if major != Some(SCHEMA_MAJOR) {
            return Err(Error::Version {
                found: version.to_string(),
                supported: SCHEMA_MAJOR,
            });
        }
        let state: Self = serde_json::from_value(value)?;
        state.space.validate()?;
        state.validate()?;
        Ok(state)
    }

    /// Writes through a temporary sibling file and renames it into place.
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(".tmp");
        let tmp = std::path::PathBuf::from(tmp);
        std::fs::write(&tmp, text)?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn snapshot(round: usize, target: Target, m: &SurrogateModel, ids: &[String]) -> ModelSnapshot {
    ModelSnapshot {
        round,
        target,
        hyperparams: m.hyperparams().clone(),
        target_mean: m.target_mean(),
        target_std: m.target_std(),
        training_ids: ids.to_vec(),
        log_marginal_likelihood: m.log_marginal_likelihood(),
    }
}

// ---- dataset CSV ----

const PARAM_COLUMNS: [&str; 5] = [
    "radiant_energy_j_cm2",
    "pulse_count",
    "pulse_length_ms",
    "micropulse_count",
    "duty_cycle_pct",
];

struct DatasetRow {
    line: usize,
    round: String,
    observation: Observation,
}

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "-" | "–" | "—" | "NA" | "na")
}

/// Parses the dataset layout. Rows are numbered from 1 after the header.
fn parse_dataset(text: &str, space: &ParameterSpace) -> Result<Vec<DatasetRow>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let header_err = |column: &str| Error::Parse {
        row: 0,
        column: column.to_string(),
        message: "required column missing from header".into(),
    };
    let id_col = find("condition_id").ok_or_else(|| header_err("condition_id"))?;
    let mut param_cols = [0usize; 5];
    for (i, col) in param_cols.iter_mut().enumerate() {
        let own = space.param(i).name.to_ascii_lowercase();
        *col = find(PARAM_COLUMNS[i])
            .or_else(|| find(&own))
            .ok_or_else(|| header_err(PARAM_COLUMNS[i]))?;
    }
    let voltage_col = find("pulse_voltage_v");
    let score_col = find("conversion_score");
    let round_col = find("round");
    let objective_cols = |name: &str| (find(&format!("{name}_mean")), find(&format!("{name}_std")), find(name));
    let disp_cols = objective_cols("dispersion");
    let leak_cols = objective_cols("leakage");

    let mut out = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let row = k + 1;
        let record = record.map_err(|e| Error::Parse {
            row,
            column: String::new(),
            message: e.to_string(),
        })?;
        let cell = |c: usize| record.get(c).unwrap_or("");
        let perr = |c: usize, message: String| Error::Parse {
            row,
            column: headers[c].clone(),
            message,
        };
        let number = |c: usize| -> Result<f64> {
            let s = cell(c);
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| perr(c, format!("`{s}` is not a number")))
        };
        let id = cell(id_col).to_string();
        if id.is_empty() {
            return Err(perr(id_col, "empty condition id".into()));
        }
        let mut values = [0.0; 5];
        for i in 0..5 {
            values[i] = number(param_cols[i])?;
            let p = space.param(i);
            if !p.contains(values[i]) {
                return Err(perr(
                    param_cols[i],
                    format!("{} outside [{}, {}]", values[i], p.min, p.max),
                ));
            }
        }
        let pulse_voltage = match voltage_col {
            Some(c) if !is_missing(cell(c)) => Some(number(c)?),
            _ => None,
        };
        let label = match score_col {
            Some(c) if !is_missing(cell(c)) => {
                Some(cell(c).parse::<ConversionLabel>().map_err(|e| perr(c, e.to_string()))?)
            }
            _ => None,
        };
        let objective = |(mean_c, std_c, combined_c): (Option<usize>, Option<usize>, Option<usize>)| -> Result<Option<Measurement>> {
            let (c, text) = match (mean_c, combined_c) {
                (Some(c), _) if !is_missing(cell(c)) => (c, cell(c).to_string()),
                (_, Some(c)) if !is_missing(cell(c)) => (c, cell(c).to_string()),
                _ => return Ok(None),
            };
            let mut m: Measurement = text.parse().map_err(|e: Error| perr(c, e.to_string()))?;
            if Some(c) == mean_c && !text.contains(['±', '+']) {
                if let Some(sc) = std_c.filter(|&sc| !is_missing(cell(sc))) {
                    m.std = number(sc)?;
                    m.validate().map_err(|e| perr(sc, e))?;
                }
            }
            Ok(Some(m))
        };
        let dispersion = objective(disp_cols)?;
        let leakage = objective(leak_cols)?;
        let round = round_col
            .map(|c| cell(c).to_string())
            .filter(|r| !r.is_empty())
            .unwrap_or_else(|| "0".into());
        let mut obs = Observation {
            id: id.clone(),
            condition: ProcessCondition(values),
            pulse_voltage,
            label,
            dispersion,
            leakage,
            unmeasurable: false,
            round: 0,
            device_count: default_device_count(),
        };
        if label.is_some_and(|l| l.admits_measurement())
            && !obs.is_functional()
            && dispersion.is_none()
            && leakage.is_none()
        {
            obs.unmeasurable = true;
        }
        obs.validate()
            .map_err(|m| Error::Invariant(format!("row {row} (condition `{id}`): {m}")))?;
        out.push(DatasetRow {
            line: row,
            round,
            observation: obs,
        });
    }
    Ok(out)
}

/// A campaign holding the bundled study data: the LHS round and the five
/// comparison rounds.
pub fn bundled_campaign(config: CampaignConfig) -> Result<CampaignState> {
    let mut state = CampaignState::new(ParameterSpace::photonic_curing(), config)?;
    state.ingest_csv(LHS_INITIAL_CSV)?;
    state.ingest_csv(COMPARISON_ROUNDS_CSV)?;
    Ok(state)
}
