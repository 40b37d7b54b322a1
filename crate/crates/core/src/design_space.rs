//! The discretized five-parameter photonic-curing input space.
//!
//! Conditions are stored in machine units. Models work on the unit cube, so
//! every condition passes through [`ParameterSpace::normalize`] before it
//! reaches a kernel.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of process parameters.
pub const DIMS: usize = 5;

const REL_TOL: f64 = 1e-9;

/// Rounds away floating-point residue from `min + k * step` so grid values
/// print and compare cleanly.
fn tidy(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub min: f64,
    pub max: f64,
    pub step: f64,
    #[serde(default)]
    pub unit: String,
}

impl ParameterSpec {
    pub fn new(name: &str, min: f64, max: f64, step: f64, unit: &str) -> Self {
        Self {
            name: name.to_string(),
            min,
            max,
            step,
            unit: unit.to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.steps_for(self.step).map(|_| ())
    }

    /// Number of grid values, endpoints included.
    pub fn step_count(&self) -> usize {
        self.steps_for(self.step).unwrap_or(0)
    }

    fn steps_for(&self, step: f64) -> Result<usize> {
        let bad = |msg: String| Err(Error::Validation(format!("{}: {msg}", self.name)));
        if !(self.min.is_finite() && self.max.is_finite() && step.is_finite()) {
            return bad("bounds and step must be finite".into());
        }
        if self.max <= self.min {
            return bad(format!("max {} must exceed min {}", self.max, self.min));
        }
        if step <= 0.0 {
            return bad(format!("step {step} must be positive"));
        }
        let intervals = (self.max - self.min) / step;
        let rounded = intervals.round();
        if (intervals - rounded).abs() > REL_TOL * intervals.max(1.0) {
            return bad(format!(
                "range {}..{} is not a multiple of step {step}",
                self.min, self.max
            ));
        }
        let count = rounded as usize + 1;
        if count < 2 {
            return bad("needs at least two grid values".into());
        }
        Ok(count)
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    pub fn value_at(&self, index: usize) -> f64 {
        tidy(self.min + index as f64 * self.step).min(self.max)
    }

    /// Nearest grid value; exact halves go to the upper neighbour.
    pub fn snap(&self, value: f64) -> f64 {
        let count = self.step_count();
        let k = ((value - self.min) / self.step + 0.5).floor();
        let k = k.clamp(0.0, (count - 1) as f64) as usize;
        self.value_at(k)
    }

    pub fn contains(&self, value: f64) -> bool {
        let tol = REL_TOL * self.width().max(1.0);
        value >= self.min - tol && value <= self.max + tol
    }

    pub fn is_on_grid(&self, value: f64) -> bool {
        let k = (value - self.min) / self.step;
        self.contains(value) && (k - k.round()).abs() <= 1e-6
    }
}

/// One point of the input space, in machine units, ordered as the space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProcessCondition(pub [f64; DIMS]);

impl ProcessCondition {
    pub fn new(values: [f64; DIMS]) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64; DIMS] {
        &self.0
    }

    pub fn key(&self) -> ConditionKey {
        ConditionKey(self.0.map(|v| (v * 1e6).round() as i64))
    }
}

impl std::fmt::Display for ProcessCondition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let [a, b, c, d, e] = self.0;
        write!(f, "({a}, {b}, {c}, {d}, {e})")
    }
}

/// Hashable identity of a condition (values quantized to 1e-6).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConditionKey(pub [i64; DIMS]);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterSpace {
    params: Vec<ParameterSpec>,
}

impl ParameterSpace {
    pub fn new(params: Vec<ParameterSpec>) -> Result<Self> {
        let space = Self { params };
        space.validate()?;
        Ok(space)
    }

    /// Radiant energy, pulse count, pulse length, micropulse count and duty
    /// cycle with the LHS grid used in the photonic-curing study.
    pub fn photonic_curing() -> Self {
        Self {
            params: vec![
                ParameterSpec::new("radiant_energy", 1.0, 7.0, 0.2, "J/cm2"),
                ParameterSpec::new("pulse_count", 1.0, 20.0, 1.0, "count"),
                ParameterSpec::new("pulse_length", 1.0, 20.0, 1.0, "ms"),
                ParameterSpec::new("micropulse_count", 1.0, 30.0, 1.0, "count"),
                ParameterSpec::new("duty_cycle", 20.0, 70.0, 5.0, "%"),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.len() != DIMS {
            return Err(Error::Validation(format!(
                "expected {DIMS} parameters, got {}",
                self.params.len()
            )));
        }
        self.params.iter().try_for_each(ParameterSpec::validate)
    }

    pub fn params(&self) -> &[ParameterSpec] {
        &self.params
    }

    pub fn param(&self, i: usize) -> &ParameterSpec {
        &self.params[i]
    }

    pub fn names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn steps(&self) -> [f64; DIMS] {
        std::array::from_fn(|i| self.params[i].step)
    }

    pub fn step_counts(&self) -> Result<[usize; DIMS]> {
        self.validate()?;
        Ok(std::array::from_fn(|i| self.params[i].step_count()))
    }

    /// Product of per-parameter step counts.
    pub fn grid_size(&self) -> Result<u64> {
        Ok(self.step_counts()?.iter().map(|&c| c as u64).product())
    }

    pub fn check_bounds(&self, c: &ProcessCondition) -> Result<()> {
        for (p, &v) in self.params.iter().zip(c.0.iter()) {
            if !v.is_finite() || !p.contains(v) {
                return Err(Error::Range {
                    param: p.name.clone(),
                    value: v,
                    min: p.min,
                    max: p.max,
                });
            }
        }
        Ok(())
    }

    pub fn is_on_grid(&self, c: &ProcessCondition) -> bool {
        self.params.iter().zip(c.0.iter()).all(|(p, &v)| p.is_on_grid(v))
    }

    /// Maps a condition onto the unit cube.
    pub fn normalize(&self, c: &ProcessCondition) -> Result<[f64; DIMS]> {
        self.check_bounds(c)?;
        Ok(self.normalize_unchecked(c))
    }

    pub(crate) fn normalize_unchecked(&self, c: &ProcessCondition) -> [f64; DIMS] {
        std::array::from_fn(|i| {
            let p = &self.params[i];
            (c.0[i] - p.min) / p.width()
        })
    }

    pub fn denormalize(&self, u: &[f64; DIMS]) -> ProcessCondition {
        ProcessCondition(std::array::from_fn(|i| {
            let p = &self.params[i];
            p.min + u[i] * p.width()
        }))
    }

    /// Snaps every coordinate of a unit-cube point to its nearest grid value.
    pub fn snap_unit(&self, u: &[f64; DIMS]) -> ProcessCondition {
        let raw = self.denormalize(u);
        ProcessCondition(std::array::from_fn(|i| self.params[i].snap(raw.0[i])))
    }
}

/// Per-parameter step override used to build the acquisition candidate pool.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Refinement(pub [f64; DIMS]);

impl Refinement {
    /// 0.1 J/cm2, integer counts and milliseconds, 1 % duty cycle.
    pub fn fine() -> Self {
        Self([0.1, 1.0, 1.0, 1.0, 1.0])
    }

    pub fn of_space(space: &ParameterSpace) -> Self {
        Self(space.steps())
    }
}

impl Default for Refinement {
    fn default() -> Self {
        Self::fine()
    }
}

/// Mixed-radix view of a (possibly refined) grid: every grid point has a
/// stable index in `0..len()`, with the last parameter varying fastest.
#[derive(Clone, Debug)]
pub struct CandidateGrid {
    axes: [ParameterSpec; DIMS],
    counts: [usize; DIMS],
    len: u64,
}

impl CandidateGrid {
    pub fn new(space: &ParameterSpace, refinement: &Refinement) -> Result<Self> {
        space.validate()?;
        let axes: [ParameterSpec; DIMS] = std::array::from_fn(|i| ParameterSpec {
            step: refinement.0[i],
            ..space.param(i).clone()
        });
        let mut counts = [0usize; DIMS];
        for (i, axis) in axes.iter().enumerate() {
            counts[i] = axis.steps_for(axis.step)?;
        }
        let len = counts.iter().map(|&c| c as u64).product();
        Ok(Self { axes, counts, len })
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn counts(&self) -> [usize; DIMS] {
        self.counts
    }

    pub fn condition_at(&self, mut index: u64) -> ProcessCondition {
        let mut values = [0.0; DIMS];
        for d in (0..DIMS).rev() {
            let c = self.counts[d] as u64;
            values[d] = self.axes[d].value_at((index % c) as usize);
            index /= c;
        }
        ProcessCondition(values)
    }

    /// Grid points in `range` that are not excluded, in index order.
    pub fn range<'a>(
        &'a self,
        range: std::ops::Range<u64>,
        exclude: &'a HashSet<ConditionKey>,
    ) -> impl Iterator<Item = ProcessCondition> + 'a {
        range
            .map(move |i| self.condition_at(i))
            .filter(move |c| !exclude.contains(&c.key()))
    }

    /// Uniform sample of `n` distinct non-excluded grid points, returned in
    /// grid order. Returns fewer than `n` only when the grid runs out.
    pub fn sample<R: Rng>(&self, n: usize, exclude: &HashSet<ConditionKey>, rng: &mut R) -> Vec<ProcessCondition> {
        let available = self.len.saturating_sub(exclude.len() as u64);
        if n as u64 >= available {
            return self.range(0..self.len, exclude).collect();
        }
        let mut picked: Vec<u64> = Vec::with_capacity(n);
        let mut seen: HashSet<u64> = HashSet::with_capacity(n);
        while picked.len() < n {
            let i = rng.gen_range(0..self.len);
            if seen.insert(i) && !exclude.contains(&self.condition_at(i).key()) {
                picked.push(i);
            }
        }
        picked.sort_unstable();
        picked.into_iter().map(|i| self.condition_at(i)).collect()
    }
}

/// Streams every refined grid point not in `exclude`, in grid order.
pub struct CandidateStream<'a> {
    grid: CandidateGrid,
    next: u64,
    exclude: &'a HashSet<ConditionKey>,
}

impl CandidateStream<'_> {
    pub fn grid(&self) -> &CandidateGrid {
        &self.grid
    }

    /// Pulls up to `size` candidates; an empty vector means the stream is done.
    pub fn next_chunk(&mut self, size: usize) -> Vec<ProcessCondition> {
        let mut out = Vec::with_capacity(size.min(1 << 16));
        for c in self.by_ref() {
            out.push(c);
            if out.len() == size {
                break;
            }
        }
        out
    }
}

impl Iterator for CandidateStream<'_> {
    type Item = ProcessCondition;

    fn next(&mut self) -> Option<ProcessCondition> {
        while self.next < self.grid.len {
            let c = self.grid.condition_at(self.next);
            self.next += 1;
            if !self.exclude.contains(&c.key()) {
                return Some(c);
            }
        }
        None
    }
}

pub fn enumerate_candidates<'a>(
    space: &ParameterSpace,
    refinement: &Refinement,
    exclude: &'a HashSet<ConditionKey>,
) -> Result<CandidateStream<'a>> {
    Ok(CandidateStream {
        grid: CandidateGrid::new(space, refinement)?,
        next: 0,
        exclude,
    })
}

/// A Latin hypercube design: the stratified unit-cube points and the grid
/// conditions they snap to.
#[derive(Clone, Debug)]
pub struct LhsDesign {
    pub unit: Vec<[f64; DIMS]>,
    pub conditions: Vec<ProcessCondition>,
}

const LHS_MAX_REDRAWS: usize = 10_000;

pub fn lhs_design(space: &ParameterSpace, n: usize, seed: u64) -> Result<LhsDesign> {
    if n == 0 {
        return Err(Error::Parameter("LHS sample size must be at least 1".into()));
    }
    let total = space.grid_size()?;
    if n as u64 > total {
        return Err(Error::Parameter(format!(
            "cannot draw {n} distinct conditions from a grid of {total}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strata: Vec<Vec<usize>> = (0..DIMS)
        .map(|_| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect();

    let mut unit = Vec::with_capacity(n);
    let mut conditions = Vec::with_capacity(n);
    let mut seen = HashSet::with_capacity(n);
    for i in 0..n {
        let mut redraws = 0;
        loop {
            let u: [f64; DIMS] = std::array::from_fn(|d| (strata[d][i] as f64 + rng.gen::<f64>()) / n as f64);
            let c = space.snap_unit(&u);
            if seen.insert(c.key()) {
                unit.push(u);
                conditions.push(c);
                break;
            }
            redraws += 1;
            if redraws == LHS_MAX_REDRAWS {
                return Err(Error::Parameter(format!(
                    "LHS sample {i} keeps colliding with earlier samples; grid too coarse for n = {n}"
                )));
            }
        }
    }
    Ok(LhsDesign { unit, conditions })
}

/// Latin hypercube sample snapped to the space's grid.
pub fn lhs_sample(space: &ParameterSpace, n: usize, seed: u64) -> Result<Vec<ProcessCondition>> {
    Ok(lhs_design(space, n, seed)?.conditions)
}
