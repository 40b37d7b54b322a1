//! Gaussian process regression with an ARD Matérn 5/2 kernel.
//!
//! Inputs live on the unit cube, targets are standardized to zero mean and
//! unit variance (unless disabled), and the prior mean is zero. Hyperparameters
//! are chosen by multi-start Nelder-Mead on the log marginal likelihood.

use argmin::core::{CostFunction, Error as ArgminError, Executor};
use argmin::solver::neldermead::NelderMead;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design_space::{ParameterSpace, ProcessCondition, DIMS};
use crate::error::{Error, Result};

const SQRT5: f64 = 2.236_067_977_499_79;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub const LENGTHSCALE_BOUNDS: (f64, f64) = (0.01, 10.0);
pub const SIGNAL_VARIANCE_BOUNDS: (f64, f64) = (1e-3, 1e3);
pub const NOISE_VARIANCE_BOUNDS: (f64, f64) = (1e-8, 1.0);

const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelHyperparams {
    pub lengthscales: [f64; DIMS],
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelHyperparams {
    pub fn new(lengthscales: [f64; DIMS], signal_variance: f64, noise_variance: f64) -> Self {
        Self {
            lengthscales,
            signal_variance,
            noise_variance,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(l) = self.lengthscales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Parameter(format!("lengthscale {l} must be positive")));
        }
        if !(self.signal_variance > 0.0 && self.signal_variance.is_finite()) {
            return Err(Error::Parameter(format!(
                "signal variance {} must be positive",
                self.signal_variance
            )));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::Parameter(format!(
                "noise variance {} must be non-negative",
                self.noise_variance
            )));
        }
        Ok(())
    }
}

#[inline]
fn matern52(u: &[f64; DIMS], v: &[f64; DIMS], hp: &KernelHyperparams) -> f64 {
    let r2: f64 = (0..DIMS)
        .map(|i| {
            let d = (u[i] - v[i]) / hp.lengthscales[i];
            d * d
        })
        .sum();
    let r = r2.sqrt();
    hp.signal_variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * (-SQRT5 * r).exp()
}

/// `σ² (1 + √5 r + 5/3 r²) exp(-√5 r)` with `r² = Σ ((uᵢ - vᵢ) / ℓᵢ)²`.
pub fn matern52_ard(u: &[f64; DIMS], v: &[f64; DIMS], hp: &KernelHyperparams) -> Result<f64> {
    if let Some(l) = hp.lengthscales.iter().find(|l| **l <= 0.0) {
        return Err(Error::Parameter(format!("lengthscale {l} must be positive")));
    }
    Ok(matern52(u, v, hp))
}

/// Kernel matrix without any diagonal noise term.
pub fn kernel_matrix(inputs: &[[f64; DIMS]], hp: &KernelHyperparams) -> DMatrix<f64> {
    let n = inputs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = hp.signal_variance;
        for j in 0..i {
            let v = matern52(&inputs[i], &inputs[j], hp);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cholesky factor of `k`, retrying with escalating diagonal jitter.
/// Returns the lower factor and the jitter that was needed.
fn factorize(k: DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    if let Some(c) = k.clone().cholesky() {
        return Ok((c.unpack(), 0.0));
    }
    let n = k.nrows();
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = kj.cholesky() {
            return Ok((c.unpack(), jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Numerical(format!(
        "kernel matrix ({n}x{n}) not positive definite even with jitter {JITTER_MAX}"
    )))
}

fn forward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for j in 0..i {
            s -= l[(i, j)] * b[j];
        }
        b[i] = s / l[(i, i)];
    }
}

fn backward_solve_transpose(l: &DMatrix<f64>, b: &mut [f64]) {
    let n = b.len();
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= l[(j, i)] * b[j];
        }
        b[i] = s / l[(i, i)];
    }
}

fn lml_from_factor(l: &DMatrix<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let mut alpha = y.to_vec();
    forward_solve(l, &mut alpha);
    let quad: f64 = alpha.iter().map(|a| a * a).sum();
    backward_solve_transpose(l, &mut alpha);
    let log_det: f64 = (0..y.len()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0;
    let lml = -0.5 * quad - 0.5 * log_det - 0.5 * y.len() as f64 * LN_2PI;
    (lml, alpha)
}

/// `-½ yᵀ(K+σₙ²I)⁻¹y - ½ log|K+σₙ²I| - n/2 log 2π` for standardized targets.
pub fn log_marginal_likelihood(inputs: &[[f64; DIMS]], targets: &[f64], hp: &KernelHyperparams) -> Result<f64> {
    if inputs.is_empty() || inputs.len() != targets.len() {
        return Err(Error::Parameter(format!(
            "need matching nonempty inputs/targets, got {} and {}",
            inputs.len(),
            targets.len()
        )));
    }
    hp.validate()?;
    let mut k = kernel_matrix(inputs, hp);
    for i in 0..inputs.len() {
        k[(i, i)] += hp.noise_variance;
    }
    let (l, _) = factorize(k)?;
    Ok(lml_from_factor(&l, targets).0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub restarts: usize,
    pub seed: u64,
    /// Fixes the noise variance instead of fitting it.
    pub noise: Option<f64>,
    /// Lower bound on fitted noise variance (standardized units).
    pub noise_floor: Option<f64>,
    /// Standardize targets before fitting; when false the prior mean is
    /// zero in raw target units.
    pub standardize: bool,
    pub max_iters: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            seed: 0,
            noise: None,
            noise_floor: None,
            standardize: true,
            max_iters: 600,
        }
    }
}

impl FitConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn pinned_noise(mut self, noise: f64) -> Self {
        self.noise = Some(noise);
        self
    }

    pub fn unstandardized(mut self) -> Self {
        self.standardize = false;
        self
    }
}

/// A fitted GP surrogate for one scalar target.
#[derive(Clone, Debug)]
pub struct SurrogateModel {
    space: ParameterSpace,
    inputs: Vec<[f64; DIMS]>,
    raw_targets: Vec<f64>,
    target_mean: f64,
    target_std: f64,
    hyperparams: KernelHyperparams,
    /// Diagonal noise per training point; Kriging-believer fantasies carry 0.
    noise: Vec<f64>,
    chol: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
    lml: f64,
}

fn standardization(y: &[f64], standardize: bool) -> (f64, f64) {
    if !standardize {
        return (0.0, 1.0);
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

impl SurrogateModel {
    /// Rebuilds a model from stored hyperparameters and standardization
    /// constants without refitting.
    pub fn from_parts(
        space: &ParameterSpace,
        conditions: &[ProcessCondition],
        raw_targets: &[f64],
        hyperparams: KernelHyperparams,
        target_mean: f64,
        target_std: f64,
    ) -> Result<Self> {
        if conditions.is_empty() || conditions.len() != raw_targets.len() {
            return Err(Error::InsufficientData(format!(
                "model needs matching nonempty inputs/targets, got {} and {}",
                conditions.len(),
                raw_targets.len()
            )));
        }
        if !(target_std > 0.0) {
            return Err(Error::Parameter(format!("target std {target_std} must be positive")));
        }
        hyperparams.validate()?;
        let inputs = conditions
            .iter()
            .map(|c| space.normalize(c))
            .collect::<Result<Vec<_>>>()?;
        let noise = vec![hyperparams.noise_variance; inputs.len()];
        Self::assemble(
            space.clone(),
            inputs,
            raw_targets.to_vec(),
            target_mean,
            target_std,
            hyperparams,
            noise,
        )
    }

    fn assemble(
        space: ParameterSpace,
        inputs: Vec<[f64; DIMS]>,
        raw_targets: Vec<f64>,
        target_mean: f64,
        target_std: f64,
        hyperparams: KernelHyperparams,
        noise: Vec<f64>,
    ) -> Result<Self> {
        let mut k = kernel_matrix(&inputs, &hyperparams);
        for (i, s) in noise.iter().enumerate() {
            k[(i, i)] += s;
        }
        let (chol, jitter) = factorize(k)?;
        let y: Vec<f64> = raw_targets.iter().map(|t| (t - target_mean) / target_std).collect();
        let (lml, alpha) = lml_from_factor(&chol, &y);
        Ok(Self {
            space,
            inputs,
            raw_targets,
            target_mean,
            target_std,
            hyperparams,
            noise,
            chol,
            alpha: DVector::from_vec(alpha),
            jitter,
            lml,
        })
    }

    pub fn space(&self) -> &ParameterSpace {
        &self.space
    }

    pub fn inputs(&self) -> &[[f64; DIMS]] {
        &self.inputs
    }

    pub fn raw_targets(&self) -> &[f64] {
        &self.raw_targets
    }

    pub fn target_mean(&self) -> f64 {
        self.target_mean
    }

    pub fn target_std(&self) -> f64 {
        self.target_std
    }

    pub fn hyperparams(&self) -> &KernelHyperparams {
        &self.hyperparams
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.lml
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Latent posterior (mean, std) at a unit-cube point, in raw target units.
    pub fn predict_unit(&self, u: &[f64; DIMS]) -> (f64, f64) {
        let n = self.inputs.len();
        let mut v: Vec<f64> = self.inputs.iter().map(|x| matern52(u, x, &self.hyperparams)).collect();
        let mean: f64 = (0..n).map(|i| v[i] * self.alpha[i]).sum();
        forward_solve(&self.chol, &mut v);
        let var = (self.hyperparams.signal_variance - v.iter().map(|a| a * a).sum::<f64>()).max(0.0);
        (mean * self.target_std + self.target_mean, var.sqrt() * self.target_std)
    }

    pub fn predict(&self, c: &ProcessCondition) -> (f64, f64) {
        self.predict_unit(&self.space.normalize_unchecked(c))
    }

    pub fn posterior_mean(&self, c: &ProcessCondition) -> f64 {
        let u = self.space.normalize_unchecked(c);
        let mean: f64 = self
            .inputs
            .iter()
            .zip(self.alpha.iter())
            .map(|(x, a)| matern52(&u, x, &self.hyperparams) * a)
            .sum();
        mean * self.target_std + self.target_mean
    }

    /// Posterior means and stds (original units) at many queries.
    pub fn posterior(&self, queries: &[ProcessCondition]) -> (Vec<f64>, Vec<f64>) {
        let pairs: Vec<(f64, f64)> = if queries.len() >= 1024 {
            queries.par_iter().map(|c| self.predict(c)).collect()
        } else {
            queries.iter().map(|c| self.predict(c)).collect()
        };
        pairs.into_iter().unzip()
    }

    /// Conditions the model on a noise-free pseudo-observation without
    /// touching hyperparameters or standardization (Kriging believer).
    pub fn with_fantasy(&self, c: &ProcessCondition, raw_target: f64) -> Result<Self> {
        let mut inputs = self.inputs.clone();
        inputs.push(self.space.normalize(c)?);
        let mut targets = self.raw_targets.clone();
        targets.push(raw_target);
        let mut noise = self.noise.clone();
        noise.push(0.0);
        Self::assemble(
            self.space.clone(),
            inputs,
            targets,
            self.target_mean,
            self.target_std,
            self.hyperparams.clone(),
            noise,
        )
    }
}

struct NegLml<'a> {
    inputs: &'a [[f64; DIMS]],
    y: &'a [f64],
    pinned_noise: Option<f64>,
    noise_lo: f64,
}

impl NegLml<'_> {
    fn decode(&self, theta: &[f64]) -> KernelHyperparams {
        let clamp_exp = |x: f64, (lo, hi): (f64, f64)| x.exp().clamp(lo, hi);
        let lengthscales = std::array::from_fn(|i| clamp_exp(theta[i], LENGTHSCALE_BOUNDS));
        let signal_variance = clamp_exp(theta[DIMS], SIGNAL_VARIANCE_BOUNDS);
        let noise_variance = match self.pinned_noise {
            Some(s) => s,
            None => clamp_exp(theta[DIMS + 1], (self.noise_lo, NOISE_VARIANCE_BOUNDS.1)),
        };
        KernelHyperparams::new(lengthscales, signal_variance, noise_variance)
    }

    fn encode(&self, hp: &KernelHyperparams) -> Vec<f64> {
        let mut theta: Vec<f64> = hp.lengthscales.iter().map(|l| l.ln()).collect();
        theta.push(hp.signal_variance.ln());
        if self.pinned_noise.is_none() {
            theta.push(hp.noise_variance.ln());
        }
        theta
    }

    fn lml(&self, hp: &KernelHyperparams) -> Option<f64> {
        log_marginal_likelihood(self.inputs, self.y, hp)
            .ok()
            .filter(|v| v.is_finite())
    }
}

impl CostFunction for NegLml<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Vec<f64>) -> std::result::Result<f64, ArgminError> {
        Ok(self.lml(&self.decode(theta)).map_or(1e300, |v| -v))
    }
}

/// Seeded starting points. Every start consumes the same number of draws so
/// the first `k` starts do not depend on the total count.
fn initial_points(restarts: usize, seed: u64, noise: f64) -> Vec<KernelHyperparams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (0.1f64.ln(), 2.0f64.ln());
    (0..restarts)
        .map(|i| {
            let lengthscales = std::array::from_fn(|_| rng.gen_range(lo..hi).exp());
            let sv_jitter: f64 = rng.gen_range(-0.5..0.5);
            let noise_jitter: f64 = rng.gen_range(-1.0..1.0);
            if i == 0 {
                KernelHyperparams::new(lengthscales, 1.0, noise)
            } else {
                KernelHyperparams::new(lengthscales, sv_jitter.exp(), noise * noise_jitter.exp())
            }
        })
        .collect()
}

/// Fits hyperparameters by maximizing the log marginal likelihood.
pub fn fit(
    space: &ParameterSpace,
    conditions: &[ProcessCondition],
    targets: &[f64],
    config: &FitConfig,
) -> Result<SurrogateModel> {
    if conditions.is_empty() || conditions.len() != targets.len() {
        return Err(Error::InsufficientData(format!(
            "need matching nonempty inputs/targets, got {} and {}",
            conditions.len(),
            targets.len()
        )));
    }
    if let Some(t) = targets.iter().find(|t| !t.is_finite()) {
        return Err(Error::Parameter(format!("non-finite target {t}")));
    }
    if config.restarts == 0 {
        return Err(Error::Parameter("at least one restart is required".into()));
    }
    let inputs = conditions
        .iter()
        .map(|c| space.normalize(c))
        .collect::<Result<Vec<_>>>()?;
    let (mean, std) = standardization(targets, config.standardize);
    let y: Vec<f64> = targets.iter().map(|t| (t - mean) / std).collect();

    let noise_lo = config
        .noise_floor
        .unwrap_or(0.0)
        .clamp(NOISE_VARIANCE_BOUNDS.0, NOISE_VARIANCE_BOUNDS.1);
    let problem = NegLml {
        inputs: &inputs,
        y: &y,
        pinned_noise: config.noise,
        noise_lo,
    };
    let init_noise = config.noise.unwrap_or(1e-2).max(noise_lo);

    let mut best: Option<(f64, KernelHyperparams)> = None;
    let consider = |hp: KernelHyperparams, best: &mut Option<(f64, KernelHyperparams)>| {
        if let Some(v) = problem.lml(&hp) {
            if best.as_ref().map_or(true, |(b, _)| v > *b) {
                *best = Some((v, hp));
            }
        }
    };

    for start in initial_points(config.restarts, config.seed, init_noise) {
        let start = problem.decode(&problem.encode(&start));
        consider(start.clone(), &mut best);
        if let Some(hp) = nelder_mead(&problem, &start, config.max_iters) {
            consider(hp, &mut best);
        }
    }

    let (_, hp) = best.ok_or_else(|| {
        Error::Fitting(format!(
            "all {} restarts failed to factorize the kernel matrix",
            config.restarts
        ))
    })?;
    SurrogateModel::assemble(
        space.clone(),
        inputs,
        targets.to_vec(),
        mean,
        std,
        hp.clone(),
        vec![hp.noise_variance; conditions.len()],
    )
}

fn nelder_mead(problem: &NegLml<'_>, start: &KernelHyperparams, max_iters: u64) -> Option<KernelHyperparams> {
    let x0 = problem.encode(start);
    let mut simplex = vec![x0.clone()];
    for i in 0..x0.len() {
        let mut x = x0.clone();
        x[i] += if i < DIMS { 0.7 } else { 1.0 };
        simplex.push(x);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-7).ok()?;
    let result = Executor::new(
        NegLml {
            inputs: problem.inputs,
            y: problem.y,
            pinned_noise: problem.pinned_noise,
            noise_lo: problem.noise_lo,
        },
        solver,
    )
    .configure(|state| state.max_iters(max_iters))
    .timer(false)
    .run()
    .ok()?;
    let theta = result.state().best_param.clone()?;
    Some(problem.decode(&theta))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp_unit() -> KernelHyperparams {
        KernelHyperparams::new([1.0; DIMS], 1.0, 0.0)
    }

    #[test]
    fn kernel_at_zero_distance_is_signal_variance() {
        let hp = KernelHyperparams::new([0.3, 1.0, 2.0, 0.5, 0.1], 2.5, 0.0);
        let u = [0.1, 0.2, 0.3, 0.4, 0.5];
        assert_eq!(matern52_ard(&u, &u, &hp).unwrap(), 2.5);
    }

    #[test]
    fn kernel_spot_value_at_unit_distance() {
        // (1 + √5 + 5/3) e^{-√5}
        let u = [0.0; DIMS];
        let v = [1.0, 0.0, 0.0, 0.0, 0.0];
        let k = matern52_ard(&u, &v, &hp_unit()).unwrap();
        assert!((k - 0.523_994_1).abs() < 1e-6, "{k}");
    }

    #[test]
    fn kernel_rejects_bad_lengthscales() {
        let hp = KernelHyperparams::new([1.0, 0.0, 1.0, 1.0, 1.0], 1.0, 0.0);
        assert!(matches!(
            matern52_ard(&[0.0; DIMS], &[0.0; DIMS], &hp),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn single_point_lml() {
        let hp = KernelHyperparams::new([1.0; DIMS], 0.5, 0.5);
        let lml = log_marginal_likelihood(&[[0.2; DIMS]], &[0.0], &hp).unwrap();
        assert!((lml + 0.918_938_533_204_672_7).abs() < 1e-12);
    }

    #[test]
    fn dominant_noise_drives_lml_down() {
        let inputs = [[0.1; DIMS], [0.5; DIMS], [0.9; DIMS]];
        let y = [0.3, -1.0, 0.7];
        let mut prev = f64::INFINITY;
        for noise in [1e0, 1e2, 1e4, 1e8] {
            let hp = KernelHyperparams::new([0.5; DIMS], 1.0, noise);
            let lml = log_marginal_likelihood(&inputs, &y, &hp).unwrap();
            assert!(lml < prev);
            prev = lml;
        }
        assert!(prev < -20.0);
    }

    #[test]
    fn jitter_rescues_duplicate_inputs() {
        let space = ParameterSpace::photonic_curing();
        let c = ProcessCondition([3.0, 5.0, 5.0, 5.0, 50.0]);
        let hp = KernelHyperparams::new([0.5; DIMS], 1.0, 0.0);
        let m = SurrogateModel::from_parts(&space, &[c, c], &[1.0, 1.0], hp, 0.0, 1.0).unwrap();
        assert!(m.jitter() > 0.0 && m.jitter() <= JITTER_MAX);
    }

    #[test]
    fn prior_reversion_far_from_data() {
        let space = ParameterSpace::photonic_curing();
        let data = [
            ProcessCondition([1.0, 1.0, 1.0, 1.0, 20.0]),
            ProcessCondition([1.2, 2.0, 1.0, 1.0, 20.0]),
        ];
        let hp = KernelHyperparams::new([0.02; DIMS], 1.3, 1e-4);
        let m = SurrogateModel::from_parts(&space, &data, &[2.0, 4.0], hp, 3.0, 0.5).unwrap();
        let (mean, std) = m.predict(&ProcessCondition([7.0, 20.0, 20.0, 30.0, 70.0]));
        assert!((mean - 3.0).abs() < 1e-12);
        assert!((std - 1.3f64.sqrt() * 0.5).abs() < 1e-12);
    }

    #[test]
    fn fantasy_collapses_std_and_keeps_mean() {
        let space = ParameterSpace::photonic_curing();
        let data: Vec<_> = (0..6)
            .map(|i| ProcessCondition([1.0 + i as f64, 2.0 + 3.0 * i as f64, 5.0, 10.0, 30.0 + 5.0 * i as f64]))
            .collect();
        let y: Vec<f64> = (0..6).map(|i| (i as f64).sin()).collect();
        let m = fit(&space, &data, &y, &FitConfig::default()).unwrap();
        let q = ProcessCondition([4.4, 7.0, 12.0, 3.0, 41.0]);
        let (mu, sd) = m.predict(&q);
        let f = m.with_fantasy(&q, mu).unwrap();
        let (mu2, sd2) = f.predict(&q);
        assert!((mu2 - mu).abs() < 1e-6);
        assert!(sd2 < 1e-3 * sd.max(1e-3), "{sd2} vs {sd}");
        assert_eq!(f.hyperparams(), m.hyperparams());
    }

    #[test]
    fn standardization_round_trips() {
        let y = [1.5, -2.0, 3.25, 0.0, 10.0];
        let (m, s) = standardization(&y, true);
        for v in y {
            assert!((((v - m) / s) * s + m - v).abs() < 1e-12);
        }
        assert_eq!(standardization(&[2.0, 2.0], true), (2.0, 1.0));
        assert_eq!(standardization(&y, false), (0.0, 1.0));
    }

    #[test]
    fn fit_rejects_empty_and_nonfinite() {
        let space = ParameterSpace::photonic_curing();
        assert!(matches!(
            fit(&space, &[], &[], &FitConfig::default()),
            Err(Error::InsufficientData(_))
        ));
        let c = [ProcessCondition([2.0, 2.0, 2.0, 2.0, 30.0])];
        assert!(fit(&space, &c, &[f64::NAN], &FitConfig::default()).is_err());
    }

    #[test]
    fn single_point_fit_is_allowed() {
        let space = ParameterSpace::photonic_curing();
        let c = ProcessCondition([2.0, 2.0, 2.0, 2.0, 30.0]);
        let m = fit(&space, &[c], &[4.2], &FitConfig::default()).unwrap();
        let (mu, _) = m.predict(&c);
        assert!((mu - 4.2).abs() < 1e-6);
    }
}
