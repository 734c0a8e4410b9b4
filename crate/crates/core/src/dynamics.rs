//! The consensus-based optimization particle system.
//!
//! Particles follow the explicit Euler-Maruyama discretization
//!
//! ```text
//! X_{h+1} = X_h - lambda (X_h - x*_h) dt + sigma D_h sqrt(dt) Z_h
//! ```
//!
//! where `x*_h` is the Laplace-weighted consensus point of the ensemble at
//! step `h`, shared by every particle within the step, and `D_h` scales the
//! noise by the distance to consensus (Euclidean norm for isotropic
//! diffusion, per coordinate for anisotropic diffusion).
//!
//! A degenerate ensemble whose particles all coincide has the common point
//! as consensus; with `sigma > 0` it stays frozen because the diffusion
//! amplitude vanishes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed::{RunSeed, Stream};

/// Deterministic objective `x -> value` minimized by the particles.
pub trait Objective<T>: Sync {
    fn value(&self, x: &[T]) -> T;
}

impl<T, F> Objective<T> for F
where
    F: Fn(&[T]) -> T + Sync,
{
    #[inline]
    fn value(&self, x: &[T]) -> T {
        self(x)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffusionKind {
    /// Noise amplitude `|X - x*|` applied identically to every coordinate.
    #[default]
    #[serde(alias = "iso")]
    Isotropic,
    /// Noise amplitude `|X_l - x*_l|` per coordinate.
    #[serde(alias = "aniso")]
    Anisotropic,
}

/// Constants of the particle dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct CboParams<T> {
    pub lambda: T,
    pub sigma: T,
    pub alpha: T,
    pub dt: T,
    /// Number of time-grid points, including `t = 0`.
    pub n_it: usize,
    pub diffusion: DiffusionKind,
    /// Size of the random subset used for the consensus point, if any.
    pub batch_size: Option<usize>,
}

impl<T: Scalar> CboParams<T> {
    /// Builds parameters for the horizon `t_final`, with `n_it - 1` steps of
    /// size `dt`. The horizon must be an integer multiple of `dt` up to
    /// rounding.
    pub fn with_horizon(
        lambda: T,
        sigma: T,
        alpha: T,
        dt: T,
        t_final: T,
        diffusion: DiffusionKind,
    ) -> Result<Self> {
        if !(dt > T::zero()) || !t_final.is_finite() || t_final < T::zero() {
            return Err(Error::Config(format!(
                "need dt > 0 and a finite horizon, got dt = {dt}, T = {t_final}"
            )));
        }
        let steps = (t_final / dt).round();
        let reproduced = dt * steps;
        let tol = T::lit(4.0) * T::epsilon() * t_final.max(T::one());
        if (reproduced - t_final).abs() > tol {
            return Err(Error::Config(format!(
                "horizon {t_final} is not a multiple of dt = {dt}"
            )));
        }
        let steps = steps
            .to_usize()
            .ok_or_else(|| Error::Config("too many time steps".into()))?;
        let params = Self {
            lambda,
            sigma,
            alpha,
            dt,
            n_it: steps + 1,
            diffusion,
            batch_size: None,
        };
        params.validate()?;
        Ok(params)
    }

    /// `lambda = 1, sigma = 0.5, alpha = 40, dt = 0.1, T = 10`, isotropic.
    pub fn standard() -> Self {
        Self::with_horizon(
            T::one(),
            T::lit(0.5),
            T::lit(40.0),
            T::lit(0.1),
            T::lit(10.0),
            DiffusionKind::Isotropic,
        )
        .expect("standard constants are valid")
    }

    pub fn with_diffusion(mut self, diffusion: DiffusionKind) -> Self {
        self.diffusion = diffusion;
        self
    }

    pub fn with_batch_size(mut self, batch_size: Option<usize>) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn horizon(&self) -> T {
        self.dt * T::count(self.n_it - 1)
    }

    /// Time of grid node `h` (zero based).
    pub fn time(&self, h: usize) -> T {
        self.dt * T::count(h)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        positive("lambda", self.lambda)?;
        positive("alpha", self.alpha)?;
        positive("dt", self.dt)?;
        if !(self.sigma >= T::zero()) || !self.sigma.is_finite() {
            return Err(Error::Config(format!(
                "sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        if self.n_it < 1 {
            return Err(Error::Config("n_it must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }

    /// Drift/diffusion balance: `2 lambda > d sigma^2` (isotropic) or
    /// `2 lambda > sigma^2` (anisotropic).
    pub fn check_well_posed(&self, dim: usize) -> Result<()> {
        let two = T::lit(2.0);
        let noise = match self.diffusion {
            DiffusionKind::Isotropic => T::count(dim) * self.sigma * self.sigma,
            DiffusionKind::Anisotropic => self.sigma * self.sigma,
        };
        if two * self.lambda > noise {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "2 lambda = {} does not exceed {noise}",
                two * self.lambda
            )))
        }
    }
}

/// Uniform law on the box `[lo, hi]^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitDistribution<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> InitDistribution<T> {
    pub fn uniform(lo: T, hi: T) -> Result<Self> {
        let init = Self { lo, hi };
        init.validate()?;
        Ok(init)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lo < self.hi && self.lo.is_finite() && self.hi.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "initial box needs lo < hi, got [{}, {}]",
                self.lo, self.hi
            )))
        }
    }
}

impl<T: Scalar> Default for InitDistribution<T> {
    fn default() -> Self {
        Self {
            lo: T::lit(-3.0),
            hi: T::lit(3.0),
        }
    }
}

/// `n` particles in `dim` dimensions, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleEnsemble<T> {
    positions: Vec<T>,
    n: usize,
    dim: usize,
}

impl<T: Scalar> ParticleEnsemble<T> {
    pub fn new(positions: Vec<T>, n: usize, dim: usize) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::Usage("ensemble needs n >= 1 and dim >= 1".into()));
        }
        if positions.len() != n * dim {
            return Err(Error::Usage(format!(
                "expected {} coordinates for {n} x {dim}, got {}",
                n * dim,
                positions.len()
            )));
        }
        Ok(Self { positions, n, dim })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn positions(&self) -> &[T] {
        &self.positions
    }

    pub fn particle(&self, i: usize) -> &[T] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particles(&self) -> impl Iterator<Item = &[T]> {
        self.positions.chunks_exact(self.dim)
    }

    /// All values of coordinate `axis`.
    pub fn coordinate(&self, axis: usize) -> Vec<T> {
        self.particles().map(|p| p[axis]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().all(|v| v.is_finite())
    }

    /// Particles `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut positions = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            positions.extend_from_slice(self.particle(i));
        }
        Self {
            positions,
            n: indices.len(),
            dim: self.dim,
        }
    }

    /// Largest coordinate-wise extent of the ensemble.
    pub fn diameter(&self) -> T {
        (0..self.dim)
            .map(|l| {
                let (lo, hi) = self.particles().fold(
                    (T::infinity(), T::neg_infinity()),
                    |(lo, hi), p| (lo.min(p[l]), hi.max(p[l])),
                );
                hi - lo
            })
            .fold(T::zero(), T::max)
    }
}

/// Draws `n` i.i.d. particles from `init`, particle by particle.
pub fn sample_initial<T: Scalar>(
    init: &InitDistribution<T>,
    n: usize,
    dim: usize,
    seed: RunSeed,
) -> Result<ParticleEnsemble<T>> {
    init.validate()?;
    if n == 0 || dim == 0 {
        return Err(Error::Usage("need n >= 1 and dim >= 1".into()));
    }
    let mut rng = seed.rng(Stream::Init);
    let positions = (0..n * dim)
        .map(|_| T::uniform(&mut rng, init.lo, init.hi))
        .collect();
    ParticleEnsemble::new(positions, n, dim)
}

fn check_values<T: Scalar>(n: usize, values: &[T]) -> Result<()> {
    if n == 0 {
        return Err(Error::Usage("consensus of an empty ensemble".into()));
    }
    if values.len() != n {
        return Err(Error::Usage(format!(
            "{} objective values for {n} particles",
            values.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data(format!(
            "objective value {} at particle {i} is not finite",
            values[i]
        )));
    }
    Ok(())
}

/// Weighted mean of the particles `indices` (all if `None`) with weights
/// `exp(-alpha (v_i - min v))`. The largest weight is exactly one, so the
/// denominator never vanishes.
fn weighted_consensus<T: Scalar>(
    ensemble: &ParticleEnsemble<T>,
    values: &[T],
    alpha: T,
    indices: Option<&[usize]>,
) -> Vec<T> {
    let dim = ensemble.dim();
    let mut numer = vec![T::zero(); dim];
    let mut lo = vec![T::infinity(); dim];
    let mut hi = vec![T::neg_infinity(); dim];
    let mut denom = T::zero();

    let mut accumulate = |x: &[T], v: T, vmin: T| {
        let w = (-alpha * (v - vmin)).exp();
        denom += w;
        for l in 0..dim {
            numer[l] += w * x[l];
            lo[l] = lo[l].min(x[l]);
            hi[l] = hi[l].max(x[l]);
        }
    };
    match indices {
        None => {
            let vmin = values.iter().copied().fold(T::infinity(), T::min);
            for (x, &v) in ensemble.particles().zip(values) {
                accumulate(x, v, vmin);
            }
        }
        Some(idx) => {
            let vmin = idx.iter().map(|&i| values[i]).fold(T::infinity(), T::min);
            for &i in idx {
                accumulate(ensemble.particle(i), values[i], vmin);
            }
        }
    }
    // Clamping keeps the result inside the coordinate hull when rounding of
    // the quotient would push it an ulp outside.
    (0..dim)
        .map(|l| (numer[l] / denom).max(lo[l]).min(hi[l]))
        .collect()
}

/// Laplace-weighted average `sum X_i e^{-alpha v_i} / sum e^{-alpha v_i}`.
pub fn consensus_point<T: Scalar>(
    ensemble: &ParticleEnsemble<T>,
    values: &[T],
    alpha: T,
) -> Result<Vec<T>> {
    check_values(ensemble.n(), values)?;
    if !(alpha > T::zero()) {
        return Err(Error::Usage(format!("alpha must be positive, got {alpha}")));
    }
    Ok(weighted_consensus(ensemble, values, alpha, None))
}

/// Draws `batch_size` distinct indices out of `n`, sorted.
pub fn draw_batch<R: Rng + ?Sized>(rng: &mut R, n: usize, batch_size: usize) -> Result<Vec<usize>> {
    if batch_size == 0 || batch_size > n {
        return Err(Error::Usage(format!(
            "batch size {batch_size} must lie in 1..={n}"
        )));
    }
    let mut idx = rand::seq::index::sample(rng, n, batch_size).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Consensus point over a uniformly drawn subset of `batch_size` particles.
pub fn consensus_point_batch<T: Scalar>(
    ensemble: &ParticleEnsemble<T>,
    values: &[T],
    alpha: T,
    batch_size: usize,
    seed: RunSeed,
) -> Result<Vec<T>> {
    check_values(ensemble.n(), values)?;
    if !(alpha > T::zero()) {
        return Err(Error::Usage(format!("alpha must be positive, got {alpha}")));
    }
    let idx = draw_batch(&mut seed.rng(Stream::Batch), ensemble.n(), batch_size)?;
    Ok(weighted_consensus(ensemble, values, alpha, Some(&idx)))
}

/// One explicit Euler-Maruyama step, in place. `noise` holds `n x dim`
/// standard-normal draws in particle-major order; `step` only labels a
/// blow-up error.
pub fn em_step<T: Scalar>(
    ensemble: &mut ParticleEnsemble<T>,
    consensus: &[T],
    params: &CboParams<T>,
    noise: &[T],
    step: usize,
) -> Result<()> {
    let dim = ensemble.dim();
    if noise.len() != ensemble.positions.len() || consensus.len() != dim {
        return Err(Error::Usage(format!(
            "noise of length {} and consensus of length {} do not match a {} x {dim} ensemble",
            noise.len(),
            consensus.len(),
            ensemble.n()
        )));
    }
    let drift = params.lambda * params.dt;
    let amp = params.sigma * params.dt.sqrt();
    let chunks = ensemble
        .positions
        .chunks_exact_mut(dim)
        .zip(noise.chunks_exact(dim));
    for (i, (x, z)) in chunks.enumerate() {
        match params.diffusion {
            DiffusionKind::Isotropic => {
                // In 1D the norm is taken as an absolute value so that both
                // kinds agree bit for bit.
                let dist = if dim == 1 {
                    (x[0] - consensus[0]).abs()
                } else {
                    x.iter()
                        .zip(consensus)
                        .map(|(&a, &c)| (a - c) * (a - c))
                        .sum::<T>()
                        .sqrt()
                };
                for l in 0..dim {
                    let diff = x[l] - consensus[l];
                    x[l] = x[l] - drift * diff + amp * dist * z[l];
                }
            }
            DiffusionKind::Anisotropic => {
                for l in 0..dim {
                    let diff = x[l] - consensus[l];
                    x[l] = x[l] - drift * diff + amp * diff.abs() * z[l];
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Blowup { step, particle: i });
        }
    }
    Ok(())
}

/// Which ensembles a run keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnsembleRecord {
    None,
    /// Only the ensemble at `t = T`.
    Final,
    /// Every `stride`-th grid node plus the final one.
    Every(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecordPolicy {
    /// Keep the consensus point at every grid node.
    pub consensus: bool,
    pub ensembles: EnsembleRecord,
}

impl Default for RecordPolicy {
    fn default() -> Self {
        Self {
            consensus: true,
            ensembles: EnsembleRecord::Final,
        }
    }
}

impl RecordPolicy {
    pub fn every(stride: usize) -> Self {
        Self {
            consensus: true,
            ensembles: EnsembleRecord::Every(stride.max(1)),
        }
    }

    fn keeps(&self, node: usize, last: usize) -> bool {
        match self.ensembles {
            EnsembleRecord::None => false,
            EnsembleRecord::Final => node == last,
            EnsembleRecord::Every(stride) => node == last || node.is_multiple_of(stride),
        }
    }
}

/// Output of a full run.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    /// Time of each grid node.
    pub times: Vec<T>,
    /// Consensus at each node when recorded, otherwise only the final one.
    pub consensus: Vec<Vec<T>>,
    /// `(node, ensemble)` snapshots.
    pub snapshots: Vec<(usize, ParticleEnsemble<T>)>,
    final_consensus: Vec<T>,
}

impl<T: Scalar> Trajectory<T> {
    /// The candidate minimizer: consensus at `t = T`.
    pub fn final_consensus(&self) -> &[T] {
        &self.final_consensus
    }

    pub fn snapshot(&self, node: usize) -> Option<&ParticleEnsemble<T>> {
        self.snapshots
            .iter()
            .find(|(h, _)| *h == node)
            .map(|(_, e)| e)
    }

    pub fn final_ensemble(&self) -> Option<&ParticleEnsemble<T>> {
        self.snapshot(self.times.len() - 1)
    }
}

fn evaluate<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    ensemble: &ParticleEnsemble<T>,
    indices: Option<&[usize]>,
    values: &mut [T],
) -> Result<()> {
    let mut eval = |i: usize| {
        let x = ensemble.particle(i);
        let v = objective.value(x);
        if v.is_finite() {
            values[i] = v;
            Ok(())
        } else {
            Err(Error::NonFiniteObjective {
                x: x.iter().map(|c| c.as_f64()).collect(),
            })
        }
    };
    match indices {
        None => (0..ensemble.n()).try_for_each(&mut eval),
        Some(idx) => idx.iter().try_for_each(|&i| eval(i)),
    }
}

fn consensus_step<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    params: &CboParams<T>,
    ensemble: &ParticleEnsemble<T>,
    batch_rng: &mut ChaCha8Rng,
    values: &mut [T],
) -> Result<Vec<T>> {
    match params.batch_size {
        Some(r) if r < ensemble.n() => {
            let idx = draw_batch(batch_rng, ensemble.n(), r)?;
            evaluate(objective, ensemble, Some(&idx), values)?;
            Ok(weighted_consensus(ensemble, values, params.alpha, Some(&idx)))
        }
        Some(r) if r > ensemble.n() => Err(Error::Usage(format!(
            "batch size {r} exceeds {} particles",
            ensemble.n()
        ))),
        _ => {
            evaluate(objective, ensemble, None, values)?;
            Ok(weighted_consensus(ensemble, values, params.alpha, None))
        }
    }
}

/// Runs the particle system from an i.i.d. initial ensemble over the whole
/// time grid. The consensus is recomputed from the current positions at
/// every node before the update.
pub fn run_cbo<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    params: &CboParams<T>,
    init: &InitDistribution<T>,
    n: usize,
    dim: usize,
    seed: RunSeed,
    record: &RecordPolicy,
) -> Result<Trajectory<T>> {
    params.validate()?;
    let mut ensemble = sample_initial(init, n, dim, seed)?;
    let mut noise_rng = seed.rng(Stream::Noise);
    let mut batch_rng = seed.rng(Stream::Batch);
    let mut values = vec![T::zero(); n];
    let mut noise = vec![T::zero(); n * dim];

    let last = params.n_it - 1;
    let mut times = Vec::with_capacity(params.n_it);
    let mut consensus_log = Vec::new();
    let mut snapshots = Vec::new();

    let mut consensus = consensus_step(objective, params, &ensemble, &mut batch_rng, &mut values)?;
    for h in 0..=last {
        times.push(params.time(h));
        if record.keeps(h, last) {
            snapshots.push((h, ensemble.clone()));
        }
        if record.consensus {
            consensus_log.push(consensus.clone());
        }
        if h == last {
            break;
        }
        for z in noise.iter_mut() {
            *z = T::standard_normal(&mut noise_rng);
        }
        em_step(&mut ensemble, &consensus, params, &noise, h + 1)?;
        consensus = consensus_step(objective, params, &ensemble, &mut batch_rng, &mut values)?;
    }
    if !record.consensus {
        consensus_log.push(consensus.clone());
    }
    Ok(Trajectory {
        times,
        consensus: consensus_log,
        snapshots,
        final_consensus: consensus,
    })
}

/// Large-ensemble run standing in for the mean-field limit. Identical to
/// [`run_cbo`] with `n = n_ref`.
pub fn run_meanfield_surrogate<T: Scalar, O: Objective<T> + ?Sized>(
    objective: &O,
    params: &CboParams<T>,
    init: &InitDistribution<T>,
    n_ref: usize,
    dim: usize,
    seed: RunSeed,
    record: &RecordPolicy,
) -> Result<Trajectory<T>> {
    run_cbo(objective, params, init, n_ref, dim, seed, record)
}
