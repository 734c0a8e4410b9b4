//! Error functionals: one-dimensional Wasserstein distances between
//! ensembles, consensus RMSE, success rates, quantile bands and log-log rate
//! fits.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniformly weighted point cloud in `R^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalMeasure<T> {
    points: Vec<T>,
    d: usize,
}

impl<T: Scalar> EmpiricalMeasure<T> {
    pub fn new(points: Vec<T>, d: usize) -> Result<Self> {
        if d == 0 || points.is_empty() || !points.len().is_multiple_of(d) {
            return Err(Error::Usage("empirical measure needs at least one d-vector".into()));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("empirical measure has non-finite coordinates".into()));
        }
        Ok(Self { points, d })
    }

    pub fn from_ensemble(ensemble: &ParticleEnsemble<T>) -> Result<Self> {
        Self::new(ensemble.positions().to_vec(), ensemble.dim())
    }

    pub fn n(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    /// The points with the given indices.
    pub fn select(&self, indices: &[usize]) -> Self {
        let points = indices
            .iter()
            .flat_map(|&i| &self.points[i * self.d..(i + 1) * self.d])
            .copied()
            .collect();
        Self { points, d: self.d }
    }

    fn sorted_line(&self) -> Result<Vec<T>> {
        if self.d != 1 {
            return Err(Error::Usage(format!(
                "Wasserstein distances are implemented on the line only, got d = {}",
                self.d
            )));
        }
        let mut v = self.points.clone();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        Ok(v)
    }
}

fn check_p(p: u32) -> Result<()> {
    if p == 0 {
        return Err(Error::Usage("Wasserstein order p must be at least 1".into()));
    }
    Ok(())
}

/// `W_p` between equal-size measures on the line, by pairing order
/// statistics.
pub fn wasserstein_1d<T: Scalar>(a: &EmpiricalMeasure<T>, b: &EmpiricalMeasure<T>, p: u32) -> Result<T> {
    check_p(p)?;
    if a.n() != b.n() {
        return Err(Error::Usage(format!("ensemble sizes differ: {} vs {}", a.n(), b.n())));
    }
    let (sa, sb) = (a.sorted_line()?, b.sorted_line()?);
    let sum: T = sa.iter().zip(&sb).map(|(&x, &y)| (x - y).abs().powi(p as i32)).sum();
    Ok((sum / T::count(sa.len())).powf(T::count(p as usize).recip()))
}

/// Exact `W_p` between measures of any sizes on the line, integrating
/// `|F_a^{-1}(s) - F_b^{-1}(s)|^p` over `s` in `(0, 1)`.
pub fn wasserstein_1d_quantile<T: Scalar>(a: &EmpiricalMeasure<T>, b: &EmpiricalMeasure<T>, p: u32) -> Result<T> {
    check_p(p)?;
    let (sa, sb) = (a.sorted_line()?, b.sorted_line()?);
    let (na, nb) = (sa.len(), sb.len());
    let total = T::count(na * nb);
    let (mut i, mut j) = (0, 0);
    // positions along (0, 1) in units of 1 / (na nb)
    let mut at = 0usize;
    let mut sum = T::zero();
    while i < na && j < nb {
        let (end_a, end_b) = ((i + 1) * nb, (j + 1) * na);
        let next = end_a.min(end_b);
        sum += T::count(next - at) * (sa[i] - sb[j]).abs().powi(p as i32);
        at = next;
        if end_a == next {
            i += 1;
        }
        if end_b == next {
            j += 1;
        }
    }
    Ok((sum / total).powf(T::count(p as usize).recip()))
}

/// How ensembles of different sizes are compared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    /// A uniformly random subsample of the larger ensemble, of the smaller
    /// size, paired by order statistics.
    #[default]
    Subsample,
    /// Exact distance between the quantile functions.
    Quantile,
}

/// Brings two measures to a common size by subsampling the larger one
/// without replacement.
pub fn equal_size_coupling<T: Scalar, R: Rng + ?Sized>(
    a: &EmpiricalMeasure<T>,
    b: &EmpiricalMeasure<T>,
    rng: &mut R,
) -> (EmpiricalMeasure<T>, EmpiricalMeasure<T>) {
    let shrink = |m: &EmpiricalMeasure<T>, size: usize, rng: &mut R| {
        let mut idx = index::sample(rng, m.n(), size).into_vec();
        idx.sort_unstable();
        m.select(&idx)
    };
    match a.n().cmp(&b.n()) {
        std::cmp::Ordering::Equal => (a.clone(), b.clone()),
        std::cmp::Ordering::Less => (a.clone(), shrink(b, a.n(), rng)),
        std::cmp::Ordering::Greater => (shrink(a, b.n(), rng), b.clone()),
    }
}

/// `W_p` for each `p` in `orders`, sharing one coupling.
pub fn coupled_wasserstein<T: Scalar, R: Rng + ?Sized>(
    a: &EmpiricalMeasure<T>,
    b: &EmpiricalMeasure<T>,
    orders: &[u32],
    coupling: Coupling,
    rng: &mut R,
) -> Result<Vec<T>> {
    match coupling {
        Coupling::Subsample => {
            let (a, b) = equal_size_coupling(a, b, rng);
            orders.iter().map(|&p| wasserstein_1d(&a, &b, p)).collect()
        }
        Coupling::Quantile => orders.iter().map(|&p| wasserstein_1d_quantile(a, b, p)).collect(),
    }
}

/// Norms of `mean_u (x_hat_{j,u} - x_{j,u})` for each outer index `j`.
pub fn inner_mean_gaps<T: Scalar>(groups: &[Vec<(Vec<T>, Vec<T>)>]) -> Result<Vec<T>> {
    if groups.is_empty() || groups.iter().any(Vec::is_empty) {
        return Err(Error::Usage("consensus error needs non-empty replication lists".into()));
    }
    groups
        .iter()
        .map(|pairs| {
            let d = pairs[0].0.len();
            let mut mean = vec![T::zero(); d];
            for (approx, exact) in pairs {
                if approx.len() != d || exact.len() != d {
                    return Err(Error::Usage("consensus points differ in dimension".into()));
                }
                for ((m, &a), &e) in mean.iter_mut().zip(approx).zip(exact) {
                    *m += a - e;
                }
            }
            let inv = T::count(pairs.len()).recip();
            Ok(mean.iter().map(|&m| (m * inv).powi(2)).sum::<T>().sqrt())
        })
        .collect()
}

/// `sqrt(mean_j |mean_u (x_hat_{j,u} - x_{j,u})|^2)`.
pub fn consensus_rmse<T: Scalar>(groups: &[Vec<(Vec<T>, Vec<T>)>]) -> Result<T> {
    let gaps = inner_mean_gaps(groups)?;
    let n = T::count(gaps.len());
    Ok((gaps.iter().map(|&g| g * g).sum::<T>() / n).sqrt())
}

/// Open max-norm ball of radius `thr` around `x_star`.
#[derive(Clone, Debug, PartialEq)]
pub struct SuccessCriterion<T> {
    thr: T,
    x_star: Vec<T>,
}

impl<T: Scalar> SuccessCriterion<T> {
    pub fn new(thr: T, x_star: Vec<T>) -> Result<Self> {
        if !(thr > T::zero()) {
            return Err(Error::Config(format!("success threshold must be positive, got {thr}")));
        }
        Ok(Self { thr, x_star })
    }

    pub fn thr(&self) -> T {
        self.thr
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.x_star.len() && x.iter().zip(&self.x_star).all(|(&a, &b)| (a - b).abs() < self.thr)
    }
}

/// Fraction of candidates inside the success ball.
pub fn success_rate<T: Scalar>(candidates: &[Vec<T>], crit: &SuccessCriterion<T>) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::Usage("success rate of no candidates".into()));
    }
    let hits = candidates.iter().filter(|x| crit.contains(x)).count();
    Ok(hits as f64 / candidates.len() as f64)
}

/// Least-squares line through `(ln scale, ln error)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    /// Natural-log intercept: `error ~ e^intercept scale^slope`.
    pub intercept: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn loglog_slope(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.iter().any(|&(s, e)| !(s > 0.0 && e > 0.0 && s.is_finite() && e.is_finite())) {
        return Err(Error::Data("log-log fit needs positive finite scales and errors".into()));
    }
    let first = points.first().map(|p| p.0);
    if points.len() < 2 || points.iter().all(|p| Some(p.0) == first) {
        return Err(Error::Data("log-log fit needs at least two distinct scales".into()));
    }
    let n = points.len() as f64;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|&(s, e)| (s.ln(), e.ln())).unzip();
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        points: points.to_vec(),
    })
}

/// Quantile at level `q` with linear interpolation between order statistics
/// (rank `q (n - 1)`, zero based).
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Usage("quantile of an empty list".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Usage(format!("quantile level {q} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = q * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Ok(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

pub fn quantile_band(values: &[f64], lo: f64, hi: f64) -> Result<(f64, f64)> {
    Ok((quantile(values, lo)?, quantile(values, hi)?))
}
