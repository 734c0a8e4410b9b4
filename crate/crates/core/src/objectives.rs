//! Stochastic test objectives `F(x, y)` with their laws, closed-form
//! expectations and known minimizers.
//!
//! Catalog identifiers: `ackley-like`, `lls-k1`, `lls-k2`, `lls-k3` and
//! `utility-d<d>` (minimizers known for `d <= 3`).
//!
//! Objective values may be negative; the consensus weights are invariant
//! under constant shifts, so nothing requires positivity.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::approximation::{NodeSet, NodeWeights};
use crate::error::{Error, Result};
use crate::scalar::{fast_max, Scalar};

/// Law of the random vector `Y` with `k` i.i.d. components.
#[derive(Clone, Debug, PartialEq)]
pub enum RandomLaw<T> {
    /// Uniform on `[lo, hi]^k`.
    UniformBox { lo: T, hi: T, k: usize },
    /// Standard normal components.
    StdNormal { k: usize },
}

impl<T: Scalar> RandomLaw<T> {
    pub fn uniform(lo: T, hi: T, k: usize) -> Result<Self> {
        let law = RandomLaw::UniformBox { lo, hi, k };
        law.validate()?;
        Ok(law)
    }

    pub fn std_normal(k: usize) -> Result<Self> {
        let law = RandomLaw::StdNormal { k };
        law.validate()?;
        Ok(law)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k() == 0 {
            return Err(Error::Config("random dimension k must be at least 1".into()));
        }
        if let RandomLaw::UniformBox { lo, hi, .. } = *self {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Config(format!("uniform law needs lo < hi, got [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        match *self {
            RandomLaw::UniformBox { k, .. } | RandomLaw::StdNormal { k } => k,
        }
    }

    /// Fills `out` (length `k`) with one realization.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]) {
        match *self {
            RandomLaw::UniformBox { lo, hi, .. } => {
                for y in out.iter_mut() {
                    *y = T::uniform(rng, lo, hi);
                }
            }
            RandomLaw::StdNormal { .. } => {
                for y in out.iter_mut() {
                    *y = T::standard_normal(rng);
                }
            }
        }
    }

    /// Density of the law at `y`.
    pub fn density(&self, y: &[T]) -> T {
        match *self {
            RandomLaw::UniformBox { lo, hi, k } => {
                if y.iter().all(|&v| v >= lo && v <= hi) {
                    (hi - lo).recip().powi(k as i32)
                } else {
                    T::zero()
                }
            }
            RandomLaw::StdNormal { .. } => y.iter().map(|&v| std_normal_pdf(v)).fold(T::one(), |a, b| a * b),
        }
    }

    /// First two moments `(E[Y_l], E[Y_l^2])` of one component.
    pub fn component_moments(&self) -> (T, T) {
        match *self {
            RandomLaw::UniformBox { lo, hi, .. } => {
                let three = T::lit(3.0);
                ((lo + hi) / T::lit(2.0), (lo * lo + lo * hi + hi * hi) / three)
            }
            RandomLaw::StdNormal { .. } => (T::zero(), T::one()),
        }
    }
}

fn std_normal_pdf<T: Scalar>(z: T) -> T {
    let half = T::lit(0.5);
    (-half * z * z).exp() / (T::lit(2.0) * T::PI()).sqrt()
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// `phi(t) = max_j (v_j + s_j t)` with strictly increasing slopes and every
/// piece active on its own interval.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewiseLinear<T> {
    slopes: Vec<T>,
    intercepts: Vec<T>,
    breakpoints: Vec<T>,
}

impl<T: Scalar> PiecewiseLinear<T> {
    pub fn new(slopes: Vec<T>, intercepts: Vec<T>) -> Result<Self> {
        if slopes.is_empty() || slopes.len() != intercepts.len() {
            return Err(Error::Config("need as many slopes as intercepts, at least one".into()));
        }
        if slopes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("slopes must be strictly increasing".into()));
        }
        let breakpoints: Vec<T> = (0..slopes.len() - 1)
            .map(|j| (intercepts[j] - intercepts[j + 1]) / (slopes[j + 1] - slopes[j]))
            .collect();
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(
                "breakpoints must increase; some affine piece is never the maximum".into(),
            ));
        }
        Ok(Self {
            slopes,
            intercepts,
            breakpoints,
        })
    }

    pub fn slopes(&self) -> &[T] {
        &self.slopes
    }

    pub fn intercepts(&self) -> &[T] {
        &self.intercepts
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> usize {
        self.slopes.len()
    }

    #[inline]
    pub fn eval(&self, t: T) -> T {
        self.slopes
            .iter()
            .zip(&self.intercepts)
            .map(|(&s, &v)| v + s * t)
            .fold(T::neg_infinity(), fast_max)
    }
}

/// The utility function with slopes `(-2, -1, 1/2, 1)` and intercepts
/// `(0, 2, 0, -1)`; breakpoints `(-2, 4/3, 2)`.
pub fn make_phi<T: Scalar>() -> PiecewiseLinear<T> {
    PiecewiseLinear::new(
        vec![T::lit(-2.0), T::lit(-1.0), T::lit(0.5), T::one()],
        vec![T::zero(), T::lit(2.0), T::zero(), T::lit(-1.0)],
    )
    .expect("catalog utility is valid")
}

/// `E[phi(Z)]` for `Z ~ Normal(mu, s^2)`, integrating each affine piece over
/// the interval where it is active:
/// `v (P_b - P_a) + slope (mu (P_b - P_a) + s (pdf(a') - pdf(b')))` with
/// standardized endpoints `a'`, `b'`.
pub fn gaussian_piecewise_expectation<T: Scalar>(mu: T, s: T, phi: &PiecewiseLinear<T>) -> T {
    if s == T::zero() {
        return phi.eval(mu);
    }
    let (mu, s) = (mu.as_f64(), s.abs().as_f64());
    let pdf = |z: f64| std_normal_pdf(z);
    let mut lower = f64::NEG_INFINITY;
    let mut total = 0.0;
    for j in 0..phi.pieces() {
        let upper = phi.breakpoints.get(j).map_or(f64::INFINITY, |z| z.as_f64());
        let (za, zb) = ((lower - mu) / s, (upper - mu) / s);
        let mass = std_normal_cdf(zb) - std_normal_cdf(za);
        let partial_mean = mu * mass + s * (pdf(za) - pdf(zb));
        total += phi.intercepts[j].as_f64() * mass + phi.slopes[j].as_f64() * partial_mean;
        lower = upper;
    }
    T::lit(total)
}

type SampleFn<T> = dyn Fn(&[T], &[T]) -> T + Send + Sync;
type ExpectationFn<T> = dyn Fn(&[T]) -> T + Send + Sync;

/// The integrand families known to the crate, plus user closures.
#[derive(Clone)]
pub enum Integrand<T> {
    /// `e^{-0.2}(|x| + 3(cos 2x + sin 2x)) + y (atan|x| - pi/2)`.
    AckleyLike,
    /// `(y1 x)^2`.
    LlsK1,
    /// `(y1 x - y2)^2`.
    LlsK2,
    /// `y1 x^2 + y2 x + y3`.
    LlsK3,
    /// `phi(x . (a + y))`.
    Utility { a: Vec<T>, phi: PiecewiseLinear<T> },
    Custom {
        f: Arc<SampleFn<T>>,
        expectation: Option<Arc<ExpectationFn<T>>>,
    },
}

impl<T> fmt::Debug for Integrand<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Integrand::AckleyLike => "AckleyLike",
            Integrand::LlsK1 => "LlsK1",
            Integrand::LlsK2 => "LlsK2",
            Integrand::LlsK3 => "LlsK3",
            Integrand::Utility { .. } => "Utility",
            Integrand::Custom { .. } => "Custom",
        };
        f.write_str(name)
    }
}

/// `F(x, y)` together with the law of `y` and, when known, the closed-form
/// expectation and its minimizer.
#[derive(Clone, Debug)]
pub struct StochasticObjective<T> {
    name: String,
    dim: usize,
    law: RandomLaw<T>,
    integrand: Integrand<T>,
    minimizer: Option<Vec<T>>,
    min_value: Option<T>,
}

fn ackley_parts<T: Scalar>(x: T) -> (T, T) {
    let two = T::lit(2.0);
    let base = T::lit(-0.2).exp() * (x.abs() + T::lit(3.0) * ((two * x).cos() + (two * x).sin()));
    let tail = x.abs().atan() - T::FRAC_PI_2();
    (base, tail)
}

/// Separable integrands satisfy `F(x, y) = sum_m a_m(x) b_m(y)`; the sums
/// over samples or nodes then reduce to a few precomputed moments.
const MAX_TERMS: usize = 3;

impl<T: Scalar> StochasticObjective<T> {
    /// User-defined objective `F(x, y)` on `R^dim` with an optional closed
    /// form for `E[F(x, Y)]`.
    pub fn custom(
        name: impl Into<String>,
        dim: usize,
        law: RandomLaw<T>,
        f: impl Fn(&[T], &[T]) -> T + Send + Sync + 'static,
    ) -> Result<Self> {
        law.validate()?;
        if dim == 0 {
            return Err(Error::Config("search dimension must be at least 1".into()));
        }
        Ok(Self {
            name: name.into(),
            dim,
            law,
            integrand: Integrand::Custom {
                f: Arc::new(f),
                expectation: None,
            },
            minimizer: None,
            min_value: None,
        })
    }

    pub fn with_expectation(mut self, f: impl Fn(&[T]) -> T + Send + Sync + 'static) -> Self {
        if let Integrand::Custom { expectation, .. } = &mut self.integrand {
            *expectation = Some(Arc::new(f));
        }
        self
    }

    pub fn with_minimizer(mut self, x: Vec<T>) -> Self {
        self.min_value = self.expected(&x);
        self.minimizer = Some(x);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Search-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn law(&self) -> &RandomLaw<T> {
        &self.law
    }

    pub fn integrand(&self) -> &Integrand<T> {
        &self.integrand
    }

    pub fn minimizer(&self) -> Option<&[T]> {
        self.minimizer.as_deref()
    }

    pub fn min_value(&self) -> Option<T> {
        self.min_value
    }

    /// `F(x, y)`.
    pub fn eval(&self, x: &[T], y: &[T]) -> T {
        match &self.integrand {
            Integrand::AckleyLike => {
                let (base, tail) = ackley_parts(x[0]);
                base + y[0] * tail
            }
            Integrand::LlsK1 => (y[0] * x[0]).powi(2),
            Integrand::LlsK2 => (y[0] * x[0] - y[1]).powi(2),
            Integrand::LlsK3 => y[0] * x[0] * x[0] + y[1] * x[0] + y[2],
            Integrand::Utility { a, phi } => {
                let t = x
                    .iter()
                    .zip(a.iter().zip(y))
                    .map(|(&xl, (&al, &yl))| xl * (al + yl))
                    .sum::<T>();
                phi.eval(t)
            }
            Integrand::Custom { f, .. } => f(x, y),
        }
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(&self.integrand, Integrand::Custom { expectation: None, .. })
    }

    /// Closed-form `f(x) = E[F(x, Y)]`, when available.
    pub fn expected(&self, x: &[T]) -> Option<T> {
        let (m1, m2) = self.law.component_moments();
        let two = T::lit(2.0);
        let value = match &self.integrand {
            Integrand::AckleyLike => {
                let (base, tail) = ackley_parts(x[0]);
                base + m1 * tail
            }
            Integrand::LlsK1 => m2 * x[0] * x[0],
            Integrand::LlsK2 => m2 * x[0] * x[0] - two * m1 * m1 * x[0] + m2,
            Integrand::LlsK3 => m1 * (x[0] * x[0] + x[0] + T::one()),
            Integrand::Utility { a, phi } => {
                let mu = x.iter().zip(a).map(|(&xl, &al)| xl * al).sum::<T>();
                let s = x.iter().map(|&v| v * v).sum::<T>().sqrt();
                match self.law {
                    RandomLaw::StdNormal { .. } => gaussian_piecewise_expectation(mu, s, phi),
                    RandomLaw::UniformBox { .. } => return None,
                }
            }
            Integrand::Custom { expectation, .. } => return expectation.as_ref().map(|f| f(x)),
        };
        Some(value)
    }

    /// Number of separable terms, or zero if `F` does not factor.
    pub fn separable_terms(&self) -> usize {
        match self.integrand {
            Integrand::AckleyLike => 2,
            Integrand::LlsK1 => 1,
            Integrand::LlsK2 | Integrand::LlsK3 => 3,
            Integrand::Utility { .. } | Integrand::Custom { .. } => 0,
        }
    }

    /// `b_m(y)` for the separable form.
    pub(crate) fn y_terms(&self, y: &[T], out: &mut [T]) {
        match self.integrand {
            Integrand::AckleyLike => {
                out[0] = T::one();
                out[1] = y[0];
            }
            Integrand::LlsK1 => out[0] = y[0] * y[0],
            Integrand::LlsK2 => {
                out[0] = y[0] * y[0];
                out[1] = y[0] * y[1];
                out[2] = y[1] * y[1];
            }
            Integrand::LlsK3 => out[..3].copy_from_slice(&y[..3]),
            _ => unreachable!("not separable"),
        }
    }

    /// `sum_m a_m(x) moments_m`.
    pub(crate) fn contract_terms(&self, x: &[T], moments: &[T]) -> T {
        let x0 = x[0];
        match self.integrand {
            Integrand::AckleyLike => {
                let (base, tail) = ackley_parts(x0);
                base * moments[0] + tail * moments[1]
            }
            Integrand::LlsK1 => x0 * x0 * moments[0],
            Integrand::LlsK2 => x0 * x0 * moments[0] - T::lit(2.0) * x0 * moments[1] + moments[2],
            Integrand::LlsK3 => x0 * x0 * moments[0] + x0 * moments[1] + moments[2],
            _ => unreachable!("not separable"),
        }
    }

    /// Weighted moments `scale * sum_j w_j b(y_j)` of the separable form.
    pub(crate) fn moments(&self, nodes: &NodeSet<T>, weights: &NodeWeights<T>) -> Vec<T> {
        let m = self.separable_terms();
        debug_assert!(m > 0 && m <= MAX_TERMS);
        let mut acc = vec![T::zero(); m];
        let mut b = [T::zero(); MAX_TERMS];
        for (j, y) in nodes.rows().enumerate() {
            self.y_terms(y, &mut b);
            let w = weights.node_factor(j);
            for (a, &bm) in acc.iter_mut().zip(&b[..m]) {
                *a += w * bm;
            }
        }
        let scale = weights.scale();
        acc.into_iter().map(|a| a * scale).collect()
    }

    /// `scale * sum_j w_j F(x, y_j)` evaluated term by term.
    pub(crate) fn weighted_sum(&self, x: &[T], nodes: &NodeSet<T>, weights: &NodeWeights<T>) -> T {
        match &self.integrand {
            Integrand::Utility { a, phi } => utility_sum(x, a, phi, nodes, weights),
            _ => {
                let mut acc = T::zero();
                for (j, y) in nodes.rows().enumerate() {
                    acc += weights.node_factor(j) * self.eval(x, y);
                }
                acc * weights.scale()
            }
        }
    }
}

const LANES: usize = 8;

/// `sum_j w_j phi(x . a + x . y_j)` over column-major nodes.
fn utility_sum<T: Scalar>(
    x: &[T],
    a: &[T],
    phi: &PiecewiseLinear<T>,
    nodes: &NodeSet<T>,
    weights: &NodeWeights<T>,
) -> T {
    let xa: T = x.iter().zip(a).map(|(&p, &q)| p * q).sum();
    let density = match weights {
        NodeWeights::PerNode { density, .. } => density.as_slice(),
        NodeWeights::Uniform { .. } => &[],
    };
    let weighted = !density.is_empty();
    let sum = match (x.len(), phi.pieces(), weighted) {
        (1, 4, false) => utility_kernel::<T, 1, 4, false>(x, xa, phi, nodes, density),
        (1, 4, true) => utility_kernel::<T, 1, 4, true>(x, xa, phi, nodes, density),
        (2, 4, false) => utility_kernel::<T, 2, 4, false>(x, xa, phi, nodes, density),
        (2, 4, true) => utility_kernel::<T, 2, 4, true>(x, xa, phi, nodes, density),
        (3, 4, false) => utility_kernel::<T, 3, 4, false>(x, xa, phi, nodes, density),
        (3, 4, true) => utility_kernel::<T, 3, 4, true>(x, xa, phi, nodes, density),
        _ => (0..nodes.len())
            .map(|j| {
                let t = x.iter().enumerate().fold(xa, |acc, (l, &xl)| acc + xl * nodes.column(l)[j]);
                let w = if weighted { density[j] } else { T::one() };
                phi.eval(t) * w
            })
            .sum(),
    };
    sum * weights.scale()
}

/// Fixed-shape kernel: `D` coordinates, `P` pieces, `LANES` nodes per pass
/// held in registers.
#[inline(always)]
fn utility_kernel<T: Scalar, const D: usize, const P: usize, const W: bool>(
    x: &[T],
    xa: T,
    phi: &PiecewiseLinear<T>,
    nodes: &NodeSet<T>,
    density: &[T],
) -> T {
    let xs: [T; D] = std::array::from_fn(|l| x[l]);
    let cols: [&[T]; D] = std::array::from_fn(|l| nodes.column(l));
    let s: [T; P] = std::array::from_fn(|p| phi.slopes[p]);
    let v: [T; P] = std::array::from_fn(|p| phi.intercepts[p]);
    let piece_max = |t: T| {
        let mut best = v[0] + s[0] * t;
        for p in 1..P {
            best = fast_max(best, v[p] + s[p] * t);
        }
        best
    };
    let m = nodes.len();
    let full = m - m % LANES;
    let mut lanes = [T::zero(); LANES];
    for start in (0..full).step_by(LANES) {
        let mut t = [xa; LANES];
        for l in 0..D {
            let c: &[T; LANES] = cols[l][start..start + LANES].try_into().expect("full chunk");
            for q in 0..LANES {
                t[q] += xs[l] * c[q];
            }
        }
        let mut b = t.map(piece_max);
        if W {
            let w: &[T; LANES] = density[start..start + LANES].try_into().expect("full chunk");
            for q in 0..LANES {
                b[q] *= w[q];
            }
        }
        for q in 0..LANES {
            lanes[q] += b[q];
        }
    }
    for (j, acc) in (full..m).zip(lanes.iter_mut()) {
        let t = (0..D).fold(xa, |t, l| t + xs[l] * cols[l][j]);
        *acc += if W { piece_max(t) * density[j] } else { piece_max(t) };
    }
    lanes.iter().copied().sum()
}

/// Argmin of the Ackley-like expectation with `E[Y] = 1`, to double
/// precision.
const ACKLEY_ARGMIN: f64 = -1.085_608_492_074_437;

/// One-dimensional multimodal objective with `Y ~ U[0.1, 1.9]`; the random
/// term fades as `|x|` grows.
pub fn make_ackley_like<T: Scalar>() -> StochasticObjective<T> {
    let law = RandomLaw::UniformBox {
        lo: T::lit(0.1),
        hi: T::lit(1.9),
        k: 1,
    };
    let mut obj = StochasticObjective {
        name: "ackley-like".into(),
        dim: 1,
        law,
        integrand: Integrand::AckleyLike,
        minimizer: None,
        min_value: None,
    };
    obj = obj.with_minimizer(vec![T::lit(ACKLEY_ARGMIN)]);
    obj
}

/// Least-squares-type objectives in `x in R` with `k` independent
/// `U[0, 2]` components.
pub fn make_lls_family<T: Scalar>(k: usize) -> Result<StochasticObjective<T>> {
    let (integrand, argmin) = match k {
        1 => (Integrand::LlsK1, 0.0),
        2 => (Integrand::LlsK2, 0.75),
        3 => (Integrand::LlsK3, -0.5),
        _ => return Err(Error::Usage(format!("least-squares family has k in 1..=3, got {k}"))),
    };
    let obj = StochasticObjective {
        name: format!("lls-k{k}"),
        dim: 1,
        law: RandomLaw::UniformBox {
            lo: T::zero(),
            hi: T::lit(2.0),
            k,
        },
        integrand,
        minimizer: None,
        min_value: None,
    };
    Ok(obj.with_minimizer(vec![T::lit(argmin)]))
}

/// Tabulated minimizers of the utility problem for `d = 1, 2, 3`.
const UTILITY_ARGMIN: [&[f64]; 3] = [
    &[0.82058],
    &[0.35536, 0.71572],
    &[0.20578, 0.40601, 0.61735],
];

/// `F(x, y) = phi(x . (a + y))`, `a_l = l / d`, `y ~ N(0, I_d)`.
pub fn make_stochastic_utility<T: Scalar>(d: usize) -> Result<StochasticObjective<T>> {
    if d == 0 {
        return Err(Error::Usage("utility problem needs d >= 1".into()));
    }
    let a = (1..=d).map(|l| T::count(l) / T::count(d)).collect();
    let obj = StochasticObjective {
        name: format!("utility-d{d}"),
        dim: d,
        law: RandomLaw::StdNormal { k: d },
        integrand: Integrand::Utility { a, phi: make_phi() },
        minimizer: None,
        min_value: None,
    };
    Ok(match UTILITY_ARGMIN.get(d - 1) {
        Some(x) => obj.with_minimizer(x.iter().map(|&v| T::lit(v)).collect()),
        None => obj,
    })
}

/// Looks up a catalog objective by identifier.
pub fn catalog<T: Scalar>(id: &str) -> Result<StochasticObjective<T>> {
    match id {
        "ackley-like" => Ok(make_ackley_like()),
        "lls-k1" => make_lls_family(1),
        "lls-k2" => make_lls_family(2),
        "lls-k3" => make_lls_family(3),
        _ => match id.strip_prefix("utility-d").map(str::parse::<usize>) {
            Some(Ok(d)) if d >= 1 => make_stochastic_utility(d),
            _ => Err(Error::Usage(format!("unknown objective '{id}'"))),
        },
    }
}

pub const CATALOG_IDS: [&str; 7] = [
    "ackley-like",
    "lls-k1",
    "lls-k2",
    "lls-k3",
    "utility-d1",
    "utility-d2",
    "utility-d3",
];

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::{RunSeed, Stream};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn phi_shape() {
        let phi = make_phi::<f64>();
        assert_eq!(phi.breakpoints(), &[-2.0, 4.0 / 3.0, 2.0]);
        assert_eq!(phi.eval(0.0), 2.0);
        assert_eq!(phi.eval(-2.0), 4.0);
        for (j, &z) in phi.breakpoints().iter().enumerate() {
            let left = phi.intercepts()[j] + phi.slopes()[j] * z;
            let right = phi.intercepts()[j + 1] + phi.slopes()[j + 1] * z;
            assert!((left - right).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_piecewise_rejected() {
        assert!(PiecewiseLinear::new(vec![1.0, 0.0], vec![0.0, 0.0]).is_err());
        // middle piece never active
        assert!(PiecewiseLinear::new(vec![-1.0, 0.0, 1.0], vec![0.0, -5.0, 0.0]).is_err());
    }

    #[test]
    fn ackley_values() {
        let obj = make_ackley_like::<f64>();
        assert_relative_eq!(
            obj.expected(&[0.0]).unwrap(),
            3.0 * (-0.2f64).exp() - FRAC_PI_2,
            max_relative = 1e-14
        );
        assert_relative_eq!(obj.expected(&[0.0]).unwrap(), 0.885396, epsilon = 1e-6);
        assert_eq!(obj.law().component_moments().0, 1.0);
        // far field: the y-dependence is bounded by 1.8 (pi/2 - atan|x|)
        for x in [1e3, -1e3] {
            let gap = (obj.eval(&[x], &[0.1]) - obj.eval(&[x], &[1.9])).abs();
            assert!(gap < 0.0018 && gap <= 1.8 * (FRAC_PI_2 - x.abs().atan()) + 1e-12);
        }
    }

    #[test]
    fn ackley_minimizers() {
        // Without the random term the objective is minimized at -1.119; with
        // E[Y] = 1 the argmin moves to -1.0856.
        let obj = make_ackley_like::<f64>();
        let without_y = |x: f64| ackley_parts(x).0;
        let grid: Vec<f64> = (0..=600_000).map(|i| -3.0 + i as f64 * 1e-5).collect();
        let argmin = |f: &dyn Fn(f64) -> f64| {
            grid.iter().copied().min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap()
        };
        assert!((argmin(&without_y) + 1.119).abs() < 1e-3);
        let full = |x: f64| obj.expected(&[x]).unwrap();
        assert!((argmin(&full) - obj.minimizer().unwrap()[0]).abs() < 2e-5);
    }

    #[test]
    fn lls_closed_forms() {
        let k1 = make_lls_family::<f64>(1).unwrap();
        assert_relative_eq!(k1.expected(&[1.0]).unwrap(), 4.0 / 3.0, max_relative = 1e-15);
        let k2 = make_lls_family::<f64>(2).unwrap();
        let f2 = |x: f64| k2.expected(&[x]).unwrap();
        assert_relative_eq!(f2(0.5), 4.0 / 3.0 * 0.25 - 1.0 + 4.0 / 3.0, max_relative = 1e-14);
        assert_eq!(k2.minimizer().unwrap(), &[0.75]);
        assert!(f2(0.75) < f2(0.75 + 1e-4) && f2(0.75) < f2(0.75 - 1e-4));
        let k3 = make_lls_family::<f64>(3).unwrap();
        assert_relative_eq!(k3.expected(&[2.0]).unwrap(), 7.0, max_relative = 1e-15);
        assert_eq!(k3.min_value().unwrap(), 0.75);
        assert!(matches!(make_lls_family::<f64>(4), Err(Error::Usage(_))));
    }

    #[test]
    fn utility_table_values() {
        for (d, expect) in [(1, 1.3927), (2, 1.3407), (3, 1.2895)] {
            let obj = make_stochastic_utility::<f64>(d).unwrap();
            let v = obj.min_value().unwrap();
            assert!((v - expect).abs() < 5e-4, "d = {d}: {v}");
            assert_eq!(obj.law().k(), d);
        }
        let big = make_stochastic_utility::<f64>(5).unwrap();
        assert!(big.minimizer().is_none());
        assert!(big.expected(&[0.1; 5]).is_some());
    }

    #[test]
    fn gaussian_expectation_degenerate_and_quadrature() {
        let phi = make_phi::<f64>();
        assert_eq!(gaussian_piecewise_expectation(0.7, 0.0, &phi), phi.eval(0.7));
        // independent check against a fine trapezoid rule in z
        let (mu, s) = (0.3, 0.7);
        let n = 400_000;
        let h = 24.0 / n as f64;
        let quad: f64 = (0..=n)
            .map(|i| {
                let z = -12.0 + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * phi.eval(mu + s * z) * (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
            })
            .sum::<f64>()
            * h;
        assert!((gaussian_piecewise_expectation(mu, s, &phi) - quad).abs() < 1e-8);
        assert!((quad - 1.733_448_676_457_397_8).abs() < 1e-8);
    }

    #[test]
    fn catalog_lookup() {
        for id in CATALOG_IDS {
            let obj = catalog::<f64>(id).unwrap();
            assert_eq!(obj.name(), id);
            assert!(obj.has_closed_form() && obj.minimizer().is_some());
        }
        assert!(catalog::<f64>("rosenbrock").is_err());
        assert!(catalog::<f64>("utility-d0").is_err());
    }

    #[test]
    fn minimizers_beat_random_probes() {
        let mut rng = RunSeed::new(1, 0, 0).rng(Stream::Samples);
        for id in CATALOG_IDS {
            let obj = catalog::<f64>(id).unwrap();
            let xs = obj.minimizer().unwrap().to_vec();
            let best = obj.expected(&xs).unwrap();
            let mut x = vec![0.0; obj.dim()];
            for _ in 0..10_000 {
                for v in x.iter_mut() {
                    *v = rng.random_range(-3.0..3.0);
                }
                // tabulated minimizers carry five digits
                assert!(best <= obj.expected(&x).unwrap() + 1e-4, "{id} at {x:?}");
            }
        }
    }

    #[test]
    fn densities() {
        let u = RandomLaw::uniform(0.0, 2.0, 2).unwrap();
        assert_eq!(u.density(&[0.5, 1.5]), 0.25);
        assert_eq!(u.density(&[0.5, 2.5]), 0.0);
        let g = RandomLaw::<f64>::std_normal(1).unwrap();
        assert_relative_eq!(g.density(&[0.0]), 1.0 / (2.0 * PI).sqrt(), max_relative = 1e-15);
        assert!(RandomLaw::uniform(1.0, 1.0, 1).is_err());
        assert!(RandomLaw::<f64>::std_normal(0).is_err());
    }
}
