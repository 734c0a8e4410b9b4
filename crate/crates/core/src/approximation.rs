//! Deterministic surrogates of `f(x) = E[F(x, Y)]`.
//!
//! * SAA: `f_M(x) = (1/M) sum_j F(x, y_j)` over `M` i.i.d. draws.
//! * Quadrature: `f_Q(x) = (l/Q)^k sum_j F(x, y_j) theta(y_j)` over the
//!   `Q^k` composite-midpoint nodes of a box of side `l`.
//!
//! Grid nodes carry a single running index; the first random axis varies
//! fastest.

use crate::dynamics::Objective;
use crate::error::{Error, Result};
use crate::objectives::{RandomLaw, StochasticObjective};
use crate::scalar::{compensated_sum, Scalar};
use crate::seed::{RunSeed, Stream};

/// Largest node count a grid may have.
pub const MAX_GRID_NODES: usize = 100_000_000;

/// `m` points of `R^k`, stored both row by row and column by column.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeSet<T> {
    rows: Vec<T>,
    columns: Vec<Vec<T>>,
    k: usize,
}

impl<T: Scalar> NodeSet<T> {
    /// Builds from row-major coordinates.
    pub fn from_rows(rows: Vec<T>, k: usize) -> Result<Self> {
        if k == 0 || rows.is_empty() || !rows.len().is_multiple_of(k) {
            return Err(Error::Usage(format!(
                "{} coordinates do not form a non-empty set of {k}-vectors",
                rows.len()
            )));
        }
        let columns = (0..k).map(|l| rows.iter().skip(l).step_by(k).copied().collect()).collect();
        Ok(Self { rows, columns, k })
    }

    pub fn len(&self) -> usize {
        self.rows.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn row(&self, j: usize) -> &[T] {
        &self.rows[j * self.k..(j + 1) * self.k]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[T]> {
        self.rows.chunks_exact(self.k)
    }

    pub fn column(&self, l: usize) -> &[T] {
        &self.columns[l]
    }

    /// The first `m` points.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        if m == 0 || m > self.len() {
            return Err(Error::Usage(format!("prefix of {m} points out of {}", self.len())));
        }
        Self::from_rows(self.rows[..m * self.k].to_vec(), self.k)
    }
}

/// How node values enter the weighted sum: `scale * sum_j w_j F(x, y_j)`.
#[derive(Clone, Debug, PartialEq)]
pub enum NodeWeights<T> {
    /// `w_j = 1`.
    Uniform { scale: T },
    /// `w_j = density[j]`.
    PerNode { scale: T, density: Vec<T> },
}

impl<T: Scalar> NodeWeights<T> {
    #[inline]
    pub fn scale(&self) -> T {
        match *self {
            NodeWeights::Uniform { scale } | NodeWeights::PerNode { scale, .. } => scale,
        }
    }

    #[inline]
    pub fn node_factor(&self, j: usize) -> T {
        match self {
            NodeWeights::Uniform { .. } => T::one(),
            NodeWeights::PerNode { density, .. } => density[j],
        }
    }
}

/// `M` i.i.d. realizations of `Y`.
#[derive(Clone, Debug)]
pub struct SaaSample<T> {
    draws: NodeSet<T>,
    law: RandomLaw<T>,
    seed: RunSeed,
}

impl<T: Scalar> SaaSample<T> {
    pub fn m(&self) -> usize {
        self.draws.len()
    }

    pub fn draws(&self) -> &NodeSet<T> {
        &self.draws
    }

    pub fn law(&self) -> &RandomLaw<T> {
        &self.law
    }

    pub fn seed(&self) -> RunSeed {
        self.seed
    }

    /// The first `m` draws. Samples of different sizes from one seed are
    /// nested, so this equals `draw_saa_sample(law, m, seed)`.
    pub fn prefix(&self, m: usize) -> Result<Self> {
        Ok(Self {
            draws: self.draws.prefix(m)?,
            law: self.law.clone(),
            seed: self.seed,
        })
    }
}

/// Draws `m` realizations of `law` from the sample stream of `seed`.
pub fn draw_saa_sample<T: Scalar>(law: &RandomLaw<T>, m: usize, seed: RunSeed) -> Result<SaaSample<T>> {
    law.validate()?;
    if m == 0 {
        return Err(Error::Usage("SAA sample size must be at least 1".into()));
    }
    let k = law.k();
    let mut rng = seed.rng(Stream::Samples);
    let mut rows = vec![T::zero(); m * k];
    for row in rows.chunks_exact_mut(k) {
        law.sample_into(&mut rng, row);
    }
    Ok(SaaSample {
        draws: NodeSet::from_rows(rows, k)?,
        law: law.clone(),
        seed,
    })
}

/// Density represented by a quadrature grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GridDensity<T> {
    Uniform,
    /// Standard normal restricted to `[-half_width, half_width]^k`, not
    /// renormalized.
    TruncatedNormal { half_width: T },
}

/// Composite-midpoint nodes on `[lo, hi]^k` with the density at each node.
#[derive(Clone, Debug)]
pub struct QuadratureGrid<T> {
    nodes: NodeSet<T>,
    q: usize,
    lo: T,
    hi: T,
    cell_weight: T,
    density: Vec<T>,
    kind: GridDensity<T>,
}

impl<T: Scalar> QuadratureGrid<T> {
    pub fn nodes(&self) -> &NodeSet<T> {
        &self.nodes
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn k(&self) -> usize {
        self.nodes.k()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn bounds(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    /// `(l / Q)^k`.
    pub fn cell_weight(&self) -> T {
        self.cell_weight
    }

    pub fn density(&self) -> &[T] {
        &self.density
    }

    pub fn kind(&self) -> GridDensity<T> {
        self.kind
    }

    /// Total probability mass the rule assigns.
    pub fn mass(&self) -> T {
        self.cell_weight * compensated_sum(self.density.iter().copied())
    }

    /// `1 - mass`; positive when the box truncates the law.
    pub fn deficit(&self) -> T {
        T::one() - self.mass()
    }
}

/// The `Q` midpoints `lo + (l / 2Q)(2r - 1)`, `r = 1..=Q`.
pub fn midpoints_1d<T: Scalar>(lo: T, hi: T, q: usize) -> Vec<T> {
    let half_cell = (hi - lo) / T::count(2 * q);
    (1..=q).map(|r| lo + half_cell * T::count(2 * r - 1)).collect()
}

fn cartesian_nodes<T: Scalar>(lo: T, hi: T, q: usize, k: usize) -> Result<NodeSet<T>> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Config(format!("grid box needs lo < hi, got [{lo}, {hi}]")));
    }
    if q == 0 || k == 0 {
        return Err(Error::Config("grid needs q >= 1 and k >= 1".into()));
    }
    let count = u32::try_from(k)
        .ok()
        .and_then(|k| q.checked_pow(k))
        .filter(|&c| c <= MAX_GRID_NODES)
        .ok_or_else(|| Error::Resource(format!("{q}^{k} quadrature nodes exceed {MAX_GRID_NODES}")))?;
    let axis = midpoints_1d(lo, hi, q);
    let mut rows = Vec::with_capacity(count * k);
    let mut digits = vec![0usize; k];
    for _ in 0..count {
        rows.extend(digits.iter().map(|&r| axis[r]));
        for d in digits.iter_mut() {
            *d += 1;
            if *d < q {
                break;
            }
            *d = 0;
        }
    }
    NodeSet::from_rows(rows, k)
}

/// Midpoint grid on `[lo, hi]^k` for the uniform law on that box.
pub fn midpoint_nodes<T: Scalar>(lo: T, hi: T, q: usize, k: usize) -> Result<QuadratureGrid<T>> {
    let nodes = cartesian_nodes(lo, hi, q, k)?;
    let width = hi - lo;
    let density = vec![width.recip().powi(k as i32); nodes.len()];
    Ok(QuadratureGrid {
        nodes,
        q,
        lo,
        hi,
        cell_weight: (width / T::count(q)).powi(k as i32),
        density,
        kind: GridDensity::Uniform,
    })
}

/// Midpoint grid on `[-h, h]^k` weighted by the standard normal density.
pub fn truncated_normal_grid<T: Scalar>(k: usize, q: usize, half_width: T) -> Result<QuadratureGrid<T>> {
    if !(half_width > T::zero()) {
        return Err(Error::Config(format!("truncation half-width must be positive, got {half_width}")));
    }
    let nodes = cartesian_nodes(-half_width, half_width, q, k)?;
    let law = RandomLaw::StdNormal { k };
    let density = nodes.rows().map(|y| law.density(y)).collect();
    Ok(QuadratureGrid {
        nodes,
        q,
        lo: -half_width,
        hi: half_width,
        cell_weight: (T::lit(2.0) * half_width / T::count(q)).powi(k as i32),
        density,
        kind: GridDensity::TruncatedNormal { half_width },
    })
}

/// The grid matching `law`: its own box for uniform laws, `[-h, h]^k` for
/// normal laws when a truncation half-width is given.
pub fn grid_for_law<T: Scalar>(law: &RandomLaw<T>, q: usize, half_width: Option<T>) -> Result<QuadratureGrid<T>> {
    match *law {
        RandomLaw::UniformBox { lo, hi, k } => midpoint_nodes(lo, hi, q, k),
        RandomLaw::StdNormal { k } => match half_width {
            Some(h) => truncated_normal_grid(k, q, h),
            None => Err(Error::UnsupportedLaw(
                "normal law has no bounded box; give a truncation half-width".into(),
            )),
        },
    }
}

/// Whether to collapse separable integrands to precomputed moments.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ReductionMode {
    #[default]
    Auto,
    /// Always sum `F` node by node.
    Direct,
}

#[derive(Clone, Debug)]
enum Evaluation<T> {
    Moments(Vec<T>),
    Direct { nodes: NodeSet<T>, weights: NodeWeights<T> },
}

/// A deterministic objective obtained from a sample or a grid.
#[derive(Clone, Debug)]
pub struct ApproxObjective<T> {
    objective: StochasticObjective<T>,
    evaluation: Evaluation<T>,
}

impl<T: Scalar> ApproxObjective<T> {
    fn build(
        objective: &StochasticObjective<T>,
        nodes: &NodeSet<T>,
        weights: NodeWeights<T>,
        mode: ReductionMode,
    ) -> Self {
        let evaluation = if mode == ReductionMode::Auto && objective.separable_terms() > 0 {
            Evaluation::Moments(objective.moments(nodes, &weights))
        } else {
            Evaluation::Direct {
                nodes: nodes.clone(),
                weights,
            }
        };
        Self {
            objective: objective.clone(),
            evaluation,
        }
    }

    pub fn objective(&self) -> &StochasticObjective<T> {
        &self.objective
    }

    pub fn is_reduced(&self) -> bool {
        matches!(self.evaluation, Evaluation::Moments(_))
    }
}

impl<T: Scalar> Objective<T> for ApproxObjective<T> {
    fn value(&self, x: &[T]) -> T {
        match &self.evaluation {
            Evaluation::Moments(moments) => self.objective.contract_terms(x, moments),
            Evaluation::Direct { nodes, weights } => self.objective.weighted_sum(x, nodes, weights),
        }
    }
}

fn check_k<T: Scalar>(objective: &StochasticObjective<T>, k: usize) -> Result<()> {
    if objective.law().k() != k {
        return Err(Error::Usage(format!(
            "objective '{}' has random dimension {}, nodes have {k}",
            objective.name(),
            objective.law().k()
        )));
    }
    Ok(())
}

/// `x -> (1/M) sum_j F(x, y_j)`.
pub fn saa_objective<T: Scalar>(
    objective: &StochasticObjective<T>,
    sample: &SaaSample<T>,
    mode: ReductionMode,
) -> Result<ApproxObjective<T>> {
    check_k(objective, sample.draws.k())?;
    let weights = NodeWeights::Uniform {
        scale: T::count(sample.m()).recip(),
    };
    Ok(ApproxObjective::build(objective, &sample.draws, weights, mode))
}

/// `x -> (l/Q)^k sum_j F(x, y_j) theta(y_j)`.
pub fn quadrature_objective<T: Scalar>(
    objective: &StochasticObjective<T>,
    grid: &QuadratureGrid<T>,
    mode: ReductionMode,
) -> Result<ApproxObjective<T>> {
    check_k(objective, grid.k())?;
    match (objective.law(), grid.kind) {
        (RandomLaw::UniformBox { lo, hi, .. }, GridDensity::Uniform) => {
            if *lo != grid.lo || *hi != grid.hi {
                return Err(Error::Usage(format!(
                    "grid box [{}, {}] differs from the law's [{lo}, {hi}]",
                    grid.lo, grid.hi
                )));
            }
        }
        (RandomLaw::StdNormal { .. }, GridDensity::TruncatedNormal { .. }) => {}
        (RandomLaw::StdNormal { .. }, GridDensity::Uniform) => {
            return Err(Error::UnsupportedLaw(format!(
                "'{}' has a normal law; the quadrature needs a truncated-normal grid",
                objective.name()
            )))
        }
        (RandomLaw::UniformBox { .. }, GridDensity::TruncatedNormal { .. }) => {
            return Err(Error::Usage("truncated-normal grid given for a uniform law".into()))
        }
    }
    let weights = NodeWeights::PerNode {
        scale: grid.cell_weight,
        density: grid.density.clone(),
    };
    Ok(ApproxObjective::build(objective, &grid.nodes, weights, mode))
}

/// The closed-form expectation as an objective.
#[derive(Clone, Debug)]
pub struct ExpectedObjective<T> {
    objective: StochasticObjective<T>,
}

impl<T: Scalar> ExpectedObjective<T> {
    pub fn new(objective: &StochasticObjective<T>) -> Result<Self> {
        if !objective.has_closed_form() {
            return Err(Error::Usage(format!("'{}' has no closed-form expectation", objective.name())));
        }
        Ok(Self {
            objective: objective.clone(),
        })
    }
}

impl<T: Scalar> Objective<T> for ExpectedObjective<T> {
    fn value(&self, x: &[T]) -> T {
        self.objective.expected(x).expect("checked at construction")
    }
}
