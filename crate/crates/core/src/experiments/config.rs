//! Experiment configuration: built-in defaults, TOML files and overrides.
//!
//! Values are resolved in three layers. The defaults of the chosen
//! experiment and scale come first, then the configuration file, then
//! explicit overrides (command-line flags).

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dynamics::{CboParams, DiffusionKind, InitDistribution};
use crate::error::{Error, Result};
use crate::metrics::Coupling;
use crate::objectives::{catalog, StochasticObjective};

/// The studies the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Consensus error of the SAA system against the exact one, versus `M`.
    Test1Saa,
    /// Wasserstein gap to a large reference ensemble, versus `N`.
    Test1Mf,
    /// Joint particle and quadrature limit, `Q = N`.
    Test2,
    /// Joint limit for random dimensions `k = 1, 2, 3`.
    Test3,
    /// Success rates of both pipelines on the utility problem.
    Test4,
    /// One run of the particle system.
    Run,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Test1Saa,
        Experiment::Test1Mf,
        Experiment::Test2,
        Experiment::Test3,
        Experiment::Test4,
        Experiment::Run,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Test1Saa => "test1-saa",
            Experiment::Test1Mf => "test1-mf",
            Experiment::Test2 => "test2",
            Experiment::Test3 => "test3",
            Experiment::Test4 => "test4",
            Experiment::Run => "run",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown experiment '{s}'")))
    }
}

/// How the expectation is handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Saa,
    Quadrature,
    /// The closed-form expectation.
    #[serde(alias = "exact")]
    ExactF,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Saa => "saa",
            Pipeline::Quadrature => "quadrature",
            Pipeline::ExactF => "exact-f",
        }
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "saa" => Ok(Pipeline::Saa),
            "quadrature" => Ok(Pipeline::Quadrature),
            "exact-f" | "exact" => Ok(Pipeline::ExactF),
            _ => Err(Error::Usage(format!("unknown pipeline '{s}'"))),
        }
    }
}

/// Loop sizes: reduced defaults for a workstation, or the published ones.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

/// Every knob of an experiment. Grids are strictly increasing.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Catalog id, or a comma-separated list for the multi-objective
    /// studies.
    pub objective: String,
    /// `None` runs the experiment's own pipelines.
    pub pipeline: Option<Pipeline>,
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub dt: f64,
    pub t_final: f64,
    pub diffusion: DiffusionKind,
    pub batch_size: Option<usize>,
    pub init_lo: f64,
    pub init_hi: f64,
    /// Particle counts.
    pub n: Vec<usize>,
    /// SAA sample sizes.
    pub m: Vec<usize>,
    /// Nodes per random axis; empty means derived from `n`.
    pub q: Vec<usize>,
    pub n_ref: usize,
    pub samples_cbo: usize,
    pub samples_y: usize,
    pub thresholds: Vec<f64>,
    pub seed: u64,
    pub trunc_half_width: f64,
    /// Stride, in time nodes, between recorded ensembles.
    pub record_every: usize,
    pub coupling: Coupling,
    /// Drive reference ensembles with the same noise as the finite ones.
    pub common_reference_noise: bool,
    pub out: Option<PathBuf>,
}

const DESK_GRID: [usize; 5] = [100, 316, 1000, 3162, 10_000];

fn paper_grid() -> Vec<usize> {
    let mut g: Vec<usize> = (100..=10_000).step_by(500).collect();
    g.push(10_000);
    g
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment, scale: Scale, quick: bool) -> Self {
        let paper = scale == Scale::Paper;
        let grid = if paper { paper_grid() } else { DESK_GRID.to_vec() };
        let mut cfg = Self {
            experiment,
            objective: "ackley-like".into(),
            pipeline: None,
            lambda: 1.0,
            sigma: 0.5,
            alpha: 40.0,
            dt: 0.1,
            t_final: 10.0,
            diffusion: DiffusionKind::Isotropic,
            batch_size: None,
            init_lo: -3.0,
            init_hi: 3.0,
            n: grid.clone(),
            m: grid,
            q: Vec::new(),
            n_ref: if paper { 100_000 } else { 10_000 },
            samples_cbo: 10,
            samples_y: if paper { 200 } else { 50 },
            thresholds: vec![0.5, 0.25, 0.1],
            seed: 1,
            trunc_half_width: 4.0,
            record_every: 10,
            coupling: Coupling::Subsample,
            common_reference_noise: false,
            out: None,
        };
        match experiment {
            Experiment::Test1Saa => cfg.n = vec![5000],
            Experiment::Test1Mf => cfg.m = vec![100],
            Experiment::Test2 => {}
            Experiment::Test3 => {
                cfg.objective = "lls-k1,lls-k2,lls-k3".into();
                cfg.dt = 1.0;
                cfg.t_final = 7.0;
                cfg.n = if paper {
                    (50..=1000).step_by(50).collect()
                } else {
                    vec![64, 256, 1024]
                };
                cfg.n_ref = 1000;
                cfg.record_every = 1;
            }
            Experiment::Test4 => {
                cfg.objective = "utility-d1,utility-d2,utility-d3".into();
                cfg.diffusion = DiffusionKind::Anisotropic;
                cfg.n = if paper { vec![100, 500, 1000] } else { vec![100, 1000] };
                cfg.m = cfg.n.clone();
                cfg.samples_cbo = 100;
                cfg.samples_y = if quick { 25 } else { 100 };
            }
            Experiment::Run => {
                cfg.n = vec![1000];
                cfg.m = vec![1000];
            }
        }
        cfg
    }

    pub fn params(&self) -> Result<CboParams<f64>> {
        let params = CboParams::with_horizon(
            self.lambda,
            self.sigma,
            self.alpha,
            self.dt,
            self.t_final,
            self.diffusion,
        )?
        .with_batch_size(self.batch_size);
        params.validate()?;
        Ok(params)
    }

    pub fn init(&self) -> Result<InitDistribution<f64>> {
        InitDistribution::uniform(self.init_lo, self.init_hi)
    }

    /// The catalog objectives named by `objective`.
    pub fn objectives(&self) -> Result<Vec<StochasticObjective<f64>>> {
        self.objective
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(catalog)
            .collect::<Result<Vec<_>>>()
            .and_then(|v| {
                if v.is_empty() {
                    Err(Error::Config("no objective given".into()))
                } else {
                    Ok(v)
                }
            })
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        self.init()?;
        self.objectives()?;
        for (name, grid) in [("n", &self.n), ("m", &self.m)] {
            check_grid(name, grid, false)?;
        }
        check_grid("q", &self.q, true)?;
        if self.n_ref == 0 || self.samples_cbo == 0 || self.samples_y == 0 {
            return Err(Error::Config("n-ref, samples-cbo and samples-y must be at least 1".into()));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Config("thresholds must be positive".into()));
        }
        if !(self.trunc_half_width > 0.0) {
            return Err(Error::Config("truncation half-width must be positive".into()));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record-every must be at least 1".into()));
        }
        Ok(())
    }

    /// Applies every value set in `partial`.
    pub fn apply(&mut self, partial: &PartialConfig) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = &partial.$field { self.$field = v.clone(); })*
            };
        }
        take!(
            objective, lambda, sigma, alpha, dt, t_final, diffusion, init_lo, init_hi, n, m, q, n_ref,
            samples_cbo, samples_y, thresholds, seed, trunc_half_width, record_every, coupling,
            common_reference_noise
        );
        if partial.pipeline.is_some() {
            self.pipeline = partial.pipeline;
        }
        if partial.batch_size.is_some() {
            self.batch_size = partial.batch_size;
        }
        if partial.out.is_some() {
            self.out = partial.out.clone();
        }
    }

    /// Defaults, then `file`, then `overrides`, validated.
    pub fn resolve(experiment: Experiment, file: Option<&PartialConfig>, overrides: &PartialConfig) -> Result<Self> {
        let flag = |get: fn(&PartialConfig) -> Option<bool>| get(overrides).or_else(|| file.and_then(get)).unwrap_or(false);
        let scale = if flag(|p| p.paper_scale) { Scale::Paper } else { Scale::Desk };
        let mut cfg = Self::defaults(experiment, scale, flag(|p| p.quick));
        if let Some(file) = file {
            cfg.apply(file);
        }
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn check_grid(name: &str, grid: &[usize], may_be_empty: bool) -> Result<()> {
    if grid.is_empty() && !may_be_empty {
        return Err(Error::Config(format!("grid '{name}' is empty")));
    }
    if grid.contains(&0) || grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config(format!("grid '{name}' must be positive and strictly increasing")));
    }
    Ok(())
}

/// Optional overrides, as read from a TOML file or built from flags. Keys
/// are kebab-case versions of the field names.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PartialConfig {
    pub objective: Option<String>,
    pub pipeline: Option<Pipeline>,
    pub lambda: Option<f64>,
    pub sigma: Option<f64>,
    pub alpha: Option<f64>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub diffusion: Option<DiffusionKind>,
    pub batch_size: Option<usize>,
    pub init_lo: Option<f64>,
    pub init_hi: Option<f64>,
    pub n: Option<Vec<usize>>,
    pub m: Option<Vec<usize>>,
    pub q: Option<Vec<usize>>,
    pub n_ref: Option<usize>,
    pub samples_cbo: Option<usize>,
    pub samples_y: Option<usize>,
    pub thresholds: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub trunc_half_width: Option<f64>,
    pub record_every: Option<usize>,
    pub coupling: Option<Coupling>,
    pub common_reference_noise: Option<bool>,
    pub paper_scale: Option<bool>,
    pub quick: Option<bool>,
    pub out: Option<PathBuf>,
}

impl PartialConfig {
    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}
