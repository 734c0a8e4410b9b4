//! Drivers for the convergence-rate and success-rate studies.
//!
//! Every driver is a pure function of its [`ExperimentConfig`]: random
//! streams derive from the master seed and the replication indices, cells
//! run in parallel and results are gathered in index order.
//!
//! Seeds used by the drivers:
//!
//! * the `j`-th realization of `Y` comes from `(master, run 0, sample j)`;
//! * the `u`-th particle run paired with realization `j` uses
//!   `(master, run u, sample j)`; drivers without an outer `j` loop use
//!   `j = 0`, so runs on `f`, `f_M` and the quadrature surrogate share noise;
//! * large reference ensembles use the same indices with the reference role.

mod config;
mod rates;
mod report;
mod single;
mod success;

use rayon::prelude::*;

pub use config::{Experiment, ExperimentConfig, PartialConfig, Pipeline, Scale};
pub use rates::{test1_meanfield_rate, test1_saa_rate, test2_joint_rate, test3_dimension_sweep};
pub use report::{emit_csv, read_csv, write_csv, ExperimentReport, FitSummary, ReportRow, CSV_HEADER};
pub use single::single_run;
pub use success::test4_success_rates;

use crate::dynamics::{CboParams, Trajectory};
use crate::error::{Error, Result};
use crate::metrics::EmpiricalMeasure;
use crate::objectives::StochasticObjective;
use crate::seed::{Role, RunSeed};

/// Runs the experiment named in `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    match cfg.experiment {
        Experiment::Test1Saa => test1_saa_rate(cfg),
        Experiment::Test1Mf => test1_meanfield_rate(cfg),
        Experiment::Test2 => test2_joint_rate(cfg),
        Experiment::Test3 => test3_dimension_sweep(cfg),
        Experiment::Test4 => test4_success_rates(cfg),
        Experiment::Run => single_run(cfg),
    }
}

/// Largest `q` with `q^k <= n`.
pub fn int_root(n: usize, k: usize) -> usize {
    if k <= 1 {
        return n;
    }
    let fits = |q: usize| u32::try_from(k).ok().and_then(|k| q.checked_pow(k)).is_some_and(|p| p <= n);
    let mut q = (n as f64).powf(1.0 / k as f64).round() as usize + 1;
    while q > 0 && !fits(q) {
        q -= 1;
    }
    q
}

fn single(grid: &[usize], name: &str) -> Result<usize> {
    match grid {
        [v] => Ok(*v),
        _ => Err(Error::Config(format!(
            "this experiment takes a single value of '{name}', got {grid:?}"
        ))),
    }
}

fn single_objective(cfg: &ExperimentConfig) -> Result<StochasticObjective<f64>> {
    let mut objs = cfg.objectives()?;
    if objs.len() != 1 {
        return Err(Error::Config(format!(
            "{} takes one objective, got '{}'",
            cfg.experiment, cfg.objective
        )));
    }
    Ok(objs.remove(0))
}

fn index(i: usize) -> u64 {
    i as u64
}

fn sample_seed(cfg: &ExperimentConfig, j: usize) -> RunSeed {
    RunSeed::new(cfg.seed, 0, index(j))
}

fn cbo_seed(cfg: &ExperimentConfig, u: usize, j: usize) -> RunSeed {
    RunSeed::new(cfg.seed, index(u), index(j))
}

fn reference_seed(cfg: &ExperimentConfig, u: usize, j: usize) -> RunSeed {
    let role = if cfg.common_reference_noise {
        Role::Primary
    } else {
        Role::Reference
    };
    cbo_seed(cfg, u, j).with_role(role)
}

/// Grid nodes whose ensembles are recorded with stride `every`.
fn recorded_nodes(params: &CboParams<f64>, every: usize) -> Vec<usize> {
    let last = params.n_it - 1;
    (0..=last).filter(|h| h.is_multiple_of(every) || *h == last).collect()
}

fn snapshot(run: &Trajectory<f64>, node: usize) -> Result<EmpiricalMeasure<f64>> {
    let ensemble = run
        .snapshot(node)
        .ok_or_else(|| Error::Usage(format!("no ensemble recorded at node {node}")))?;
    EmpiricalMeasure::from_ensemble(ensemble)
}

/// `f(0), ..., f(count - 1)` evaluated in parallel, in index order.
fn par_map<T: Send>(count: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..count).into_par_iter().map(f).collect()
}
