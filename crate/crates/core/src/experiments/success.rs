//! Success rates of the SAA and quadrature pipelines.

use crate::approximation::{draw_saa_sample, grid_for_law, quadrature_objective, saa_objective, ExpectedObjective};
use crate::dynamics::{run_cbo, EnsembleRecord, Objective, RecordPolicy};
use crate::error::{Error, Result};
use crate::metrics::{success_rate, SuccessCriterion};
use crate::objectives::StochasticObjective;

use super::config::Pipeline;
use super::report::{ExperimentReport, ReportRow};
use super::{cbo_seed, int_root, par_map, sample_seed, ExperimentConfig};

/// For each objective, `N` and threshold, the fraction of `samples_cbo`
/// runs whose candidate lies in the open max-norm ball around the known
/// minimizer.
///
/// SAA candidates average the final consensus over `samples_y` realizations
/// of the sample (`M = N`); quadrature candidates are the final consensus of
/// one run with `floor(N^{1/k})` nodes per axis.
pub fn test4_success_rates(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let pipelines = match cfg.pipeline {
        Some(p) => vec![p],
        None => vec![Pipeline::Saa, Pipeline::Quadrature],
    };
    let mut report = ExperimentReport::default();
    for obj in cfg.objectives()? {
        let x_star = obj
            .minimizer()
            .ok_or_else(|| Error::Config(format!("'{}' has no known minimizer", obj.name())))?
            .to_vec();
        let criteria = cfg
            .thresholds
            .iter()
            .map(|&t| SuccessCriterion::new(t, x_star.clone()))
            .collect::<Result<Vec<_>>>()?;
        for &n in &cfg.n {
            for &pipeline in &pipelines {
                let candidates = candidates(cfg, &obj, pipeline, n)?;
                for crit in &criteria {
                    report.rows.push(ReportRow {
                        experiment: "test4".into(),
                        objective: obj.name().into(),
                        pipeline: pipeline.name().into(),
                        t: Some(cfg.t_final),
                        scale_name: "N".into(),
                        scale_value: n as f64,
                        p_or_thr: Some(crit.thr()),
                        error_mean: success_rate(&candidates, crit)?,
                        q15: None,
                        q85: None,
                        slope: None,
                    });
                }
            }
        }
    }
    Ok(report)
}

fn candidates(cfg: &ExperimentConfig, obj: &StochasticObjective<f64>, pipeline: Pipeline, n: usize) -> Result<Vec<Vec<f64>>> {
    let (params, init) = (cfg.params()?, cfg.init()?);
    let record = RecordPolicy {
        consensus: false,
        ensembles: EnsembleRecord::None,
    };
    let dim = obj.dim();
    let context = |u: usize, j: usize| format!("{} {}, N = {n}, u = {u}, j = {j}", obj.name(), pipeline);
    let final_point = |f: &dyn Objective<f64>, u: usize, j: usize| -> Result<Vec<f64>> {
        run_cbo(f, &params, &init, n, dim, cbo_seed(cfg, u, j), &record)
            .map(|t| t.final_consensus().to_vec())
            .map_err(|e| e.context(context(u, j)))
    };
    match pipeline {
        Pipeline::Saa => {
            let surrogates = par_map(cfg.samples_y, |j| {
                let sample = draw_saa_sample(obj.law(), n, sample_seed(cfg, j))?;
                saa_objective(obj, &sample, Default::default())
            })?;
            par_map(cfg.samples_cbo, |u| {
                let mut mean = vec![0.0; dim];
                for (j, f) in surrogates.iter().enumerate() {
                    for (m, x) in mean.iter_mut().zip(final_point(f, u, j)?) {
                        *m += x;
                    }
                }
                Ok(mean.into_iter().map(|m| m / cfg.samples_y as f64).collect())
            })
        }
        Pipeline::Quadrature => {
            let grid = grid_for_law(obj.law(), int_root(n, obj.law().k()), Some(cfg.trunc_half_width))?;
            let f = quadrature_objective(obj, &grid, Default::default())?;
            par_map(cfg.samples_cbo, |u| final_point(&f, u, 0))
        }
        Pipeline::ExactF => {
            let f = ExpectedObjective::new(obj)?;
            par_map(cfg.samples_cbo, |u| final_point(&f, u, 0))
        }
    }
}
