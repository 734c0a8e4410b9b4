//! A single particle run on one pipeline.

use crate::approximation::{draw_saa_sample, grid_for_law, quadrature_objective, saa_objective, ExpectedObjective};
use crate::dynamics::{run_cbo, EnsembleRecord, Objective, RecordPolicy};
use crate::error::Result;

use super::config::Pipeline;
use super::report::{ExperimentReport, ReportRow};
use super::{cbo_seed, int_root, sample_seed, single, single_objective, ExperimentConfig};

/// Runs `N = n[0]` particles once on the chosen pipeline: the exact
/// expectation when available, otherwise SAA with `M = m[0]`. Quadrature
/// uses `q[0]` nodes per axis, or `floor(N^{1/k})`.
///
/// Rows hold the Euclidean distance of the consensus to the known
/// minimizer at every time node; the diagnostics hold the final consensus
/// as `final-consensus-<l>` and its objective value as `final-value`.
pub fn single_run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let obj = single_objective(cfg)?;
    let n = single(&cfg.n, "n")?;
    let (params, init) = (cfg.params()?, cfg.init()?);
    let pipeline = cfg.pipeline.unwrap_or(if obj.has_closed_form() {
        Pipeline::ExactF
    } else {
        Pipeline::Saa
    });
    let f: Box<dyn Objective<f64>> = match pipeline {
        Pipeline::ExactF => Box::new(ExpectedObjective::new(&obj)?),
        Pipeline::Saa => {
            let sample = draw_saa_sample(obj.law(), cfg.m[0], sample_seed(cfg, 0))?;
            Box::new(saa_objective(&obj, &sample, Default::default())?)
        }
        Pipeline::Quadrature => {
            let q = cfg.q.first().copied().unwrap_or_else(|| int_root(n, obj.law().k()));
            let grid = grid_for_law(obj.law(), q, Some(cfg.trunc_half_width))?;
            Box::new(quadrature_objective(&obj, &grid, Default::default())?)
        }
    };
    let record = RecordPolicy {
        consensus: true,
        ensembles: EnsembleRecord::None,
    };
    let run = run_cbo(f.as_ref(), &params, &init, n, obj.dim(), cbo_seed(cfg, 0, 0), &record)?;

    let mut report = ExperimentReport::default();
    if let Some(x_star) = obj.minimizer() {
        for (&t, x) in run.times.iter().zip(&run.consensus) {
            let dist = x.iter().zip(x_star).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            report.rows.push(ReportRow {
                experiment: "run".into(),
                objective: obj.name().into(),
                pipeline: pipeline.name().into(),
                t: Some(t),
                scale_name: "N".into(),
                scale_value: n as f64,
                p_or_thr: None,
                error_mean: dist,
                q15: None,
                q85: None,
                slope: None,
            });
        }
    }
    let fin = run.final_consensus();
    for (l, &x) in fin.iter().enumerate() {
        report.diagnostics.push((format!("final-consensus-{l}"), x));
    }
    report.diagnostics.push(("final-value".into(), f.value(fin)));
    Ok(report)
}
