//! Convergence-rate studies: SAA consensus error versus `M`, mean-field
//! Wasserstein gap versus `N`, and the joint particle and quadrature limit.

use crate::approximation::{draw_saa_sample, grid_for_law, quadrature_objective, saa_objective, ExpectedObjective};
use crate::dynamics::{run_cbo, EnsembleRecord, Objective, RecordPolicy, Trajectory};
use crate::error::Result;
use crate::metrics::{coupled_wasserstein, inner_mean_gaps, wasserstein_1d};
use crate::objectives::StochasticObjective;
use crate::seed::Stream;

use super::report::{Cell, ExperimentReport, Series};
use super::{
    cbo_seed, int_root, par_map, recorded_nodes, reference_seed, sample_seed, single, single_objective, snapshot,
    ExperimentConfig,
};

/// Consensus error `sqrt(mean_j |mean_u (x_hat_{j,u}(t) - x_u(t))|^2)` of the
/// SAA system against the system on the exact expectation, for each `M`.
///
/// The `u`-th runs on every `f_M` and on `f` share their noise; the
/// realizations of `Y` for different `M` are nested.
pub fn test1_saa_rate(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let obj = single_objective(cfg)?;
    let n = single(&cfg.n, "n")?;
    let (params, init) = (cfg.params()?, cfg.init()?);
    let exact = ExpectedObjective::new(&obj)?;
    let record = RecordPolicy {
        consensus: true,
        ensembles: EnsembleRecord::None,
    };
    let (ny, nu) = (cfg.samples_y, cfg.samples_cbo);
    let consensus = |f: &dyn Objective<f64>, u: usize| -> Result<Vec<Vec<f64>>> {
        Ok(run_cbo(f, &params, &init, n, obj.dim(), cbo_seed(cfg, u, 0), &record)?.consensus)
    };

    let exact_runs = par_map(nu, |u| consensus(&exact, u).map_err(|e| e.context(format!("exact f, u = {u}"))))?;
    let m_max = *cfg.m.last().expect("validated grid");
    let samples = par_map(ny, |j| draw_saa_sample(obj.law(), m_max, sample_seed(cfg, j)))?;
    let cells: Vec<(usize, usize)> = (0..cfg.m.len()).flat_map(|mi| (0..ny).map(move |j| (mi, j))).collect();
    let runs = par_map(cells.len(), |c| {
        let (mi, j) = cells[c];
        let m = cfg.m[mi];
        let f = saa_objective(&obj, &samples[j].prefix(m)?, Default::default())?;
        (0..nu)
            .map(|u| consensus(&f, u).map_err(|e| e.context(format!("M = {m}, j = {j}, u = {u}"))))
            .collect::<Result<Vec<_>>>()
    })?;

    let n_times = params.n_it;
    let table = (0..cfg.m.len())
        .map(|mi| {
            (0..n_times)
                .map(|h| {
                    let groups: Vec<Vec<(Vec<f64>, Vec<f64>)>> = (0..ny)
                        .map(|j| {
                            let run = &runs[mi * ny + j];
                            (0..nu).map(|u| (run[u][h].clone(), exact_runs[u][h].clone())).collect()
                        })
                        .collect();
                    let gaps = inner_mean_gaps(&groups)?;
                    let rmse = (gaps.iter().map(|g| g * g).sum::<f64>() / gaps.len() as f64).sqrt();
                    Ok(Cell { mean: rmse, spread: gaps })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = ExperimentReport::default();
    let scales: Vec<f64> = cfg.m.iter().map(|&m| m as f64).collect();
    let times: Vec<f64> = (0..n_times).map(|h| params.time(h)).collect();
    let series = Series {
        experiment: "test1-saa",
        objective: obj.name(),
        pipeline: "saa",
        scale_name: "M",
        p: None,
    };
    report.push_series(&series, &scales, &times, &table)?;
    Ok(report)
}

/// Wasserstein distances `W_1`, `W_2` between `N`-particle ensembles and an
/// `N_ref`-particle reference, both on the same `f_M`, averaged over the
/// realizations `j` and the runs `u`.
pub fn test1_meanfield_rate(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let obj = single_objective(cfg)?;
    let m = single(&cfg.m, "m")?;
    let (params, init) = (cfg.params()?, cfg.init()?);
    let record = RecordPolicy {
        consensus: false,
        ensembles: EnsembleRecord::Every(cfg.record_every),
    };
    let nodes = recorded_nodes(&params, cfg.record_every);
    let (ny, nu) = (cfg.samples_y, cfg.samples_cbo);
    let dim = obj.dim();

    // [cell][N][node][p]
    let cells = par_map(ny * nu, |c| {
        let (j, u) = (c / nu, c % nu);
        let context = |n: usize| format!("j = {j}, u = {u}, N = {n}");
        let sample = draw_saa_sample(obj.law(), m, sample_seed(cfg, j))?;
        let f = saa_objective(&obj, &sample, Default::default())?;
        let reference = run_cbo(&f, &params, &init, cfg.n_ref, dim, reference_seed(cfg, u, j), &record)
            .map_err(|e| e.context(context(cfg.n_ref)))?;
        let mut rng = cbo_seed(cfg, u, j).rng(Stream::Subsample);
        cfg.n
            .iter()
            .map(|&n| {
                let run = run_cbo(&f, &params, &init, n, dim, cbo_seed(cfg, u, j), &record).map_err(|e| e.context(context(n)))?;
                nodes
                    .iter()
                    .map(|&h| coupled_wasserstein(&snapshot(&run, h)?, &snapshot(&reference, h)?, &[1, 2], cfg.coupling, &mut rng))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let violations = cells
        .iter()
        .flatten()
        .flatten()
        .filter(|w| w[0] > w[1] * (1.0 + 1e-12))
        .count();
    let mut report = ExperimentReport::default();
    let scales: Vec<f64> = cfg.n.iter().map(|&n| n as f64).collect();
    let times: Vec<f64> = nodes.iter().map(|&h| params.time(h)).collect();
    for (pi, p) in [1.0, 2.0].into_iter().enumerate() {
        let table: Vec<Vec<Cell>> = (0..cfg.n.len())
            .map(|ni| {
                (0..nodes.len())
                    .map(|hi| Cell::mean_of(cells.iter().map(|cell| cell[ni][hi][pi]).collect()))
                    .collect()
            })
            .collect();
        let series = Series {
            experiment: "test1-mf",
            objective: obj.name(),
            pipeline: "saa",
            scale_name: "N",
            p: Some(p),
        };
        report.push_series(&series, &scales, &times, &table)?;
    }
    report.diagnostics.push(("test1-mf-w1-above-w2-cells".into(), violations as f64));
    Ok(report)
}

/// Per run `u`, distances at each recorded node: the joint error for every
/// scale and, optionally, its two parts.
struct JointRun {
    joint: Vec<Vec<f64>>,
    meanfield_part: Vec<Vec<f64>>,
    quadrature_part: Vec<f64>,
}

/// Particle counts `Q^k` for each requested `N`, without repeats.
fn quadrature_scales(grid: &[usize], k: usize) -> Vec<usize> {
    let mut scales: Vec<usize> = grid.iter().map(|&n| int_root(n, k).pow(k as u32)).collect();
    scales.dedup();
    scales
}

/// `W_1` between quadrature systems with `Q^k` particles and an `N_ref`
/// system on the exact expectation.
fn joint_limit(cfg: &ExperimentConfig, obj: &StochasticObjective<f64>, scales: &[usize], with_parts: bool) -> Result<(Vec<usize>, Vec<JointRun>)> {
    let (params, init) = (cfg.params()?, cfg.init()?);
    let record = RecordPolicy {
        consensus: false,
        ensembles: EnsembleRecord::Every(cfg.record_every),
    };
    let nodes = recorded_nodes(&params, cfg.record_every);
    let exact = ExpectedObjective::new(obj)?;
    let (k, dim) = (obj.law().k(), obj.dim());
    let surrogate = |nodes_total: usize| -> Result<_> {
        let grid = grid_for_law(obj.law(), int_root(nodes_total, k), None)?;
        quadrature_objective(obj, &grid, Default::default())
    };
    let surrogates = scales.iter().map(|&s| surrogate(s)).collect::<Result<Vec<_>>>()?;
    let reference_surrogate = if with_parts { Some(surrogate(cfg.n_ref)?) } else { None };

    let runs = par_map(cfg.samples_cbo, |u| {
        let context = |what: &str| format!("{what}, u = {u}");
        let seed = reference_seed(cfg, u, 0);
        let reference = run_cbo(&exact, &params, &init, cfg.n_ref, dim, seed, &record).map_err(|e| e.context(context("reference on f")))?;
        let reference_quad = match &reference_surrogate {
            Some(f) => Some(run_cbo(f, &params, &init, cfg.n_ref, dim, seed, &record).map_err(|e| e.context(context("reference on quadrature")))?),
            None => None,
        };
        let mut rng = cbo_seed(cfg, u, 0).rng(Stream::Subsample);
        let mut out = JointRun {
            joint: Vec::new(),
            meanfield_part: Vec::new(),
            quadrature_part: Vec::new(),
        };
        if let Some(rq) = &reference_quad {
            out.quadrature_part = nodes
                .iter()
                .map(|&h| wasserstein_1d(&snapshot(rq, h)?, &snapshot(&reference, h)?, 1))
                .collect::<Result<_>>()?;
        }
        for (&s, f) in scales.iter().zip(&surrogates) {
            let run: Trajectory<f64> =
                run_cbo(f, &params, &init, s, dim, cbo_seed(cfg, u, 0), &record).map_err(|e| e.context(context(&format!("N = {s}"))))?;
            let w = |other: &Trajectory<f64>, rng: &mut _| -> Result<Vec<f64>> {
                nodes
                    .iter()
                    .map(|&h| Ok(coupled_wasserstein(&snapshot(&run, h)?, &snapshot(other, h)?, &[1], cfg.coupling, rng)?[0]))
                    .collect()
            };
            out.joint.push(w(&reference, &mut rng)?);
            if let Some(rq) = &reference_quad {
                out.meanfield_part.push(w(rq, &mut rng)?);
            }
        }
        Ok(out)
    })?;
    Ok((nodes, runs))
}

fn table(runs: &[JointRun], n_scales: usize, n_nodes: usize, pick: impl Fn(&JointRun, usize, usize) -> f64) -> Vec<Vec<Cell>> {
    (0..n_scales)
        .map(|si| (0..n_nodes).map(|hi| Cell::mean_of(runs.iter().map(|r| pick(r, si, hi)).collect())).collect())
        .collect()
}

/// Joint limit with `Q = N` quadrature nodes (for `k = 1`) and `N`
/// particles, against an `N_ref` system on the exact expectation. Also
/// reports the two parts of the triangle inequality through the
/// `N_ref`-particle quadrature system.
pub fn test2_joint_rate(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let obj = single_objective(cfg)?;
    let params = cfg.params()?;
    let scales = quadrature_scales(&cfg.n, obj.law().k());
    let (nodes, runs) = joint_limit(cfg, &obj, &scales, true)?;
    let times: Vec<f64> = nodes.iter().map(|&h| params.time(h)).collect();
    let scale_values: Vec<f64> = scales.iter().map(|&s| s as f64).collect();
    let (ns, nh) = (scales.len(), nodes.len());

    let mut report = ExperimentReport::default();
    let parts: [(&str, Vec<Vec<Cell>>); 3] = [
        ("test2", table(&runs, ns, nh, |r, s, h| r.joint[s][h])),
        ("test2-meanfield-part", table(&runs, ns, nh, |r, s, h| r.meanfield_part[s][h])),
        ("test2-quadrature-part", table(&runs, ns, nh, |r, _, h| r.quadrature_part[h])),
    ];
    for (name, cells) in &parts {
        let series = Series {
            experiment: name,
            objective: obj.name(),
            pipeline: "quadrature",
            scale_name: "N",
            p: Some(1.0),
        };
        report.push_series(&series, &scale_values, &times, cells)?;
    }
    let finals: Vec<f64> = parts[2].1.iter().map(|row| row[nh - 1].mean).collect();
    let spread = finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - finals.iter().cloned().fold(f64::INFINITY, f64::min);
    let last = &parts[2].1[0][nh - 1];
    let (lo, hi) = crate::metrics::quantile_band(&last.spread, 0.15, 0.85)?;
    report.diagnostics.push(("test2-quadrature-part-variation".into(), spread));
    report.diagnostics.push(("test2-quadrature-part-band".into(), hi - lo));
    Ok(report)
}

/// The joint limit for each listed objective, with `Q = floor(N^{1/k})`
/// nodes per axis and `Q^k` particles.
pub fn test3_dimension_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let params = cfg.params()?;
    let mut report = ExperimentReport::default();
    for obj in cfg.objectives()? {
        let scales = quadrature_scales(&cfg.n, obj.law().k());
        let (nodes, runs) = joint_limit(cfg, &obj, &scales, false)?;
        let times: Vec<f64> = nodes.iter().map(|&h| params.time(h)).collect();
        let scale_values: Vec<f64> = scales.iter().map(|&s| s as f64).collect();
        let cells = table(&runs, scales.len(), nodes.len(), |r, s, h| r.joint[s][h]);
        let series = Series {
            experiment: "test3",
            objective: obj.name(),
            pipeline: "quadrature",
            scale_name: "Q^k",
            p: Some(1.0),
        };
        report.push_series(&series, &scale_values, &times, &cells)?;
    }
    Ok(report)
}
