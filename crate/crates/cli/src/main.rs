//! `stochcbo`: runs the rate and success-rate studies and writes CSV.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use stochcbo::experiments::{
    emit_csv, run_experiment, write_csv, Experiment, ExperimentConfig, ExperimentReport, PartialConfig, Pipeline,
};
use stochcbo::DiffusionKind;

#[derive(Parser, Debug)]
#[command(name = "stochcbo", version, about = "Consensus-based optimization for stochastic programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// SAA consensus error against the exact system, versus M.
    #[command(name = "test1-saa")]
    Test1Saa(Flags),
    /// Wasserstein gap to a large reference ensemble, versus N.
    #[command(name = "test1-mf")]
    Test1Mf(Flags),
    /// Joint particle and quadrature limit with Q = N.
    Test2(Flags),
    /// Joint limit for random dimensions k = 1, 2, 3.
    Test3(Flags),
    /// Success rates of the SAA and quadrature pipelines.
    Test4(Flags),
    /// A single particle run; prints the final consensus.
    Run(Flags),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PipelineArg {
    Saa,
    Quadrature,
    #[value(name = "exact-f", alias = "exact")]
    ExactF,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DiffusionArg {
    Iso,
    Aniso,
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// TOML file with kebab-case keys; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog id, or a comma-separated list.
    #[arg(long)]
    objective: Option<String>,
    #[arg(long, value_enum)]
    pipeline: Option<PipelineArg>,
    /// Particle counts, comma-separated.
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// SAA sample sizes, comma-separated.
    #[arg(long, value_delimiter = ',')]
    m: Option<Vec<usize>>,
    /// Quadrature nodes per random axis.
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<usize>>,
    #[arg(long)]
    n_ref: Option<usize>,
    #[arg(long)]
    samples_cbo: Option<usize>,
    #[arg(long)]
    samples_y: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_final: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_enum)]
    diffusion: Option<DiffusionArg>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    trunc_half_width: Option<f64>,
    /// Success thresholds, comma-separated.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Use the published loop sizes instead of the reduced defaults.
    #[arg(long)]
    paper_scale: bool,
    /// Fewer sample realizations for the success-rate study.
    #[arg(long)]
    quick: bool,
    /// CSV output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn overrides(&self) -> PartialConfig {
        PartialConfig {
            objective: self.objective.clone(),
            pipeline: self.pipeline.map(|p| match p {
                PipelineArg::Saa => Pipeline::Saa,
                PipelineArg::Quadrature => Pipeline::Quadrature,
                PipelineArg::ExactF => Pipeline::ExactF,
            }),
            lambda: self.lambda,
            sigma: self.sigma,
            alpha: self.alpha,
            dt: self.dt,
            t_final: self.t_final,
            diffusion: self.diffusion.map(|d| match d {
                DiffusionArg::Iso => DiffusionKind::Isotropic,
                DiffusionArg::Aniso => DiffusionKind::Anisotropic,
            }),
            batch_size: self.batch_size,
            n: self.n.clone(),
            m: self.m.clone(),
            q: self.q.clone(),
            n_ref: self.n_ref,
            samples_cbo: self.samples_cbo,
            samples_y: self.samples_y,
            thresholds: self.thresholds.clone(),
            seed: self.seed,
            trunc_half_width: self.trunc_half_width,
            paper_scale: self.paper_scale.then_some(true),
            quick: self.quick.then_some(true),
            out: self.out.clone(),
            ..Default::default()
        }
    }
}

fn print_summary(report: &ExperimentReport) {
    for f in &report.fits {
        let p = f.p.map(|p| format!(" p={p}")).unwrap_or_default();
        eprintln!(
            "{} {} {}{p}: slope {:.4}, intercept {:.4}",
            f.experiment, f.objective, f.pipeline, f.fit.slope, f.fit.intercept
        );
    }
    for (name, value) in &report.diagnostics {
        eprintln!("{name} = {value}");
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let (experiment, flags) = match &cli.command {
        Command::Test1Saa(f) => (Experiment::Test1Saa, f),
        Command::Test1Mf(f) => (Experiment::Test1Mf, f),
        Command::Test2(f) => (Experiment::Test2, f),
        Command::Test3(f) => (Experiment::Test3, f),
        Command::Test4(f) => (Experiment::Test4, f),
        Command::Run(f) => (Experiment::Run, f),
    };
    let file = flags.config.as_deref().map(PartialConfig::load).transpose()?;
    let cfg = ExperimentConfig::resolve(experiment, file.as_ref(), &flags.overrides())?;
    let report = run_experiment(&cfg).with_context(|| format!("{experiment} failed"))?;
    print_summary(&report);
    if experiment == Experiment::Run {
        let point: Vec<String> = report
            .diagnostics
            .iter()
            .filter(|(n, _)| n.starts_with("final-consensus-"))
            .map(|(_, v)| v.to_string())
            .collect();
        println!("{}", point.join(","));
        if let Some(path) = &cfg.out {
            emit_csv(&report, path)?;
        }
        return Ok(());
    }
    match &cfg.out {
        Some(path) => emit_csv(&report, path)?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write_csv(&report, &mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}
