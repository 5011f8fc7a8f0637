//! Command-line front-end: config ingestion, solver dispatch, artifact
//! emission, and one-command reproductions of the reference examples.
//!
//! Exit codes: 0 success, 1 config error, 2 solver non-convergence.
//! The only environment variable honored is `WEAKHJ_THREADS` (parallelism
//! cap for the alpha sweep).

pub mod demos;
pub mod output;

use clap::{Parser, Subcommand, ValueEnum};
use output::Summary;
use std::path::PathBuf;
use std::time::Instant;
use weakhj_core::coupled::{detect_period, evolve_coupled, gauss_seidel, verify_iteration_bounds};
use weakhj_core::critical::{alpha_curve, default_eps_list, find_c0, vanishing_discount};
use weakhj_core::hamiltonian::{bounds_ledger, check_chain_condition, chi_from_matrix};
use weakhj_core::{ConfigFile, Error, SchemeParams};

#[derive(Debug, Parser)]
#[command(name = "weakhj", about = "Solvers for weakly coupled Hamilton-Jacobi systems")]
pub struct Cli {
    /// Path to a JSON system description.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory for artifacts.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Artifact format for field data.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Override the grid size from the config.
    #[arg(long, global = true)]
    pub grid: Option<usize>,

    /// Residual tolerance override.
    #[arg(long, global = true)]
    pub tol: Option<f64>,

    /// Seed for randomized diagnostics.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the stationary system by the alternating iteration.
    Solve,
    /// Evolve the system from the configured initial data.
    Evolve {
        /// Final time.
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Check the trajectory against this period (needs a run of at
        /// least twice the period).
        #[arg(long)]
        period: Option<f64>,
    },
    /// Vanishing-discount critical value for one c.
    Critical {
        #[arg(long, default_value_t = 0.0)]
        c: f64,
    },
    /// Alpha over a list of c values, with monotonicity/Lipschitz audit.
    SweepAlpha {
        /// Comma-separated increasing c values, at least three.
        #[arg(long, value_delimiter = ',')]
        c_list: Vec<f64>,
    },
    /// Fixed point c0 with alpha(c0) = c0, by bisection.
    FindC0 {
        #[arg(long, default_value_t = -1.0)]
        lo: f64,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
        #[arg(long, default_value_t = 1e-3)]
        tol_c: f64,
    },
    /// Report the structural constants and feasibility checks, no solve.
    Diagnose,
    /// Reproduce a packaged example.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DemoName {
    /// Analytic solution family of the critical-coupling pair.
    Exx,
    /// Time-periodic sin/cos system, one period of tracking.
    Periodic,
    /// Lower envelope of the strongly coupled trajectory is not a solution.
    NonmonotoneLowerLimit,
    /// Fitted slope of the alpha line for constant weights.
    AlphaLine,
    /// Chain condition on a three-component sample.
    Chain,
}

/// Parallelism cap from WEAKHJ_THREADS, defaulting to the machine size.
pub fn thread_cap() -> usize {
    std::env::var("WEAKHJ_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::NonConvergence { .. } | Error::Instability { .. } => 2,
        _ => 1,
    }
}

/// Runs the CLI; returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn scheme_params(cli: &Cli) -> SchemeParams {
    let mut p = SchemeParams::default();
    if let Some(tol) = cli.tol {
        p.tol = tol;
    }
    p
}

fn load_config(cli: &Cli) -> weakhj_core::Result<ConfigFile> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("this command needs --config PATH".into()))?;
    ConfigFile::from_path(path)
}

fn dispatch(cli: &Cli) -> weakhj_core::Result<()> {
    std::fs::create_dir_all(&cli.out)?;
    let start = Instant::now();
    let params = scheme_params(cli);
    let mut summary = Summary::new(cli);

    match &cli.command {
        Command::Solve => {
            let cfg = load_config(cli)?;
            summary.echo_config(&cfg);
            let spec = cfg.build_system(cli.grid)?;
            summary.record_ledger(&spec);
            let trace = gauss_seidel(&spec, None, &params)?;
            summary.set("sweeps", trace.sweeps.len().into());
            summary.set(
                "residuals",
                serde_json::to_value(trace.residuals.last().unwrap()).unwrap(),
            );
            if spec.m() == 2 {
                if let Ok(ledger) = bounds_ledger(&spec) {
                    let report = verify_iteration_bounds(&trace, &ledger, 10.0 * params.tol)?;
                    summary.set("bound_checks", serde_json::to_value(&report).unwrap());
                }
            }
            output::write_fields(cli, "solution", trace.final_fields())?;
            let ledger = bounds_ledger(&spec).ok();
            let mut buf = Vec::new();
            trace.write_json(ledger.as_ref(), &mut buf)?;
            std::fs::write(cli.out.join("trace.json"), buf)?;
            summary.finish(cli, start, "converged")
        }
        Command::Evolve { t, period } => {
            let cfg = load_config(cli)?;
            summary.echo_config(&cfg);
            let spec = cfg.build_system(cli.grid)?;
            summary.record_ledger(&spec);
            let phi = cfg.build_initial(&spec)?;
            let traj = evolve_coupled(&spec, &phi, *t, &params)?;
            if let Some(period) = period {
                let check = detect_period(&traj, *period, 0.05)?;
                summary.set("period_check", serde_json::to_value(&check).unwrap());
            }
            let mut buf = Vec::new();
            traj.write_csv(&mut buf)?;
            std::fs::write(cli.out.join("trajectory.csv"), buf)?;
            output::write_fields(cli, "terminal", &traj.last())?;
            summary.set("t_final", (*t).into());
            summary.finish(cli, start, "evolved")
        }
        Command::Critical { c } => {
            let cfg = load_config(cli)?;
            summary.echo_config(&cfg);
            let fam = cfg.build_family(cli.grid)?;
            let result = vanishing_discount(&fam, *c, &default_eps_list(), 0, &params)?;
            summary.set("critical", result.summary_json());
            let mut buf = Vec::new();
            result.write_eps_csv(&mut buf)?;
            std::fs::write(cli.out.join("eps_records.csv"), buf)?;
            output::write_fields(cli, "pair", &[result.pair.0.clone(), result.pair.1.clone()])?;
            summary.finish(cli, start, "converged")
        }
        Command::SweepAlpha { c_list } => {
            let cfg = load_config(cli)?;
            summary.echo_config(&cfg);
            let fam = cfg.build_family(cli.grid)?;
            let curve = alpha_curve(
                &fam,
                c_list,
                &default_eps_list(),
                0,
                &params,
                1e-2,
                thread_cap(),
            )?;
            let mut buf = Vec::new();
            curve.write_csv(&mut buf)?;
            std::fs::write(cli.out.join("alpha.csv"), buf)?;
            summary.set("alpha_curve", serde_json::to_value(&curve).unwrap());
            summary.finish(cli, start, "converged")
        }
        Command::FindC0 { lo, hi, tol_c } => {
            let cfg = load_config(cli)?;
            summary.echo_config(&cfg);
            let fam = cfg.build_family(cli.grid)?;
            let c0 = find_c0(&fam, (*lo, *hi), *tol_c, &default_eps_list(), 0, &params)?;
            // confirm by re-solving at (c0, c0) and reading the pair residual
            let confirm = vanishing_discount(&fam, c0, &default_eps_list(), 0, &params)?;
            let ce = fam.critical_system(c0, c0)?;
            let res = weakhj_core::coupled::coupled_residual(
                &ce,
                &[confirm.pair.0.clone(), confirm.pair.1.clone()],
                &weakhj_core::Viscosity::Auto,
            )?;
            summary.set("c0", c0.into());
            summary.set("confirm_residual", serde_json::to_value(&res).unwrap());
            summary.set("alpha_at_c0", confirm.alpha.into());
            summary.finish(cli, start, "converged")
        }
        Command::Diagnose => {
            let cfg = load_config(cli)?;
            summary.echo_config(&cfg);
            let spec = cfg.build_system(cli.grid)?;
            summary.record_ledger(&spec);
            let (b, warnings) = weakhj_core::coupling_constants(&spec)?;
            let chi = chi_from_matrix(&b);
            let chain = check_chain_condition(&spec)?;
            summary.set("b_matrix", serde_json::to_value(&b).unwrap());
            summary.set("chi", chi.into());
            summary.set("chain_condition", serde_json::to_value(&chain).unwrap());
            summary.set("warnings", serde_json::to_value(&warnings).unwrap());
            let superlinear: Vec<bool> = (0..spec.m())
                .map(|i| {
                    weakhj_core::hamiltonian::superlinearity_diagnostic(
                        spec.kinetic(i),
                        spec.grid().length(),
                    )
                    .0
                })
                .collect();
            summary.set("superlinear", serde_json::to_value(&superlinear).unwrap());
            if spec.m() == 2 {
                if let Ok(f) = weakhj_core::hamiltonian::case_feasibility(&spec) {
                    summary.set("case_feasibility", serde_json::to_value(&f).unwrap());
                }
            }
            if chi >= 1.0 {
                summary.set(
                    "note",
                    "chi >= 1: existence is not covered by the weak-coupling theory"
                        .to_string()
                        .into(),
                );
            }
            summary.finish(cli, start, "diagnosed")
        }
        Command::Demo { name } => demos::run_demo(cli, *name, &params, summary, start),
    }
}
