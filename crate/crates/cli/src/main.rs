//! Command-line front end: load models, run estimators, emit report JSON and
//! plot-ready CSVs.
//!
//! Exit codes: 0 success, 2 bad arguments, 3 model-format errors,
//! 4 state space too large for exact enumeration, 1 other errors.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use isingmf::error::Error;
use isingmf::feapprox::{approx_free_energy, approx_free_energy_mrf, BudgetCaps, MrfMode};
use isingmf::model::{ErrorBudget, FreeEnergyReport, Model, ProductDistribution};
use isingmf::{exact, ferro, generate, io, meanfield};

mod report;

#[derive(Parser)]
#[command(
    name = "isingmf",
    version,
    about = "Mean-field free energy of Ising models and binary MRFs"
)]
struct Cli {
    /// Cap the worker thread pool.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact free energy by enumeration (n up to the cap).
    Exact {
        #[arg(long)]
        model: PathBuf,
        /// Enumeration cap on n.
        #[arg(long, default_value_t = exact::DEFAULT_EXACT_CAP)]
        cap: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean-field solvers: fixed-point iteration, certified concave solve,
    /// or multistart ascent.
    Meanfield {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Required for the randomized multistart method.
        #[arg(long)]
        seed: Option<u64>,
        /// Random restarts for the multistart method (default 16 + n/4).
        #[arg(long)]
        restarts: Option<usize>,
        /// Iteration cap for the fixed-point method.
        #[arg(long, default_value_t = 100_000)]
        max_steps: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regularity-based estimate with an error budget.
    Approx {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long)]
        seed: u64,
        /// Grid-size cap (total grid points).
        #[arg(long = "cap-grid", default_value_t = 1e6)]
        cap_grid: f64,
        /// Decomposition width cap.
        #[arg(long = "cap-width", default_value_t = 4)]
        cap_width: usize,
        /// Slice decomposition mode for MRFs.
        #[arg(long, value_enum, default_value_t = ModeArg::Narrow)]
        mode: ModeArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ferromagnetic optimizer: blow-up plus Glauber sampling.
    Ferro {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structural error bounds and spectral quantities.
    Bounds {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Threshold for the spectral threshold rank.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated model to --out.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
    /// Sweep beta or epsilon and write a CSV of estimates per point.
    Bench {
        #[arg(long)]
        model: PathBuf,
        /// Sweep spec: `beta:START,END,STEP` or `eps:START,END,STEP`.
        #[arg(long)]
        sweep: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = exact::DEFAULT_EXACT_CAP)]
        cap: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    FixedPoint,
    Concave,
    Multistart,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Narrow,
    WidthHeavy,
}

#[derive(Subcommand)]
enum GenerateKind {
    /// Complete graph with J_ij = beta/(2n) and uniform field.
    CurieWeiss(CurieWeissArgs),
    /// m random edges with uniform weight beta·n/m.
    UniformGraph(UniformGraphArgs),
    /// m random r-edges with uniform weight beta·n/m.
    UniformHypergraph(UniformHypergraphArgs),
    /// m disjoint copies of a base model.
    BlockCopies(BlockCopiesArgs),
    /// Symmetric i.i.d. Gaussian couplings.
    RandomGaussian(RandomGaussianArgs),
}

#[derive(Args)]
struct CurieWeissArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    h: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct UniformGraphArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct UniformHypergraphArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    r: usize,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BlockCopiesArgs {
    /// Model file of the base block.
    #[arg(long)]
    base: PathBuf,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RandomGaussianArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    sigma: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // Ignore failures from double initialization (tests call run twice).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.name());
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::TooLargeForExact { .. } => 4,
        Error::Io(_)
        | Error::Json(_)
        | Error::BadModelFile(_)
        | Error::AsymmetricCoupling { .. }
        | Error::NonzeroDiagonal { .. }
        | Error::NonFiniteEntry { .. }
        | Error::BadSubsetKey { .. } => 3,
        _ => 1,
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Exact { model, cap, out } => {
            let t0 = Instant::now();
            let m = io::load_model(&model)?;
            let f = exact::exact_free_energy_model(&m, cap)?;
            let rep = FreeEnergyReport {
                estimate: f,
                marginals: None,
                budget: ErrorBudget::default(),
                degraded: false,
                seed: 0,
                wall_time_s: t0.elapsed().as_secs_f64(),
            };
            println!("exact free energy F = {f:.9} (n = {})", m.n());
            report::write_report(&rep, out.as_deref())
        }
        Command::Meanfield {
            model,
            method,
            tol,
            seed,
            restarts,
            max_steps,
            out,
        } => {
            let t0 = Instant::now();
            let m = match io::load_model(&model)? {
                Model::Ising(m) => m,
                Model::Mrf(_) => {
                    return Err(Error::InvalidParams(
                        "meanfield solvers operate on Ising models".into(),
                    ))
                }
            };
            let (dist, value, note) = match method {
                Method::FixedPoint => {
                    let trace = meanfield::mf_iterate(
                        &m,
                        &ProductDistribution::zero(m.n()),
                        tol,
                        max_steps,
                    );
                    let x = trace.final_iterate().clone();
                    let value = m.mf_objective(&x);
                    let note = format!(
                        "fixed-point: {} steps, converged = {}",
                        trace.steps, trace.converged
                    );
                    (x, value, note)
                }
                Method::Concave => {
                    let (x, value) = meanfield::concave_solve(&m, tol)?;
                    let eta = meanfield::dobrushin_check(&m).eta;
                    (
                        x,
                        value,
                        format!("concave solve in the Dobrushin regime (eta = {eta:.4})"),
                    )
                }
                Method::Multistart => {
                    let seed = seed.ok_or_else(|| {
                        Error::InvalidParams("--seed is required for --method multistart".into())
                    })?;
                    let r = restarts.unwrap_or_else(|| meanfield::default_restarts(m.n()));
                    let (x, value) = meanfield::multistart_ascent(&m, r, seed, tol);
                    (x, value, format!("multistart ascent, {r} random restarts"))
                }
            };
            let rep = FreeEnergyReport {
                estimate: value,
                marginals: Some(dist),
                budget: ErrorBudget {
                    solver: tol,
                    ..Default::default()
                },
                degraded: false,
                seed: seed.unwrap_or(0),
                wall_time_s: t0.elapsed().as_secs_f64(),
            };
            println!("variational free energy F* = {value:.9} ({note})");
            report::write_report(&rep, out.as_deref())
        }
        Command::Approx {
            model,
            epsilon,
            seed,
            cap_grid,
            cap_width,
            mode,
            out,
        } => {
            let caps = BudgetCaps {
                max_width: cap_width,
                max_grid_points: cap_grid,
                ..BudgetCaps::default()
            };
            let rep = match io::load_model(&model)? {
                Model::Ising(m) => approx_free_energy(&m, epsilon, seed, &caps)?,
                Model::Mrf(m) => {
                    let mode = match mode {
                        ModeArg::Narrow => MrfMode::Narrow,
                        ModeArg::WidthHeavy => MrfMode::WidthHeavy,
                    };
                    approx_free_energy_mrf(&m, epsilon, seed, mode, &caps)?
                }
            };
            println!(
                "approximate free energy F^ = {:.9} (budget total {:.4}, degraded = {})",
                rep.estimate,
                rep.budget.total(),
                rep.degraded
            );
            report::write_report(&rep, out.as_deref())
        }
        Command::Ferro {
            model,
            epsilon,
            delta,
            seed,
            out,
        } => {
            let t0 = Instant::now();
            let m = match io::load_model(&model)? {
                Model::Ising(m) => m,
                Model::Mrf(_) => {
                    return Err(Error::InvalidParams(
                        "the ferromagnetic optimizer operates on Ising models".into(),
                    ))
                }
            };
            let (x, value) = ferro::ferro_optimize(&m, epsilon, delta, seed)?;
            let rep = FreeEnergyReport {
                estimate: value,
                marginals: Some(x),
                budget: ErrorBudget::default(),
                degraded: false,
                seed,
                wall_time_s: t0.elapsed().as_secs_f64(),
            };
            println!("ferromagnetic F* value = {value:.9}");
            report::write_report(&rep, out.as_deref())
        }
        Command::Bounds {
            model,
            epsilon,
            delta,
            out,
        } => {
            let m = io::load_model(&model)?;
            let doc = report::bounds_document(&m, epsilon, delta)?;
            println!("{}", report::bounds_summary(&doc));
            report::write_json(&doc, out.as_deref())
        }
        Command::Generate { kind } => {
            let (model, out) = match kind {
                GenerateKind::CurieWeiss(a) => (
                    Model::Ising(generate::curie_weiss(a.n, a.beta, a.h)?),
                    a.out,
                ),
                GenerateKind::UniformGraph(a) => (
                    Model::Ising(generate::uniform_graph(a.n, a.m, a.beta, a.seed)?),
                    a.out,
                ),
                GenerateKind::UniformHypergraph(a) => (
                    Model::Mrf(generate::uniform_hypergraph(a.n, a.m, a.r, a.beta, a.seed)?),
                    a.out,
                ),
                GenerateKind::BlockCopies(a) => {
                    let base = io::load_model(&a.base)?;
                    let model = match base {
                        Model::Ising(b) => Model::Ising(generate::block_copies(&b, a.m)?),
                        Model::Mrf(b) => Model::Mrf(generate::block_copies_mrf(&b, a.m)?),
                    };
                    (model, a.out)
                }
                GenerateKind::RandomGaussian(a) => (
                    Model::Ising(generate::random_gaussian(a.n, a.sigma, a.seed)?),
                    a.out,
                ),
            };
            io::save_model(&model, &out)?;
            println!("wrote model with n = {} to {}", model.n(), out.display());
            Ok(())
        }
        Command::Bench {
            model,
            sweep,
            out,
            seed,
            tol,
            cap,
        } => {
            let m = match io::load_model(&model)? {
                Model::Ising(m) => m,
                Model::Mrf(_) => {
                    return Err(Error::InvalidParams(
                        "bench sweeps operate on Ising models".into(),
                    ))
                }
            };
            report::run_bench(&m, &sweep, &out, seed, tol, cap)
        }
    }
}
