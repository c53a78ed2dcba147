//! Command-line entry point: training, reference generation, evaluation,
//! reporting and self-checks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use apnn::harness::{
    evaluate_run, load_nets, report_table, run_selftest, run_training, ErrorReport, EvalPlan, HarnessError, NetModel,
    RunConfig, CONFIG_FILE,
};
use apnn::physics::{ProblemId, ProblemSpec};
use apnn::reference::{
    read_reference_csv, solve_diffusion_limit, solve_kinetic, solve_stationary, write_reference_csv, DiffusionConfig,
    KineticConfig,
};

#[derive(Parser)]
#[command(name = "apnn", version, about = "Neural and grid solvers for 1D gray radiative transfer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Kinetic,
    Diffusion,
}

#[derive(Subcommand)]
enum Command {
    /// Train the networks described by a JSON run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output_dir` of the configuration.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compute a reference solution and store it as CSV.
    Reference {
        #[arg(long)]
        problem: String,
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum, default_value = "kinetic")]
        solver: Solver,
        #[arg(long, default_value_t = 400)]
        n_x: usize,
        #[arg(long, default_value_t = 2000)]
        n_t: usize,
        #[arg(long, default_value_t = 16)]
        n_mu: usize,
        #[arg(long, default_value_t = 20)]
        save_every: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a trained run with a reference file.
    Evaluate {
        /// Directory written by `train`.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        /// Defaults to `<run>/eval`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Aggregate error reports into one table.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant checks.
    Selftest,
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Train { config, output } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(o) = output {
                cfg.output_dir = o;
            }
            let summary = run_training(&cfg)?;
            println!("final risk {:e}, outputs in {}", summary.final_risk, cfg.output_dir.display());
        }
        Command::Reference { problem, epsilon, solver, n_x, n_t, n_mu, save_every, out } => {
            let id = ProblemId::parse(&problem).map_err(|e| HarnessError::Config(e.to_string()))?;
            let spec = match epsilon {
                Some(e) => ProblemSpec::with_epsilon(id, e),
                None => ProblemSpec::catalog(id),
            };
            let sol = match solver {
                Solver::Kinetic => {
                    let cfg = KineticConfig { n_x, n_t, n_mu, save_every, ..Default::default() };
                    if spec.is_stationary() {
                        solve_stationary(&spec, &cfg)?
                    } else {
                        solve_kinetic(&spec, &cfg)?
                    }
                }
                Solver::Diffusion => {
                    solve_diffusion_limit(&spec, &DiffusionConfig { n_x, n_t, save_every, n_mu, ..Default::default() })?
                }
            };
            write_reference_csv(&sol, &out)?;
            println!("wrote {} ({} times x {} cells)", out.display(), sol.times.len(), sol.x.len());
        }
        Command::Evaluate { run, reference, out } => {
            let cfg = RunConfig::load(&run.join(CONFIG_FILE))?;
            let spec = cfg.spec();
            let nets = load_nets(&run, cfg.method, &spec)?;
            let reference = read_reference_csv(&reference)?;
            if reference.problem != spec.id {
                return Err(HarnessError::Config(format!(
                    "reference is for {}, run is for {}",
                    reference.problem.name(),
                    spec.id.name()
                )));
            }
            let model = NetModel { nets: &nets, method: cfg.method, spec: &spec, quad_points: cfg.train.quad_points };
            let ev = evaluate_run(&model, &spec, cfg.method, &reference, &EvalPlan::for_problem(spec.id))?;
            let dir = out.unwrap_or_else(|| run.join("eval"));
            ev.write(&dir)?;
            print!("{}", ev.report.to_csv());
        }
        Command::Report { reports, out } => {
            let parsed =
                reports.iter().map(|p| ErrorReport::from_csv(&std::fs::read_to_string(p)?)).collect::<Result<Vec<_>, _>>()?;
            let table = report_table(&parsed);
            match out {
                Some(p) => std::fs::write(p, &table)?,
                None => print!("{table}"),
            }
        }
        Command::Selftest => {
            let checks = run_selftest();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                return Err(HarnessError::SelfTest(failed));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
