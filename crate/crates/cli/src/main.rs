//! `acdc-pf` command-line front end.
//!
//! Exit codes: 0 success, 1 input error, 2 non-convergence, singular
//! Jacobian, infeasible case or a failed verification.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use acdc_pf::io::{load_case, load_solution, save_case, save_solution};
use acdc_pf::oracle::{fixed_point_solve, OracleOptions};
use acdc_pf::solver::{InitialGuess, PowerFlow, Solution, SolveError, SolverOptions};
use acdc_pf::synthetic::radial_hybrid;
use acdc_pf::NetworkCase;
use anyhow::Context;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "acdc-pf", version, about = "Newton-Raphson power flow for hybrid AC/DC networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a case file.
    Solve(SolveArgs),
    /// Compare the Newton solution with the fixed-point reference solver.
    Verify(VerifyArgs),
    /// Time the stages of the Newton iteration.
    Bench(BenchArgs),
    /// Write a synthetic radial hybrid case.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct SolveArgs {
    case: PathBuf,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    /// Start from the flat profile (default).
    #[arg(long, conflicts_with = "init")]
    flat_start: bool,
    /// Start from the state stored in a solution file.
    #[arg(long, value_name = "SOLUTION")]
    init: Option<PathBuf>,
    /// Write the solution as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print one line per iteration.
    #[arg(long)]
    trace: bool,
    /// Write the residual history as CSV.
    #[arg(long, value_name = "CSV")]
    history: Option<PathBuf>,
    /// Write the bus voltage table as CSV.
    #[arg(long, value_name = "CSV")]
    voltages: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    case: PathBuf,
    /// Largest accepted voltage difference in p.u.
    #[arg(long, default_value_t = 1e-8)]
    threshold: f64,
    #[arg(long, default_value_t = 200_000)]
    max_sweeps: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(required = true)]
    cases: Vec<PathBuf>,
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    buses: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Input(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    fn input(e: impl Into<anyhow::Error>) -> Self {
        Failure::Input(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("ACDC_PF_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Generate(a) => cmd_generate(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn read_case(path: &Path) -> Result<NetworkCase, Failure> {
    load_case(path).map_err(Failure::input)
}

fn solver_failure(e: SolveError) -> Failure {
    match e {
        SolveError::InvalidCase(_) | SolveError::InvalidOptions(_) | SolveError::InitialState { .. } => Failure::input(e),
        SolveError::Singular { .. } | SolveError::Diverged { .. } => Failure::Numerical(e.into()),
    }
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Failure> {
    let case = read_case(&args.case)?;
    let pf = PowerFlow::new(&case).map_err(solver_failure)?;
    let mut options = SolverOptions::default().with_tolerance(args.tol).with_max_iterations(args.max_iter);
    if let Some(path) = &args.init {
        let start = load_solution(path).map_err(Failure::input)?;
        options = options.with_init(InitialGuess::Provided(start.state_vector()));
    }
    let solution = pf.solve(&options).map_err(solver_failure)?;

    let mut out = std::io::stdout().lock();
    print_solution(&mut out, &solution, pf.n_states(), args.trace).map_err(Failure::input)?;
    eprintln!("time: {:.3} ms", solution.timings.total.as_secs_f64() * 1e3);

    if let Some(path) = &args.out {
        save_solution(&solution, path).map_err(Failure::input)?;
    }
    if let Some(path) = &args.history {
        write_history(path, &solution).map_err(Failure::input)?;
    }
    if let Some(path) = &args.voltages {
        write_voltages(path, &solution).map_err(Failure::input)?;
    }
    if solution.converged {
        Ok(())
    } else {
        let history: Vec<String> = solution.residual_history.iter().map(|r| format!("{r:.3e}")).collect();
        Err(Failure::Numerical(anyhow::anyhow!(
            "no convergence after {} iterations; residual history: {}",
            solution.iterations,
            history.join(" ")
        )))
    }
}

fn print_solution(out: &mut impl Write, s: &Solution, n_states: usize, trace: bool) -> anyhow::Result<()> {
    writeln!(out, "case: {}", s.case_name)?;
    writeln!(out, "states: {n_states}")?;
    if trace {
        for r in &s.trace {
            writeln!(out, "iter {:>3}  mismatch {:.6e}  step {:<6}  worst {}", r.iteration, r.mismatch, r.step, r.worst_equation)?;
        }
    }
    writeln!(out, "converged: {}", s.converged)?;
    writeln!(out, "iterations: {}", s.iterations)?;
    writeln!(out, "mismatch: {:.6e}", s.final_mismatch())?;
    for v in &s.ac_voltages {
        let mags: Vec<String> = v.phases.iter().map(|e| format!("{:.6}", e.norm())).collect();
        let angs: Vec<String> = v.phases.iter().map(|e| format!("{:8.3}", e.arg().to_degrees())).collect();
        writeln!(out, "ac {:>6}  |E| {}  angle {}", v.id, mags.join(" "), angs.join(" "))?;
    }
    for v in &s.dc_voltages {
        writeln!(out, "dc {:>6}  E {:.6}", v.id, v.voltage)?;
    }
    for c in &s.converters {
        writeln!(
            out,
            "converter {:>3} ({})  P_ac {:.6}  Q_ac {:.6}  P_dc {:.6}  loss {:.6}  filter {:.6}",
            c.id, c.mode, c.p_ac, c.q_ac, c.p_dc, c.loss, c.filter_loss
        )?;
    }
    Ok(())
}

fn write_history(path: &Path, s: &Solution) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
    w.write_record(["iteration", "mismatch", "step", "worst_equation"])?;
    for r in &s.trace {
        w.write_record([r.iteration.to_string(), format!("{:e}", r.mismatch), r.step.to_string(), r.worst_equation.clone()])?;
    }
    w.flush()?;
    Ok(())
}

fn write_voltages(path: &Path, s: &Solution) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| path.display().to_string())?;
    w.write_record(["grid", "bus", "phase", "re", "im", "magnitude", "angle_deg"])?;
    for v in &s.ac_voltages {
        for (name, e) in ["a", "b", "c"].iter().zip(v.phases) {
            w.write_record([
                "ac".to_string(),
                v.id.to_string(),
                name.to_string(),
                e.re.to_string(),
                e.im.to_string(),
                e.norm().to_string(),
                e.arg().to_degrees().to_string(),
            ])?;
        }
    }
    for v in &s.dc_voltages {
        let e = v.voltage.to_string();
        w.write_record(["dc", &v.id.to_string(), "", &e, "0", &e, "0"])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    let case = read_case(&args.case)?;
    let pf = PowerFlow::new(&case).map_err(solver_failure)?;
    let nr = pf.solve(&SolverOptions::default().with_tolerance(1e-11)).map_err(solver_failure)?;
    if !nr.converged {
        return Err(Failure::Numerical(anyhow::anyhow!("Newton solve did not converge")));
    }
    let oracle = fixed_point_solve(&case, &OracleOptions { max_sweeps: args.max_sweeps, ..Default::default() })
        .map_err(|e| Failure::Numerical(e.into()))?;
    let (ac, dc) = pf.model().voltages(&nr.state_vector());
    let diff = oracle.max_voltage_difference(&ac, &dc);
    println!("case: {}", case.name);
    println!("newton iterations: {}", nr.iterations);
    println!("oracle sweeps: {} (converged: {}, mismatch {:.3e})", oracle.sweeps, oracle.converged, oracle.mismatch);
    println!("max voltage difference: {diff:.3e}");
    if oracle.converged && diff <= args.threshold {
        println!("verify: pass");
        Ok(())
    } else {
        println!("verify: FAIL");
        Err(Failure::Numerical(anyhow::anyhow!("difference {diff:.3e} exceeds threshold {:.3e}", args.threshold)))
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Failure> {
    let cases = args.cases.iter().map(|p| read_case(p).map(|c| (p, c))).collect::<Result<Vec<_>, _>>()?;
    let sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| p.display().to_string()).map_err(Failure::Input)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    let header = ["case", "n_states", "iterations", "setup_s", "mismatch_s", "jacobian_s", "linear_solve_s", "total_s"];
    w.write_record(header).map_err(Failure::input)?;
    let options = SolverOptions::default().with_tolerance(args.tol);
    for (path, case) in &cases {
        for _ in 0..args.repeat.max(1) {
            let t = Instant::now();
            let pf = PowerFlow::new(case).map_err(solver_failure)?;
            let s = pf.solve(&options).map_err(solver_failure)?;
            log::debug!("{}: {:?} wall", path.display(), t.elapsed());
            let secs = |d: std::time::Duration| format!("{:.6e}", d.as_secs_f64());
            w.write_record([
                case.name.clone(),
                pf.n_states().to_string(),
                s.iterations.to_string(),
                secs(s.timings.setup),
                secs(s.timings.mismatch),
                secs(s.timings.jacobian),
                secs(s.timings.linear_solve),
                secs(s.timings.total),
            ])
            .map_err(Failure::input)?;
        }
    }
    w.flush().map_err(Failure::input)?;
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), Failure> {
    if args.buses < 8 {
        return Err(Failure::input(anyhow::anyhow!("--buses must be at least 8")));
    }
    let case = radial_hybrid(args.buses, args.seed);
    save_case(case.data(), &args.out).map_err(Failure::input)?;
    println!("wrote {} ({} AC, {} DC buses)", args.out.display(), case.ac_buses.len(), case.dc_buses.len());
    Ok(())
}
