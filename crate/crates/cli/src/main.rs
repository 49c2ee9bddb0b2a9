// The error side carries the partial report; one per process.
#![allow(clippy::result_large_err)]

mod report;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use frontspeed_core::asymptotics::{singular_limit_one, singular_limit_zero};
use frontspeed_core::front::{reconstruct_with, ProfileOptions};
use frontspeed_core::model::{self, Numerics};
use frontspeed_core::shooting::{solve, SolveOutcome};
use frontspeed_core::{bounds, critical_speed, simulate, Error, ProblemSpec, SimConfig, Verdict};

use report::{Refusal, Report};

#[derive(Parser)]
#[command(
    name = "frontspeed",
    version,
    about = "Critical wave speeds and travelling-front profiles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Singular limits, a priori speed bounds and the existence verdict.
    Analyze(Common),
    /// Critical speed by bisection between the bounds.
    Speed(Common),
    /// The solution z(u) at a given speed, as CSV `u,z,dz`.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        c: f64,
    },
    /// The travelling-wave profile u(t) at a given speed, as CSV `t,u`.
    Profile {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        c: f64,
        /// Truncate the profile to [eps, 1 - eps].
        #[arg(long)]
        eps_prof: Option<f64>,
        /// u value where t = 0.
        #[arg(long, default_value_t = 0.5)]
        anchor: f64,
        /// Exponent k in z = (-D u')^k; needed when alpha != 1.
        #[arg(long)]
        reduction_exponent: Option<f64>,
    },
    /// Simulate the PDE from step data and measure the front speed.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// TOML file with simulation settings.
        #[arg(long)]
        sim_config: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Problem file (TOML).
    problem: PathBuf,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
    /// Write CSV output here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Speed tolerance for `speed`; integrator relative tolerance otherwise.
    #[arg(long)]
    tol: Option<f64>,
    /// Override a `[numerics]` entry, e.g. `--set delta_start=1e-7`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Suppress the human-readable report.
    #[arg(long)]
    quiet: bool,
}

#[derive(Debug)]
enum Failure {
    Core(Error),
    Input(String),
    Output(String),
    NoSolution(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Output(_) => 5,
            Failure::NoSolution(_) => 4,
            Failure::Core(e) => match e {
                Error::Expr(_)
                | Error::Model(_)
                | Error::InvalidArgument(_)
                | Error::UnsupportedSimulation { .. }
                | Error::StabilityViolation { .. }
                | Error::ReductionUnsupported { .. } => 2,
                Error::NoLimit { .. }
                | Error::LimitInfinite { .. }
                | Error::SingularDivergence
                | Error::StartUndefined { .. } => 3,
                Error::ExistenceFails | Error::NotASolution { .. } => 4,
                _ => 5,
            },
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Input(m) | Failure::Output(m) | Failure::NoSolution(m) => f.write_str(m),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Analyze(c) | Command::Speed(c) => c,
        Command::Solve { common, .. }
        | Command::Profile { common, .. }
        | Command::Simulate { common, .. } => common,
    };
    let started = Instant::now();
    let (report, failure) = match run(&cli.command, common) {
        Ok(report) => (Some(report), None),
        Err((report, failure)) => (report, Some(failure)),
    };
    if let Some(mut report) = report {
        report.timing_seconds = started.elapsed().as_secs_f64();
        if common.json {
            emit(&(report.to_json() + "\n"));
        } else if !common.quiet && !report.stdout_taken {
            emit(&report.to_table());
        }
    }
    match failure {
        None => ExitCode::SUCCESS,
        Some(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

/// Write to stdout; a closed pipe (`| head`) is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

type Outcome = Result<Report, (Option<Report>, Failure)>;

fn bare<T>(r: Result<T, impl Into<Failure>>) -> Result<T, (Option<Report>, Failure)> {
    r.map_err(|e| (None, e.into()))
}

fn load(common: &Common) -> Result<ProblemSpec, Failure> {
    let text = std::fs::read_to_string(&common.problem)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", common.problem.display())))?;
    let mut spec = ProblemSpec::from_toml(&text).map_err(Error::from)?;
    spec.numerics = apply_overrides(&spec.numerics, &common.overrides)?;
    Ok(spec.validated().map_err(Error::from)?)
}

/// Flags win over the file: rewrite the numerics table and re-read it.
fn apply_overrides(numerics: &Numerics, overrides: &[String]) -> Result<Numerics, Failure> {
    if overrides.is_empty() {
        return Ok(numerics.clone());
    }
    let mut table =
        toml::Table::try_from(numerics).map_err(|e| Failure::Input(format!("numerics: {e}")))?;
    for item in overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::Input(format!("expected KEY=VALUE, got `{item}`")))?;
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .map_err(|e| Failure::Input(format!("bad value for {key}: {e}")))?
            .remove("v")
            .expect("key present");
        table.insert(key.trim().to_string(), parsed);
    }
    table
        .try_into()
        .map_err(|e: toml::de::Error| Failure::Input(format!("numerics: {e}")))
}

fn write_output(path: &Path, text: &str, report: &mut Report) -> Result<(), Failure> {
    std::fs::write(path, text)
        .map_err(|e| Failure::Output(format!("cannot write {}: {e}", path.display())))?;
    report.outputs.push(path.display().to_string());
    Ok(())
}

/// Limits, bounds and verdict; shared by every command except `simulate`.
fn analyze(spec: &ProblemSpec, report: &mut Report) -> Result<(), Failure> {
    let validation = model::validate(spec).map_err(Error::from)?;
    report.warnings.extend(validation.warnings);
    let h0 = singular_limit_zero(spec)?;
    let h1 = singular_limit_one(spec);
    report.warnings.extend(h0.warning.clone());
    let finite = h0.value.is_finite();
    report.verdict = Some(Verdict::from_limit(h0.value));
    report.limits.h0_alpha = Some(h0);
    match h1 {
        Ok(h1) => {
            report.warnings.extend(h1.warning.clone());
            report.limits.h1_alpha = Some(h1);
        }
        Err(e) => report.warnings.push(format!("limit at 1: {e}")),
    }
    if finite {
        report.bounds = Some(bounds::estimate(spec)?);
    }
    Ok(())
}

fn run(command: &Command, common: &Common) -> Outcome {
    let mut spec = bare(load(common))?;
    match command {
        Command::Analyze(_) => {
            let mut report = Report::new("analyze", &spec);
            attach(analyze(&spec, &mut report), report)
        }
        Command::Speed(_) => {
            let mut report = Report::new("speed", &spec);
            if let Err(e) = analyze(&spec, &mut report) {
                return Err((Some(report), e));
            }
            if report.verdict == Some(Verdict::NoFrontsForAnyC) {
                return Err((
                    Some(report),
                    Failure::NoSolution("no front exists for any speed".into()),
                ));
            }
            let tol = common.tol.unwrap_or(spec.numerics.speed_tol);
            let result = critical_speed(&spec, tol).map(|r| report.speed = Some(r));
            attach(result.map_err(Failure::from), report)
        }
        Command::Solve { c, .. } => {
            if let Some(tol) = common.tol {
                spec.numerics.rtol = tol;
            }
            let mut report = Report::new("solve", &spec);
            let result = solve_into(&spec, *c, &mut report).and_then(|csv| match &common.out {
                Some(path) => write_output(path, &csv, &mut report),
                None if common.json => Ok(()),
                None => {
                    emit(&csv);
                    report.stdout_taken = true;
                    Ok(())
                }
            });
            attach(result, report)
        }
        Command::Profile {
            c,
            eps_prof,
            anchor,
            reduction_exponent,
            ..
        } => {
            if let Some(tol) = common.tol {
                spec.numerics.rtol = tol;
            }
            let mut report = Report::new("profile", &spec);
            let options = ProfileOptions {
                eps_prof: eps_prof.unwrap_or(spec.numerics.eps_prof),
                anchor: *anchor,
                reduction_exponent: *reduction_exponent,
                ..ProfileOptions::default()
            };
            let result = solve_into(&spec, *c, &mut report).and_then(|_| {
                let traj = report.solution.as_ref().expect("solved");
                let profile = reconstruct_with(traj, &spec, options)?;
                let csv = profile.to_csv();
                report.profile = Some(profile);
                match &common.out {
                    Some(path) => write_output(path, &csv, &mut report),
                    None => Ok(()),
                }
            });
            attach(result, report)
        }
        Command::Simulate { sim_config, .. } => {
            let cfg = match sim_config {
                Some(path) => bare(read_sim_config(path))?,
                None => SimConfig::default(),
            };
            let mut report = Report::new("simulate", &spec);
            let result = simulate(&spec, &cfg).map_err(Failure::from).and_then(|m| {
                let csv = m.snapshot_csv();
                report.simulation = Some(m);
                match &common.out {
                    Some(path) => write_output(path, &csv, &mut report),
                    None => Ok(()),
                }
            });
            attach(result, report)
        }
    }
}

fn attach(result: Result<(), Failure>, report: Report) -> Outcome {
    match result {
        Ok(()) => Ok(report),
        Err(e) => Err((Some(report), e)),
    }
}

/// Shoot at `c`; on success the trajectory is stored in the report and its
/// CSV returned.
fn solve_into(spec: &ProblemSpec, c: f64, report: &mut Report) -> Result<String, Failure> {
    match solve(spec, c)? {
        SolveOutcome::Solved { trajectory } => {
            let csv = trajectory.to_csv();
            report.solution = Some(trajectory);
            Ok(csv)
        }
        SolveOutcome::NoSolution { reason, .. } => {
            report.refusal = Some(Refusal { c, reason });
            Err(Failure::NoSolution(format!(
                "no front at c = {c}: {}",
                match reason {
                    frontspeed_core::NoSolutionReason::Subcritical => "speed is below critical",
                    frontspeed_core::NoSolutionReason::LimitInfinite =>
                        "h/u^alpha is unbounded at 0, no speed admits a front",
                }
            )))
        }
    }
}

fn read_sim_config(path: &Path) -> Result<SimConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}
