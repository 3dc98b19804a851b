//! `frameless` command-line driver.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 verification
//! failure, 3 transport failure (including sessions cut short).

pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use frameless_core::checks::run_verify_suite;
use frameless_core::circuits::{check_singlet_circuit, singlet_prep_circuit, QuditCircuit};
use frameless_core::locc::{run_session, Referee, SessionConfig, SessionTranscript, Transport};
use frameless_core::sources::{StateSource, WitnessSource};
use frameless_core::teleport::protocol_expectation;
use frameless_core::Error;

use report::{render_verify, ExperimentReport, Format, Verdict};

/// Environment variable overriding the default `--tolerance`.
pub const TOLERANCE_ENV: &str = "FRAMELESS_TOLERANCE";
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VERIFY: i32 = 2;
pub const EXIT_TRANSPORT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "frameless", version, about = "Reference-frame-free entanglement witness simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an Alice/Bob session and estimate Tr(W rho).
    Simulate(SimulateArgs),
    /// Run the analytic identity suite.
    Verify(VerifyArgs),
    /// Emit or validate the singlet preparation circuit.
    Circuit(CircuitArgs),
    /// Summarize a recorded transcript.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Local dimension 2j + 1.
    #[arg(long)]
    d: usize,
    /// werner:p, random:seed:rank or file:path
    #[arg(long)]
    state: StateSource,
    /// riccardi:a:b:pair or file:path
    #[arg(long)]
    witness: WitnessSource,
    #[arg(long)]
    shots: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// inprocess or tcp:host:port
    #[arg(long, default_value = "inprocess")]
    transport: Transport,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also save the session transcript.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Allowed gap between the protocol value and the direct trace.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Record wall-clock runtime in the report.
    #[arg(long)]
    timing: bool,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 2)]
    dmin: usize,
    #[arg(long)]
    dmax: usize,
    /// Random instances per check and dimension.
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CircuitArgs {
    #[arg(long)]
    d: usize,
    #[arg(long, conflicts_with = "validate", required_unless_present = "validate")]
    emit: bool,
    #[arg(long, value_name = "FILE")]
    validate: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    transcript: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Transport(_) | Error::ConfigMismatch(_) => EXIT_TRANSPORT,
            Error::Protocol(_) => EXIT_VERIFY,
            _ => EXIT_USAGE,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

type Outcome = std::result::Result<i32, Failure>;

fn emit(text: &str, out: Option<&Path>, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| fail(EXIT_USAGE, format!("cannot write {}: {e}", path.display()))),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| fail(EXIT_USAGE, format!("cannot write to stdout: {e}"))),
    }
}

fn resolve_tolerance(flag: Option<f64>) -> std::result::Result<f64, Failure> {
    let tol = match flag {
        Some(t) => t,
        None => match std::env::var(TOLERANCE_ENV) {
            Ok(raw) => raw
                .trim()
                .parse()
                .map_err(|_| fail(EXIT_USAGE, format!("{TOLERANCE_ENV}={raw} is not a number")))?,
            Err(_) => DEFAULT_TOLERANCE,
        },
    };
    if tol.is_finite() && tol > 0.0 {
        Ok(tol)
    } else {
        Err(fail(EXIT_USAGE, format!("tolerance must be positive, got {tol}")))
    }
}

/// Builds the report for a transcript, checking the protocol value and the
/// recorded estimate along the way.
fn experiment_report(transcript: &SessionTranscript, tolerance: f64, runtime_ms: Option<f64>) -> std::result::Result<ExperimentReport, Failure> {
    let config = &transcript.config;
    let referee = Referee::new(config)?;
    let analytic = referee.analytic_value()?;
    let via_protocol = protocol_expectation(referee.state(), referee.witness(), config.d)?;
    if (via_protocol - analytic).abs() > tolerance {
        return Err(fail(
            EXIT_VERIFY,
            format!("protocol value {via_protocol} differs from the direct trace {analytic} by more than {tolerance}"),
        ));
    }
    transcript.verify_replay()?;
    let summary = transcript.summary();
    let estimate = transcript.estimate;
    Ok(ExperimentReport {
        shots: transcript.rounds.len() as u64,
        p0_empirical: (summary.total.count > 0).then(|| summary.branch_zero_frequency()),
        p0_analytic: 1.0 / (config.d * config.d) as f64,
        mean: estimate.map(|e| e.mean),
        stderr: estimate.map(|e| e.stderr),
        analytic,
        verdict: match estimate {
            Some(e) if e.detects_entanglement() => Verdict::Entangled,
            Some(_) => Verdict::NotDetected,
            None => Verdict::Undefined,
        },
        runtime_ms,
    })
}

fn simulate(args: SimulateArgs, stdout: &mut dyn Write) -> Outcome {
    let tolerance = resolve_tolerance(args.tolerance)?;
    let config = SessionConfig {
        d: args.d,
        witness: args.witness,
        state: args.state,
        shots: args.shots,
        seed: args.seed,
    };
    let start = Instant::now();
    let transcript = run_session(&config, &args.transport)?;
    let runtime_ms = args.timing.then(|| start.elapsed().as_secs_f64() * 1e3);
    if let Some(path) = &args.transcript {
        let file = std::fs::File::create(path).map_err(|e| fail(EXIT_USAGE, format!("cannot write {}: {e}", path.display())))?;
        transcript.write_to(std::io::BufWriter::new(file))?;
    }
    if !transcript.complete {
        return Err(fail(
            EXIT_TRANSPORT,
            format!(
                "session incomplete after {} of {} rounds: {}",
                transcript.rounds.len(),
                config.shots,
                transcript.abort_reason.as_deref().unwrap_or("unknown reason")
            ),
        ));
    }
    let report = experiment_report(&transcript, tolerance, runtime_ms)?;
    emit(&report.render(args.format), args.out.as_deref(), stdout)?;
    Ok(EXIT_OK)
}

fn verify(args: VerifyArgs, stdout: &mut dyn Write) -> Outcome {
    let report = run_verify_suite(args.dmin, args.dmax, args.trials, args.seed)?;
    emit(&render_verify(&report, args.format), args.out.as_deref(), stdout)?;
    if !report.covers_manifest() {
        return Err(fail(
            EXIT_VERIFY,
            "dimension range does not cover every check (include d = 2)",
        ));
    }
    if !report.all_passed() {
        return Err(fail(EXIT_VERIFY, "identity checks failed"));
    }
    Ok(EXIT_OK)
}

/// Circuit files must reproduce the singlet to this accuracy.
const CIRCUIT_TOLERANCE: f64 = 1e-10;

fn circuit(args: CircuitArgs, stdout: &mut dyn Write) -> Outcome {
    if let Some(path) = &args.validate {
        let text = std::fs::read_to_string(path).map_err(|e| fail(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))?;
        let parsed: QuditCircuit = text.parse()?;
        if parsed.d() != args.d {
            return Err(fail(
                EXIT_VERIFY,
                format!("circuit is for d = {}, expected d = {}", parsed.d(), args.d),
            ));
        }
        let check = check_singlet_circuit(&parsed)?;
        let line = format!(
            "d={} gates={} unitarity_deviation={:.3e} singlet_distance={:.3e}\n",
            parsed.d(),
            parsed.gates().len(),
            check.unitarity_deviation,
            check.singlet_distance
        );
        emit(&line, args.out.as_deref(), stdout)?;
        if !check.passes(CIRCUIT_TOLERANCE) {
            return Err(fail(EXIT_VERIFY, "circuit does not prepare the singlet"));
        }
        return Ok(EXIT_OK);
    }
    let text = singlet_prep_circuit(args.d)?.to_text();
    emit(&text, args.out.as_deref(), stdout)?;
    Ok(EXIT_OK)
}

fn report_cmd(args: ReportArgs, stdout: &mut dyn Write) -> Outcome {
    let text = std::fs::read_to_string(&args.transcript)
        .map_err(|e| fail(EXIT_USAGE, format!("cannot read {}: {e}", args.transcript.display())))?;
    let transcript = SessionTranscript::parse(&text)?;
    let report = experiment_report(&transcript, resolve_tolerance(None)?, None)?;
    emit(&report.render(args.format), args.out.as_deref(), stdout)?;
    if !transcript.complete {
        return Err(fail(
            EXIT_TRANSPORT,
            format!(
                "transcript is incomplete ({} of {} rounds)",
                transcript.rounds.len(),
                transcript.config.shots
            ),
        ));
    }
    Ok(EXIT_OK)
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn dispatch<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{e}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    EXIT_USAGE
                }
            };
        }
    };
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a, stdout),
        Command::Verify(a) => verify(a, stdout),
        Command::Circuit(a) => circuit(a, stdout),
        Command::Report(a) => report_cmd(a, stdout),
    };
    match outcome {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
