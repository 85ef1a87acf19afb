mod export;
mod files;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use injurybench::speed::{self, SpeedError};
use injurybench::strings::{self, BinStr};
use injurybench::verify::{self, Check, Report, Status, VerifyOptions};
use injurybench::{run, Dyadic, EngineKind, PhiConfig, PhiRegistry};

use files::{read_modulus, read_sequence, read_trace, write_sequence};

const SEED_DIR_VAR: &str = "INJURYBENCH_SEED_DIR";

#[derive(Parser)]
#[command(
    name = "injurybench",
    version,
    about = "Run, trace and verify priority constructions of left-computable reals"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a construction and write its trace and sequence.
    Run(RunArgs),
    /// Check a trace against the construction's invariants.
    Verify(VerifyArgs),
    /// Estimate the true path from a trace's settlements.
    Truepath(TruepathArgs),
    /// Transformations on approximation sequences.
    #[command(subcommand)]
    Speed(SpeedCommand),
    /// Export a trace as a strategy-tree graph or a jump timeline.
    Export(ExportArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_parser = parse_engine)]
    engine: EngineKind,
    #[arg(long)]
    stages: u64,
    /// JSON or TOML registry configuration; the default suite when omitted.
    #[arg(long)]
    phi_config: Option<PathBuf>,
    /// Trace path; the sequence CSV goes next to it with extension `.csv`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EstimateArgs {
    /// Settlement window `lo:hi`; defaults to the second half of the run.
    #[arg(long, value_parser = parse_window)]
    window: Option<(usize, usize)>,
    #[arg(long)]
    threshold: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Json,
    Text,
}

#[derive(Args)]
struct VerifyArgs {
    trace: PathBuf,
    /// Comma-separated check names; all that apply to the engine by default.
    #[arg(long, value_delimiter = ',')]
    checks: Option<Vec<Check>>,
    /// Also write the JSON reports here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: ReportFormat,
    #[command(flatten)]
    estimate: EstimateArgs,
}

#[derive(Args)]
struct TruepathArgs {
    trace: PathBuf,
    #[command(flatten)]
    estimate: EstimateArgs,
    #[arg(long, value_enum, default_value = "text")]
    format: ReportFormat,
}

#[derive(Args)]
struct SequenceArgs {
    /// Sequence CSV (`t,mantissa,exponent`) or JSON.
    #[arg(long)]
    sequence: PathBuf,
    /// Exact limit, as `m/2^k` or `m/d`; overrides one given in the file.
    #[arg(long)]
    limit: Option<Dyadic>,
}

#[derive(Subcommand)]
enum SpeedCommand {
    /// Indices where the speed-up ratio reaches `rho`, in both forms.
    Indices {
        #[command(flatten)]
        seq: SequenceArgs,
        #[arg(long)]
        rho: Dyadic,
    },
    /// Shift `x_n` down by `2^-n`; reports ratios at regaining indices.
    Regain2speed {
        #[command(flatten)]
        seq: SequenceArgs,
        /// Output sequence CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Moduli `g`, `h` and constants `k`, `m` from a speed-up modulus.
    Speed2regain {
        /// `affine:MUL,ADD`, a CSV table `n,f(n)`, or a JSON modulus.
        #[arg(long)]
        modulus: String,
        #[arg(long)]
        rho: Dyadic,
        /// Number of arguments to tabulate.
        #[arg(long, default_value_t = 64)]
        len: u64,
    },
    /// Indices with `x - x_n ≤ 2^-h(n)`.
    Certify {
        #[command(flatten)]
        seq: SequenceArgs,
        #[arg(long)]
        modulus: String,
    },
    /// Check that `f` is a modulus, then the gap bound it implies.
    Gapbound {
        #[command(flatten)]
        seq: SequenceArgs,
        #[arg(long)]
        modulus: String,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExportFormat {
    Dot,
    Csv,
}

#[derive(Args)]
struct ExportArgs {
    trace: PathBuf,
    #[arg(long, value_enum)]
    format: ExportFormat,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_engine(s: &str) -> Result<EngineKind, String> {
    s.parse()
}

fn parse_window(s: &str) -> Result<(usize, usize), String> {
    let (lo, hi) = s
        .split_once(':')
        .or_else(|| s.split_once(".."))
        .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
    let lo = lo
        .trim()
        .parse()
        .map_err(|_| format!("bad window start in {s:?}"))?;
    let hi = hi
        .trim()
        .parse()
        .map_err(|_| format!("bad window end in {s:?}"))?;
    Ok((lo, hi))
}

/// Error carrying its exit code.
#[derive(Debug)]
struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure {
            code: 2,
            msg: msg.into(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        if e.kind() == io::ErrorKind::BrokenPipe {
            // the reader went away; not worth reporting
            return Failure {
                code: 0,
                msg: String::new(),
            };
        }
        Failure::usage(e.to_string())
    }
}

impl From<SpeedError> for Failure {
    fn from(e: SpeedError) -> Self {
        match e {
            SpeedError::Incomplete { .. } => Failure {
                code: 3,
                msg: e.to_string(),
            },
            _ => Failure::usage(e.to_string()),
        }
    }
}

type CliResult = Result<u8, Failure>;

/// Resolves a relative path that does not exist against the seed directory.
pub(crate) fn locate(path: &Path) -> PathBuf {
    if path.exists() || path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os(SEED_DIR_VAR) {
        Some(dir) => {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                candidate
            } else {
                path.to_path_buf()
            }
        }
        None => path.to_path_buf(),
    }
}

fn output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_json(value: &impl serde::Serialize) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::usage(e.to_string()))?;
    writeln!(io::stdout(), "{text}")?;
    Ok(0)
}

fn cmd_run(args: RunArgs) -> CliResult {
    let config = match &args.phi_config {
        Some(p) => PhiConfig::load(&locate(p)).map_err(|e| Failure::usage(e.to_string()))?,
        None => PhiConfig::standard(),
    };
    let reg = PhiRegistry::new(&config).map_err(|e| Failure::usage(e.to_string()))?;
    let trace = run(args.engine, &reg, args.stages).map_err(|e| Failure {
        code: 1,
        msg: e.to_string(),
    })?;
    let digest = trace.write_jsonl(BufWriter::new(File::create(&args.out)?))?;
    let csv_path = args.out.with_extension("csv");
    write_sequence(&trace.x, File::create(&csv_path)?)?;
    writeln!(io::stdout(), "{digest}")?;
    Ok(0)
}

fn options(est: &EstimateArgs) -> VerifyOptions {
    VerifyOptions {
        window: est.window,
        threshold: est.threshold,
        indices: None,
    }
}

/// 0 when nothing fails and something passes, 1 on any failure, 3 when
/// every report is incomplete.
fn exit_status(reports: &[Report]) -> u8 {
    match verify::overall(reports) {
        Status::Fail => 1,
        _ if !reports.is_empty() && reports.iter().all(|r| r.status == Status::Incomplete) => 3,
        _ => 0,
    }
}

fn cmd_verify(args: VerifyArgs) -> CliResult {
    let trace = read_trace(&args.trace)?;
    let reports = verify::verify(&trace, args.checks.as_deref(), options(&args.estimate))
        .map_err(|e| Failure::usage(e.to_string()))?;
    if let Some(path) = &args.report {
        let mut out = output(Some(path))?;
        serde_json::to_writer_pretty(&mut out, &reports)
            .map_err(|e| Failure::usage(e.to_string()))?;
        writeln!(out)?;
    }
    match args.format {
        ReportFormat::Json => {
            print_json(&reports)?;
        }
        ReportFormat::Text => {
            for r in &reports {
                write!(io::stdout(), "{r}")?;
            }
            writeln!(io::stdout(), "overall: {}", verify::overall(&reports))?;
        }
    }
    Ok(exit_status(&reports))
}

fn cmd_truepath(args: TruepathArgs) -> CliResult {
    let trace = read_trace(&args.trace)?;
    let settled = trace.settlements();
    let window = args
        .estimate
        .window
        .unwrap_or_else(|| strings::default_window(settled.len()));
    let threshold = args
        .estimate
        .threshold
        .unwrap_or(strings::DEFAULT_THRESHOLD);
    let est = strings::true_path_estimate(&settled, window, threshold)
        .map_err(|e| Failure::usage(e.to_string()))?;
    // settlements in the window through each prefix, split by the next bit
    let mut votes: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for s in &settled[window.0..window.1] {
        for depth in 0..est.path.len() {
            let prefix: BinStr = est.path.prefix(depth);
            if s.len() > depth && prefix.is_prefix_of(s) {
                let e = votes.entry(depth).or_default();
                if s.bit(depth) {
                    e.1 += 1;
                } else {
                    e.0 += 1;
                }
            }
        }
    }
    match args.format {
        ReportFormat::Json => {
            let diag: Vec<_> = votes
                .iter()
                .map(|(d, (z, o))| serde_json::json!({"depth": d, "zeros": z, "ones": o}))
                .collect();
            print_json(&serde_json::json!({"estimate": est, "votes": diag}))?;
        }
        ReportFormat::Text => {
            writeln!(io::stdout(), "path: {}", est.path)?;
            writeln!(
                io::stdout(),
                "stable up to length {} of {}",
                est.stable_upto,
                est.path.len()
            )?;
            writeln!(
                io::stdout(),
                "window: {}..{}, threshold {}",
                window.0,
                window.1,
                threshold
            )?;
            for (d, (z, o)) in votes.iter().take(64) {
                let mark = if *d < est.stable_upto {
                    "stable"
                } else {
                    "unstable"
                };
                writeln!(
                    io::stdout(),
                    "  depth {d}: {z} through 0, {o} through 1 ({mark})"
                )?;
            }
        }
    }
    Ok(0)
}

fn sequence(args: &SequenceArgs) -> Result<speed::ApproxSequence, Failure> {
    let mut seq = read_sequence(&args.sequence)?;
    if let Some(limit) = &args.limit {
        seq = speed::ApproxSequence::new(seq.values, Some(limit.clone()), seq.tag)?;
    }
    Ok(seq)
}

fn cmd_speed(cmd: SpeedCommand) -> CliResult {
    match cmd {
        SpeedCommand::Indices { seq, rho } => {
            let seq = sequence(&seq)?;
            print_json(&speed::speedup_indices(&seq, &rho)?)
        }
        SpeedCommand::Regain2speed { seq, out } => {
            let seq = sequence(&seq)?;
            let y = speed::regain_to_speed(&seq)?;
            write_sequence(&y.values, output(out.as_deref())?)?;
            if seq.known_limit.is_some() {
                let ratios = speed::regaining_ratios(&seq)?;
                let weak: Vec<_> = ratios.iter().filter(|r| !r.above_quarter).collect();
                for r in &weak {
                    eprintln!(
                        "ratio {} at regaining index {} is not above 1/4",
                        r.ratio, r.n
                    );
                }
                eprintln!(
                    "{} regaining indices, {} with ratio ≤ 1/4",
                    ratios.len(),
                    weak.len()
                );
                if !weak.is_empty() {
                    return Ok(1);
                }
            }
            Ok(0)
        }
        SpeedCommand::Speed2regain { modulus, rho, len } => {
            let f = read_modulus(&modulus)?;
            print_json(&speed::speed_to_regain(&f, &rho, len)?)
        }
        SpeedCommand::Certify { seq, modulus } => {
            let seq = sequence(&seq)?;
            let h = read_modulus(&modulus)?;
            print_json(&speed::certify_regaining(&seq, &h)?)
        }
        SpeedCommand::Gapbound { seq, modulus } => {
            let seq = sequence(&seq)?;
            let f = read_modulus(&modulus)?;
            let report = speed::modulus_to_gapbound(&f, &seq)?;
            print_json(&report)?;
            Ok(if report.holds() { 0 } else { 1 })
        }
    }
}

fn cmd_export(args: ExportArgs) -> CliResult {
    let trace = read_trace(&args.trace)?;
    let out = output(args.out.as_deref())?;
    match args.format {
        ExportFormat::Dot => export::write_dot(&trace, out)?,
        ExportFormat::Csv => export::write_jump_csv(&trace, out)?,
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Truepath(a) => cmd_truepath(a),
        Command::Speed(c) => cmd_speed(c),
        Command::Export(a) => cmd_export(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) if f.msg.is_empty() => ExitCode::from(f.code),
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
