use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;

use hardy_forge::error::Error;
use hardy_forge::evaluator::{self, LeakagePolicy, MaximizeOptions};
use hardy_forge::frame::{AlignedFrame, FrameOptions};
use hardy_forge::io::{self, PolicyFile, ReportFile, SettingsFile};
use hardy_forge::lhv;
use hardy_forge::optimizer::{self, OptimizerConfig};
use hardy_forge::pipeline::{certify, PipelineOptions};
use hardy_forge::settings::{synthesize, SynthesisOptions};
use hardy_forge::state::{PureState, SubsetMask};

#[derive(Parser)]
#[command(
    name = "hardy-forge",
    version,
    about = "Builds and certifies two-setting Bell tests for entangled pure states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and emit a certificate.
    Certify(CertifyArgs),
    /// Stop after measurement synthesis and emit the settings.
    Construct(ConstructArgs),
    /// Evaluate existing settings against a state and emit a report.
    Evaluate(EvaluateArgs),
    /// Enumerate deterministic local strategies for a party count.
    Lhv(LhvArgs),
    /// Write one of the bundled example states.
    Example(ExampleArgs),
    /// Write a Haar-random pure state.
    Random(RandomArgs),
}

#[derive(clap::Args)]
struct CertifyArgs {
    /// Input state JSON.
    #[arg(long)]
    state: PathBuf,
    /// Output path for the certificate; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Multistart count for the product search; scales with the party
    /// count when omitted.
    #[arg(long)]
    restarts: Option<usize>,
    /// Sweep gain tolerance for the product search.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Required clearance of the value above the classical bound.
    #[arg(long, default_value_t = 1e-9)]
    margin: f64,
    /// Hard cap on the party count.
    #[arg(long, default_value_t = 13)]
    max_n: usize,
    /// Try every leak assignment for parties with dimension above two.
    #[arg(long)]
    policy_search: bool,
    /// Renormalize the input before running.
    #[arg(long)]
    normalize: bool,
}

#[derive(clap::Args)]
struct ConstructArgs {
    #[arg(long)]
    state: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long)]
    normalize: bool,
}

#[derive(clap::Args)]
struct EvaluateArgs {
    #[arg(long)]
    state: PathBuf,
    /// Measurement settings JSON, as produced by `construct`.
    #[arg(long)]
    settings: PathBuf,
    /// Leak policy JSON; the default policy applies when omitted.
    #[arg(long)]
    policy: Option<PathBuf>,
    /// Try every leak assignment and keep the best.
    #[arg(long)]
    policy_search: bool,
    /// Polish the in-plane tables before reporting.
    #[arg(long)]
    maximize: bool,
    /// Where to write the polished settings (only with --maximize).
    #[arg(long)]
    out_settings: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct LhvArgs {
    /// Party count to enumerate (2 through 13).
    #[arg(long)]
    n: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExampleKind {
    /// Single-excitation superposition.
    W,
    /// Two-branch superposition, optionally tilted with --weight.
    Ghz,
    /// Five-party three-term state mixing both synthesis scenarios.
    ThreeTerm,
}

#[derive(clap::Args)]
struct ExampleArgs {
    #[arg(long, value_enum)]
    kind: ExampleKind,
    /// Party count for w and ghz.
    #[arg(long, default_value_t = 3)]
    n: usize,
    /// Weight of the all-zeros branch for ghz.
    #[arg(long, default_value_t = 0.5)]
    weight: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct RandomArgs {
    /// Comma-separated local dimensions, e.g. 2,3,2.
    #[arg(long)]
    dims: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit<T: Serialize>(out: &Option<PathBuf>, value: &T) -> hardy_forge::Result<()> {
    match out {
        Some(path) => io::write_json(path, value),
        None => {
            println!("{}", serde_json::to_string_pretty(value)?);
            Ok(())
        }
    }
}

fn load_state(path: &Path, normalize: bool) -> hardy_forge::Result<PureState> {
    let state = io::load_state(path)?;
    if normalize {
        Ok(state.normalized()?.0)
    } else {
        Ok(state)
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::TooFewParties(_)
        | Error::BadDimension(_)
        | Error::AmplitudeLength { .. }
        | Error::ZeroState
        | Error::NotNormalized(_)
        | Error::PartyOutOfRange { .. }
        | Error::LocalDimension { .. }
        | Error::FactorCount { .. }
        | Error::MissingFactor { .. }
        | Error::NotProperSubset { .. }
        | Error::PartyCountUnsupported { .. }
        | Error::InvalidSettings(_)
        | Error::Io(_)
        | Error::Json(_) => 1,
        Error::NotEntangled { .. } => 2,
        _ => 3,
    }
}

fn run_certify(args: &CertifyArgs) -> hardy_forge::Result<u8> {
    let state = load_state(&args.state, args.normalize)?;
    let opts = PipelineOptions {
        seed: args.seed,
        restarts: args.restarts,
        tol: args.tol,
        margin: args.margin,
        max_n: args.max_n,
        policy_search: args.policy_search,
        ..PipelineOptions::default()
    };
    let cert = certify(&state, &opts)?;
    eprintln!(
        "scenario={} value={:.6e} classical_bound={} margin={:.1e} passed={}",
        cert.report.scenario, cert.report.value, cert.classical.maximum, cert.margin, cert.passed
    );
    emit(&args.out, &cert)?;
    Ok(if cert.passed { 0 } else { 3 })
}

fn run_construct(args: &ConstructArgs) -> hardy_forge::Result<u8> {
    let state = load_state(&args.state, args.normalize)?;
    let config = OptimizerConfig {
        restarts: args.restarts,
        tol: args.tol,
        seed: args.seed,
        ..OptimizerConfig::default()
    };
    let cp = optimizer::closest_product(&state, &config)?;
    let verdict = optimizer::is_entangled(&state, &cp, 1e-10)?;
    if !verdict.entangled {
        return Err(Error::NotEntangled {
            overlap: verdict.overlap,
        });
    }
    let frame = AlignedFrame::build(
        &state,
        &cp.pv,
        &FrameOptions {
            seed: args.seed,
            ..FrameOptions::default()
        },
    )?;
    let meas = synthesize(
        &state,
        &frame,
        &SynthesisOptions {
            seed: args.seed,
            ..SynthesisOptions::default()
        },
    )?;
    eprintln!(
        "scenario={} degree={} predicted_value={:?}",
        meas.scenario.name(),
        meas.degree,
        meas.predicted_value
    );
    emit(&args.out, &SettingsFile::from_settings(&meas))?;
    Ok(0)
}

fn run_evaluate(args: &EvaluateArgs) -> hardy_forge::Result<u8> {
    let state = load_state(&args.state, false)?;
    let settings_file: SettingsFile = io::read_json(&args.settings)?;
    let mut meas = settings_file.to_settings()?;
    let mut policy = match &args.policy {
        Some(path) => io::read_json::<PolicyFile>(path)?.to_policy()?,
        None => LeakagePolicy::default(),
    };
    if args.policy_search {
        let (best, _) = evaluator::search_policies(&state, &meas)?;
        policy = best;
    }
    if args.maximize {
        let before = evaluator::quantum_value(&state, &meas, &policy)?.value;
        let (polished, report) = evaluator::maximize_violation(
            &state,
            &meas,
            &policy,
            &MaximizeOptions {
                seed: args.seed,
                ..MaximizeOptions::default()
            },
        )?;
        eprintln!("value before={:.6e} after={:.6e}", before, report.value);
        meas = polished;
        if let Some(path) = &args.out_settings {
            io::write_json(path, &SettingsFile::from_settings(&meas))?;
        }
    }
    let report = evaluator::quantum_value(&state, &meas, &policy)?;
    eprintln!(
        "scenario={} value={:.6e} subspace_value={:.6e}",
        report.scenario, report.value, report.leakage.subspace_value
    );
    emit(&args.out, &ReportFile::from_report(&report, 1e-9))?;
    Ok(0)
}

#[derive(Serialize)]
struct LhvOutput {
    n: usize,
    maximum: i64,
    witness_count: u64,
    assignments_checked: u64,
    witnesses: Vec<[u16; 2]>,
    contextual_impossible: bool,
}

fn run_lhv(args: &LhvArgs) -> hardy_forge::Result<u8> {
    let res = lhv::classical_max(args.n)?;
    let ctx = lhv::contextual_impossibility(args.n)?;
    eprintln!(
        "n={} maximum={} witnesses={} impossible={}",
        args.n, res.maximum, res.witness_count, ctx.impossible
    );
    emit(
        &args.out,
        &LhvOutput {
            n: args.n,
            maximum: res.maximum,
            witness_count: res.witness_count,
            assignments_checked: res.assignments_checked,
            witnesses: res.witnesses.iter().map(|w| [w.first, w.second]).collect(),
            contextual_impossible: ctx.impossible,
        },
    )?;
    Ok(0)
}

fn example_state(args: &ExampleArgs) -> hardy_forge::Result<PureState> {
    match args.kind {
        ExampleKind::W => {
            let n = args.n;
            if n < 2 || n > 20 {
                return Err(Error::PartyCountUnsupported { n, min: 2, max: 20 });
            }
            let amp = Complex64::new(1.0 / (n as f64).sqrt(), 0.0);
            let full = SubsetMask::full(n);
            let terms: Vec<(SubsetMask, Complex64)> = (1..=n)
                .map(|k| (full.without(k), amp))
                .collect();
            PureState::from_mask_terms(n, &terms)
        }
        ExampleKind::Ghz => {
            let n = args.n;
            if n < 2 || n > 20 {
                return Err(Error::PartyCountUnsupported { n, min: 2, max: 20 });
            }
            if !(args.weight > 0.0 && args.weight < 1.0) {
                return Err(Error::InvalidSettings(format!(
                    "weight must lie strictly between 0 and 1, got {}",
                    args.weight
                )));
            }
            PureState::from_mask_terms(
                n,
                &[
                    (SubsetMask::full(n), Complex64::new(args.weight.sqrt(), 0.0)),
                    (
                        SubsetMask::EMPTY,
                        Complex64::new((1.0 - args.weight).sqrt(), 0.0),
                    ),
                ],
            )
        }
        ExampleKind::ThreeTerm => {
            let t = Complex64::new(1.0 / 3f64.sqrt(), 0.0);
            PureState::from_mask_terms(
                5,
                &[
                    (SubsetMask::full(5), t),
                    (SubsetMask(0b00011), t),
                    (SubsetMask::EMPTY, t),
                ],
            )
        }
    }
}

fn run_example(args: &ExampleArgs) -> hardy_forge::Result<u8> {
    let state = example_state(args)?;
    emit(&args.out, &io::StateFile::from_state(&state))?;
    Ok(0)
}

fn run_random(args: &RandomArgs) -> hardy_forge::Result<u8> {
    let dims = args
        .dims
        .split(',')
        .map(|t| {
            t.trim().parse::<usize>().map_err(|_| {
                Error::InvalidSettings(format!("cannot parse dimension {t:?}"))
            })
        })
        .collect::<hardy_forge::Result<Vec<_>>>()?;
    let state = PureState::haar_random(dims, args.seed)?;
    emit(&args.out, &io::StateFile::from_state(&state))?;
    Ok(0)
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("HARDY_FORGE_THREADS") {
        if let Ok(t) = threads.parse::<usize>() {
            if t > 0 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build_global();
            }
        }
    }
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Certify(args) => run_certify(args),
        Command::Construct(args) => run_construct(args),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Lhv(args) => run_lhv(args),
        Command::Example(args) => run_example(args),
        Command::Random(args) => run_random(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
