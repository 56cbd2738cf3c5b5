//! `thermocert`: certify steering, incompatibility and channel resources by
//! work extraction from the command line.
//!
//! Exit codes: 0 conclusive, 2 inconclusive, 1 error.

mod commands;
mod report;
mod scenario;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::bail;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use thermocert::{SolverSettings, Verdict};

use commands::{Options, Outcome};
use report::{Report, SolverInfo, Units};
use scenario::Source;
use sweep::{Family, Quantity, SweepSpec};

#[derive(Parser)]
#[command(name = "thermocert", version, about = "Work-extraction certificates for quantum resources")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Scenario file (or sweep spec).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Energy unit kB·T·ln2; overrides the scenario's thermal block.
    #[arg(long = "kbt-ln2", global = true, conflicts_with = "temp")]
    kbt_ln2: Option<f64>,
    /// Temperature in kelvin; reports energies in joules.
    #[arg(long, global = true)]
    temp: Option<f64>,
    #[arg(long, global = true, default_value_t = 1e-8)]
    gap_tol: f64,
    #[arg(long, global = true, default_value_t = 1e-8)]
    feas_tol: f64,
    /// Recorded in the report; every pipeline is deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Work, information work and deficit of a state.
    Work {
        #[command(subcommand)]
        cmd: WorkCmd,
    },
    Steering {
        #[command(subcommand)]
        cmd: SteeringCmd,
    },
    Incompat {
        #[command(subcommand)]
        cmd: IncompatCmd,
    },
    Channels {
        #[command(subcommand)]
        cmd: ChannelsCmd,
    },
    /// Grid sweep over a named family with threshold bisection.
    Sweep(SweepArgs),
}

#[derive(Subcommand)]
enum WorkCmd {
    Eval {
        /// Bare matrix JSON, if the scenario carries no Hamiltonian.
        #[arg(long)]
        hamiltonian: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Measurements {
    /// Measurement scenario applied to a state scenario's first factor.
    #[arg(long)]
    measurements: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SteeringCmd {
    Assemble(Measurements),
    CheckLhs(Measurements),
    Robustness(Measurements),
    Certify(Measurements),
    Energy(Measurements),
}

#[derive(Subcommand)]
enum IncompatCmd {
    /// Joint measurability SDP.
    Check,
    /// Anomalous energy of the maximally entangled assemblage.
    CertifyEnergy,
    /// Same as `channels broadcast-check`.
    Broadcast,
    /// Same as `channels certify`.
    ChannelCertify,
}

#[derive(Subcommand)]
enum ChannelsCmd {
    BroadcastCheck,
    Certify,
    /// Payoff of a discrimination task (--input) on an ensemble.
    Payoff {
        #[arg(long)]
        channels: PathBuf,
    },
}

#[derive(Args)]
struct SweepArgs {
    /// werner, noisy-mub or isotropic.
    #[arg(long)]
    family: Option<Family>,
    /// min,max,steps
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    grid: Option<Vec<f64>>,
    #[arg(long)]
    dim: Option<usize>,
    /// Comma-separated subset of sr,E,gap,verdict.
    #[arg(long, value_delimiter = ',')]
    outputs: Option<Vec<Quantity>>,
    /// Also write the summary JSON here (CSV goes to --output).
    #[arg(long)]
    summary: Option<PathBuf>,
}

fn settings(c: &Common) -> anyhow::Result<SolverSettings> {
    for (name, v) in [("--gap-tol", c.gap_tol), ("--feas-tol", c.feas_tol)] {
        if !(v > 0.0 && v < 1.0) {
            bail!("{name} must lie in (0, 1), got {v}");
        }
    }
    Ok(SolverSettings {
        gap_tol: c.gap_tol,
        feas_tol: c.feas_tol,
        ..SolverSettings::default()
    })
}

fn build_report(o: Outcome, opts: &Options) -> Report {
    Report {
        tool: "thermocert",
        version: env!("CARGO_PKG_VERSION"),
        command: o.command,
        inputs: o.inputs,
        units: Units::new(&o.thermal),
        solver: SolverInfo::new(&opts.settings),
        seed: opts.seed,
        verdict: o.verdict,
        conclusion: o.conclusion,
        result: o.result,
    }
}

fn exit_code(verdict: Option<Verdict>) -> ExitCode {
    match verdict {
        Some(Verdict::Inconclusive) => ExitCode::from(2),
        _ => ExitCode::SUCCESS,
    }
}

fn finish(o: Outcome, opts: &Options, common: &Common) -> anyhow::Result<ExitCode> {
    let bytes = match common.format {
        Format::Json => None,
        Format::Csv => Some(report::render_summary_csv(&o.summary)?),
    };
    let verdict = o.verdict;
    let bytes = match bytes {
        Some(b) => b,
        None => report::render_json(&build_report(o, opts))?,
    };
    report::emit(common.output.as_deref(), &bytes)?;
    Ok(exit_code(verdict))
}

fn sweep_spec(args: &SweepArgs, input: Option<&std::path::Path>) -> anyhow::Result<(SweepSpec, Vec<report::InputDigest>)> {
    let (mut spec, inputs) = match input {
        Some(path) => {
            let src = Source::read(path)?;
            let spec: SweepSpec = src.parse()?;
            let digest = report::InputDigest {
                role: "input".into(),
                sha256: src.sha256,
            };
            (spec, vec![digest])
        }
        None => {
            let Some(family) = args.family else {
                bail!("sweep needs --input SPEC or --family");
            };
            let Some(grid) = &args.grid else {
                bail!("sweep needs --grid min,max,steps");
            };
            let [min, max, steps] = grid[..] else {
                bail!("--grid takes min,max,steps, got {} values", grid.len());
            };
            if steps.fract() != 0.0 || steps < 0.0 {
                bail!("grid steps must be a whole number, got {steps}");
            }
            let spec = SweepSpec {
                family,
                grid: (min, max, steps as usize),
                dim: 2,
                outputs: sweep::ALL_QUANTITIES.to_vec(),
            };
            (spec, Vec::new())
        }
    };
    if let Some(d) = args.dim {
        spec.dim = d;
    }
    if let Some(o) = &args.outputs {
        spec.outputs = o.clone();
    }
    spec.validate()?;
    Ok((spec, inputs))
}

fn run_sweep(args: &SweepArgs, opts: &Options, common: &Common) -> anyhow::Result<ExitCode> {
    let (spec, inputs) = sweep_spec(args, common.input.as_deref())?;
    let ctx = opts.thermal(None)?;
    let out = sweep::run(&spec, &ctx, &opts.settings)?;
    let (header, rows) = out.csv_table(&spec);
    let mut csv = Vec::new();
    report::write_csv(&mut csv, &header, &rows)?;

    let result = json!({
        "spec": spec,
        "bisectionWidth": sweep::BISECTION_WIDTH,
        "rows": out.rows,
        "transition": out.transition,
    });
    let outcome = Outcome {
        command: "sweep".into(),
        inputs,
        thermal: ctx,
        verdict: None,
        conclusion: None,
        result,
        summary: Vec::new(),
    };
    let summary = report::render_json(&build_report(outcome, opts))?;
    if let Some(path) = &args.summary {
        report::emit(Some(path), &summary)?;
    }
    match (common.format, &common.output) {
        // CSV to the file, summary to stdout unless it went to --summary
        (_, Some(path)) => {
            report::emit(Some(path), &csv)?;
            if args.summary.is_none() {
                report::emit(None, &summary)?;
            }
        }
        (Format::Csv, None) => report::emit(None, &csv)?,
        (Format::Json, None) => report::emit(None, &summary)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let c = &cli.common;
    let opts = Options {
        input: c.input.clone(),
        kbt_ln2: c.kbt_ln2,
        temp: c.temp,
        settings: settings(c)?,
        seed: c.seed,
    };
    let outcome = match &cli.command {
        Command::Work { cmd: WorkCmd::Eval { hamiltonian } } => commands::work_eval(&opts, hamiltonian.as_deref())?,
        Command::Steering { cmd } => {
            let (sub, m) = match cmd {
                SteeringCmd::Assemble(m) => ("assemble", m),
                SteeringCmd::CheckLhs(m) => ("check-lhs", m),
                SteeringCmd::Robustness(m) => ("robustness", m),
                SteeringCmd::Certify(m) => ("certify", m),
                SteeringCmd::Energy(m) => ("energy", m),
            };
            commands::steering(&opts, sub, m.measurements.as_deref())?
        }
        Command::Incompat { cmd } => match cmd {
            IncompatCmd::Check => commands::incompat(&opts, "check")?,
            IncompatCmd::CertifyEnergy => commands::incompat(&opts, "certify-energy")?,
            IncompatCmd::Broadcast => commands::channels(&opts, "broadcast-check")?,
            IncompatCmd::ChannelCertify => commands::channels(&opts, "certify")?,
        },
        Command::Channels { cmd } => match cmd {
            ChannelsCmd::BroadcastCheck => commands::channels(&opts, "broadcast-check")?,
            ChannelsCmd::Certify => commands::channels(&opts, "certify")?,
            ChannelsCmd::Payoff { channels } => commands::channels_payoff(&opts, channels)?,
        },
        Command::Sweep(args) => return run_sweep(args, &opts, c),
    };
    finish(outcome, &opts, c)
}

fn main() -> ExitCode {
    // usage errors exit 1, since 2 means inconclusive
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
