//! Argument parsing and command execution.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use tcpsim_core::{Scenario, Variant};

use crate::config::{self, FileConfig};
use crate::sweep::{self, OutputError, RunResult};
use crate::tracecheck;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Run the base scenario once.
    Run,
    /// Run every scenario of the [sweep] sections.
    Sweep,
    /// Run the base scenario with tracing and check the trace.
    TraceCheck,
}

/// Deterministic TCP-over-route-outage simulator.
#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = "tcpsim", version, arg_required_else_help = true)]
pub struct CliConfig {
    #[arg(value_enum, required_unless_present = "print_defaults")]
    pub command: Option<Command>,

    /// Scenario or sweep file.
    #[arg(long, value_name = "PATH", required_unless_present = "print_defaults")]
    pub config: Option<PathBuf>,

    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "results")]
    pub out: PathBuf,

    /// Replaces the seed (and a sweep's seed list).
    #[arg(long)]
    pub seed: Option<u64>,

    /// Replaces the variant (and a sweep's variant list).
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,

    /// Worker threads for sweeps. Output order never depends on it.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u16).range(1..))]
    pub jobs: u16,

    /// Write trace-<scenario>.txt for every run.
    #[arg(long)]
    pub trace: bool,

    /// Golden trace that trace-check must reproduce byte for byte.
    #[arg(long, value_name = "PATH")]
    pub expect: Option<PathBuf>,

    /// Print the default configuration file and exit.
    #[arg(long, conflicts_with_all = ["command", "config", "seed", "variant", "trace", "expect"])]
    pub print_defaults: bool,

    /// More progress output on stderr.
    #[arg(short, long, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse().map_err(|e: tcpsim_core::CcError| e.to_string())
}

pub fn parse_args<I, T>(argv: I) -> Result<CliConfig, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = CliConfig::try_parse_from(argv)?;
    if cli.expect.is_some() && cli.command != Some(Command::TraceCheck) {
        return Err(clap::Error::raw(
            clap::error::ErrorKind::ArgumentConflict,
            "--expect is only valid with trace-check\n",
        ));
    }
    Ok(cli)
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Config { path: PathBuf, source: config::ConfigError },
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("trace check failed for {scenario}: {source}")]
    Trace { scenario: String, source: tracecheck::TraceError },
}

/// Runs the command. Returns the process exit code.
pub fn execute(cli: &CliConfig) -> i32 {
    match try_execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Output(OutputError::RunsFailed { failures, .. }) = &e {
                for (id, why) in failures {
                    eprintln!("  {id}: {why}");
                }
            }
            1
        }
    }
}

fn load(cli: &CliConfig) -> Result<FileConfig, CliError> {
    let path = cli.config.clone().expect("clap requires --config for commands");
    let text = fs::read_to_string(&path).map_err(|source| CliError::Read { path: path.clone(), source })?;
    let mut cfg = config::parse(&text).map_err(|source| CliError::Config { path: path.clone(), source })?;
    if let Some(seed) = cli.seed {
        cfg.base.seed = seed;
        cfg.sweep.seeds = vec![seed];
    }
    if let Some(v) = cli.variant {
        cfg.base.variant = v;
        cfg.sweep.variants = vec![v];
    }
    if cli.trace {
        cfg.base.trace = true;
    }
    Ok(cfg)
}

fn try_execute(cli: &CliConfig) -> Result<(), CliError> {
    if cli.print_defaults {
        print!("{}", config::render(&FileConfig::default()));
        return Ok(());
    }
    let command = cli.command.expect("clap requires a command");
    let mut cfg = load(cli)?;
    let expected = match &cli.expect {
        Some(p) => Some(fs::read_to_string(p).map_err(|source| CliError::Read { path: p.clone(), source })?),
        None => None,
    };
    sweep::prepare_output_dir(&cli.out)?;

    let scenarios = match command {
        Command::Run => vec![Scenario::single(cfg.base.clone())],
        Command::TraceCheck => {
            cfg.base.trace = true;
            vec![Scenario::single(cfg.base.clone())]
        }
        Command::Sweep => cfg.sweep_scenarios().map_err(|source| CliError::Config {
            path: cli.config.clone().unwrap_or_default(),
            source,
        })?,
    };
    if cli.verbose > 0 {
        eprintln!("running {} scenario(s) on {} thread(s)", scenarios.len(), cli.jobs);
    }
    let started = Instant::now();
    let results = sweep::run_sweep(&scenarios, usize::from(cli.jobs));
    if cli.verbose > 0 {
        eprintln!("finished in {:.2?}", started.elapsed());
    }
    if command == Command::TraceCheck {
        check_traces(&results, expected.as_deref())?;
    }
    let files = sweep::render_outputs(&results)?;
    let written = sweep::write_atomically(&cli.out, &files)?;

    if command != Command::Sweep || cli.verbose > 1 {
        for r in &results {
            print_summary(r);
        }
    }
    if cli.verbose > 0 {
        for p in &written {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn check_traces(results: &[RunResult], expected: Option<&str>) -> Result<(), CliError> {
    for r in results {
        let Ok(out) = &r.outcome else { continue };
        let trace = out.trace.as_deref().unwrap_or("");
        let fail = |source| CliError::Trace { scenario: r.scenario.id(), source };
        let summary = tracecheck::check(trace, &out.metrics).map_err(fail)?;
        if let Some(exp) = expected {
            tracecheck::compare(exp, trace).map_err(fail)?;
        }
        let counts: Vec<String> = summary.iter().map(|(k, v)| format!("{k}={v}")).collect();
        println!("{}: trace ok ({})", r.scenario.id(), counts.join(" "));
    }
    Ok(())
}

fn print_summary(r: &RunResult) {
    if let Ok(out) = &r.outcome {
        let m = &out.metrics;
        println!(
            "{} throughput_bps={:.3} pdr={} delivered={} sent={} retransmitted={} timeouts={} fast_retransmits={}",
            r.scenario.id(),
            m.throughput().unwrap_or(0.0),
            m.packet_delivery_ratio().map_or_else(|_| "-".into(), |p| format!("{p:.6}")),
            m.bytes_delivered,
            m.segments_sent,
            m.segments_retransmitted,
            m.timeouts,
            m.fast_retransmits,
        );
    }
}
