//! Session runner and experiment harness.
//!
//! `qkd run` executes one session with both parties in-process and prints
//! a JSON report; `qkd sweep` repeats runs over a parameter grid and
//! prints CSV; `qkd serve` runs one party over TCP.
//!
//! Exit codes: 0 session completed, 2 session aborted on QBER, 1 error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qkd::bits::pack_bits;
use qkd::channel::SourceModel;
use qkd::eve::{BasisPolicy, EveStrategy};
use qkd::protocol::{Protocol, SessionConfig};
use qkd::report::RunReport;
use qkd::rngs::derive_seed;
use qkd::session::{connect_sender, run_in_process, serve_receiver};

#[derive(Parser)]
#[command(name = "qkd", version, about = "Desk-scale quantum key distribution simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one session with both parties in-process
    Run(RunArgs),
    /// Run one session per (value, repeat) over a parameter grid, CSV out
    Sweep(SweepArgs),
    /// Run one party of a session over TCP
    Serve(ServeArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Protocol: bb84, b92 or e91
    #[arg(long)]
    protocol: Option<ProtocolArg>,
    /// Number of pulses to transmit
    #[arg(long)]
    pulses: Option<u32>,
    /// Eavesdropper: none, intercept:FRACTION[:random|rect|diag], beamsplit
    #[arg(long)]
    eve: Option<String>,
    /// Per-photon depolarization probability
    #[arg(long)]
    noise: Option<f64>,
    /// Per-photon loss probability
    #[arg(long)]
    loss: Option<f64>,
    /// Photon source: single or poisson:MU
    #[arg(long)]
    source: Option<String>,
    /// Fraction of sifted bits sacrificed for QBER estimation
    #[arg(long = "sample-frac")]
    sample_frac: Option<f64>,
    /// QBER above which the session aborts
    #[arg(long = "qber-threshold")]
    qber_threshold: Option<f64>,
    /// Master seed (falls back to env QKD_SEED, then 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Privacy amplification security parameter in bits
    #[arg(long = "security-param")]
    security_param: Option<u32>,
    /// JSON config file with flat dotted keys; flags win over the file
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct OutputArgs {
    /// Report format on stdout
    #[arg(long, value_enum, default_value_t = OutFormat::Json)]
    out: OutFormat,
    /// Write the final key as hex to this file. INSECURE, demo only.
    #[arg(long = "dump-key")]
    dump_key: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Parameter to sweep: eve-fraction, noise, loss, mu or pulses
    #[arg(long)]
    param: String,
    /// Comma-separated values
    #[arg(long, value_delimiter = ',')]
    values: Vec<f64>,
    /// Runs per value
    #[arg(long, default_value_t = 10)]
    repeats: u32,
}

#[derive(Args)]
struct ServeArgs {
    /// Which party this process runs
    role: ServeRole,
    /// Listen address (receiver), e.g. 127.0.0.1:4711
    #[arg(long)]
    listen: Option<String>,
    /// Connect address (sender)
    #[arg(long)]
    connect: Option<String>,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ServeRole {
    Sender,
    Receiver,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    Bb84,
    B92,
    E91,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Protocol {
        match p {
            ProtocolArg::Bb84 => Protocol::Bb84,
            ProtocolArg::B92 => Protocol::B92,
            ProtocolArg::E91 => Protocol::E91,
        }
    }
}

fn parse_protocol(s: &str) -> Result<Protocol, String> {
    match s {
        "bb84" => Ok(Protocol::Bb84),
        "b92" => Ok(Protocol::B92),
        "e91" => Ok(Protocol::E91),
        _ => Err(format!("unknown protocol {s:?} (expected bb84, b92 or e91)")),
    }
}

fn parse_eve(s: &str) -> Result<EveStrategy, String> {
    let mut parts = s.split(':');
    match parts.next().unwrap_or("") {
        "none" => Ok(EveStrategy::None),
        "beamsplit" => Ok(EveStrategy::BeamSplit),
        "intercept" => {
            let fraction = parts
                .next()
                .ok_or("intercept needs a fraction, e.g. intercept:0.5")?
                .parse::<f64>()
                .map_err(|e| format!("bad intercept fraction: {e}"))?;
            let policy = match parts.next() {
                None | Some("random") => BasisPolicy::RandomBasis,
                Some("rect") => BasisPolicy::FixedRectilinear,
                Some("diag") => BasisPolicy::FixedDiagonal,
                Some(other) => return Err(format!("unknown basis policy {other:?}")),
            };
            Ok(EveStrategy::InterceptResend { fraction, policy })
        }
        other => Err(format!("unknown eve strategy {other:?}")),
    }
}

fn parse_source(s: &str) -> Result<SourceModel, String> {
    let mut parts = s.split(':');
    match parts.next().unwrap_or("") {
        "single" => Ok(SourceModel::SinglePhoton),
        "poisson" => {
            let mu = parts
                .next()
                .ok_or("poisson needs a mean, e.g. poisson:1.0")?
                .parse::<f64>()
                .map_err(|e| format!("bad poisson mean: {e}"))?;
            Ok(SourceModel::Poisson(mu))
        }
        other => Err(format!("unknown source {other:?}")),
    }
}

/// Applies one flat dotted config-file key.
fn apply_file_key(cfg: &mut SessionConfig, key: &str, value: &serde_json::Value) -> Result<(), String> {
    let as_f64 =
        || value.as_f64().ok_or_else(|| format!("key {key:?} expects a number, got {value}"));
    let as_str =
        || value.as_str().ok_or_else(|| format!("key {key:?} expects a string, got {value}"));
    match key {
        "protocol" => cfg.protocol = parse_protocol(as_str()?)?,
        "pulses" => cfg.n_pulses = as_f64()? as u32,
        "eve" => cfg.eve = parse_eve(as_str()?)?,
        "channel.noise" => cfg.noise = as_f64()?,
        "channel.loss" => cfg.loss = as_f64()?,
        "source" => cfg.source = parse_source(as_str()?)?,
        "sample_fraction" => cfg.sample_fraction = as_f64()?,
        "qber_threshold" => cfg.qber_abort_threshold = as_f64()?,
        "security_param" => cfg.security_param = as_f64()? as u32,
        "seed" => {
            cfg.seed = value
                .as_u64()
                .ok_or_else(|| format!("key \"seed\" expects an unsigned integer, got {value}"))?
        }
        other => return Err(format!("unknown config key {other:?}")),
    }
    Ok(())
}

fn build_config(args: &ConfigArgs) -> Result<SessionConfig, String> {
    let mut cfg = SessionConfig::new(Protocol::Bb84, 10_000, 0);
    if let Ok(seed) = std::env::var("QKD_SEED") {
        cfg.seed = seed.parse().map_err(|e| format!("bad QKD_SEED: {e}"))?;
    }
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text)
            .map_err(|e| format!("config file is not a JSON object: {e}"))?;
        for (key, value) in &map {
            apply_file_key(&mut cfg, key, value)?;
        }
    }
    if let Some(p) = args.protocol {
        cfg.protocol = p.into();
    }
    if let Some(n) = args.pulses {
        cfg.n_pulses = n;
    }
    if let Some(e) = &args.eve {
        cfg.eve = parse_eve(e)?;
    }
    if let Some(v) = args.noise {
        cfg.noise = v;
    }
    if let Some(v) = args.loss {
        cfg.loss = v;
    }
    if let Some(s) = &args.source {
        cfg.source = parse_source(s)?;
    }
    if let Some(v) = args.sample_frac {
        cfg.sample_fraction = v;
    }
    if let Some(v) = args.qber_threshold {
        cfg.qber_abort_threshold = v;
    }
    if let Some(v) = args.security_param {
        cfg.security_param = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn emit_report(report: &RunReport, output: &OutputArgs, final_key: &[bool]) -> Result<(), String> {
    match output.out {
        OutFormat::Json => println!("{}", report.to_json()),
        OutFormat::Csv => {
            println!("{}", RunReport::CSV_HEADER);
            println!("{}", report.to_csv_row());
        }
    }
    if let Some(path) = &output.dump_key {
        let hex: String = pack_bits(final_key).iter().map(|b| format!("{b:02x}")).collect();
        let contents = format!("# INSECURE demo key dump: {} bits\n{hex}\n", final_key.len());
        std::fs::write(path, contents).map_err(|e| format!("cannot write key dump: {e}"))?;
        eprintln!("warning: final key written to {} (insecure, demo only)", path.display());
    }
    Ok(())
}

fn exit_for(status: &str) -> ExitCode {
    if status == "completed" {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_run(args: &RunArgs) -> Result<ExitCode, String> {
    let cfg = build_config(&args.config)?;
    let start = Instant::now();
    let (sender, receiver) = run_in_process(&cfg).map_err(|e| e.to_string())?;
    let wall = start.elapsed().as_secs_f64() * 1e3;
    let report = RunReport::from_session(&cfg, &sender, &receiver, wall);
    emit_report(&report, &args.output, &receiver.final_key)?;
    Ok(exit_for(&report.status))
}

fn cmd_sweep(args: &SweepArgs) -> Result<ExitCode, String> {
    let base = build_config(&args.config)?;
    if args.values.is_empty() {
        return Err("sweep needs at least one value".into());
    }
    println!("param,value,repeat,{}", RunReport::CSV_HEADER);
    for (vi, &value) in args.values.iter().enumerate() {
        for repeat in 0..args.repeats {
            let mut cfg = base.clone();
            match args.param.as_str() {
                "eve-fraction" => {
                    let policy = match cfg.eve {
                        EveStrategy::InterceptResend { policy, .. } => policy,
                        _ => BasisPolicy::RandomBasis,
                    };
                    cfg.eve = EveStrategy::InterceptResend { fraction: value, policy };
                }
                "noise" => cfg.noise = value,
                "loss" => cfg.loss = value,
                "mu" => cfg.source = SourceModel::Poisson(value),
                "pulses" => cfg.n_pulses = value as u32,
                other => return Err(format!("unknown sweep parameter {other:?}")),
            }
            cfg.seed = derive_seed(base.seed, (vi as u64) << 32 | repeat as u64);
            cfg.validate().map_err(|e| e.to_string())?;
            let start = Instant::now();
            let (sender, receiver) = run_in_process(&cfg).map_err(|e| e.to_string())?;
            let wall = start.elapsed().as_secs_f64() * 1e3;
            let report = RunReport::from_session(&cfg, &sender, &receiver, wall);
            println!("{},{},{},{}", args.param, value, repeat, report.to_csv_row());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_serve(args: &ServeArgs) -> Result<ExitCode, String> {
    let cfg = build_config(&args.config)?;
    let start = Instant::now();
    let outcome = match args.role {
        ServeRole::Sender => {
            let addr = args.connect.as_deref().ok_or("sender needs --connect ADDR:PORT")?;
            connect_sender(&cfg, addr).map_err(|e| e.to_string())?
        }
        ServeRole::Receiver => {
            let addr = args.listen.as_deref().ok_or("receiver needs --listen ADDR:PORT")?;
            serve_receiver(&cfg, addr).map_err(|e| e.to_string())?
        }
    };
    let wall = start.elapsed().as_secs_f64() * 1e3;
    let report = RunReport::from_outcome(&cfg, &outcome, wall);
    emit_report(&report, &args.output, &outcome.final_key)?;
    Ok(exit_for(&report.status))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Serve(args) => cmd_serve(args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
