//! Command-line front end: case generation, simulation, recovery,
//! curve scoring, and replay of the bundled experiments.
//!
//! Every command is deterministic for a fixed argument list and seed,
//! and all files land through a temp-file rename, so reruns are
//! byte-identical and interrupted runs never leave partial output.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::evaluate::{log_decrement, nadir, normalized_mse, propagation_speed, RecoveryReport};
use crate::grid::{make_synthetic_case, resolve_case, GridCase, OutputSpec, Topology};
use crate::io;
use crate::modal::{decompose, ModalDecomposition};
use crate::recovery::{classify_relation, recover, CorrelationMethod, RecoveryConfig, Scaling};
use crate::response::{ImpulseResponse, ResponseKind};
use crate::sim::{
    degrade_frequency, map_outputs, simulate_ambient, simulate_impulse, AmbientConfig, InputMode,
    Modulation,
};
use crate::trace::{Channel, ChannelKind, SignalTrace};

/// Parses arguments, runs the requested command, and maps failures to
/// exit codes: 2 when a named input file is missing, 1 otherwise.
pub fn run() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => 2,
        _ => 1,
    }
}

fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Case(CaseCommand::Gen(a)) => run_case_gen(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Recover(a) => run_recover(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Reproduce(a) => run_reproduce(a),
    }
}

#[derive(Parser)]
#[command(
    name = "gridresp",
    version,
    about = "Swing-dynamics simulation and ambient response recovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Case-file utilities.
    #[command(subcommand)]
    Case(CaseCommand),
    /// Simulate a case into a trace CSV plus metadata sidecar.
    Simulate(SimulateArgs),
    /// Recover impulse-response curves from a recorded trace.
    Recover(RecoverArgs),
    /// Score a recovered curve against a reference curve.
    Evaluate(EvaluateArgs),
    /// Replay a bundled experiment end to end.
    Reproduce(ReproduceArgs),
}

#[derive(Subcommand)]
enum CaseCommand {
    /// Generate a random connected synthetic case file.
    Gen(CaseGenArgs),
}

#[derive(Args)]
struct CaseGenArgs {
    /// Number of machines.
    #[arg(long)]
    machines: usize,
    /// Network shape: chain, ring, or complete.
    #[arg(long, default_value = "ring", value_parser = parse_topology)]
    topology: Topology,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Destination case file.
    #[arg(long, default_value = "synthetic.case")]
    out: PathBuf,
    /// Output format; only csv-style plain text is produced.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: String,
}

#[derive(Args)]
struct SimulateArgs {
    /// Case file path, or builtin:<name>.
    #[arg(long)]
    case: String,
    /// Ambient record driven by stochastic forcing (the default).
    #[arg(long, conflicts_with = "impulse")]
    ambient: bool,
    /// Unit-impulse record from a single source machine.
    #[arg(long, requires = "source")]
    impulse: bool,
    /// Machine receiving the impulse.
    #[arg(long)]
    source: Option<u32>,
    /// Record length in seconds (ambient runs).
    #[arg(long, default_value_t = 600.0)]
    duration: f64,
    /// Sample rate in Hz (ambient runs).
    #[arg(long, default_value_t = 100.0)]
    rate: f64,
    /// Sample step in seconds (impulse runs).
    #[arg(long, default_value_t = 1e-3)]
    dt: f64,
    /// Impulse-run length in seconds.
    #[arg(long, default_value_t = 20.0)]
    horizon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Forcing intensity.
    #[arg(long, default_value_t = 0.01)]
    alpha: f64,
    /// Where the stochastic forcing enters.
    #[arg(long, default_value = "generator-white", value_parser = parse_input_mode)]
    input_mode: InputMode,
    /// Machines receiving load perturbations (default: all).
    #[arg(long, value_delimiter = ',')]
    loads: Option<Vec<u32>>,
    /// Measurement noise as a fraction of each channel's RMS.
    #[arg(long, default_value_t = 0.0)]
    noise_rel: f64,
    /// Record the forcing as input:<id> channels.
    #[arg(long)]
    record_input: bool,
    /// Slow forcing swell, written period_s:depth.
    #[arg(long, value_parser = parse_modulation)]
    modulation: Option<Modulation>,
    /// Extra observable channels, e.g. bus:1,line:1-2.
    #[arg(long, value_delimiter = ',', value_parser = parse_output)]
    outputs: Vec<OutputSpec>,
    /// One-pole low-pass cutoff in Hz applied to frequency channels,
    /// standing in for an instrument's internal filtering.
    #[arg(long)]
    degrade_freq: Option<f64>,
    /// Cascade order of the degradation filter.
    #[arg(long, default_value_t = 2)]
    degrade_order: usize,
    /// Destination trace CSV.
    #[arg(long, default_value = "trace.csv")]
    out: PathBuf,
    /// Output format; only csv is supported.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: String,
}

#[derive(Args)]
struct RecoverArgs {
    /// Input trace CSV.
    #[arg(long)]
    trace: PathBuf,
    /// key=value file with recovery settings and optional [pair <name>]
    /// sections for batch runs.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Source channel name, e.g. rotor_freq:2.
    #[arg(long)]
    source: Option<String>,
    /// Target channel name, e.g. rotor_freq:1 or line_flow:1-2.
    #[arg(long)]
    target: Option<String>,
    /// Differentiation order; inferred from the channel kinds when
    /// omitted.
    #[arg(long)]
    order: Option<usize>,
    /// Detrending passband lo:hi in Hz, or "none" to only remove means.
    #[arg(long, value_parser = parse_passband)]
    passband: Option<PassbandArg>,
    #[arg(long, default_value_t = 10.0)]
    max_lag: f64,
    /// Correlation backend: fft or direct.
    #[arg(long, default_value = "fft", value_parser = parse_method)]
    method: CorrelationMethod,
    /// Curve scale: none, theoretical, or nadir.
    #[arg(long, default_value = "none")]
    scaling: String,
    /// Damping ratio for theoretical scaling.
    #[arg(long)]
    gamma: Option<f64>,
    /// Forcing intensity for theoretical scaling.
    #[arg(long)]
    alpha: Option<f64>,
    /// Reference extremum for nadir scaling.
    #[arg(long)]
    nadir_ref: Option<f64>,
    /// Keep the common angle drift instead of subtracting the
    /// across-channel mean.
    #[arg(long)]
    no_reference: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Output format; only csv is supported.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: String,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Recovered curve CSV.
    #[arg(long)]
    estimate: PathBuf,
    /// Reference curve CSV.
    #[arg(long)]
    truth: PathBuf,
    /// Report destination.
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
    /// Output format; only csv is supported.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: String,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Bundled experiment: wscc9-uniform, wscc9-nonuniform-load, or
    /// nadir-lag.
    name: String,
    /// Output directory; defaults to reproduce-<name>.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Output format; only csv is supported.
    #[arg(long, default_value = "csv", value_parser = parse_format)]
    format: String,
}

/// A passband argument: a band in Hz or an explicit "none".
#[derive(Debug, Clone, Copy)]
struct PassbandArg(Option<(f64, f64)>);

fn parse_topology(s: &str) -> std::result::Result<Topology, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_output(s: &str) -> std::result::Result<OutputSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_input_mode(s: &str) -> std::result::Result<InputMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_method(s: &str) -> std::result::Result<CorrelationMethod, String> {
    match s {
        "fft" => Ok(CorrelationMethod::Fft),
        "direct" => Ok(CorrelationMethod::Direct),
        other => Err(format!("unknown method {other:?} (have fft, direct)")),
    }
}

fn parse_format(s: &str) -> std::result::Result<String, String> {
    if s == "csv" {
        Ok(s.to_string())
    } else {
        Err(format!("unsupported format {s:?}; only csv is available"))
    }
}

fn parse_passband(s: &str) -> std::result::Result<PassbandArg, String> {
    if s == "none" {
        return Ok(PassbandArg(None));
    }
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected lo:hi or none, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad low edge {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad high edge {hi:?}"))?;
    Ok(PassbandArg(Some((lo, hi))))
}

fn parse_modulation(s: &str) -> std::result::Result<Modulation, String> {
    let (p, d) = s
        .split_once(':')
        .ok_or_else(|| format!("expected period_s:depth, got {s:?}"))?;
    let period_s: f64 = p.trim().parse().map_err(|_| format!("bad period {p:?}"))?;
    let depth: f64 = d.trim().parse().map_err(|_| format!("bad depth {d:?}"))?;
    Ok(Modulation { period_s, depth })
}

fn run_case_gen(a: &CaseGenArgs) -> Result<()> {
    let case = make_synthetic_case(a.machines, a.topology, a.seed)?;
    case.write_case(&a.out)?;
    println!(
        "wrote {}-machine {} case to {}",
        case.n(),
        a.topology,
        a.out.display()
    );
    Ok(())
}

fn run_simulate(a: &SimulateArgs) -> Result<()> {
    let case = resolve_case(&a.case)?;
    let mut meta: Vec<(String, String)> = vec![("case".into(), a.case.clone())];
    let push = |meta: &mut Vec<(String, String)>, k: &str, v: String| {
        meta.push((k.to_string(), v));
    };

    let trace = if a.impulse {
        let source = a.source.expect("required by the argument grammar");
        if !(a.dt > 0.0) {
            return Err(Error::Config(format!("step must be positive, got {}", a.dt)));
        }
        let t = simulate_impulse(&case, source, 1.0 / a.dt, a.horizon)?;
        push(&mut meta, "mode", "impulse".into());
        push(&mut meta, "source", source.to_string());
        push(&mut meta, "dt", a.dt.to_string());
        push(&mut meta, "horizon_s", a.horizon.to_string());
        map_outputs(&t, &case, &a.outputs)?
    } else {
        let cfg = AmbientConfig {
            duration_s: a.duration,
            rate_hz: a.rate,
            alpha: a.alpha,
            seed: a.seed,
            input_mode: a.input_mode,
            load_machines: a.loads.clone(),
            measurement_noise_rel: a.noise_rel,
            record_input: a.record_input,
            modulation: a.modulation,
        };
        push(&mut meta, "mode", "ambient".into());
        push(&mut meta, "duration_s", a.duration.to_string());
        push(&mut meta, "seed", a.seed.to_string());
        push(&mut meta, "alpha", a.alpha.to_string());
        push(&mut meta, "input_mode", a.input_mode.to_string());
        push(&mut meta, "noise_rel", a.noise_rel.to_string());
        simulate_ambient(&case, &cfg, &a.outputs)?
    };

    let trace = match a.degrade_freq {
        Some(cutoff) => {
            push(&mut meta, "degrade_freq_hz", cutoff.to_string());
            push(&mut meta, "degrade_order", a.degrade_order.to_string());
            degrade_frequency(&trace, cutoff, a.degrade_order)?
        }
        None => trace,
    };

    io::write_trace_csv(&a.out, &trace, &meta)?;
    println!(
        "wrote {} samples x {} channels to {}",
        trace.len(),
        trace.channels().len(),
        a.out.display()
    );
    Ok(())
}

/// One named recovery job assembled from flags and/or a config file.
struct PairJob {
    name: String,
    cfg: RecoveryConfig,
}

fn run_recover(a: &RecoverArgs) -> Result<()> {
    let trace = io::read_trace_csv(&a.trace)?;
    let jobs = recover_jobs(a, &trace)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;

    let mut reports = Vec::with_capacity(jobs.len());
    for job in &jobs {
        let est = recover(&trace, &job.cfg)?;
        let path = a.out_dir.join(format!("response_{}.csv", slug(&job.name)));
        io::write_response_csv(&path, &est)?;
        let report = RecoveryReport::from_curves(&est, None);
        println!(
            "{}: {} -> {} [{}] nadir {:.3}s, wrote {}",
            job.name,
            est.source,
            est.target,
            est.relation.as_deref().unwrap_or("-"),
            report.nadir.map(|n| n.time_s).unwrap_or(f64::NAN),
            path.display()
        );
        reports.push(report);
    }
    let report_path = a.out_dir.join("report.csv");
    io::write_report_csv(&report_path, &reports)?;
    println!("wrote {}", report_path.display());
    Ok(())
}

/// Builds the job list: every [pair] section of the config file, or the
/// single pair named by --source/--target. Flags fill in any setting a
/// section leaves out; section values win over flags.
fn recover_jobs(a: &RecoverArgs, trace: &SignalTrace) -> Result<Vec<PairJob>> {
    let file = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Some(io::parse_kv(&text)?)
        }
        None => None,
    };

    let mut jobs = Vec::new();
    if let Some(kv) = &file {
        let sections: Vec<(String, Vec<(String, String)>)> = if kv.sections.is_empty() {
            vec![("pair".to_string(), Vec::new())]
        } else {
            kv.sections.clone()
        };
        for (heading, entries) in sections {
            let name = heading.strip_prefix("pair").unwrap_or(&heading).trim();
            let lookup = |key: &str| -> Option<String> {
                entries
                    .iter()
                    .chain(kv.globals.iter())
                    .find(|(k, _)| k == key)
                    .map(|(_, v)| v.clone())
            };
            let job = build_job(a, trace, name, &lookup)?;
            jobs.push(job);
        }
    } else {
        let lookup = |_: &str| None;
        jobs.push(build_job(a, trace, "", &lookup)?);
    }
    Ok(jobs)
}

fn build_job(
    a: &RecoverArgs,
    trace: &SignalTrace,
    name: &str,
    lookup: &dyn Fn(&str) -> Option<String>,
) -> Result<PairJob> {
    let source = match lookup("source") {
        Some(s) => s,
        None => a.source.clone().ok_or_else(|| {
            Error::Config("no source channel; pass --source or a config file pair".into())
        })?,
    };
    let target = match lookup("target") {
        Some(s) => s,
        None => a.target.clone().ok_or_else(|| {
            Error::Config("no target channel; pass --target or a config file pair".into())
        })?,
    };

    let src_kind = trace.require(&source)?.kind;
    let tgt_kind = trace.require(&target)?.kind;
    let order = match lookup("order") {
        Some(s) => parse_field("order", &s)?,
        None => a.order.unwrap_or_else(|| default_order(src_kind, tgt_kind)),
    };
    let passband = match lookup("passband") {
        Some(s) => parse_passband(&s).map_err(Error::Config)?.0,
        None => a.passband.map(|p| p.0).unwrap_or(Some((0.1, 0.8))),
    };
    let max_lag_s = match lookup("max_lag_s") {
        Some(s) => parse_field("max_lag_s", &s)?,
        None => a.max_lag,
    };
    let method = match lookup("method") {
        Some(s) => parse_method(&s).map_err(Error::Config)?,
        None => a.method,
    };
    let subtract = match lookup("subtract_reference_angle") {
        Some(s) => parse_field("subtract_reference_angle", &s)?,
        None => !a.no_reference,
    };
    let scaling = parse_scaling(
        &lookup("scaling").unwrap_or_else(|| a.scaling.clone()),
        lookup("gamma")
            .map(|s| parse_field("gamma", &s))
            .transpose()?
            .or(a.gamma),
        lookup("alpha")
            .map(|s| parse_field("alpha", &s))
            .transpose()?
            .or(a.alpha),
        lookup("nadir_ref")
            .map(|s| parse_field("nadir_ref", &s))
            .transpose()?
            .or(a.nadir_ref),
    )?;

    // The fallback name is already in slug form so the printed name
    // and the response file agree.
    let display_name = if name.is_empty() {
        format!("{}--{}", slug(&source), slug(&target))
    } else {
        name.to_string()
    };
    Ok(PairJob {
        name: display_name,
        cfg: RecoveryConfig {
            source,
            target,
            differentiation_order: order,
            passband_hz: passband,
            max_lag_s,
            scaling,
            subtract_reference_angle: subtract,
            method,
        },
    })
}

/// Canonical derivative order for a channel-kind pairing; overridable
/// for the alternative frequency paths.
fn default_order(src: ChannelKind, tgt: ChannelKind) -> usize {
    if src.is_angle() && (tgt.is_angle() || tgt.is_flow()) {
        1
    } else {
        0
    }
}

fn parse_scaling(
    mode: &str,
    gamma: Option<f64>,
    alpha: Option<f64>,
    nadir_ref: Option<f64>,
) -> Result<Scaling> {
    match mode {
        "none" => Ok(Scaling::None),
        "theoretical" => {
            let gamma = gamma.ok_or_else(|| {
                Error::Config("theoretical scaling needs --gamma".into())
            })?;
            let alpha = alpha.ok_or_else(|| {
                Error::Config("theoretical scaling needs --alpha".into())
            })?;
            Ok(Scaling::Theoretical { gamma, alpha })
        }
        "nadir" => {
            let reference = nadir_ref.ok_or_else(|| {
                Error::Config("nadir scaling needs --nadir-ref".into())
            })?;
            Ok(Scaling::NadirMatch { reference })
        }
        other => Err(Error::Config(format!(
            "unknown scaling {other:?} (have none, theoretical, nadir)"
        ))),
    }
}

fn parse_field<T: FromStr>(what: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad {what} value {s:?}")))
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '-' })
        .collect()
}

fn run_evaluate(a: &EvaluateArgs) -> Result<()> {
    let est = io::read_response_csv(&a.estimate)?;
    let truth = io::read_response_csv(&a.truth)?;
    let report = RecoveryReport::from_curves(&est, Some(&truth));
    match report.normalized_mse {
        Some(m) => println!("normalized mse {m:.4}"),
        None => println!("normalized mse unavailable (no shared lag support)"),
    }
    if let Some(n) = report.nadir {
        println!("nadir {:.4} at {:.3} s", n.value, n.time_s);
    }
    if let Some(m) = report.mode {
        println!(
            "dominant mode {:.4} Hz, log decrement {:.4}",
            m.freq_hz, m.log_decrement
        );
    }
    io::write_report_csv(&a.out, &[report])?;
    println!("wrote {}", a.out.display());
    Ok(())
}

/// How an experiment obtains its reference curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TruthMode {
    /// Closed-form curves from the modal decomposition.
    Analytic,
    /// A simulated unit pulse at the source machine.
    Simulated,
}

struct PairSpec {
    name: String,
    source: String,
    target: String,
    order: usize,
    passband: Option<(f64, f64)>,
}

/// A bundled experiment definition, parsed from its fixture file.
struct ExperimentSpec {
    case_spec: String,
    duration_s: f64,
    rate_hz: f64,
    alpha: f64,
    input_mode: InputMode,
    loads: Option<Vec<u32>>,
    noise_rel: f64,
    outputs: Vec<OutputSpec>,
    seeds: Vec<u64>,
    max_lag_s: f64,
    theoretical_scale: bool,
    truth: TruthMode,
    /// Flip curve signs, turning unit-injection responses into
    /// load-increase responses whose nadir is a dip.
    negate: bool,
    /// Pair whose recovered curve feeds the mode table.
    modes_pair: Option<String>,
    /// Emit the nadir-vs-distance table.
    nadir_table: bool,
    pairs: Vec<PairSpec>,
}

impl ExperimentSpec {
    fn bundled(name: &str) -> Result<ExperimentSpec> {
        let text = match name {
            "wscc9-uniform" => include_str!("../experiments/wscc9-uniform.exp"),
            "wscc9-nonuniform-load" => include_str!("../experiments/wscc9-nonuniform-load.exp"),
            "nadir-lag" => include_str!("../experiments/nadir-lag.exp"),
            other => {
                return Err(Error::UnknownReference(format!(
                    "experiment {other:?} (have wscc9-uniform, wscc9-nonuniform-load, nadir-lag)"
                )))
            }
        };
        ExperimentSpec::parse(text)
    }

    fn parse(text: &str) -> Result<ExperimentSpec> {
        let kv = io::parse_kv(text)?;
        let req = |key: &str| -> Result<&str> {
            kv.global(key)
                .ok_or_else(|| Error::Config(format!("experiment is missing {key}")))
        };

        let seeds = req("seeds")?
            .split_whitespace()
            .map(|s| parse_field::<u64>("seed", s))
            .collect::<Result<Vec<_>>>()?;
        if seeds.is_empty() {
            return Err(Error::Config("experiment needs at least one seed".into()));
        }
        let outputs = kv
            .global("outputs")
            .unwrap_or("")
            .split_whitespace()
            .map(|s| s.parse())
            .collect::<Result<Vec<OutputSpec>>>()?;
        let loads = match kv.global("loads") {
            None | Some("all") => None,
            Some(list) => Some(
                list.split_whitespace()
                    .map(|s| parse_field::<u32>("load machine", s))
                    .collect::<Result<Vec<_>>>()?,
            ),
        };
        let scaling = kv.global("scaling").unwrap_or("theoretical");
        let theoretical_scale = match scaling {
            "theoretical" => true,
            "none" => false,
            other => {
                return Err(Error::Config(format!(
                    "experiment scaling must be theoretical or none, got {other:?}"
                )))
            }
        };
        let truth = match req("truth")? {
            "analytic" => TruthMode::Analytic,
            "simulated" => TruthMode::Simulated,
            other => {
                return Err(Error::Config(format!(
                    "truth must be analytic or simulated, got {other:?}"
                )))
            }
        };

        let mut pairs = Vec::new();
        for (heading, entries) in &kv.sections {
            let name = heading
                .strip_prefix("pair")
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| {
                    Error::Config(format!("section {heading:?} is not a [pair <name>]"))
                })?;
            let get = |key: &str| -> Result<&str> {
                entries
                    .iter()
                    .find(|(k, _)| k == key)
                    .map(|(_, v)| v.as_str())
                    .ok_or_else(|| Error::Config(format!("pair {name} is missing {key}")))
            };
            pairs.push(PairSpec {
                name: name.to_string(),
                source: get("source")?.to_string(),
                target: get("target")?.to_string(),
                order: parse_field("order", get("order")?)?,
                passband: parse_passband(get("passband")?).map_err(Error::Config)?.0,
            });
        }
        if pairs.is_empty() {
            return Err(Error::Config("experiment has no [pair] sections".into()));
        }

        Ok(ExperimentSpec {
            case_spec: req("case")?.to_string(),
            duration_s: parse_field("duration_s", req("duration_s")?)?,
            rate_hz: parse_field("rate_hz", req("rate_hz")?)?,
            alpha: parse_field("alpha", req("alpha")?)?,
            input_mode: req("input_mode")?.parse()?,
            loads,
            noise_rel: parse_field("noise_rel", kv.global("noise_rel").unwrap_or("0"))?,
            outputs,
            seeds,
            max_lag_s: parse_field("max_lag_s", req("max_lag_s")?)?,
            theoretical_scale,
            truth,
            negate: parse_field("negate", kv.global("negate").unwrap_or("false"))?,
            modes_pair: kv.global("modes_pair").map(str::to_string),
            nadir_table: parse_field("nadir_table", kv.global("nadir_table").unwrap_or("false"))?,
            pairs,
        })
    }
}

/// Machine id in a per-machine channel name such as rotor_freq:2.
fn channel_machine_id(name: &str) -> Result<u32> {
    let (_, loc) = Channel::parse_name(name)?;
    loc.parse()
        .map_err(|_| Error::UnknownReference(format!("machine id in channel {name:?}")))
}

/// Machine-space row computing an angle-kind channel from rotor angles.
fn angle_row(case: &GridCase, channel: &str) -> Result<DVector<f64>> {
    let (kind, loc) = Channel::parse_name(channel)?;
    match kind {
        ChannelKind::RotorAngle => {
            let id: u32 = loc
                .parse()
                .map_err(|_| Error::UnknownReference(format!("machine id in {channel:?}")))?;
            let idx = case
                .index_of(id)
                .ok_or_else(|| Error::UnknownReference(format!("machine {id}")))?;
            let mut row = DVector::zeros(case.n());
            row[idx] = 1.0;
            Ok(row)
        }
        ChannelKind::BusAngle => {
            let spec: OutputSpec = format!("bus:{loc}").parse()?;
            Ok(case.output_matrix(&[spec])?.row(0).transpose())
        }
        _ => Err(Error::Config(format!(
            "channel {channel:?} is not an angle channel"
        ))),
    }
}

/// Mean of the machine-space rows of every angle channel the recovery
/// trace carries: the reference the preprocessing stage subtracts.
fn reference_row(case: &GridCase, outputs: &[OutputSpec]) -> Result<DVector<f64>> {
    let n = case.n();
    let mut rows: Vec<DVector<f64>> = (0..n)
        .map(|i| {
            let mut r = DVector::zeros(n);
            r[i] = 1.0;
            r
        })
        .collect();
    for o in outputs {
        if let OutputSpec::Bus(_) = o {
            rows.push(case.output_matrix(std::slice::from_ref(o))?.row(0).transpose());
        }
    }
    let count = rows.len() as f64;
    let mut mean = DVector::zeros(n);
    for r in rows {
        mean += r;
    }
    Ok(mean / count)
}

/// Machine-space direction a channel contributes to the correlation
/// statistics: angle channels enter with the subtracted reference row
/// removed, frequency channels as the plain machine row.
fn channel_direction(
    case: &GridCase,
    channel: &str,
    outputs: &[OutputSpec],
) -> Result<DVector<f64>> {
    let (kind, _) = Channel::parse_name(channel)?;
    match kind {
        ChannelKind::RotorAngle | ChannelKind::BusAngle => {
            Ok(angle_row(case, channel)? - reference_row(case, outputs)?)
        }
        _ => {
            let id = channel_machine_id(channel)?;
            let idx = case
                .index_of(id)
                .ok_or_else(|| Error::UnknownReference(format!("machine {id}")))?;
            let mut row = DVector::zeros(case.n());
            row[idx] = 1.0;
            Ok(row)
        }
    }
}

/// Closed-form reference curve for one pair on the given lag grid.
fn analytic_truth(
    case: &GridCase,
    modal: &ModalDecomposition,
    spec: &ExperimentSpec,
    pair: &PairSpec,
    taus: &[f64],
) -> Result<ImpulseResponse> {
    let src_kind = Channel::parse_name(&pair.source)?.0;
    let tgt_kind = Channel::parse_name(&pair.target)?.0;
    let relation = classify_relation(src_kind, tgt_kind, pair.order)?;
    let src_id = channel_machine_id(&pair.source)?;
    let src_dir = channel_direction(case, &pair.source, &spec.outputs)?;

    let values = match relation.response {
        ResponseKind::Frequency => {
            if src_kind.is_freq() && pair.order == 0 {
                let k = case
                    .index_of(src_id)
                    .ok_or_else(|| Error::UnknownReference(format!("machine {src_id}")))?;
                let tgt_id = channel_machine_id(&pair.target)?;
                let l = case
                    .index_of(tgt_id)
                    .ok_or_else(|| Error::UnknownReference(format!("machine {tgt_id}")))?;
                modal.impulse_frequency(l, k, taus)?
            } else {
                // Angle-based paths: the zero-sum angle directions carry
                // no rigid-mode weight, leaving the oscillatory part.
                let tgt_dir = channel_direction(case, &pair.target, &spec.outputs)?;
                modal.impulse_output_freq_from(&tgt_dir, &src_dir, taus)?
            }
        }
        ResponseKind::Angle | ResponseKind::BusAngle => {
            let row = angle_row(case, &pair.target)? - reference_row(case, &spec.outputs)?;
            modal.impulse_output_angle_from(&row, &src_dir, taus)?
        }
        ResponseKind::LineFlow => {
            let (_, loc) = Channel::parse_name(&pair.target)?;
            let spec_line: OutputSpec = format!("line:{loc}").parse()?;
            let row = case.output_matrix(&[spec_line])?.row(0).transpose();
            modal.impulse_output_angle_from(&row, &src_dir, taus)?
        }
    };
    Ok(ImpulseResponse::analytic(
        taus[1] - taus[0],
        values,
        format!("input:{src_id}"),
        pair.target.clone(),
        relation.response,
    ))
}

/// Reference curve for one pair read off simulated unit pulses, one
/// per machine so any forcing direction comes out by superposition.
fn simulated_truth(
    case: &GridCase,
    imps: &[SignalTrace],
    spec: &ExperimentSpec,
    pair: &PairSpec,
) -> Result<ImpulseResponse> {
    let src_kind = Channel::parse_name(&pair.source)?.0;
    let tgt_kind = Channel::parse_name(&pair.target)?.0;
    let relation = classify_relation(src_kind, tgt_kind, pair.order)?;
    let src_dir = channel_direction(case, &pair.source, &spec.outputs)?;

    let (row, from_freq) = match relation.response {
        ResponseKind::Frequency => {
            if !(src_kind.is_freq() && pair.order == 0) {
                return Err(Error::Config(
                    "simulated truth covers only the undifferentiated frequency path".into(),
                ));
            }
            let tgt_id = channel_machine_id(&pair.target)?;
            let idx = case
                .index_of(tgt_id)
                .ok_or_else(|| Error::UnknownReference(format!("machine {tgt_id}")))?;
            let mut row = DVector::zeros(case.n());
            row[idx] = 1.0;
            (row, true)
        }
        ResponseKind::Angle | ResponseKind::BusAngle => (
            angle_row(case, &pair.target)? - reference_row(case, &spec.outputs)?,
            false,
        ),
        ResponseKind::LineFlow => {
            let (_, loc) = Channel::parse_name(&pair.target)?;
            let spec_line: OutputSpec = format!("line:{loc}").parse()?;
            (case.output_matrix(&[spec_line])?.row(0).transpose(), false)
        }
    };

    let kind = if from_freq {
        ChannelKind::RotorFreq
    } else {
        ChannelKind::RotorAngle
    };
    let mut values = vec![0.0; imps[0].len()];
    for (l, imp) in imps.iter().enumerate() {
        if src_dir[l] == 0.0 {
            continue;
        }
        for (j, &id) in case.ids().iter().enumerate() {
            if row[j] == 0.0 {
                continue;
            }
            let chan = imp.require(&format!("{}:{}", kind.as_str(), id))?;
            for (m, v) in chan.samples.iter().enumerate() {
                values[m] += src_dir[l] * row[j] * v;
            }
        }
    }
    Ok(ImpulseResponse {
        start_lag_s: imps[0].start_time_s(),
        lag_step_s: imps[0].dt(),
        values,
        source: pair.source.clone(),
        target: pair.target.clone(),
        kind: relation.response,
        relation: None,
        scale_applied: 1.0,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn run_reproduce(a: &ReproduceArgs) -> Result<()> {
    let spec = ExperimentSpec::bundled(&a.name)?;
    let out_dir = a
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("reproduce-{}", a.name)));
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let case = resolve_case(&spec.case_spec)?;
    let gamma = case.mean_damping_ratio();

    let lag_steps = (spec.max_lag_s * spec.rate_hz).round() as usize;
    let taus: Vec<f64> = (0..=lag_steps).map(|i| i as f64 / spec.rate_hz).collect();

    let src_ids = spec
        .pairs
        .iter()
        .map(|p| channel_machine_id(&p.source))
        .collect::<Result<Vec<_>>>()?;
    let source_id = src_ids[0];
    if src_ids.iter().any(|&id| id != source_id) {
        return Err(Error::Config(
            "all pairs in one experiment must share a source machine".into(),
        ));
    }

    let mut truths = match spec.truth {
        TruthMode::Analytic => {
            let modal = decompose(&case)?;
            spec.pairs
                .iter()
                .map(|p| analytic_truth(&case, &modal, &spec, p, &taus))
                .collect::<Result<Vec<_>>>()?
        }
        TruthMode::Simulated => {
            let imps = case
                .ids()
                .iter()
                .map(|&id| simulate_impulse(&case, id, spec.rate_hz, spec.max_lag_s + 1.0))
                .collect::<Result<Vec<_>>>()?;
            spec.pairs
                .iter()
                .map(|p| simulated_truth(&case, &imps, &spec, p))
                .collect::<Result<Vec<_>>>()?
        }
    };
    if spec.negate {
        for t in &mut truths {
            for v in &mut t.values {
                *v = -*v;
            }
        }
    }

    let scaling = if spec.theoretical_scale {
        Scaling::Theoretical {
            gamma,
            alpha: spec.alpha,
        }
    } else {
        Scaling::None
    };

    let mut mse_rows: Vec<(String, u64, f64)> = Vec::new();
    let mut mode_rows: Vec<(u64, f64, f64)> = Vec::new();
    let mut first_seed_curves: Vec<ImpulseResponse> = Vec::new();

    for (si, &seed) in spec.seeds.iter().enumerate() {
        let ambient = AmbientConfig {
            duration_s: spec.duration_s,
            rate_hz: spec.rate_hz,
            alpha: spec.alpha,
            seed,
            input_mode: spec.input_mode,
            load_machines: spec.loads.clone(),
            measurement_noise_rel: spec.noise_rel,
            record_input: false,
            modulation: None,
        };
        let trace = simulate_ambient(&case, &ambient, &spec.outputs)?;

        for (pair, truth) in spec.pairs.iter().zip(&truths) {
            let cfg = RecoveryConfig {
                source: pair.source.clone(),
                target: pair.target.clone(),
                differentiation_order: pair.order,
                passband_hz: pair.passband,
                max_lag_s: spec.max_lag_s,
                scaling,
                subtract_reference_angle: true,
                method: CorrelationMethod::Fft,
            };
            let mut est = recover(&trace, &cfg)?;
            if spec.negate {
                for v in &mut est.values {
                    *v = -*v;
                }
            }
            let nmse = normalized_mse(truth, &est)?;
            mse_rows.push((pair.name.clone(), seed, nmse));
            if spec.modes_pair.as_deref() == Some(pair.name.as_str()) {
                let m = log_decrement(&est)?;
                mode_rows.push((seed, m.freq_hz, m.log_decrement));
            }
            if si == 0 {
                first_seed_curves.push(est);
            }
        }
    }

    let mut written = Vec::new();

    let mut mse_csv = String::from("pair,seed,normalized_mse\n");
    for (pair, seed, nmse) in &mse_rows {
        mse_csv.push_str(&format!("{pair},{seed},{nmse}\n"));
    }
    let mse_path = out_dir.join("mse.csv");
    io::atomic_write(&mse_path, mse_csv.as_bytes())?;
    written.push(mse_path);

    println!("experiment {}: {} seeds, {} pairs", a.name, spec.seeds.len(), spec.pairs.len());
    let mut summary_csv = String::from("pair,relation,median_normalized_mse\n");
    for pair in &spec.pairs {
        let vals: Vec<f64> = mse_rows
            .iter()
            .filter(|(name, _, _)| name == &pair.name)
            .map(|&(_, _, v)| v)
            .collect();
        let med = median(&vals);
        let relation = first_seed_curves
            .iter()
            .find(|c| c.target == pair.target && c.source == pair.source)
            .and_then(|c| c.relation.clone())
            .unwrap_or_default();
        println!("  {:<12} {:<20} median nmse {:.3}", pair.name, relation, med);
        summary_csv.push_str(&format!("{},{},{}\n", pair.name, relation, med));
    }
    let summary_path = out_dir.join("summary.csv");
    io::atomic_write(&summary_path, summary_csv.as_bytes())?;
    written.push(summary_path);

    if let Some(modes_pair) = &spec.modes_pair {
        let truth = spec
            .pairs
            .iter()
            .zip(&truths)
            .find(|(p, _)| &p.name == modes_pair)
            .map(|(_, t)| t)
            .ok_or_else(|| {
                Error::Config(format!("modes_pair {modes_pair:?} names no pair"))
            })?;
        let model = log_decrement(truth)?;
        let mut modes_csv = String::from("side,osc_freq_hz,log_decrement\n");
        modes_csv.push_str(&format!("model,{},{}\n", model.freq_hz, model.log_decrement));
        for (seed, f, d) in &mode_rows {
            modes_csv.push_str(&format!("data_seed{seed},{f},{d}\n"));
        }
        let freqs: Vec<f64> = mode_rows.iter().map(|r| r.1).collect();
        let decs: Vec<f64> = mode_rows.iter().map(|r| r.2).collect();
        modes_csv.push_str(&format!("data_median,{},{}\n", median(&freqs), median(&decs)));
        println!(
            "  modes: model {:.4} Hz dec {:.4}; data median {:.4} Hz dec {:.4}",
            model.freq_hz,
            model.log_decrement,
            median(&freqs),
            median(&decs)
        );
        let modes_path = out_dir.join("modes.csv");
        io::atomic_write(&modes_path, modes_csv.as_bytes())?;
        written.push(modes_path);
    }

    if spec.nadir_table {
        let distances = case.distances_mi().ok_or_else(|| {
            Error::Config("nadir table needs [coords] in the case file".into())
        })?;
        let mut rows = Vec::new();
        for (pair, est) in spec.pairs.iter().zip(&first_seed_curves) {
            let tgt_id = channel_machine_id(&pair.target)?;
            let idx = case
                .index_of(tgt_id)
                .ok_or_else(|| Error::UnknownReference(format!("machine {tgt_id}")))?;
            let n = nadir(est)?;
            rows.push((pair.target.clone(), distances[idx], n.time_s));
        }
        let base = rows[0].2;
        let mut lags_csv = String::from("target,distance_mi,nadir_time_s,lag_s\n");
        for (target, dist, t) in &rows {
            lags_csv.push_str(&format!("{target},{dist},{t},{}\n", t - base));
        }
        let dists: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let lags: Vec<f64> = rows.iter().map(|r| r.2 - base).collect();
        let speed = propagation_speed(&dists, &lags)?;
        let monotone = rows.windows(2).all(|w| w[0].2 < w[1].2);
        lags_csv.push_str(&format!("speed_mi_per_s,,,{speed}\n"));
        println!("  nadir lags {:?} s, speed {:.0} mi/s, monotone {}",
            lags.iter().map(|l| (l * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            speed,
            monotone
        );
        let lags_path = out_dir.join("lags.csv");
        io::atomic_write(&lags_path, lags_csv.as_bytes())?;
        written.push(lags_path);
    }

    for (pair, (est, truth)) in spec
        .pairs
        .iter()
        .zip(first_seed_curves.iter().zip(&truths))
    {
        let est_path = out_dir.join(format!("curve_{}_recovered.csv", slug(&pair.name)));
        io::write_response_csv(&est_path, est)?;
        written.push(est_path);
        let truth_path = out_dir.join(format!("curve_{}_truth.csv", slug(&pair.name)));
        io::write_response_csv(&truth_path, truth)?;
        written.push(truth_path);
    }

    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}
