//! Command line front end for the entropy toolkit.
//!
//! Every command prints a JSON report carrying a `schema` version and the
//! full run configuration, so a report is reproducible from its own header.
//! Exit codes are a stable contract: 0 pass, 2 usage or domain error,
//! 3 violation candidate worth inspecting, 4 diagnostic failure such as a
//! cutoff that cannot carry the requested state.

use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use moelab::cascade;
use moelab::channels::{verify_char_relation, ChannelClass, ChannelSpec, ChannelSuperop};
use moelab::fock::{g_function, g_inverse, gibbs_state};
use moelab::lindblad::{infinitesimal_conjecture_check, LindbladGenerator};
use moelab::numeric::C64;
use moelab::optimizer::{
    conjecture_v2_scan, minimize_output_entropy, search_output_dim, OptimizerConfig, ScanRow,
};
use moelab::{Error, Result};

/// Subadditivity slack below this is a violation candidate.
const SUBADDITIVITY_TOL: f64 = 1e-6;

#[derive(Parser)]
#[command(
    name = "moelab",
    version,
    about = "Minimal output entropy toolkit for one-mode bosonic channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Entropy anchors: g(N0), its inverse, and the thermal spectrum head
    Entropy(EntropyArgs),
    /// Apply a channel to the thermal state and report the bookkeeping
    Apply(ApplyArgs),
    /// Run the beam-splitter cascade suite for the eta = 1/k channel
    VerifyTheorem(VerifyArgs),
    /// Minimize output entropy over the fixed-entropy shell
    Optimize(OptimizeArgs),
    /// Scan random fixed-entropy inputs against the conjectured bound
    Scan(ScanArgs),
    /// Entropy production rates of the ladder generators
    Lindblad(LindbladArgs),
}

/// Exactly one of the two fixes the entropy shell; the other is derived.
#[derive(Args)]
struct EntropySpec {
    /// Input entropy in nats (exclusive with --N0)
    #[arg(long = "S0", value_name = "NATS", allow_hyphen_values = true)]
    s0: Option<f64>,
    /// Thermal mean photon number (exclusive with --S0)
    #[arg(long = "N0", value_name = "MEAN", allow_hyphen_values = true)]
    n0: Option<f64>,
}

impl EntropySpec {
    fn resolve(&self) -> Result<(f64, f64)> {
        match (self.s0, self.n0) {
            (Some(_), Some(_)) => Err(Error::Domain(
                "give exactly one of --S0 and --N0, not both".into(),
            )),
            (None, None) => Err(Error::Domain("one of --S0 and --N0 is required".into())),
            (Some(s0), None) => Ok((s0, g_inverse(s0)?)),
            (None, Some(n0)) => {
                if !(n0.is_finite() && n0 >= 0.0) {
                    return Err(Error::Domain(format!(
                        "mean photon number must be nonnegative, got {n0}"
                    )));
                }
                Ok((g_function(n0), n0))
            }
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    /// gamma+ = N, gamma- = N + 1
    Att,
    /// gamma+ = N + 1, gamma- = N
    Amp,
    /// gamma+ = gamma- = 1
    Noise,
}

impl Family {
    fn name(self) -> &'static str {
        match self {
            Family::Att => "att",
            Family::Amp => "amp",
            Family::Noise => "noise",
        }
    }
}

#[derive(Args)]
struct EntropyArgs {
    #[command(flatten)]
    shell: EntropySpec,
    /// Levels of the spectrum head to print
    #[arg(long, default_value_t = 8)]
    head: usize,
    /// Report destination; stdout when omitted
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ApplyArgs {
    /// Channel as JSON or shorthand, e.g. 'att:eta=0.5,N=1'
    #[arg(long)]
    channel: String,
    #[command(flatten)]
    shell: EntropySpec,
    /// Input cutoff (at least 8)
    #[arg(long, default_value_t = 24)]
    cutoff: usize,
    /// Environment cutoff override for dilation-backed channels
    #[arg(long = "env-cutoff")]
    env_cutoff: Option<usize>,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Number of cascade ports; the channel verified is eta = 1/k
    #[arg(short, long)]
    k: usize,
    #[command(flatten)]
    shell: EntropySpec,
    /// Per-mode cutoff (at least 8)
    #[arg(long, default_value_t = 20)]
    cutoff: usize,
    /// Random fixed-entropy inputs to push through the cascade
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Slack below g(N0) - tol on the direct output flags a violation
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct OptimizeArgs {
    #[arg(long)]
    channel: String,
    #[command(flatten)]
    shell: EntropySpec,
    #[arg(long, default_value_t = 24)]
    cutoff: usize,
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Gap below -tol counts as a violation candidate
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long)]
    channel: String,
    #[command(flatten)]
    shell: EntropySpec,
    #[arg(long, default_value_t = 24)]
    cutoff: usize,
    #[arg(long, default_value_t = 30)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Row slack below -tol counts as a violation candidate
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct LindbladArgs {
    /// Generator family
    #[arg(long, value_enum)]
    family: Family,
    /// Environment occupancy N for the att and amp families
    #[arg(long = "N", value_name = "MEAN")]
    n: Option<f64>,
    #[command(flatten)]
    shell: EntropySpec,
    /// Random fixed-entropy states beyond the thermal candidate
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: Option<String>,
}

/// Reproducibility header echoed into every report.
#[derive(Serialize)]
struct RunConfig {
    command: &'static str,
    channel: Option<ChannelSpec>,
    #[serde(rename = "S0")]
    s0: Option<f64>,
    #[serde(rename = "N0")]
    n0: Option<f64>,
    cutoff: Option<usize>,
    env_cutoff: Option<usize>,
    k: Option<usize>,
    family: Option<&'static str>,
    #[serde(rename = "N")]
    n: Option<f64>,
    seed: Option<u64>,
    samples: Option<usize>,
    restarts: Option<usize>,
    tol: Option<f64>,
    format: &'static str,
    out: Option<String>,
}

impl RunConfig {
    fn new(command: &'static str) -> Self {
        RunConfig {
            command,
            channel: None,
            s0: None,
            n0: None,
            cutoff: None,
            env_cutoff: None,
            k: None,
            family: None,
            n: None,
            seed: None,
            samples: None,
            restarts: None,
            tol: None,
            format: "json",
            out: None,
        }
    }
}

fn check_cutoff(d: usize) -> Result<()> {
    if d < 8 {
        return Err(Error::Domain(format!("cutoff must be at least 8, got {d}")));
    }
    Ok(())
}

/// `{...}` is parsed as the JSON channel form; anything else as the
/// shorthand `class:key=value,...` with keys eta, kappa2 (k2), N, t.
fn parse_channel(text: &str) -> Result<ChannelSpec> {
    let t = text.trim();
    if t.starts_with('{') {
        return ChannelSpec::from_json(t);
    }
    let (class, rest) = match t.split_once(':') {
        Some((c, r)) => (c.trim(), Some(r)),
        None => (t, None),
    };
    let mut eta = None;
    let mut kappa2 = None;
    let mut n = None;
    let mut tpar = None;
    if let Some(rest) = rest {
        for item in rest.split(',') {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::Domain(format!("malformed channel parameter '{item}'"))
            })?;
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::Domain(format!("channel parameter '{key}' is not a number"))
            })?;
            match key.trim() {
                "eta" => eta = Some(value),
                "kappa2" | "k2" => kappa2 = Some(value),
                "N" | "n" => n = Some(value),
                "t" => tpar = Some(value),
                other => {
                    return Err(Error::Domain(format!(
                        "unknown channel parameter '{other}'"
                    )))
                }
            }
        }
    }
    let need = |v: Option<f64>, what: &str| {
        v.ok_or_else(|| Error::Domain(format!("{class} shorthand needs {what}")))
    };
    let spec = match class.to_ascii_lowercase().as_str() {
        "att" | "attenuator" | "c_att" => {
            ChannelSpec::attenuator(need(eta, "eta=..")?, need(n, "N=..")?)
        }
        "amp" | "amplifier" | "c_amp" => {
            ChannelSpec::amplifier(need(kappa2, "kappa2=..")?, need(n, "N=..")?)
        }
        "d" => ChannelSpec::class_d(need(kappa2, "kappa2=..")?, need(n, "N=..")?),
        "a1" => ChannelSpec::a1(need(n, "N=..")?),
        "a2" => ChannelSpec::a2(need(n, "N=..")?),
        "b1" => ChannelSpec::b1(),
        "b2" => ChannelSpec::b2(need(tpar, "t=..")?),
        other => {
            return Err(Error::Domain(format!(
                "unknown channel class '{other}'; use att, amp, d, a1, a2, b1, or b2"
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}

fn emit_text(out: &Option<String>, text: String) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| Error::Resource(format!("cannot write report to {path}: {e}"))),
        None => {
            println!("{}", text.trim_end_matches('\n'));
            Ok(())
        }
    }
}

fn emit_json(cfg: &RunConfig, result: Value, out: &Option<String>) -> Result<()> {
    let report = json!({ "schema": 1, "config": cfg, "result": result });
    let mut text = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Resource(format!("report serialization failed: {e}")))?;
    text.push('\n');
    emit_text(out, text)
}

fn emit_csv(rows: &[ScanRow], out: &Option<String>) -> Result<()> {
    let mut text = String::from("sample,input_entropy,output_entropy,bound,slack\n");
    for r in rows {
        text.push_str(&format!(
            "{},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            r.sample, r.input_entropy, r.output_entropy, r.bound, r.slack
        ));
    }
    emit_text(out, text)
}

fn cmd_entropy(a: &EntropyArgs) -> Result<ExitCode> {
    let (s0, n0) = a.shell.resolve()?;
    let mut cfg = RunConfig::new("entropy");
    cfg.s0 = Some(s0);
    cfg.n0 = Some(n0);
    cfg.out = a.out.clone();
    // the spectrum head is analytic, no cutoff involved
    let x = n0 / (n0 + 1.0);
    let head: Vec<f64> = (0..a.head)
        .map(|k| {
            if n0 == 0.0 {
                if k == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                x.powi(k as i32) / (n0 + 1.0)
            }
        })
        .collect();
    let beta = if n0 > 0.0 {
        Some(((n0 + 1.0) / n0).ln())
    } else {
        None
    };
    let result = json!({
        "S0": s0,
        "N0": n0,
        "beta": beta,
        "gibbs_head": head,
    });
    emit_json(&cfg, result, &a.out)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_apply(a: &ApplyArgs) -> Result<ExitCode> {
    let spec = parse_channel(&a.channel)?;
    let (s0, n0) = a.shell.resolve()?;
    check_cutoff(a.cutoff)?;
    let mut cfg = RunConfig::new("apply");
    cfg.channel = Some(spec);
    cfg.s0 = Some(s0);
    cfg.n0 = Some(n0);
    cfg.cutoff = Some(a.cutoff);
    cfg.env_cutoff = a.env_cutoff;
    cfg.out = a.out.clone();

    let rho = gibbs_state(a.cutoff, n0)?;
    let d_out = search_output_dim(&spec, a.cutoff)?;
    let output = ChannelSuperop::build(&spec, d_out, a.env_cutoff)?.apply(&rho)?;
    let n_in = rho.mean_photon();
    let n_out = output.mean_photon();
    let predicted = match spec.class {
        ChannelClass::A2 => spec.a2_exact_output_photons(&rho)?,
        _ => {
            let law = spec.photon_law()?;
            law.slope * n_in + law.offset
        }
    };
    let chi_residual = match spec.class {
        ChannelClass::CAtt
        | ChannelClass::A1
        | ChannelClass::A2
        | ChannelClass::B1
        | ChannelClass::B2 => {
            let mus = [
                C64::new(0.4, 0.0),
                C64::new(0.0, 0.8),
                C64::new(0.5, -0.5),
                C64::new(-0.3, 0.9),
            ];
            Some(verify_char_relation(&rho, &spec, &mus, d_out)?)
        }
        _ => None,
    };
    let result = json!({
        "input_entropy": rho.von_neumann_entropy()?,
        "output_entropy": output.von_neumann_entropy()?,
        "mean_photon_in": n_in,
        "mean_photon_out": n_out,
        "predicted_mean_photon_out": predicted,
        "bookkeeping_defect": (n_out - predicted).abs(),
        "chi_residual": chi_residual,
        "output_cutoff": d_out,
    });
    emit_json(&cfg, result, &a.out)?;
    Ok(ExitCode::SUCCESS)
}

/// Bulk dimension for cascade probes: enough levels to carry the shell, half
/// the cutoff when that is roomier, never the full mode.
fn probe_bulk(s0: f64, d: usize) -> usize {
    let minimal = (s0 + 0.5).exp().ceil() as usize;
    minimal.max(d / 2).min(d)
}

fn cmd_verify_theorem(a: &VerifyArgs) -> Result<ExitCode> {
    if a.k == 1 {
        return Err(Error::Domain(
            "k = 1 is the identity channel; nothing to verify".into(),
        ));
    }
    if !(2..=4).contains(&a.k) {
        return Err(Error::Domain(format!("k must be 2, 3, or 4, got {}", a.k)));
    }
    let (s0, n0) = a.shell.resolve()?;
    check_cutoff(a.cutoff)?;
    if a.samples == 0 {
        return Err(Error::Domain("at least one sample is required".into()));
    }
    let mut cfg = RunConfig::new("verify-theorem");
    cfg.s0 = Some(s0);
    cfg.n0 = Some(n0);
    cfg.cutoff = Some(a.cutoff);
    cfg.k = Some(a.k);
    cfg.seed = Some(a.seed);
    cfg.samples = Some(a.samples);
    cfg.tol = Some(a.tol);
    cfg.format = a.format.name();
    cfg.out = a.out.clone();

    let bound = g_function(n0);
    let bulk = probe_bulk(s0, a.cutoff);
    let mut reports = Vec::with_capacity(a.samples);
    let mut rows = Vec::with_capacity(a.samples);
    let mut violations = 0usize;
    for i in 0..a.samples {
        let rho = cascade::probe_state(s0, bulk, a.cutoff, a.seed.wrapping_add(i as u64))?;
        let rep = cascade::run_cascade(&rho, a.k, n0, a.cutoff)?;
        if rep.subadditivity_slack < -SUBADDITIVITY_TOL
            || rep.direct_channel_entropy < bound - a.tol
        {
            violations += 1;
        }
        rows.push(ScanRow {
            sample: i,
            input_entropy: s0,
            output_entropy: rep.direct_channel_entropy,
            bound,
            slack: rep.subadditivity_slack,
        });
        reports.push(rep);
    }
    if a.format == Format::Csv {
        emit_csv(&rows, &a.out)?;
    } else {
        let result = json!({
            "k": a.k,
            "bound": bound,
            "bulk": bulk,
            "violations": violations,
            "reports": reports,
        });
        emit_json(&cfg, result, &a.out)?;
    }
    Ok(if violations > 0 {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<ExitCode> {
    let spec = parse_channel(&a.channel)?;
    let (s0, n0) = a.shell.resolve()?;
    check_cutoff(a.cutoff)?;
    let mut cfg = RunConfig::new("optimize");
    cfg.channel = Some(spec);
    cfg.s0 = Some(s0);
    cfg.n0 = Some(n0);
    cfg.cutoff = Some(a.cutoff);
    cfg.seed = Some(a.seed);
    cfg.restarts = Some(a.restarts);
    cfg.tol = Some(a.tol);
    cfg.out = a.out.clone();

    let opt_cfg = OptimizerConfig {
        restarts: a.restarts,
        seed: a.seed,
        ..OptimizerConfig::default()
    };
    let report = minimize_output_entropy(&spec, s0, a.cutoff, &opt_cfg)?;
    let violation = report.gap < -a.tol;
    let result = serde_json::to_value(&report)
        .map_err(|e| Error::Resource(format!("report serialization failed: {e}")))?;
    emit_json(&cfg, result, &a.out)?;
    Ok(if violation {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_scan(a: &ScanArgs) -> Result<ExitCode> {
    let spec = parse_channel(&a.channel)?;
    let (s0, n0) = a.shell.resolve()?;
    check_cutoff(a.cutoff)?;
    let mut cfg = RunConfig::new("scan");
    cfg.channel = Some(spec);
    cfg.s0 = Some(s0);
    cfg.n0 = Some(n0);
    cfg.cutoff = Some(a.cutoff);
    cfg.seed = Some(a.seed);
    cfg.samples = Some(a.samples);
    cfg.tol = Some(a.tol);
    cfg.format = a.format.name();
    cfg.out = a.out.clone();

    let outcome = conjecture_v2_scan(&spec, s0, a.cutoff, a.samples, a.seed)?;
    let violation = outcome.rows.iter().any(|r| r.slack < -a.tol);
    if a.format == Format::Csv {
        emit_csv(&outcome.rows, &a.out)?;
    } else {
        let result = serde_json::to_value(&outcome)
            .map_err(|e| Error::Resource(format!("report serialization failed: {e}")))?;
        emit_json(&cfg, result, &a.out)?;
    }
    Ok(if violation {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_lindblad(a: &LindbladArgs) -> Result<ExitCode> {
    let generator = match a.family {
        Family::Att => LindbladGenerator::attenuator_family(a.n.ok_or_else(|| {
            Error::Domain("the att family needs --N".into())
        })?)?,
        Family::Amp => LindbladGenerator::amplifier_family(a.n.ok_or_else(|| {
            Error::Domain("the amp family needs --N".into())
        })?)?,
        Family::Noise => LindbladGenerator::classical_noise_family(),
    };
    let (s0, n0) = a.shell.resolve()?;
    let mut cfg = RunConfig::new("lindblad");
    cfg.s0 = Some(s0);
    cfg.n0 = Some(n0);
    cfg.family = Some(a.family.name());
    cfg.n = a.n;
    cfg.seed = Some(a.seed);
    cfg.samples = Some(a.samples);
    cfg.out = a.out.clone();

    let report = infinitesimal_conjecture_check(&generator, s0, a.samples, a.seed)?;
    let violation = report.violations > 0;
    let result = json!({
        "gamma_plus": generator.gamma_plus,
        "gamma_minus": generator.gamma_minus,
        "report": report,
    });
    emit_json(&cfg, result, &a.out)?;
    Ok(if violation {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    })
}

/// 2 for bad arguments or domain errors, 4 for diagnostics the run tripped.
fn exit_for(err: &Error) -> u8 {
    match err {
        Error::CutoffTooSmall { .. }
        | Error::Resource(_)
        | Error::Constraint(_)
        | Error::Step(_)
        | Error::Linalg(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Entropy(a) => cmd_entropy(a),
        Command::Apply(a) => cmd_apply(a),
        Command::VerifyTheorem(a) => cmd_verify_theorem(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Scan(a) => cmd_scan(a),
        Command::Lindblad(a) => cmd_lindblad(a),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            if matches!(err, Error::CutoffTooSmall { .. }) {
                eprintln!("hint: retry with a larger --cutoff");
            }
            ExitCode::from(exit_for(&err))
        }
    }
}
