//! `tautgw`: evaluate correlators, dump generating series, run the
//! consistency suites.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::Value;

use tautgw::correlators::{CorrelatorReport, CorrelatorSpec};
use tautgw::potentials::{build_h_series, PotentialSpec};
use tautgw::rational::to_pq;
use tautgw::verify::{run_suite, Suite, SuiteReport, VerifyConfig};
use tautgw::{CorrelatorEngine, QSeries, TargetConfig, TargetModel};

#[derive(Parser)]
#[command(name = "tautgw", version, about = "Genus-zero psi/kappa intersection numbers on stable maps")]
struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads for independent evaluations (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Csv,
    Text,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one correlator from a spec file or inline flags.
    Correlator(CorrelatorArgs),
    /// Build the generating series over the chosen variables.
    Potential(PotentialArgs),
    /// Run a consistency suite.
    Verify(VerifyArgs),
    /// Run a job described by a JSON file.
    Run {
        file: PathBuf,
    },
}

#[derive(Args)]
struct CorrelatorArgs {
    /// JSON spec file (`-` for stdin). Inline flags are ignored when given.
    spec: Option<PathBuf>,
    /// `r` for projective r-space, `r=R`, inline JSON, or a JSON file.
    #[arg(long, default_value = "1")]
    target: String,
    #[arg(long, default_value_t = 0)]
    degree: u32,
    /// ψ insertion `a,alpha[,count]`; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    tau: Vec<String>,
    /// κ insertion `a,alpha[,count]` with a ≥ −1; repeatable.
    #[arg(long, allow_hyphen_values = true)]
    kappa: Vec<String>,
}

#[derive(Args)]
struct PotentialArgs {
    #[arg(long, default_value = "1")]
    target: String,
    /// Comma-separated variable names such as `x^0,x^1,s_0^1,s_-1^1`.
    #[arg(long, default_value = "x^0,x^1", allow_hyphen_values = true)]
    vars: String,
    #[arg(long, default_value_t = 2)]
    qmax: u32,
    /// Exponent cap for every non-q variable.
    #[arg(long, default_value_t = 4)]
    cap: u32,
    /// Cap on the total exponent of the non-q variables.
    #[arg(long)]
    max_total: Option<u32>,
}

#[derive(Args)]
struct VerifyArgs {
    /// wdvv, trr, dilaton, cp1 or trees.
    #[arg(value_name = "SUITE", required_unless_present = "suite", conflicts_with = "suite")]
    name: Option<String>,
    #[arg(long)]
    suite: Option<String>,
    /// Restrict to one projective target (`r` or `r=R`).
    #[arg(long)]
    target: Option<String>,
    #[arg(long, default_value_t = 3)]
    qmax: u32,
    #[arg(long, default_value_t = 50)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// JSON job: the same knobs as the subcommands.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JobConfig {
    command: JobCommand,
    #[serde(default)]
    target: Option<Value>,
    #[serde(default)]
    degree: u32,
    #[serde(default)]
    tau: Vec<[i64; 3]>,
    #[serde(default)]
    kappa: Vec<[i64; 3]>,
    #[serde(default)]
    vars: Option<Vec<String>>,
    #[serde(default)]
    qmax: Option<u32>,
    #[serde(default)]
    cap: Option<u32>,
    #[serde(default)]
    max_total: Option<u32>,
    #[serde(default)]
    format: Option<Format>,
    #[serde(default)]
    suite: Option<String>,
    #[serde(default)]
    samples: Option<usize>,
    #[serde(default)]
    seed: Option<u64>,
}

#[derive(Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum JobCommand {
    Correlator,
    Potential,
    Verify,
}

enum Failure {
    Usage(String),
    Engine(String),
}

impl From<tautgw::Error> for Failure {
    fn from(e: tautgw::Error) -> Self {
        use tautgw::Error::*;
        match e {
            Parse(_) | UnknownVariable(_) | DuplicateVariable(_) | OddGrading(..) | InvalidTarget(_)
            | InvalidCorrelator(_) | BasisIndex(_) => Failure::Usage(e.to_string()),
            _ => Failure::Engine(e.to_string()),
        }
    }
}

type Outcome = Result<(String, bool), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn parse_target(s: &str) -> Result<TargetConfig, Failure> {
    let s = s.trim();
    let r = s.strip_prefix("r=").unwrap_or(s);
    if let Ok(r) = r.parse::<usize>() {
        return Ok(TargetConfig::ProjectiveSpace { r });
    }
    let text = if s.starts_with('{') {
        s.to_string()
    } else {
        std::fs::read_to_string(s).map_err(|e| usage(format!("cannot read target {s:?}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| usage(format!("bad target config: {e}")))
}

fn target_from_value(v: &Value) -> Result<TargetConfig, Failure> {
    match v {
        Value::Number(_) | Value::String(_) => parse_target(&v.to_string().replace('"', "")),
        _ => serde_json::from_value(v.clone()).map_err(|e| usage(format!("bad target config: {e}"))),
    }
}

fn build_target(c: &TargetConfig) -> Result<Arc<TargetModel>, Failure> {
    Ok(Arc::new(c.build()?))
}

fn parse_insertion(s: &str, what: &str) -> Result<[i64; 3], Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let nums: Result<Vec<i64>, _> = parts.iter().map(|p| p.parse::<i64>()).collect();
    match nums.as_deref() {
        Ok([a, al]) => Ok([*a, *al, 1]),
        Ok([a, al, k]) => Ok([*a, *al, *k]),
        _ => Err(usage(format!("bad --{what} {s:?}: expected a,alpha[,count]"))),
    }
}

/// Reads a correlator spec, accepting `"r": R` in place of `"target"`.
fn read_spec(text: &str) -> Result<CorrelatorSpec, Failure> {
    let mut v: Value = serde_json::from_str(text).map_err(|e| usage(format!("bad spec: {e}")))?;
    if let Value::Object(map) = &mut v {
        if let Some(r) = map.remove("r") {
            if map.contains_key("target") {
                return Err(usage("bad spec: give either \"r\" or \"target\", not both"));
            }
            map.insert("target".into(), serde_json::json!({"type": "projective_space", "r": r}));
        }
    }
    serde_json::from_value(v).map_err(|e| usage(format!("bad spec: {e}")))
}

fn correlator(spec: &CorrelatorSpec, format: Format) -> Outcome {
    let key = spec.key()?;
    let target = build_target(&spec.target)?;
    let engine = CorrelatorEngine::new(target);
    let value = engine.evaluate(&key)?;
    let report = CorrelatorReport {
        value: to_pq(&value),
        expected_dimension: engine.expected_dimension(&key).ok(),
        reductions: engine.reductions(),
    };
    let dim = report.expected_dimension.map(|d| d.to_string()).unwrap_or_default();
    let out = match format {
        Format::Json => json(&report),
        Format::Csv => format!("key,value,expected_dimension,reductions\n\"{key}\",{},{dim},{}\n", report.value, report.reductions),
        Format::Text => format!(
            "{key} = {}\nexpected dimension: {}\nreductions: {}\n",
            report.value,
            if dim.is_empty() { "unstable".into() } else { dim },
            report.reductions
        ),
    };
    Ok((out, true))
}

fn correlator_cmd(args: &CorrelatorArgs, format: Format) -> Outcome {
    let spec = match &args.spec {
        Some(p) => {
            let text = if p.as_os_str() == "-" {
                std::io::read_to_string(std::io::stdin()).map_err(|e| usage(e.to_string()))?
            } else {
                std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?
            };
            read_spec(&text)?
        }
        None => CorrelatorSpec {
            target: parse_target(&args.target)?,
            degree: args.degree,
            tau: args.tau.iter().map(|s| parse_insertion(s, "tau")).collect::<Result<_, _>>()?,
            kappa: args.kappa.iter().map(|s| parse_insertion(s, "kappa")).collect::<Result<_, _>>()?,
        },
    };
    correlator(&spec, format)
}

struct PotentialJob {
    target: TargetConfig,
    vars: Vec<String>,
    qmax: u32,
    cap: u32,
    max_total: Option<u32>,
}

fn potential(job: &PotentialJob, format: Format) -> Outcome {
    let target = build_target(&job.target)?;
    let names: Vec<&str> = job.vars.iter().map(|s| s.as_str()).filter(|s| !s.is_empty()).collect();
    let spec = PotentialSpec::from_names(target, &names, job.cap, job.qmax, job.max_total)?;
    let engine = CorrelatorEngine::new(spec.target.clone());
    let h = build_h_series(&spec, &engine)?;
    let out = match format {
        Format::Json => json(&h.to_json()),
        Format::Csv => series_csv(&h),
        Format::Text => series_text(&h),
    };
    Ok((out, true))
}

fn series_text(h: &QSeries) -> String {
    let mut out = String::new();
    for (e, c) in h.terms() {
        let _ = writeln!(out, "{} : {}", h.monomial_name(e), to_pq(c));
    }
    out
}

fn series_csv(h: &QSeries) -> String {
    let names: Vec<&str> = h.registry().vars().iter().map(|v| v.name.as_str()).collect();
    let mut out = format!("{},coef\n", names.join(","));
    for (e, c) in h.terms() {
        let exps: Vec<String> = e.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "{},{}", exps.join(","), to_pq(c));
    }
    out
}

fn potential_cmd(args: &PotentialArgs, format: Format) -> Outcome {
    let job = PotentialJob {
        target: parse_target(&args.target)?,
        vars: args.vars.split(',').map(|s| s.trim().to_string()).collect(),
        qmax: args.qmax,
        cap: args.cap,
        max_total: args.max_total,
    };
    potential(&job, format)
}

fn verify_config(suite: &str, target: Option<TargetConfig>) -> Result<VerifyConfig, Failure> {
    let suite: Suite = suite.parse()?;
    let mut cfg = VerifyConfig::new(suite);
    match target {
        None => {}
        Some(TargetConfig::ProjectiveSpace { r }) if r >= 1 => cfg.ranks = vec![r],
        Some(_) => return Err(usage("verification suites run on projective targets only")),
    }
    Ok(cfg)
}

fn verify(cfg: &VerifyConfig, format: Format) -> Outcome {
    let rep = run_suite(cfg)?;
    let out = match format {
        Format::Json => json(&VerifyOutput { passed: rep.passed(), report: &rep }),
        Format::Csv => {
            let mut s = format!("suite,seed,checks,failures\n{},{},{},{}\n", rep.suite, rep.seed, rep.checks, rep.failures.len());
            for f in &rep.failures {
                let _ = writeln!(s, "failure,\"{}\"", f.replace('"', "\"\""));
            }
            s
        }
        Format::Text => {
            let mut s = format!(
                "suite {} (seed {}): {} checks, {} failures\n",
                rep.suite,
                rep.seed,
                rep.checks,
                rep.failures.len()
            );
            for f in &rep.failures {
                let _ = writeln!(s, "FAIL {f}");
            }
            s.push_str(if rep.passed() { "PASS\n" } else { "FAIL\n" });
            s
        }
    };
    Ok((out, rep.passed()))
}

#[derive(serde::Serialize)]
struct VerifyOutput<'a> {
    passed: bool,
    #[serde(flatten)]
    report: &'a SuiteReport,
}

fn verify_cmd(args: &VerifyArgs, format: Format) -> Outcome {
    let name = args.name.as_deref().or(args.suite.as_deref()).unwrap_or_default();
    let target = args.target.as_deref().map(parse_target).transpose()?;
    let mut cfg = verify_config(name, target)?;
    cfg.qmax = args.qmax;
    cfg.samples = args.samples;
    cfg.seed = args.seed;
    verify(&cfg, format)
}

fn run_job(path: &PathBuf, format: Format, format_given: bool) -> Outcome {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let job: JobConfig = serde_json::from_str(&text).map_err(|e| usage(format!("bad job: {e}")))?;
    let format = if format_given { format } else { job.format.unwrap_or(format) };
    let target = job.target.as_ref().map(target_from_value).transpose()?;
    match job.command {
        JobCommand::Correlator => {
            let spec = CorrelatorSpec {
                target: target.unwrap_or(TargetConfig::ProjectiveSpace { r: 1 }),
                degree: job.degree,
                tau: job.tau,
                kappa: job.kappa,
            };
            correlator(&spec, format)
        }
        JobCommand::Potential => potential(
            &PotentialJob {
                target: target.unwrap_or(TargetConfig::ProjectiveSpace { r: 1 }),
                vars: job.vars.unwrap_or_else(|| vec!["x^0".into(), "x^1".into()]),
                qmax: job.qmax.unwrap_or(2),
                cap: job.cap.unwrap_or(4),
                max_total: job.max_total,
            },
            format,
        ),
        JobCommand::Verify => {
            let suite = job.suite.as_deref().ok_or_else(|| usage("verify job needs \"suite\""))?;
            let mut cfg = verify_config(suite, target)?;
            cfg.qmax = job.qmax.unwrap_or(cfg.qmax);
            cfg.samples = job.samples.unwrap_or(cfg.samples);
            cfg.seed = job.seed.unwrap_or(cfg.seed);
            verify(&cfg, format)
        }
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn main() -> ExitCode {
    let format_given = std::env::args().any(|a| a == "--format" || a.starts_with("--format="));
    let cli = Cli::parse();
    if cli.jobs > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let outcome = match &cli.command {
        Command::Correlator(a) => correlator_cmd(a, cli.format),
        Command::Potential(a) => potential_cmd(a, cli.format),
        Command::Verify(a) => verify_cmd(a, cli.format),
        Command::Run { file } => run_job(file, cli.format, format_given),
    };
    match outcome {
        Ok((out, ok)) => {
            print!("{out}");
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Engine(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
