//! `abf` command-line front end.
//!
//! Exit codes: 0 success, 1 certificate violation, 2 configuration or
//! parse error.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::problem::{InstanceDescriptor, ProblemInstance};
use crate::prox::Regularizer;
use crate::schedule::ScheduleConfig;
use crate::solvers::{run, Method, RunConfig, Stopping};
use crate::trajectory::{format_float, write_atomic, Trajectory};
use crate::verify::{instance_checks, verify_trajectory, TrendOptions, VerificationReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VIOLATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Overrides the output directory of `run` and enables CSV output for
/// `compare`.
pub const OUTPUT_DIR_ENV: &str = "ABF_OUTPUT_DIR";

const COMPARE_LABEL: &str = "observational: the worst-case comparison between these methods is a \
performance-estimation result, not a per-instance guarantee";

#[derive(Debug)]
pub enum CliError {
    Parse {
        source: String,
        line: usize,
        column: usize,
        message: String,
    },
    Config(Error),
    Io(String, std::io::Error),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse {
                source,
                line,
                column,
                message,
            } => write!(f, "{source}:{line}:{column}: {message}"),
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Io(what, e) => write!(f, "{what}: {e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Config(e)
    }
}

fn parse_error(source: &str, e: serde_json::Error) -> CliError {
    CliError::Parse {
        source: source.to_string(),
        line: e.line(),
        column: e.column(),
        message: {
            let text = e.to_string();
            let suffix = format!(" at line {} column {}", e.line(), e.column());
            text.strip_suffix(&suffix).unwrap_or(&text).to_string()
        },
    }
}

/// Parses `kind:key=value,...`.
///
/// `quadratic:dim=20,cond=100,seed=1[,l1=0.5|l2=0.5]` and
/// `lasso:rows=20,cols=40,reg=0.5,seed=7`.
pub fn parse_short_instance(text: &str) -> Result<InstanceDescriptor, Error> {
    let (kind, rest) = text.split_once(':').unwrap_or((text, ""));
    let mut pairs = Vec::new();
    for item in rest.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::config("instance", format!("expected key=value, got {item:?}")))?;
        pairs.push((k.trim(), v.trim()));
    }
    let mut take = |key: &str| -> Option<String> {
        let i = pairs.iter().position(|(k, _)| *k == key)?;
        Some(pairs.remove(i).1.to_string())
    };
    fn num<T: std::str::FromStr>(key: &str, v: Option<String>, default: Option<T>) -> Result<T, Error> {
        match v {
            Some(s) => s.parse().map_err(|_| Error::config(key, format!("cannot parse {s:?}"))),
            None => default.ok_or_else(|| Error::config(key, "missing")),
        }
    }
    let descriptor = match kind {
        "quadratic" => {
            let dimension = num("dim", take("dim"), None)?;
            let condition_number = num("cond", take("cond"), None)?;
            let seed = num("seed", take("seed"), Some(0))?;
            let l1 = take("l1");
            let l2 = take("l2");
            let regularizer = match (l1, l2) {
                (Some(_), Some(_)) => return Err(Error::config("instance", "give at most one of l1, l2")),
                (Some(w), None) => Regularizer::l1(num("l1", Some(w), None)?)?,
                (None, Some(w)) => Regularizer::squared_l2(num("l2", Some(w), None)?)?,
                (None, None) => Regularizer::Zero,
            };
            InstanceDescriptor::Quadratic {
                dimension,
                condition_number,
                seed,
                regularizer,
            }
        }
        "lasso" => InstanceDescriptor::Lasso {
            rows: num("rows", take("rows"), None)?,
            cols: num("cols", take("cols"), None)?,
            reg_weight: num("reg", take("reg"), None)?,
            seed: num("seed", take("seed"), Some(0))?,
        },
        other => return Err(Error::config("instance", format!("unknown instance kind {other:?}"))),
    };
    if let Some((k, _)) = pairs.first() {
        return Err(Error::config("instance", format!("unknown key {k:?} for {kind}")));
    }
    Ok(descriptor)
}

/// Resolves an instance argument: inline JSON, a JSON file, or the short
/// form.
pub fn resolve_instance(arg: &str) -> Result<InstanceDescriptor, CliError> {
    let trimmed = arg.trim_start();
    if trimmed.starts_with('{') {
        return serde_json::from_str(arg).map_err(|e| parse_error("<instance>", e));
    }
    let path = Path::new(arg);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(arg.to_string(), e))?;
        return serde_json::from_str(&text).map_err(|e| parse_error(arg, e));
    }
    Ok(parse_short_instance(arg)?)
}

/// Instance entry in a benchmark file: a document object or a short-form
/// string.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceSpec(pub InstanceDescriptor);

impl<'de> Deserialize<'de> for InstanceSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = InstanceSpec;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an instance document or a short form such as \"lasso:rows=20,cols=40,reg=0.5,seed=7\"")
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<InstanceSpec, E> {
                parse_short_instance(v).map(InstanceSpec).map_err(E::custom)
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<InstanceSpec, A::Error> {
                InstanceDescriptor::deserialize(de::value::MapAccessDeserializer::new(map)).map(InstanceSpec)
            }
        }
        d.deserialize_any(V)
    }
}

/// Run options of a benchmark entry; `RunConfig` without the method.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub step: Option<f64>,
    pub max_iterations: usize,
    pub schedule: ScheduleConfig,
    pub record_every: usize,
    pub stopping: Stopping,
    pub start: Option<Vec<f64>>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            step: None,
            max_iterations: 1000,
            schedule: ScheduleConfig::default(),
            record_every: 1,
            stopping: Stopping::None,
            start: None,
        }
    }
}

impl RunSettings {
    pub fn with_method(&self, method: Method) -> RunConfig {
        RunConfig {
            method,
            step: self.step,
            max_iterations: self.max_iterations,
            schedule: self.schedule,
            record_every: self.record_every,
            stopping: self.stopping,
            start: self.start.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkRun {
    pub instance: InstanceSpec,
    pub method: Method,
    #[serde(default)]
    pub config: RunSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

/// `{output_dir, format, runs: [{instance, method, config}]}`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub format: ReportFormat,
    #[serde(default)]
    pub runs: Vec<BenchmarkRun>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("abf-output")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub method: Method,
    pub instance: String,
    pub final_gap: Option<f64>,
    pub bound_slack_min: Option<f64>,
    pub violations: Vec<&'static str>,
}

fn summarize(traj: &Trajectory, report: &VerificationReport) -> RunSummary {
    RunSummary {
        method: traj.method,
        instance: traj.instance.clone().unwrap_or_default(),
        final_gap: traj.final_gap(),
        bound_slack_min: traj.bound_slack_min(),
        violations: report.violations(),
    }
}

fn file_stem(index: usize, method: Method, label: &str) -> String {
    let clean: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{index:03}_{method}_{}", clean.trim_matches('_'))
}

fn write_trajectory(dir: &Path, stem: &str, traj: &Trajectory, format: ReportFormat) -> Result<PathBuf, CliError> {
    let (path, bytes) = match format {
        ReportFormat::Csv => (dir.join(format!("{stem}.csv")), traj.to_csv().into_bytes()),
        ReportFormat::Json => (
            dir.join(format!("{stem}.json")),
            serde_json::to_vec_pretty(&traj.to_json()).expect("json encodes"),
        ),
    };
    write_atomic(&path, &bytes).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    Ok(path)
}

fn prepare(entry: &BenchmarkRun) -> Result<(ProblemInstance, RunConfig), Error> {
    let instance = entry.instance.0.build()?;
    let config = entry.config.with_method(entry.method);
    config.init(&instance)?;
    Ok((instance, config))
}

/// Executes a parsed benchmark. Returns the summaries in input order.
pub fn execute_benchmark(spec: &BenchmarkSpec, output_dir: &Path) -> Result<Vec<RunSummary>, CliError> {
    let prepared: Vec<(ProblemInstance, RunConfig)> = spec
        .runs
        .par_iter()
        .enumerate()
        .map(|(i, entry)| {
            prepare(entry).map_err(|e| match e {
                Error::Config { field, reason } => Error::Config {
                    field: format!("runs[{i}].{field}"),
                    reason,
                },
                other => other,
            })
        })
        .collect::<Result<_, _>>()?;

    fs::create_dir_all(output_dir).map_err(|e| CliError::Io(output_dir.display().to_string(), e))?;
    let summaries = prepared
        .par_iter()
        .enumerate()
        .map(|(i, (instance, config))| {
            let traj = run(instance, config)?;
            let report = verify_trajectory(&traj, &TrendOptions::default());
            let label = traj.instance.clone().unwrap_or_default();
            write_trajectory(output_dir, &file_stem(i, config.method, &label), &traj, spec.format)?;
            Ok(summarize(&traj, &report))
        })
        .collect::<Result<Vec<_>, CliError>>()?;

    let path = output_dir.join("summary.json");
    let bytes = serde_json::to_vec_pretty(&summaries).expect("json encodes");
    write_atomic(&path, &bytes).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    Ok(summaries)
}

fn opt_float(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_else(|| "-".to_string())
}

fn cmd_run(spec_path: &Path, out: &mut dyn Write) -> Result<i32, CliError> {
    let source = spec_path.display().to_string();
    let text = fs::read_to_string(spec_path).map_err(|e| CliError::Io(source.clone(), e))?;
    let spec: BenchmarkSpec = serde_json::from_str(&text).map_err(|e| parse_error(&source, e))?;
    let output_dir = match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) => PathBuf::from(dir),
        None if spec.output_dir.is_relative() => spec_path.parent().unwrap_or(Path::new(".")).join(&spec.output_dir),
        None => spec.output_dir.clone(),
    };
    let summaries = execute_benchmark(&spec, &output_dir)?;
    let mut failed = false;
    for s in &summaries {
        writeln!(
            out,
            "{} {} final_gap={} bound_slack_min={} violations=[{}]",
            s.method,
            s.instance,
            opt_float(s.final_gap),
            opt_float(s.bound_slack_min),
            s.violations.join(",")
        )
        .ok();
        failed |= !s.violations.is_empty();
    }
    writeln!(out, "summary: {}", output_dir.join("summary.json").display()).ok();
    Ok(if failed { EXIT_VIOLATION } else { EXIT_OK })
}

fn cmd_compare(instance_arg: &str, iters: usize, out: &mut dyn Write) -> Result<i32, CliError> {
    let descriptor = resolve_instance(instance_arg)?;
    let instance = descriptor.build()?;
    let abf = run(&instance, &RunConfig::new(Method::Abf, iters))?;
    let fista = run(&instance, &RunConfig::new(Method::Fista, iters))?;

    if let Some(dir) = std::env::var_os(OUTPUT_DIR_ENV) {
        let dir = PathBuf::from(dir);
        fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.display().to_string(), e))?;
        let label = descriptor.label();
        write_trajectory(&dir, &file_stem(0, Method::Abf, &label), &abf, ReportFormat::Csv)?;
        write_trajectory(&dir, &file_stem(1, Method::Fista, &label), &fista, ReportFormat::Csv)?;
    }

    // gaps below this are roundoff; the ratio column floors both at it
    let floor = f64::EPSILON * abf.records.iter().map(|r| r.gap_scale).fold(1.0, f64::max);
    writeln!(out, "# {COMPARE_LABEL}").ok();
    writeln!(out, "# instance: {}", descriptor.label()).ok();
    writeln!(out, "# gap floor: {}", format_float(floor)).ok();
    writeln!(out, "k,abf_gap,abf_bound,fista_gap,fista_bound,ratio").ok();
    for (a, f) in abf.records.iter().zip(&fista.records).filter(|(a, _)| a.k >= 1) {
        let ratio = a.f_gap.max(floor) / f.f_gap.max(floor);
        writeln!(
            out,
            "{},{},{},{},{},{}",
            a.k,
            format_float(a.f_gap),
            opt_float(a.bound),
            format_float(f.f_gap),
            opt_float(f.bound),
            format_float(ratio)
        )
        .ok();
    }
    writeln!(
        out,
        "# final gaps: abf={} fista={}",
        opt_float(abf.final_gap()),
        opt_float(fista.final_gap())
    )
    .ok();
    Ok(EXIT_OK)
}

fn cmd_verify(
    instance_arg: &str,
    method: Method,
    iters: usize,
    step: Option<f64>,
    seed: u64,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let descriptor = resolve_instance(instance_arg)?;
    let instance = descriptor.build()?;
    let mut config = RunConfig::new(method, iters);
    config.step = step;
    let traj = run(&instance, &config)?;
    let mut report = verify_trajectory(&traj, &TrendOptions::default());
    report.checks.extend(instance_checks(&instance, traj.step, 100, seed)?);

    writeln!(
        out,
        "verify {} on {} ({} iterations)",
        method,
        descriptor.label(),
        iters
    )
    .ok();
    for c in &report.checks {
        writeln!(
            out,
            "{} {:<32} worst_slack={} evaluated={}{}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            format_float(c.worst_slack),
            c.evaluated,
            if c.violations.is_empty() {
                String::new()
            } else {
                format!(" at {:?}", c.violations)
            }
        )
        .ok();
    }
    let failed = report.violations();
    if failed.is_empty() {
        writeln!(out, "all {} checks passed", report.checks.len()).ok();
        Ok(EXIT_OK)
    } else {
        writeln!(
            out,
            "{} of {} checks failed: {}",
            failed.len(),
            report.checks.len(),
            failed.join(", ")
        )
        .ok();
        Ok(EXIT_VIOLATION)
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "abf",
    version,
    about = "Accelerated backward-forward splitting with certificate checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute every run of a benchmark JSON file and write trajectories
    Run { spec: PathBuf },
    /// Print the ABF and FISTA gap sequences side by side
    Compare {
        /// Short form (e.g. lasso:rows=20,cols=40,reg=0.5,seed=7), inline JSON, or a JSON file
        instance: String,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
    },
    /// Run one method and evaluate every applicable certificate
    Verify {
        instance: String,
        #[arg(value_parser = parse_method)]
        method: Method,
        #[arg(long, default_value_t = 1000)]
        iters: usize,
        /// Step size; 1/L when omitted
        #[arg(long)]
        step: Option<f64>,
        /// Seed for the sampled instance checks
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render();
            if code == 0 {
                write!(out, "{text}").ok();
            } else {
                write!(err, "{text}").ok();
            }
            return if code == 0 { EXIT_OK } else { EXIT_CONFIG };
        }
    };
    let result = match cli.command {
        Command::Run { spec } => cmd_run(&spec, out),
        Command::Compare { instance, iters } => cmd_compare(&instance, iters, out),
        Command::Verify {
            instance,
            method,
            iters,
            step,
            seed,
        } => cmd_verify(&instance, method, iters, step, seed, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            writeln!(err, "error: {e}").ok();
            EXIT_CONFIG
        }
    }
}
