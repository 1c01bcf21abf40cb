//! `inkbench`: compile sensor designs to G-code, check G-code on the
//! virtual printer, run virtual characterization experiments and analyze
//! measurement logs.
//!
//! Exit status: 0 on success, 1 for invalid input, 2 when the pipeline
//! itself fails. Errors are printed to stderr as one JSON object.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inkbench_core::analysis::{
    characterize, characterize_zero_values, plot, CharacterizationReport,
};
use inkbench_core::experiment::{
    is_zero_value_header, replicate, run_cyclic, run_repeatability, run_to_failure,
    ExperimentError, MeasurementLog, Perturbation, ZeroValueTable,
};
use inkbench_core::format::sig_fixed;
use inkbench_core::gcode::{execute, parse, ExecutionReport};
use inkbench_core::sensor::ReadingUnit;
use inkbench_core::toolpath::{emit_fabrication_plan, FabricationStep, ToolpathError};

use config::{WorkbenchConfig, CONFIG_ENV};

const DIGITS: usize = 6;

#[derive(Debug)]
pub struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    pub fn input(kind: &'static str, message: String) -> Self {
        Self {
            code: 1,
            kind,
            message,
        }
    }

    pub fn internal(kind: &'static str, message: String) -> Self {
        Self {
            code: 2,
            kind,
            message,
        }
    }

    fn report(&self) {
        let json = serde_json::json!({ "error": self.kind, "message": self.message });
        eprintln!("{json}");
    }
}

#[derive(Parser)]
#[command(
    name = "inkbench",
    version,
    about = "Printed stretchable strain sensor workbench"
)]
struct Cli {
    /// Workbench config file (TOML).
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a sensor spec to per-layer G-code and a fabrication plan.
    Compile(CompileArgs),
    /// Parse and run a G-code file on the virtual printer.
    Verify(VerifyArgs),
    /// Run a virtual experiment and write the measurement log CSV.
    Experiment(ExperimentArgs),
    /// Compute metrics from a measurement log or zero-value table.
    Analyze(AnalyzeArgs),
}

#[derive(Args)]
struct CompileArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    gcode: PathBuf,
    /// Write the execution report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    /// cyclic, failure or repeatability.
    #[arg(long, default_value = "cyclic")]
    protocol: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    csv: PathBuf,
    /// Report JSON path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Directory for plot CSV series and SVG charts.
    #[arg(long)]
    plots: Option<PathBuf>,
    /// Fit the loading phase only.
    #[arg(long)]
    stretch_only: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(stdout) => {
            print!("{stdout}");
            ExitCode::SUCCESS
        }
        Err((stdout, failure)) => {
            print!("{stdout}");
            failure.report();
            ExitCode::from(failure.code)
        }
    }
}

type CmdResult = Result<String, (String, Failure)>;

fn run(cli: Cli) -> CmdResult {
    let config =
        WorkbenchConfig::discover(cli.config.as_deref()).map_err(|f| (String::new(), f))?;
    match cli.command {
        Command::Compile(a) => compile(&config, a).map_err(|f| (String::new(), f)),
        Command::Verify(a) => verify(&config, a),
        Command::Experiment(a) => experiment(&config, a).map_err(|f| (String::new(), f)),
        Command::Analyze(a) => analyze(&config, a).map_err(|f| (String::new(), f)),
    }
}

fn num(v: f64) -> String {
    sig_fixed(v, DIGITS)
}

/// Six significant digits with an SI prefix, e.g. `213.143 kΩ`.
fn si(v: f64, unit: Option<ReadingUnit>) -> String {
    si_like(v, v, unit)
}

/// `v` scaled with the prefix that suits `reference`, so a spread prints
/// in the same unit as its mean.
fn si_like(v: f64, reference: f64, unit: Option<ReadingUnit>) -> String {
    let symbol = unit.map_or("", |u| u.symbol());
    if reference == 0.0 || !reference.is_finite() || !v.is_finite() {
        return format!("{} {symbol}", num(v));
    }
    const PREFIXES: [(i32, &str); 9] = [
        (-15, "f"),
        (-12, "p"),
        (-9, "n"),
        (-6, "µ"),
        (-3, "m"),
        (0, ""),
        (3, "k"),
        (6, "M"),
        (9, "G"),
    ];
    let exp = ((reference.abs().log10() / 3.0).floor() as i32 * 3).clamp(-15, 9);
    let prefix = PREFIXES
        .iter()
        .find(|(e, _)| *e == exp)
        .map_or("", |(_, p)| p);
    format!("{} {prefix}{symbol}", num(v / 10f64.powi(exp)))
}

fn write_file(path: &Path, body: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .map_err(|e| Failure::input("io", format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, body).map_err(|e| Failure::input("io", format!("{}: {e}", path.display())))
}

fn compile(config: &WorkbenchConfig, args: CompileArgs) -> Result<String, Failure> {
    let spec = config.load_spec(&args.spec)?;
    let plan = emit_fabrication_plan(&spec, &config.print, &config.cure).map_err(|e| match e {
        ToolpathError::Sensor(_) | ToolpathError::InvalidParams(_) => {
            Failure::input("spec", e.to_string())
        }
        _ => Failure::internal("compile", e.to_string()),
    })?;
    let out_dir = args.out.unwrap_or_else(|| config.output_dir.clone());

    let mut s = String::new();
    let _ = writeln!(s, "sensor_id: {}", plan.sensor_id);
    let _ = writeln!(s, "kind: {}", plan.kind);
    let _ = writeln!(s, "spec_hash: {}", plan.spec_hash);
    let _ = writeln!(s, "ink_layers: {}", plan.ink_layer_count());
    let _ = writeln!(s, "total_thickness_mm: {}", num(plan.total_thickness_mm));
    let mut total_time = 0.0;
    for step in &plan.steps {
        let FabricationStep::PrintInk {
            layer,
            surface_z_mm,
            program,
        } = step
        else {
            continue;
        };
        let (_, report) = execute(program, &config.print.machine());
        if !report.violations.is_empty() {
            return Err(Failure::internal(
                "compile",
                format!("layer {layer} fails verification: {:?}", report.violations),
            ));
        }
        let path = out_dir.join(format!("{}.layer{layer}.gcode", plan.sensor_id));
        write_file(&path, &program.emit())?;
        let _ = writeln!(s, "layer {layer} gcode: {}", path.display());
        let _ = writeln!(s, "layer {layer} surface_z_mm: {}", num(*surface_z_mm));
        for (feature, stats) in &report.features {
            let _ = writeln!(
                s,
                "layer {layer} {feature}_length_mm: {}",
                num(stats.length_mm)
            );
        }
        let _ = writeln!(
            s,
            "layer {layer} deposited_length_mm: {}",
            num(report.deposited_length_mm)
        );
        let _ = writeln!(
            s,
            "layer {layer} print_time_s: {}",
            num(report.print_time_s)
        );
        total_time += report.print_time_s;
    }
    let _ = writeln!(s, "total_print_time_s: {}", num(total_time));
    let plan_path = out_dir.join(format!("{}.plan.toml", plan.sensor_id));
    let text = plan
        .to_toml()
        .map_err(|e| Failure::internal("compile", e.to_string()))?;
    write_file(&plan_path, &text)?;
    let _ = writeln!(s, "plan: {}", plan_path.display());
    let _ = writeln!(s, "steps: {}", plan.steps.len());
    Ok(s)
}

fn execution_summary(report: &ExecutionReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "commands: {}", report.commands);
    let _ = writeln!(
        s,
        "deposited_length_mm: {}",
        num(report.deposited_length_mm)
    );
    let _ = writeln!(
        s,
        "deposited_volume_mm3: {}",
        num(report.deposited_volume_mm3)
    );
    let _ = writeln!(s, "travel_length_mm: {}", num(report.travel_length_mm));
    let _ = writeln!(s, "print_time_s: {}", num(report.print_time_s));
    let _ = writeln!(s, "retracted_e_mm: {}", num(report.retracted_e_mm));
    let _ = writeln!(s, "primed_e_mm: {}", num(report.primed_e_mm));
    for (feature, stats) in &report.features {
        let _ = writeln!(
            s,
            "feature {feature}: length_mm={} volume_mm3={} segments={}",
            num(stats.length_mm),
            num(stats.volume_mm3),
            stats.segments
        );
    }
    let _ = writeln!(s, "violations: {}", report.violations.len());
    for v in &report.violations {
        let _ = writeln!(s, "line {}: {:?}: {}", v.line, v.kind, v.message);
    }
    s
}

fn verify(config: &WorkbenchConfig, args: VerifyArgs) -> CmdResult {
    let fail = |f: Failure| (String::new(), f);
    let text = fs::read_to_string(&args.gcode).map_err(|e| {
        fail(Failure::input(
            "io",
            format!("{}: {e}", args.gcode.display()),
        ))
    })?;
    let program = parse(&text).map_err(|e| fail(Failure::internal("parse", e.to_string())))?;
    let (_, report) = execute(&program, &config.print.machine());
    if let Some(out) = &args.out {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(out, &(json + "\n")).map_err(fail)?;
    }
    let summary = execution_summary(&report);
    if report.violations.is_empty() {
        Ok(summary)
    } else {
        let kinds: Vec<String> = report
            .violations
            .iter()
            .map(|v| format!("{:?}", v.kind))
            .collect();
        Err((
            summary,
            Failure::input(
                "violations",
                format!(
                    "{} violation(s): {}",
                    report.violations.len(),
                    kinds.join(", ")
                ),
            ),
        ))
    }
}

fn experiment(config: &WorkbenchConfig, args: ExperimentArgs) -> Result<String, Failure> {
    let spec = config.load_spec(&args.spec)?;
    let mut cfg = config.protocol.clone();
    if let Some(seed) = args.seed {
        cfg.rng_seed = seed;
    }
    let to_failure = |e: ExperimentError| Failure::input("protocol", e.to_string());

    let mut s = String::new();
    let log: MeasurementLog = match args.protocol.as_str() {
        "cyclic" => run_cyclic(&spec, &cfg).map_err(to_failure)?,
        "failure" => {
            let log = run_to_failure(&spec, &cfg).map_err(to_failure)?;
            let last = log
                .rows
                .iter()
                .rev()
                .find(|r| !r.is_open_circuit())
                .map_or(0.0, |r| r.strain_pct);
            let _ = writeln!(s, "final_level_pct: {}", num(last));
            log
        }
        "repeatability" => {
            let specs = replicate(&spec, config.repeatability.sensors);
            let perturbation = Perturbation {
                material_std_rel: config.repeatability.material_std_rel,
            };
            let run = run_repeatability(&specs, &cfg, perturbation).map_err(to_failure)?;
            for (id, v) in &run.zero_values {
                let _ = writeln!(s, "zero_value {id}: {}", si(*v, Some(run.unit)));
            }
            run.log
        }
        other => {
            return Err(Failure::input(
                "protocol",
                format!("unknown protocol `{other}`; expected cyclic, failure or repeatability"),
            ))
        }
    };
    let out = args.out.unwrap_or_else(|| {
        config
            .output_dir
            .join(format!("{}.{}.csv", spec.id, args.protocol))
    });
    write_file(&out, &log.to_csv_string())?;
    let mut head = String::new();
    let _ = writeln!(head, "protocol: {}", args.protocol);
    let _ = writeln!(head, "sensor_ids: {}", log.sensor_ids().join(","));
    let _ = writeln!(head, "seed: {}", cfg.rng_seed);
    let _ = writeln!(head, "rows: {}", log.len());
    let _ = writeln!(s, "log: {}", out.display());
    Ok(head + &s)
}

fn analyze(config: &WorkbenchConfig, args: AnalyzeArgs) -> Result<String, Failure> {
    let text = fs::read_to_string(&args.csv)
        .map_err(|e| Failure::input("io", format!("{}: {e}", args.csv.display())))?;
    let schema = |e: inkbench_core::experiment::LogError| {
        Failure::input("schema", format!("{}: {e}", args.csv.display()))
    };
    let metric =
        |e: inkbench_core::analysis::AnalysisError| Failure::input("analysis", e.to_string());

    let first_line = text.lines().next().unwrap_or("");
    let mut s = String::new();
    let report: CharacterizationReport = if is_zero_value_header(first_line) {
        let table = ZeroValueTable::read_csv(text.as_bytes()).map_err(schema)?;
        let _ = writeln!(s, "sensors: {}", table.entries.len());
        characterize_zero_values(&table).map_err(metric)?
    } else {
        let log = MeasurementLog::read_csv(text.as_bytes()).map_err(schema)?;
        let _ = writeln!(s, "rows: {}", log.len());
        characterize(&log, args.stretch_only).map_err(metric)?
    };
    let _ = writeln!(s, "sensor_ids: {}", report.sensor_ids.join(","));

    if !report.dh_pct_per_cycle.is_empty() {
        let per: Vec<String> = report.dh_pct_per_cycle.iter().map(|v| num(*v)).collect();
        let _ = writeln!(s, "dh_pct_per_cycle: {}", per.join(", "));
    }
    let optional = [
        ("dh_mean_pct", report.dh_mean_pct),
        ("gauge_factor", report.gauge_factor),
        ("r_squared", report.r_squared),
        ("stretchability_pct", report.stretchability_pct),
    ];
    for (name, v) in optional {
        if let Some(v) = v {
            let _ = writeln!(s, "{name}: {}", num(v));
        }
    }
    if let Some(z) = &report.zero_value_stats {
        let _ = writeln!(s, "zero_value_mean: {}", si(z.mean, report.unit));
        let _ = writeln!(
            s,
            "zero_value_sample_std: {}",
            si_like(z.sample_std, z.mean, report.unit)
        );
        let _ = writeln!(
            s,
            "zero_value_relative_std_pct: {}",
            num(z.relative_std_pct)
        );
    }

    let out = args
        .out
        .unwrap_or_else(|| config.output_dir.join("report.json"));
    write_file(&out, &(report.to_json() + "\n"))?;
    let _ = writeln!(s, "report: {}", out.display());
    if let Some(dir) = &args.plots {
        let files = plot::write_plots(&report, dir)
            .map_err(|e| Failure::input("io", format!("{}: {e}", dir.display())))?;
        let _ = writeln!(s, "plot_files: {}", files.len());
    }
    Ok(s)
}
