//! `dosefind` command line: scenario generation, ensemble runs, permutation
//! experiments and report rendering.

pub mod config;
pub mod error;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dosefind::scenarios::{
    fixed_scenarios, read_ensemble, stratified_ensemble, write_ensemble, EnsembleHeader, PostFilter, SceneConfig,
};
use dosefind::seed::{stream, StreamKind};
use dosefind::simulator::{
    perfect_threshold_set, run_ensemble, run_permutation_ensemble, summarize_runs, write_histogram_csv, write_runs_csv,
    EnsembleReport, RunRecord, SummaryOptions, TrialPlan,
};
use dosefind::{Level, Scenario};
use serde::{Deserialize, Serialize};

use config::{design_arg, load, Format, LabeledDesign, RunFile, RunFlags, RunSpec, ScenarioSource};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "dosefind", version, about = "Simulate dose-finding designs")]
pub struct Cli {
    /// Worker threads (0 = one per core). Output does not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    pub jobs: usize,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a stratified random-scenario ensemble as JSON lines.
    GenScenarios(GenArgs),
    /// Run every design on every scenario with shared patient thresholds.
    Run(RunArgs),
    /// Run one design on random orderings of one fixed threshold set.
    Permute(PermuteArgs),
    /// Render the summary table of a report.json.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub seed: u64,
    /// Scenarios per true-MTD level, comma separated; the count sets the
    /// number of levels.
    #[arg(long, value_delimiter = ',', required = true)]
    pub quotas: Vec<usize>,
    /// Use the 4/7-level acceptance cutoffs for vetting and filtering.
    #[arg(long)]
    pub post_filter: bool,
    #[arg(long, default_value_t = config::default_oversample())]
    pub oversample: usize,
    /// Generator settings (JSON or TOML); defaults follow the level count.
    #[arg(long)]
    pub generator: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub seed: u64,
    /// Run specification file (JSON or TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Design as inline JSON or a file path; repeatable. Replaces the
    /// designs of the config file.
    #[arg(long = "design")]
    pub designs: Vec<String>,
    /// Scenario ensemble file; replaces the config file's source.
    #[arg(long)]
    pub scenarios: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<f64>,
    /// Runs per scenario.
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub cohorts: Option<usize>,
    #[arg(long)]
    pub cohort_size: Option<u32>,
    /// Starting level, counted from 1.
    #[arg(long)]
    pub start: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct PermuteArgs {
    #[arg(long)]
    pub seed: u64,
    /// Design as inline JSON or a file path.
    #[arg(long)]
    pub design: String,
    /// Calibrated scenario by family name (uniform, gamma, normal,
    /// lognormal, weibull, logistic).
    #[arg(long, conflicts_with = "scenario_file")]
    pub scenario: Option<String>,
    /// Ensemble file; used with --index.
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub index: usize,
    #[arg(long, default_value_t = config::DEFAULT_TARGET)]
    pub target: f64,
    #[arg(long, default_value_t = config::DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[arg(long, default_value_t = config::DEFAULT_COHORTS)]
    pub cohorts: usize,
    #[arg(long, default_value_t = config::DEFAULT_COHORT_SIZE)]
    pub cohort_size: u32,
    #[arg(long, default_value_t = 2)]
    pub start: usize,
    /// Size of the fixed threshold set.
    #[arg(long, default_value_t = 32)]
    pub thresholds: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A report.json written by `run` or `permute`.
    pub report: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Summary of one design over the whole ensemble and per scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub label: String,
    pub config: serde_json::Value,
    /// `None` when the ensemble had no runs.
    pub overall: Option<serde_json::Value>,
    pub per_scenario: Vec<ScenarioReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario_id: usize,
    pub name: Option<String>,
    pub true_mtd: Level,
    pub report: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub seed: u64,
    pub target: f64,
    pub cohorts: usize,
    pub cohort_size: u32,
    pub start: usize,
    pub replicates: usize,
    pub scenarios: usize,
    pub levels: usize,
    pub designs: Vec<DesignReport>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    pool.install(|| match cli.command {
        Command::GenScenarios(a) => gen_scenarios(a),
        Command::Run(a) => run(a),
        Command::Permute(a) => permute(a),
        Command::Report(a) => report(a),
    })
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::io(path, std::io::Error::other(e.to_string()))
}

fn generate(
    quotas: &[usize],
    post_filter: bool,
    oversample: usize,
    generator: Option<SceneConfig>,
    seed: u64,
) -> CliResult<(Vec<Scenario>, EnsembleHeader)> {
    let levels = quotas.len();
    let filter = if post_filter {
        Some(PostFilter::for_levels(levels).ok_or_else(|| {
            CliError::Config(format!("acceptance cutoffs are defined for 4 or 7 levels, not {levels}"))
        })?)
    } else {
        None
    };
    let cfg = match (generator, filter) {
        (Some(g), _) => g,
        (None, Some(f)) => f.scene_config(levels),
        (None, None) => SceneConfig::new(levels),
    };
    if cfg.nlev != levels {
        return Err(CliError::Config(format!("generator has {} levels but {levels} quotas were given", cfg.nlev)));
    }
    let scenarios =
        stratified_ensemble(&cfg, quotas, filter.as_ref(), oversample, &mut stream(seed, StreamKind::Scenarios, 0))?;
    let header = EnsembleHeader {
        seed,
        count: scenarios.len(),
        generator: Some(cfg),
        quotas: Some(quotas.to_vec()),
        post_filter: filter,
    };
    Ok((scenarios, header))
}

fn gen_scenarios(a: GenArgs) -> CliResult<()> {
    let generator = a.generator.as_deref().map(load::<SceneConfig>).transpose()?;
    let (scenarios, header) = generate(&a.quotas, a.post_filter, a.oversample, generator, a.seed)?;
    let mut w = create(&a.out)?;
    write_ensemble(&mut w, &header, &scenarios).map_err(|e| CliError::io(&a.out, e))
}

fn read_scenarios(path: &Path) -> CliResult<Vec<Scenario>> {
    let f = File::open(path).map_err(|e| CliError::io(path, e))?;
    let (_, scenarios) = read_ensemble(BufReader::new(f)).map_err(|e| match e {
        dosefind::Error::InvalidConfig(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => CliError::Core(other),
    })?;
    Ok(scenarios)
}

fn load_scenarios(source: &ScenarioSource, target: f64, seed: u64) -> CliResult<Vec<Scenario>> {
    let scenarios = match source {
        ScenarioSource::Fixed => fixed_scenarios(target)?,
        ScenarioSource::File { path } => read_scenarios(path)?,
        ScenarioSource::Random { quotas, post_filter, oversample, generator } => {
            generate(quotas, *post_filter, *oversample, generator.clone(), seed)?.0
        }
    };
    if let Some(s) = scenarios.iter().find(|s| (s.target() - target).abs() > 1e-12) {
        return Err(CliError::Config(format!("scenario target {} differs from run target {target}", s.target())));
    }
    if scenarios.windows(2).any(|w| w[0].levels() != w[1].levels()) {
        return Err(CliError::Config("scenarios have different numbers of levels".into()));
    }
    Ok(scenarios)
}

fn to_value<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn summarize(runs: &[RunRecord], opts: SummaryOptions) -> CliResult<Option<EnsembleReport>> {
    if runs.is_empty() {
        return Ok(None);
    }
    Ok(Some(summarize_runs(runs, opts)?))
}

fn design_report(
    d: &LabeledDesign,
    runs: &[RunRecord],
    scenarios: &[Scenario],
    opts: SummaryOptions,
) -> CliResult<DesignReport> {
    let mut per_scenario = Vec::new();
    for (i, s) in scenarios.iter().enumerate() {
        let sub: Vec<RunRecord> = runs.iter().filter(|r| r.scenario_id == i).cloned().collect();
        if let Some(r) = summarize(&sub, opts)? {
            per_scenario.push(ScenarioReport {
                scenario_id: i,
                name: s.name().map(str::to_string),
                true_mtd: s.true_mtd(),
                report: to_value(&r),
            });
        }
    }
    Ok(DesignReport {
        label: d.label().to_string(),
        config: to_value(&d.config),
        overall: summarize(runs, opts)?.as_ref().map(to_value),
        per_scenario,
    })
}

fn write_outputs(out: &Path, format: Format, report: &ReportFile, runs: &[RunRecord]) -> CliResult<()> {
    write_json(&out.join("report.json"), report)?;
    match format {
        Format::Csv => {
            let path = out.join("runs.csv");
            let w = create(&path)?;
            write_runs_csv(w, runs).map_err(|e| csv_err(&path, e))?;
        }
        Format::Json => write_json(&out.join("runs.json"), &runs)?,
    }
    for d in &report.designs {
        if let Some(overall) = &d.overall {
            let r: EnsembleReport = serde_json::from_value(overall.clone())
                .map_err(|e| CliError::Config(format!("internal report shape: {e}")))?;
            let path = out.join(format!("hist_{}.csv", d.label));
            let w = create(&path)?;
            write_histogram_csv(w, &r).map_err(|e| csv_err(&path, e))?;
        }
    }
    let path = out.join(match format {
        Format::Csv => "summary.csv",
        Format::Json => "summary.json",
    });
    let mut w = create(&path)?;
    render_summary(&mut w, report, format).map_err(|e| CliError::io(&path, e))
}

fn run(a: RunArgs) -> CliResult<()> {
    let file: RunFile = match &a.config {
        Some(p) => load(p)?,
        None => RunFile::default(),
    };
    let flags = RunFlags {
        seed: a.seed,
        target: a.target,
        replicates: a.replicates,
        cohorts: a.cohorts,
        cohort_size: a.cohort_size,
        start: a.start,
        out: a.out,
        format: a.format,
        scenario_file: a.scenarios,
        designs: a.designs.iter().map(|d| design_arg(d)).collect::<CliResult<_>>()?,
    };
    let spec = RunSpec::merge(file, flags)?;
    let scenarios = load_scenarios(&spec.scenarios, spec.target, spec.seed)?;
    let levels = scenarios.first().map_or(0, |s| s.levels());
    let start = Level::from_number(spec.start).expect("validated positive");
    let plan = TrialPlan::new(spec.cohorts, spec.cohort_size, start)?;
    let opts = SummaryOptions::new(spec.cohorts as u32, levels);
    let mut all_runs = Vec::new();
    let mut designs = Vec::new();
    for d in &spec.designs {
        let runs = if scenarios.is_empty() || spec.replicates == 0 {
            Vec::new()
        } else {
            let design = d.config.build::<f64>(levels, spec.target)?;
            run_ensemble(d.label(), &design, &scenarios, spec.replicates, plan, spec.seed)?
        };
        designs.push(design_report(d, &runs, &scenarios, opts)?);
        all_runs.extend(runs);
    }
    let report = ReportFile {
        seed: spec.seed,
        target: spec.target,
        cohorts: spec.cohorts,
        cohort_size: spec.cohort_size,
        start: spec.start,
        replicates: spec.replicates,
        scenarios: scenarios.len(),
        levels,
        designs,
    };
    write_outputs(&spec.out, spec.format, &report, &all_runs)
}

fn permute(a: PermuteArgs) -> CliResult<()> {
    let d = design_arg(&a.design)?;
    let scenario = match (&a.scenario, &a.scenario_file) {
        (Some(name), _) => fixed_scenarios(a.target)?
            .into_iter()
            .find(|s| s.name().and_then(|n| n.split('/').next()) == Some(name.as_str()))
            .ok_or_else(|| CliError::Config(format!("unknown calibrated scenario {name:?}")))?,
        (None, Some(path)) => read_scenarios(path)?
            .into_iter()
            .nth(a.index)
            .ok_or_else(|| CliError::Config(format!("{} has no scenario {}", path.display(), a.index)))?,
        (None, None) => return Err(CliError::Config("give --scenario or --scenario-file".into())),
    };
    let start = Level::from_number(a.start).ok_or_else(|| CliError::Config("start level counts from 1".into()))?;
    let plan = TrialPlan::new(a.cohorts, a.cohort_size, start)?;
    let levels = scenario.levels();
    let design = d.config.build::<f64>(levels, a.target)?;
    let base = perfect_threshold_set(a.thresholds, a.target)?;
    let runs = run_permutation_ensemble(d.label(), &design, &scenario, &base, a.replicates, plan, a.seed)?;
    let scenarios = [scenario];
    let report = ReportFile {
        seed: a.seed,
        target: a.target,
        cohorts: a.cohorts,
        cohort_size: a.cohort_size,
        start: a.start,
        replicates: a.replicates,
        scenarios: 1,
        levels,
        designs: vec![design_report(&d, &runs, &scenarios, SummaryOptions::new(a.cohorts as u32, levels))?],
    };
    write_outputs(&a.out, a.format, &report, &runs)
}

/// One row per design with the headline operating characteristics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub design: String,
    pub runs: u64,
    pub success_half: f64,
    pub success_full: f64,
    pub high_n_star: f64,
    pub low_n_star: f64,
    pub high_toxicity: Option<f64>,
    pub incoherent_runs: f64,
    pub mean_n_star: f64,
    pub settled_by_8: f64,
    pub settled_by_12: f64,
}

pub fn summary_rows(report: &ReportFile) -> CliResult<Vec<SummaryRow>> {
    let pct = |x: f64| (1000.0 * x).round() / 10.0;
    let mut rows = Vec::new();
    for d in &report.designs {
        let Some(v) = &d.overall else { continue };
        let r: EnsembleReport =
            serde_json::from_value(v.clone()).map_err(|e| CliError::Config(format!("{}: {e}", d.label)))?;
        rows.push(SummaryRow {
            design: d.label.clone(),
            runs: r.runs,
            success_half: pct(r.success_half),
            success_full: pct(r.success_full),
            high_n_star: pct(r.high_n_star),
            low_n_star: pct(r.low_n_star),
            high_toxicity: r.high_toxicity.map(pct),
            incoherent_runs: pct(r.incoherent_runs),
            mean_n_star: (100.0 * r.mean_n_star).round() / 100.0,
            settled_by_8: pct(r.settled_by_8),
            settled_by_12: pct(r.settled_by_12),
        });
    }
    Ok(rows)
}

/// Percentages in a CSV table or a JSON array.
pub fn render_summary<W: Write>(mut w: W, report: &ReportFile, format: Format) -> std::io::Result<()> {
    let rows = summary_rows(report).map_err(|e| std::io::Error::other(e.to_string()))?;
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &rows)?;
            writeln!(w)?;
        }
        Format::Csv => {
            writeln!(
                w,
                "design,runs,success_half,success_full,high_n_star,low_n_star,high_toxicity,incoherent_runs,mean_n_star,settled_by_8,settled_by_12"
            )?;
            for r in rows {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    r.design,
                    r.runs,
                    r.success_half,
                    r.success_full,
                    r.high_n_star,
                    r.low_n_star,
                    r.high_toxicity.map(|v| v.to_string()).unwrap_or_default(),
                    r.incoherent_runs,
                    r.mean_n_star,
                    r.settled_by_8,
                    r.settled_by_12
                )?;
            }
        }
    }
    w.flush()
}

fn report(a: ReportArgs) -> CliResult<()> {
    let report: ReportFile = load(&a.report)?;
    match &a.out {
        Some(path) => {
            let w = create(path)?;
            render_summary(w, &report, a.format).map_err(|e| CliError::io(path, e))
        }
        None => render_summary(std::io::stdout().lock(), &report, a.format).map_err(|e| CliError::io("<stdout>", e)),
    }
}
