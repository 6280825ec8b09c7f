//! Run specification: a JSON or TOML file merged with command-line flags.
//! Flags win over the file, the file wins over built-in defaults.

use std::path::{Path, PathBuf};

use dosefind::scenarios::SceneConfig;
use dosefind::DesignConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_TARGET: f64 = 0.3;
pub const DEFAULT_REPLICATES: usize = 1000;
pub const DEFAULT_COHORTS: usize = 16;
pub const DEFAULT_COHORT_SIZE: u32 = 2;
pub const DEFAULT_START: usize = 1;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A design with an optional report label (defaults to the design name).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDesign {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(flatten)]
    pub config: DesignConfig,
}

impl LabeledDesign {
    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.config.name())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScenarioSource {
    /// The six calibrated curves, one per MTD level on six levels.
    #[default]
    Fixed,
    /// A JSON-lines ensemble file as written by `gen-scenarios`.
    File { path: PathBuf },
    /// A freshly generated stratified ensemble.
    Random {
        quotas: Vec<usize>,
        /// Apply the 4- and 7-level acceptance cutoffs, both as generator
        /// vetting and as a final filter.
        #[serde(default)]
        post_filter: bool,
        #[serde(default = "default_oversample")]
        oversample: usize,
        #[serde(default)]
        generator: Option<SceneConfig>,
    },
}

pub fn default_oversample() -> usize {
    2
}

/// Everything a file may set. Missing fields fall back to flags or defaults.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub target: Option<f64>,
    pub replicates: Option<usize>,
    pub cohorts: Option<usize>,
    pub cohort_size: Option<u32>,
    pub start: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub scenarios: Option<ScenarioSource>,
    #[serde(default)]
    pub designs: Vec<LabeledDesign>,
}

/// Flag values; `None` means "not given".
#[derive(Clone, Debug, Default)]
pub struct RunFlags {
    pub seed: u64,
    pub target: Option<f64>,
    pub replicates: Option<usize>,
    pub cohorts: Option<usize>,
    pub cohort_size: Option<u32>,
    pub start: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub scenario_file: Option<PathBuf>,
    pub designs: Vec<LabeledDesign>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSpec {
    pub seed: u64,
    pub target: f64,
    pub replicates: usize,
    pub cohorts: usize,
    pub cohort_size: u32,
    pub start: usize,
    pub out: PathBuf,
    pub format: Format,
    pub scenarios: ScenarioSource,
    pub designs: Vec<LabeledDesign>,
}

impl RunSpec {
    pub fn merge(file: RunFile, flags: RunFlags) -> CliResult<Self> {
        let designs = if flags.designs.is_empty() { file.designs } else { flags.designs };
        if designs.is_empty() {
            return Err(CliError::Config("no designs given (use --design or a config file)".into()));
        }
        let mut labels: Vec<&str> = designs.iter().map(LabeledDesign::label).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(CliError::Config("design labels must be unique; add a \"label\" field".into()));
        }
        let scenarios = match flags.scenario_file {
            Some(path) => ScenarioSource::File { path },
            None => file.scenarios.unwrap_or_default(),
        };
        let spec = RunSpec {
            seed: flags.seed,
            target: flags.target.or(file.target).unwrap_or(DEFAULT_TARGET),
            replicates: flags.replicates.or(file.replicates).unwrap_or(DEFAULT_REPLICATES),
            cohorts: flags.cohorts.or(file.cohorts).unwrap_or(DEFAULT_COHORTS),
            cohort_size: flags.cohort_size.or(file.cohort_size).unwrap_or(DEFAULT_COHORT_SIZE),
            start: flags.start.or(file.start).unwrap_or(DEFAULT_START),
            out: flags.out.or(file.out).unwrap_or_else(|| PathBuf::from(".")),
            format: flags.format.or(file.format).unwrap_or_default(),
            scenarios,
            designs,
        };
        if spec.cohorts == 0 || spec.cohort_size == 0 || spec.start == 0 {
            return Err(CliError::Config("cohorts, cohort size and start level must be positive".into()));
        }
        Ok(spec)
    }
}

/// Reads a JSON or TOML document, chosen by file extension (`.toml` is TOML,
/// anything else JSON).
pub fn load<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text, path.extension().is_some_and(|e| e == "toml"))
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str, toml_syntax: bool) -> Result<T, String> {
    if toml_syntax {
        toml::from_str(text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }
}

/// A `--design` value: inline JSON, or the path of a JSON/TOML file.
pub fn design_arg(value: &str) -> CliResult<LabeledDesign> {
    if value.trim_start().starts_with('{') {
        parse(value, false).map_err(|e| CliError::Config(format!("--design: {e}")))
    } else {
        load(Path::new(value))
    }
}
