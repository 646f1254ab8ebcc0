//! `recontact-adjust`: synth, impute, check and report subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use recontact_core::check::{evaluate_assumptions_for, AssumptionReport};
use recontact_core::data::{
    read_cohort, summarize_cohort, write_cohort, write_completed, write_truth, CohortSummary,
    CohortTable, Horizon,
};
use recontact_core::mi::{
    fcs_impute, predict_hospitalizations, ImputationModelSpec, MiError, MultipleImputations,
    Strategy, VariableTrace,
};
use recontact_core::report::{
    hosp_rows, prevalence_rows, read_rows, render_report_csv, render_report_text, sha256_hex,
    write_rows, HospRow, PrevalenceRow, ReportInputs,
};
use recontact_core::synth::{generate_cohort, SynthConfig};

pub const COHORT: &str = "cohort.csv";
pub const TRUTH: &str = "cohort.truth.csv";
pub const SYNTH_MANIFEST: &str = "synth_manifest.json";
pub const IMPUTE_MANIFEST: &str = "impute_manifest.json";
pub const ESTIMATES: &str = "estimates.csv";
pub const HOSP_PREDICTIONS: &str = "hospitalization_predictions.csv";
pub const SUMMARY: &str = "cohort_summary.json";
pub const CHECK_JSON: &str = "assumption_report.json";
pub const CHECK_TEXT: &str = "assumption_report.txt";
pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_CSV: &str = "report.csv";

#[derive(Debug, Parser)]
#[command(name = "recontact-adjust", version, about = "Non-participation adjustment with re-contact data")]
pub struct Cli {
    /// Worker threads for imputation chains and model fits (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort with known truth.
    Synth(SynthArgs),
    /// Multiply impute questionnaire items and pool estimates.
    Impute(ImputeArgs),
    /// Fit the hospitalization models and judge the group assumptions.
    Check(CheckArgs),
    /// Combine impute and check outputs of a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator configuration (JSON); the built-in default when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Multiplies every stratum size.
    #[arg(long)]
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    MiMnar,
    MiMar,
    MiMarNr,
    All,
}

impl StrategyArg {
    fn strategies(self) -> Vec<Strategy> {
        match self {
            StrategyArg::MiMnar => vec![Strategy::MiMnar],
            StrategyArg::MiMar => vec![Strategy::MiMar],
            StrategyArg::MiMarNr => vec![Strategy::MiMarNr],
            StrategyArg::All => Strategy::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HorizonArg {
    Full,
    #[value(name = "5y")]
    FiveYear,
    #[value(name = "1y")]
    OneYear,
    All,
}

impl HorizonArg {
    fn horizons(self) -> Vec<Horizon> {
        match self {
            HorizonArg::Full => vec![Horizon::Full],
            HorizonArg::FiveYear => vec![Horizon::FiveYear],
            HorizonArg::OneYear => vec![Horizon::OneYear],
            HorizonArg::All => vec![Horizon::Full, Horizon::FiveYear, Horizon::OneYear],
        }
    }
}

#[derive(Debug, Args)]
pub struct ImputeArgs {
    /// Cohort CSV.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub strategy: StrategyArg,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long)]
    pub seed: u64,
    /// Horizons for the model-based hospitalization comparison.
    #[arg(long, value_enum, default_value = "all")]
    pub horizon: HorizonArg,
    /// Ridge weight per observation for every imputation fit.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Imputation model specification (JSON); the default uses every
    /// other variable as a predictor.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Also write each completed dataset.
    #[arg(long)]
    pub write_completed: bool,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub horizon: HorizonArg,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory holding impute and/or check outputs.
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Defaults to the run directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("imputation failed: {0}")]
    Imputation(String),
    #[error("model fit failed: {0}")]
    Fit(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Imputation(_) => 3,
            CliError::Fit(_) => 4,
        }
    }
}

impl From<MiError> for CliError {
    fn from(e: MiError) -> Self {
        match e {
            MiError::HospFit { .. } => CliError::Fit(e.to_string()),
            MiError::Data(_) | MiError::Spec(_) => CliError::Input(e.to_string()),
            _ => CliError::Imputation(e.to_string()),
        }
    }
}

fn input<E: std::fmt::Display>(context: impl AsRef<str>) -> impl FnOnce(E) -> CliError {
    move |e| CliError::Input(format!("{}: {e}", context.as_ref()))
}

fn write_file(dir: &Path, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(input(path.display().to_string()))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn load(path: &Path) -> Result<(CohortTable, String), CliError> {
    let bytes = fs::read(path).map_err(input(path.display().to_string()))?;
    let table = read_cohort(bytes.as_slice(), path).map_err(input(path.display().to_string()))?;
    Ok((table, sha256_hex(&bytes)))
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(input(dir.display().to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SynthManifest {
    pub seed: u64,
    pub config_hash: String,
    pub n: usize,
    pub group_counts: [usize; 3],
    pub cohort_sha256: String,
    pub config: SynthConfig,
}

pub fn cmd_synth(a: &SynthArgs) -> Result<(), CliError> {
    let mut config = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(input(p.display().to_string()))?;
            SynthConfig::from_json(&text).map_err(input(p.display().to_string()))?
        }
        None => SynthConfig::calibrated_default(),
    };
    if let Some(s) = a.seed {
        config.seed = Some(s);
    }
    if let Some(f) = a.scale {
        config = config.scaled(f).map_err(input("--scale"))?;
    }
    let seed = config
        .seed
        .ok_or_else(|| CliError::Input("a seed is required: pass --seed or set `seed` in the config".into()))?;
    let table = generate_cohort(&config).map_err(input("synth"))?;
    prepare_out(&a.out)?;
    let mut cohort = Vec::new();
    write_cohort(&table, &mut cohort).map_err(input("cohort"))?;
    let mut truth = Vec::new();
    write_truth(&table, &mut truth).map_err(input("truth"))?;
    let manifest = SynthManifest {
        seed,
        config_hash: config.hash(),
        n: table.len(),
        group_counts: table.group_counts(),
        cohort_sha256: sha256_hex(&cohort),
        config,
    };
    write_file(&a.out, COHORT, cohort)?;
    write_file(&a.out, TRUTH, truth)?;
    write_file(&a.out, SYNTH_MANIFEST, json(&manifest))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct StrategyRun {
    pub strategy: Strategy,
    pub traces: Vec<VariableTrace>,
    pub notes: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ImputeManifest {
    pub cohort_sha256: String,
    pub seed: u64,
    pub m: usize,
    pub cycles: usize,
    pub horizons: Vec<Horizon>,
    pub spec: ImputationModelSpec,
    pub runs: Vec<StrategyRun>,
}

pub fn cmd_impute(a: &ImputeArgs) -> Result<(), CliError> {
    let (table, sha) = load(&a.input)?;
    let mut spec = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(input(p.display().to_string()))?;
            serde_json::from_str(&text).map_err(input(p.display().to_string()))?
        }
        None => ImputationModelSpec::default(),
    };
    if let Some(m) = a.m {
        spec.m = m;
    }
    if let Some(c) = a.cycles {
        spec.cycles = c;
    }
    if a.ridge.is_some() {
        spec.ridge = a.ridge;
    }
    spec.validate().map_err(|e| CliError::Input(e.to_string()))?;
    let horizons = a.horizon.horizons();
    prepare_out(&a.out)?;

    let mut runs: Vec<(MultipleImputations, Vec<String>)> = Vec::new();
    let mut hosp: Vec<HospRow> = Vec::new();
    for s in a.strategy.strategies() {
        let mi = fcs_impute(&table, &spec, s, a.seed)?;
        let preds = predict_hospitalizations(&mi, &horizons)?;
        let mut notes = mi.notes.clone();
        for pr in &preds {
            for n in &pr.notes {
                if !notes.contains(n) {
                    notes.push(n.clone());
                }
            }
        }
        hosp.extend(hosp_rows(&preds));
        if a.write_completed {
            for (k, c) in mi.completed.iter().enumerate() {
                let mut buf = Vec::new();
                write_completed(c, &mut buf).map_err(input("completed"))?;
                write_file(&a.out, &format!("completed_{}_{:02}.csv", s.name(), k + 1), buf)?;
            }
        }
        runs.push((mi, notes));
    }
    let refs: Vec<&MultipleImputations> = runs.iter().map(|r| &r.0).collect();
    let prevalence = prevalence_rows(&table, &refs)?;

    let manifest = ImputeManifest {
        cohort_sha256: sha,
        seed: a.seed,
        m: spec.m,
        cycles: spec.cycles,
        horizons,
        spec: spec.clone(),
        runs: runs
            .iter()
            .map(|(mi, notes)| StrategyRun {
                strategy: mi.strategy,
                traces: mi.traces.clone(),
                notes: notes.clone(),
            })
            .collect(),
    };
    let mut est = Vec::new();
    write_rows(&prevalence, &mut est).map_err(input("estimates"))?;
    let mut hp = Vec::new();
    write_rows(&hosp, &mut hp).map_err(input("predictions"))?;
    write_file(&a.out, ESTIMATES, est)?;
    write_file(&a.out, HOSP_PREDICTIONS, hp)?;
    write_file(&a.out, SUMMARY, json(&summarize_cohort(&table)))?;
    write_file(&a.out, IMPUTE_MANIFEST, json(&manifest))
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckFile {
    cohort_sha256: String,
    report: AssumptionReport,
}

pub fn cmd_check(a: &CheckArgs) -> Result<(), CliError> {
    let (table, sha) = load(&a.input)?;
    let report = evaluate_assumptions_for(&table, &a.horizon.horizons());
    prepare_out(&a.out)?;
    let text = format!("cohort sha256: {sha}\n{}", report.render_text());
    write_file(&a.out, CHECK_TEXT, text)?;
    write_file(&a.out, SUMMARY, json(&summarize_cohort(&table)))?;
    let failures: Vec<String> = report
        .failures()
        .iter()
        .map(|(h, f)| format!("{h}: {f}"))
        .collect();
    write_file(
        &a.out,
        CHECK_JSON,
        json(&CheckFile {
            cohort_sha256: sha,
            report,
        }),
    )?;
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Fit(failures.join("; ")))
    }
}

fn read_optional(dir: &Path, name: &str) -> Result<Option<Vec<u8>>, CliError> {
    let p = dir.join(name);
    match fs::read(&p) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(CliError::Input(format!("{}: {e}", p.display()))),
    }
}

pub fn cmd_report(a: &ReportArgs) -> Result<(), CliError> {
    let dir = &a.input;
    let manifest = read_optional(dir, IMPUTE_MANIFEST)?;
    let check = read_optional(dir, CHECK_JSON)?;
    if manifest.is_none() && check.is_none() {
        return Err(CliError::Input(format!(
            "{} has neither {IMPUTE_MANIFEST} (from impute) nor {CHECK_JSON} (from check)",
            dir.display()
        )));
    }
    let mut inputs = ReportInputs::default();
    let mut shas = Vec::new();
    if let Some(b) = manifest {
        let m: ImputeManifest = serde_json::from_slice(&b).map_err(input(IMPUTE_MANIFEST))?;
        let mut missing = Vec::new();
        let est = read_optional(dir, ESTIMATES)?;
        let hp = read_optional(dir, HOSP_PREDICTIONS)?;
        if est.is_none() {
            missing.push(ESTIMATES);
        }
        if hp.is_none() {
            missing.push(HOSP_PREDICTIONS);
        }
        if !missing.is_empty() {
            return Err(CliError::Input(format!(
                "{} lists an imputation run but lacks {}",
                dir.display(),
                missing.join(", ")
            )));
        }
        let prevalence: Vec<PrevalenceRow> =
            read_rows(est.unwrap_or_default().as_slice()).map_err(input(ESTIMATES))?;
        let hosp: Vec<HospRow> =
            read_rows(hp.unwrap_or_default().as_slice()).map_err(input(HOSP_PREDICTIONS))?;
        inputs.prevalence = Some(prevalence);
        inputs.hospitalization = Some(hosp);
        inputs.seed = Some(m.seed);
        inputs.notes = m
            .runs
            .iter()
            .flat_map(|r| r.notes.iter().map(move |n| format!("{}: {n}", r.strategy.name())))
            .collect();
        shas.push(m.cohort_sha256);
    }
    if let Some(b) = check {
        let c: CheckFile = serde_json::from_slice(&b).map_err(input(CHECK_JSON))?;
        inputs.assumptions = Some(c.report);
        shas.push(c.cohort_sha256);
    }
    if shas.windows(2).any(|w| w[0] != w[1]) {
        return Err(CliError::Input(
            "impute and check outputs come from different cohorts".into(),
        ));
    }
    inputs.cohort_sha256 = shas.into_iter().next();
    if let Some(b) = read_optional(dir, SUMMARY)? {
        let s: CohortSummary = serde_json::from_slice(&b).map_err(input(SUMMARY))?;
        inputs.summary = Some(s);
    }
    let out = a.out.as_deref().unwrap_or(dir);
    prepare_out(out)?;
    write_file(out, REPORT_TEXT, render_report_text(&inputs))?;
    write_file(out, REPORT_CSV, render_report_csv(&inputs))
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Impute(a) => cmd_impute(a),
        Command::Check(a) => cmd_check(a),
        Command::Report(a) => cmd_report(a),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
