//! Command-line driver.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 bad configuration or
//! input, 3 missing credentials, 4 capability mismatch, 5 unmet
//! precondition. Failures print one JSON line to stderr:
//! `{"error":"<kind>","code":<n>,"message":"..."}`.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use tsexam_core::exam::{assemble_exam, grade_responses, Exam, ResponseRecord};
use tsexam_core::irt::{refine_observed, CallbackError, ResponseMatrix, SimulatedPopulation};
use tsexam_core::rng::labeled_seed;
use tsexam_core::template::TemplateRegistry;

use crate::config::{ConfigError, RunConfig};
use crate::files::{export_exam, import_exam, write_file, write_json, FileError};
use crate::harness::{build_prompt, candidate_id, evaluate, preflight, EvaluateError, Guidance, Modality, ModelEndpoint, PromptConfig, ScoredRun};
use crate::pack::{builtin_registry, load_templates, LoadError};
use crate::report::{
    accuracy_table, discrimination_table, dropped_table, read_rounds, round_accuracy_table, summarize, summary_table, trend_csv,
    FitReportFile, RefineReportFile,
};

#[derive(Debug, Parser)]
#[command(name = "tsexam", version, about = "Procedural time-series exams: generate, evaluate, refine, report")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (JSON). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Validate inputs and print what would happen without writing files
    /// or contacting endpoints.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Assemble an exam and export it with its keys and manifest.
    Generate {
        #[command(flatten)]
        common: Common,
        /// Template file or directory, overriding the configuration.
        #[arg(long)]
        templates: Option<PathBuf>,
        /// Render one PNG per item.
        #[arg(long)]
        plots: bool,
    },
    /// Ask configured endpoints every exam item and score the answers.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Exam directory (or its exam.json).
        #[arg(long)]
        exam: PathBuf,
        /// Endpoint name from the configuration; repeatable. All when omitted.
        #[arg(long = "endpoint")]
        endpoints: Vec<String>,
        #[arg(long, value_enum)]
        modality: Option<ModalityArg>,
        /// Comma-separated guidance blocks: hint, concepts, or none.
        #[arg(long, value_delimiter = ',')]
        guidance: Option<Vec<GuidanceArg>>,
        /// Leave out the worked example.
        #[arg(long)]
        zero_shot: bool,
    },
    /// Iteratively drop low-scoring items and resample them.
    Refine {
        #[command(flatten)]
        common: Common,
        /// Starting exam; generated from the configuration when omitted.
        #[arg(long)]
        exam: Option<PathBuf>,
        /// Answer with a simulated population of this many candidates.
        #[arg(long)]
        simulate: Option<usize>,
        #[arg(long)]
        iterations: Option<u32>,
        /// Fraction dropped per round, in (0, 1).
        #[arg(long)]
        drop: Option<f64>,
        /// Endpoint name from the configuration; repeatable. All when omitted.
        #[arg(long = "endpoint")]
        endpoints: Vec<String>,
        #[arg(long, value_enum)]
        modality: Option<ModalityArg>,
    },
    /// Summarize fit or refinement reports round by round.
    Report {
        #[command(flatten)]
        common: Common,
        /// Fit report or refine report files.
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModalityArg {
    Text,
    Image,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum GuidanceArg {
    Hint,
    Concepts,
    None,
}

#[derive(Debug)]
pub enum CliError {
    Runtime(String),
    Input(String),
    Credentials(String),
    Capability(String),
    Precondition(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Input(_) => 2,
            CliError::Credentials(_) => 3,
            CliError::Capability(_) => 4,
            CliError::Precondition(_) => 5,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Runtime(_) => "runtime",
            CliError::Input(_) => "input",
            CliError::Credentials(_) => "credentials",
            CliError::Capability(_) => "capability",
            CliError::Precondition(_) => "precondition",
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Runtime(m) | CliError::Input(m) | CliError::Credentials(m) | CliError::Capability(m) | CliError::Precondition(m) => m,
        }
    }

    /// The single stderr line.
    pub fn line(&self) -> String {
        serde_json::json!({"error": self.kind(), "code": self.code(), "message": self.message()}).to_string()
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<LoadError> for CliError {
    fn from(e: LoadError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn output_error(e: FileError) -> CliError {
    CliError::Runtime(e.to_string())
}

fn input_error(e: FileError) -> CliError {
    CliError::Input(e.to_string())
}

impl From<EvaluateError> for CliError {
    fn from(e: EvaluateError) -> Self {
        match e {
            EvaluateError::Capability { .. } => CliError::Capability(e.to_string()),
            EvaluateError::Credentials(_) => CliError::Credentials(e.to_string()),
            EvaluateError::EmptyExam | EvaluateError::Endpoint(_) => CliError::Input(e.to_string()),
            EvaluateError::Transcript(_) => CliError::Runtime(e.to_string()),
        }
    }
}

/// Parses `args` (including the program name) and runs the command,
/// writing normal output to `out`.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            return wr(out, &e.to_string());
        }
        Err(e) => {
            let first = e.to_string().lines().next().unwrap_or_default().trim_start_matches("error: ").to_string();
            return Err(CliError::Input(first));
        }
    };
    match cli.command {
        Command::Generate { common, templates, plots } => cmd_generate(common, templates, plots, out),
        Command::Evaluate { common, exam, endpoints, modality, guidance, zero_shot } => {
            cmd_evaluate(common, &exam, &endpoints, modality, guidance, zero_shot, out)
        }
        Command::Refine { common, exam, simulate, iterations, drop, endpoints, modality } => {
            cmd_refine(common, exam.as_deref(), simulate, iterations, drop, &endpoints, modality, out)
        }
        Command::Report { common, reports } => cmd_report(common, &reports, out),
    }
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    Ok(cfg)
}

fn registry(cfg: &RunConfig) -> Result<TemplateRegistry, CliError> {
    Ok(match &cfg.template_dir {
        Some(p) => load_templates(p)?,
        None => builtin_registry()?,
    })
}

fn wr(out: &mut dyn Write, s: &str) -> Result<(), CliError> {
    out.write_all(s.as_bytes()).map_err(|e| CliError::Runtime(format!("stdout: {e}")))
}

fn cmd_generate(common: Common, templates: Option<PathBuf>, plots: bool, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = load_config(&common)?;
    if templates.is_some() {
        cfg.template_dir = templates;
    }
    cfg.include_plots |= plots;
    cfg.validate()?;
    let registry = registry(&cfg)?;
    let exam = assemble_exam(&registry, &cfg.distribution).map_err(|e| CliError::Input(e.to_string()))?;
    if common.dry_run {
        return wr(out, &format!("dry run: {} templates, {} items valid; nothing written\n", registry.len(), exam.len()));
    }
    export_exam(&exam, &cfg.output_dir, cfg.include_plots).map_err(output_error)?;
    wr(out, &format!("{}\n", cfg.output_dir.join(crate::files::MANIFEST_FILE).display()))
}

fn prompt_config(cfg: &RunConfig, modality: Option<ModalityArg>, guidance: Option<Vec<GuidanceArg>>, zero_shot: bool, seed: Option<u64>) -> PromptConfig {
    let mut p = cfg.prompt.clone();
    match modality {
        Some(ModalityArg::Text) => p.modality = Modality::Text,
        Some(ModalityArg::Image) => p.modality = Modality::Image,
        None => {}
    }
    if let Some(g) = guidance {
        p.guidance = g
            .iter()
            .filter_map(|g| match g {
                GuidanceArg::Hint => Some(Guidance::Hint),
                GuidanceArg::Concepts => Some(Guidance::RelevantConcepts),
                GuidanceArg::None => None,
            })
            .collect();
    }
    if zero_shot {
        p.one_shot = false;
    }
    if seed.is_some() {
        p.seed = seed;
    }
    p
}

fn select_endpoints<'a>(cfg: &'a RunConfig, names: &[String]) -> Result<Vec<&'a ModelEndpoint>, CliError> {
    if names.is_empty() {
        return Ok(cfg.endpoints.iter().collect());
    }
    names
        .iter()
        .map(|n| cfg.endpoint(n).ok_or_else(|| CliError::Input(format!("endpoint '{n}' is not configured"))))
        .collect()
}

fn file_stem(candidate: &str) -> String {
    candidate.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '-' }).collect()
}

fn open_transcript(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Runtime(format!("{}: {e}", parent.display())))?;
    }
    fs::File::create(path).map(BufWriter::new).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Evaluates each endpoint in turn, writing transcripts and scored runs
/// to `dir`.
fn run_endpoints(exam: &Exam, endpoints: &[&ModelEndpoint], prompt: &PromptConfig, dir: &Path) -> Result<Vec<ScoredRun>, CliError> {
    let mut runs = Vec::new();
    for ep in endpoints {
        let stem = file_stem(&candidate_id(ep, prompt.modality));
        let mut transcript = open_transcript(&dir.join(format!("transcript-{stem}.jsonl")))?;
        let run = evaluate(exam, ep, prompt, Some(&mut transcript))?;
        write_json(&dir.join(format!("scored-{stem}.json")), &run).map_err(output_error)?;
        runs.push(run);
    }
    Ok(runs)
}

fn check_endpoints(endpoints: &[&ModelEndpoint], prompt: &PromptConfig) -> Result<(), CliError> {
    // Capability before credentials, so a text-only endpoint is reported
    // as such even when its key is missing.
    for ep in endpoints {
        if prompt.modality == Modality::Image && !ep.supports_images {
            return Err(EvaluateError::Capability { endpoint: ep.name.clone() }.into());
        }
    }
    for ep in endpoints {
        preflight(ep, prompt)?;
    }
    Ok(())
}

fn cmd_evaluate(
    common: Common,
    exam_path: &Path,
    names: &[String],
    modality: Option<ModalityArg>,
    guidance: Option<Vec<GuidanceArg>>,
    zero_shot: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut cfg = load_config(&common)?;
    cfg.validate()?;
    let prompt = prompt_config(&cfg, modality, guidance, zero_shot, common.seed);
    let endpoints = select_endpoints(&cfg, names)?;
    if endpoints.is_empty() {
        return Err(CliError::Input("no endpoint configured".into()));
    }
    check_endpoints(&endpoints, &prompt)?;
    let exam = import_exam(exam_path).map_err(input_error)?;
    if common.dry_run {
        for item in &exam.items {
            build_prompt(item, &prompt).map_err(|e| CliError::Input(e.to_string()))?;
        }
        return wr(out, &format!("dry run: {} items, {} endpoint(s) ready; nothing sent\n", exam.len(), endpoints.len()));
    }
    let runs = run_endpoints(&exam, &endpoints, &prompt, &cfg.output_dir)?;
    let table: Vec<serde_json::Value> = runs
        .iter()
        .map(|r| {
            serde_json::json!({
                "candidate": r.candidate,
                "categories": r.category_accuracy.iter().map(|(c, s)| (c.display_name(), s.accuracy)).collect::<std::collections::BTreeMap<_, _>>(),
                "overall": r.overall_accuracy,
            })
        })
        .collect();
    let doc = serde_json::json!({
        "tool_version": crate::files::TOOL_VERSION,
        "master_seed": exam.distribution.master_seed,
        "rows": table,
    });
    write_json(&cfg.output_dir.join("accuracy_table.json"), &doc).map_err(output_error)?;
    wr(out, &accuracy_table(&runs))
}

/// Builds a response matrix from harness runs through the grading path.
fn runs_to_matrix(exam: &Exam, runs: &[ScoredRun]) -> Result<ResponseMatrix, CallbackError> {
    let records: Vec<ResponseRecord> = runs
        .iter()
        .flat_map(|r| {
            r.items.iter().map(|o| ResponseRecord {
                candidate: r.candidate.clone(),
                item_id: o.item_id.clone(),
                choice: o.choice,
                parse_failure: o.parse_failure,
            })
        })
        .collect();
    grade_responses(exam, &records).map_err(|e| CallbackError(e.to_string()))
}

#[allow(clippy::too_many_arguments)]
fn cmd_refine(
    common: Common,
    exam_path: Option<&Path>,
    simulate: Option<usize>,
    iterations: Option<u32>,
    drop: Option<f64>,
    names: &[String],
    modality: Option<ModalityArg>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut cfg = load_config(&common)?;
    if let Some(n) = iterations {
        cfg.refine.num_iterations = n;
    }
    if let Some(d) = drop {
        cfg.refine.drop_percentage = d;
    }
    cfg.validate()?;
    let prompt = prompt_config(&cfg, modality, None, false, None);
    let endpoints = if simulate.is_some() { Vec::new() } else { select_endpoints(&cfg, names)? };

    match simulate {
        Some(n) if n < 2 => return Err(CliError::Precondition(format!("a simulated population needs at least 2 candidates, got {n}"))),
        Some(_) => {}
        None => {
            let distinct: BTreeSet<String> = endpoints.iter().map(|e| candidate_id(e, prompt.modality)).collect();
            if distinct.len() < 2 {
                return Err(CliError::Precondition(format!(
                    "refinement fits item parameters across candidates and needs at least 2 endpoints or --simulate N; {} configured",
                    distinct.len()
                )));
            }
            check_endpoints(&endpoints, &prompt)?;
        }
    }

    let registry = registry(&cfg)?;
    let exam = match exam_path {
        Some(p) => import_exam(p).map_err(input_error)?,
        None => assemble_exam(&registry, &cfg.distribution).map_err(|e| CliError::Input(e.to_string()))?,
    };
    let seed = common.seed.unwrap_or(exam.distribution.master_seed);
    if common.dry_run {
        let who = simulate.map_or(format!("{} endpoints", endpoints.len()), |n| format!("{n} simulated candidates"));
        return wr(out, &format!("dry run: {} items, {} rounds, {who}; nothing written\n", exam.len(), cfg.refine.num_iterations + 1));
    }

    let population = simulate.map(|n| SimulatedPopulation::new(n, labeled_seed(seed, "population")));
    let dir = cfg.output_dir.clone();
    let mut io_failure: Option<CliError> = None;
    let respond = |e: &Exam| -> Result<ResponseMatrix, CallbackError> {
        if let Some(pop) = &population {
            return Ok(pop.respond(e));
        }
        let round_dir = dir.join(format!("round-{}", e.round));
        let runs = run_endpoints(e, &endpoints, &prompt, &round_dir).map_err(|err| CallbackError(err.message().to_string()))?;
        runs_to_matrix(e, &runs)
    };
    let observe = |e: &Exam, r: &tsexam_core::irt::RoundReport| {
        if io_failure.is_some() {
            return;
        }
        let round_dir = dir.join(format!("round-{}", r.round));
        let res = export_exam(e, &round_dir, cfg.include_plots)
            .and_then(|_| write_json(&round_dir.join("fit_report.json"), &FitReportFile::new(e.distribution.master_seed, r.clone())));
        if let Err(err) = res {
            io_failure = Some(output_error(err));
        }
    };
    let (final_exam, report) =
        refine_observed(&exam, respond, &registry, &cfg.fit, &cfg.refine, observe).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(e) = io_failure {
        return Err(e);
    }
    let master = final_exam.distribution.master_seed;
    export_exam(&final_exam, &dir.join("final"), cfg.include_plots).map_err(output_error)?;
    write_json(&dir.join("refine_report.json"), &RefineReportFile::new(master, report.clone())).map_err(output_error)?;
    let summary = summarize(master, &report.rounds);
    write_json(&dir.join("summary.json"), &summary).map_err(output_error)?;
    write_file(&dir.join("discrimination_trend.csv"), trend_csv(&summary).as_bytes()).map_err(output_error)?;

    wr(out, "Sample average discrimination by round\n")?;
    wr(out, &discrimination_table(&report.rounds))?;
    wr(out, "\nDropped items per category\n")?;
    wr(out, &dropped_table(&report.rounds))?;
    if population.is_none() {
        wr(out, "\nAccuracy by round\n")?;
        wr(out, &round_accuracy_table(&report.rounds))?;
    }
    Ok(())
}

fn cmd_report(common: Common, paths: &[PathBuf], out: &mut dyn Write) -> Result<(), CliError> {
    let cfg = load_config(&common)?;
    let (seed, rounds) = read_rounds(paths).map_err(input_error)?;
    if rounds.is_empty() {
        return Err(CliError::Input("reports contain no rounds".into()));
    }
    let summary = summarize(common.seed.unwrap_or(seed), &rounds);
    wr(out, &summary_table(&summary))?;
    wr(out, "\n")?;
    wr(out, &round_accuracy_table(&rounds))?;
    if !common.dry_run {
        write_json(&cfg.output_dir.join("summary.json"), &summary).map_err(output_error)?;
        write_file(&cfg.output_dir.join("discrimination_trend.csv"), trend_csv(&summary).as_bytes()).map_err(output_error)?;
    }
    Ok(())
}
