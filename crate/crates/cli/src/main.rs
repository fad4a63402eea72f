//! `doclabeler`: batch pipeline for document layout annotation.
//!
//! Exit status is 0 on success, 1 for invalid input or arguments, 2 for I/O
//! failures. Errors are printed as one line on stderr:
//! `error[<kind>]: <message>`.

mod config;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use regex::Regex;

use doclabeler::autolabel::{autolabel_project, LabelerBinding, Policy};
use doclabeler::formats::{self, FormatKind};
use doclabeler::ingest::{ingest_pdf, preprocess_project, ExtractionOptions, Granularity, PreprocessOptions};
use doclabeler::metrics::{evaluate_by_type, parse_ratio, split_dataset, EvalReport};
use doclabeler::{load_project, save_project, validate_project, LabelSchema, Violation};

const HOME_VAR: &str = "DOCLABELER_HOME";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] doclabeler::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error("{} validation error(s)", .0.len())]
    Invalid(Vec<Violation>),
}

impl CliError {
    fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) if e.is_io() => "io",
            CliError::Core(_) | CliError::Invalid(_) => "invalid",
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
        }
    }

    fn exit_code(&self) -> u8 {
        if self.kind() == "io" {
            2
        } else {
            1
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

#[derive(Parser)]
#[command(name = "doclabeler", version, about = "Document layout annotation pipeline")]
struct Cli {
    /// key = value file supplying defaults for any long flag.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rasterize a born-digital PDF and extract its text layer into a new project.
    Ingest(IngestArgs),
    /// Read a dataset into a new project.
    Import(ImportArgs),
    /// Write a project as a dataset.
    Export(ExportArgs),
    /// Convert a dataset between layouts.
    Convert(ConvertArgs),
    /// Resize and optionally binarize page images.
    Preprocess(PreprocessArgs),
    /// Propose labels with the heuristic or a remote model and apply them.
    Autolabel(AutolabelArgs),
    /// Assign TRAIN/VAL splits.
    Split(SplitArgs),
    /// Score a predicted project against ground truth.
    Eval(EvalArgs),
    /// Page, segment and label counts.
    Stats(StatsArgs),
    /// Check every model invariant.
    Validate(ProjectArg),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct ProjectArg {
    /// Project directory; relative names also resolve under $DOCLABELER_HOME.
    #[arg(short, long, value_name = "DIR")]
    project: PathBuf,
}

#[derive(Args)]
struct SchemaArgs {
    /// Label schema JSON file (default: the catalog schema).
    #[arg(long, value_name = "FILE", conflicts_with = "infer_schema")]
    schema: Option<PathBuf>,
    /// Use the labels found in the input as the schema.
    #[arg(long)]
    infer_schema: bool,
}

#[derive(Args)]
struct IngestArgs {
    pdf: PathBuf,
    /// Output project directory (default: $DOCLABELER_HOME/<pdf name>).
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long, default_value_t = 150.0)]
    dpi: f64,
    /// char, word or line.
    #[arg(long, default_value = "word")]
    granularity: Granularity,
    /// Keep only segments whose text matches this regex.
    #[arg(long, value_name = "REGEX")]
    filter: Option<String>,
    /// Label schema JSON file (default: the catalog schema).
    #[arg(long, value_name = "FILE")]
    schema: Option<PathBuf>,
}

#[derive(Args)]
struct ImportArgs {
    /// PICK, DOCBANK, XFUND or FUNSD.
    #[arg(long, alias = "from")]
    kind: FormatKind,
    src: PathBuf,
    /// Output project directory (default: $DOCLABELER_HOME/<dataset name>).
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    project: ProjectArg,
    #[arg(long, alias = "to")]
    kind: FormatKind,
    out: PathBuf,
    /// Skip unlabeled segments instead of writing them as "other".
    #[arg(long)]
    drop_unlabeled: bool,
}

#[derive(Args)]
struct ConvertArgs {
    #[arg(long)]
    from: FormatKind,
    #[arg(long)]
    to: FormatKind,
    src: PathBuf,
    dst: PathBuf,
    /// Label schema JSON file (default: every label in the source).
    #[arg(long, value_name = "FILE")]
    schema: Option<PathBuf>,
    #[arg(long)]
    drop_unlabeled: bool,
}

#[derive(Args)]
struct PreprocessArgs {
    #[command(flatten)]
    project: ProjectArg,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Otsu binarization after resizing.
    #[arg(long)]
    binarize: bool,
}

#[derive(Args)]
#[group(id = "labeler", required = true, args = ["heuristic", "endpoint"])]
struct AutolabelArgs {
    #[command(flatten)]
    project: ProjectArg,
    #[arg(long)]
    heuristic: bool,
    /// Remote model server URL.
    #[arg(long, value_name = "URL")]
    endpoint: Option<String>,
    /// Remote request timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    timeout: f64,
    /// FILL_UNLABELED, OVERWRITE_AUTO or OVERWRITE_ALL.
    #[arg(long, default_value = "FILL_UNLABELED")]
    policy: Policy,
}

#[derive(Args)]
struct SplitArgs {
    #[command(flatten)]
    project: ProjectArg,
    /// train:val
    #[arg(long, default_value = "4:1")]
    ratio: String,
    #[arg(long)]
    shuffle: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    ground: PathBuf,
    #[arg(long, value_name = "DIR")]
    pred: PathBuf,
    /// CSV report path (default: stdout).
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    project: ProjectArg,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ServeArgs {
    /// Service home (default: $DOCLABELER_HOME, else the current directory).
    #[arg(long, value_name = "DIR")]
    home: Option<PathBuf>,
    #[arg(long, default_value = doclabeler_service::DEFAULT_ADDR)]
    addr: SocketAddr,
}

fn home() -> Option<PathBuf> {
    std::env::var_os(HOME_VAR).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn resolve_project(p: &Path) -> PathBuf {
    match home() {
        Some(h) if p.is_relative() && !p.exists() => h.join(p),
        _ => p.to_path_buf(),
    }
}

fn output_dir(out: Option<&Path>, default_name: &str) -> CliResult<PathBuf> {
    match (out, home()) {
        (Some(o), _) => Ok(o.to_path_buf()),
        (None, Some(h)) => Ok(h.join(default_name)),
        (None, None) => Err(CliError::Usage(format!("no --out given and {HOME_VAR} is not set"))),
    }
}

fn file_stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "project".into())
}

fn read_schema(path: &Path) -> CliResult<LabelSchema> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: invalid schema: {e}", path.display())))
}

fn open(p: &ProjectArg) -> CliResult<(PathBuf, doclabeler::Project)> {
    let dir = resolve_project(&p.project);
    let project = load_project(&dir)?;
    Ok((dir, project))
}

fn warn_unknown(unknown: &std::collections::BTreeMap<String, usize>) {
    for (label, n) in unknown {
        eprintln!("warning: unknown label {label:?} on {n} segment(s), imported as unlabeled");
    }
}

fn run(cli: Cli) -> CliResult {
    let mut out = std::io::stdout().lock();
    let w = |e: std::io::Error| CliError::Io(format!("stdout: {e}"));
    match cli.command {
        Command::Ingest(a) => {
            let filter = a
                .filter
                .as_deref()
                .map(Regex::new)
                .transpose()
                .map_err(|e| CliError::Usage(format!("invalid --filter: {e}")))?;
            let options = ExtractionOptions {
                dpi: a.dpi,
                granularity: a.granularity,
                filter,
            };
            let schema = a
                .schema
                .as_deref()
                .map(read_schema)
                .transpose()?
                .unwrap_or_else(LabelSchema::catalog);
            let pdf = fs::read(&a.pdf).map_err(|e| CliError::Io(format!("{}: {e}", a.pdf.display())))?;
            let name = a.name.unwrap_or_else(|| file_stem(&a.pdf));
            let dir = output_dir(a.out.as_deref(), &name)?;
            let (project, warnings) = ingest_pdf(&pdf, &name, schema, &options, &dir)?;
            for warning in warnings {
                eprintln!("warning: {warning}");
            }
            writeln!(
                out,
                "{}: {} pages, {} segments",
                dir.display(),
                project.pages.len(),
                project.segment_count()
            )
            .map_err(w)?;
        }
        Command::Import(a) => {
            let outcome = if a.schema.infer_schema {
                formats::import_inferred(a.kind, &a.src)?
            } else {
                let schema = a
                    .schema
                    .schema
                    .as_deref()
                    .map(read_schema)
                    .transpose()?
                    .unwrap_or_else(LabelSchema::catalog);
                formats::import(a.kind, &a.src, &schema)?
            };
            warn_unknown(&outcome.unknown_labels);
            let dir = output_dir(a.out.as_deref(), &outcome.project.name)?;
            save_project(&outcome.project, &dir)?;
            let p = &outcome.project;
            writeln!(
                out,
                "{}: {} pages, {} segments",
                dir.display(),
                p.pages.len(),
                p.segment_count()
            )
            .map_err(w)?;
        }
        Command::Export(a) => {
            let (_, project) = open(&a.project)?;
            let files = formats::export(&project, a.kind, &a.out, !a.drop_unlabeled)?;
            for f in files {
                writeln!(out, "{}", f.display()).map_err(w)?;
            }
        }
        Command::Convert(a) => {
            let schema = a.schema.as_deref().map(read_schema).transpose()?;
            let (outcome, files) = formats::convert(a.from, &a.src, a.to, &a.dst, schema.as_ref(), !a.drop_unlabeled)?;
            warn_unknown(&outcome.unknown_labels);
            for f in files {
                writeln!(out, "{}", f.display()).map_err(w)?;
            }
        }
        Command::Preprocess(a) => {
            let dir = resolve_project(&a.project.project);
            let options = PreprocessOptions {
                scale: a.scale,
                binarize: a.binarize,
            };
            let project = preprocess_project(&dir, options)?;
            writeln!(out, "{}: {} pages", dir.display(), project.pages.len()).map_err(w)?;
        }
        Command::Autolabel(a) => {
            let (dir, mut project) = open(&a.project)?;
            let binding = match a.endpoint {
                Some(url) => LabelerBinding::remote(url, a.timeout),
                None => LabelerBinding::heuristic(),
            };
            binding.validate()?;
            let report = autolabel_project(&mut project, &binding, a.policy)?;
            save_project(&project, &dir)?;
            for r in report {
                writeln!(
                    out,
                    "{}\tproposals={}\tapplied={}\tdropped={}",
                    r.page_id, r.proposals, r.applied, r.dropped
                )
                .map_err(w)?;
            }
        }
        Command::Split(a) => {
            let ratio = parse_ratio(&a.ratio)?;
            let (dir, mut project) = open(&a.project)?;
            let assignment = split_dataset(&mut project.pages, ratio, a.shuffle, a.seed)?;
            save_project(&project, &dir)?;
            let val = assignment.iter().filter(|s| **s == doclabeler::Split::Val).count();
            writeln!(out, "train\t{}\nval\t{val}", assignment.len() - val).map_err(w)?;
        }
        Command::Eval(a) => {
            let ground = load_project(&resolve_project(&a.ground))?;
            let pred = load_project(&resolve_project(&a.pred))?;
            let report: EvalReport<f64> = evaluate_by_type(&ground, &pred)?;
            let csv = report.to_csv();
            match a.out {
                Some(path) => fs::write(&path, csv).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
                None => out.write_all(csv.as_bytes()).map_err(w)?,
            }
        }
        Command::Stats(a) => {
            let (_, project) = open(&a.project)?;
            let stats = project.stats();
            if a.json {
                let text = serde_json::to_string_pretty(&stats).expect("plain data");
                writeln!(out, "{text}").map_err(w)?;
            } else {
                writeln!(out, "pages\t{}\nsegments\t{}", stats.pages, stats.segments).map_err(w)?;
                for (label, n) in &stats.labels {
                    writeln!(out, "label\t{label}\t{n}").map_err(w)?;
                }
                writeln!(out, "unlabeled\t{}", stats.unlabeled).map_err(w)?;
            }
        }
        Command::Validate(p) => {
            let (_, project) = open(&p)?;
            let violations = validate_project(&project);
            if !violations.is_empty() {
                for v in &violations {
                    writeln!(out, "{v}").map_err(w)?;
                }
                return Err(CliError::Invalid(violations));
            }
            writeln!(out, "ok").map_err(w)?;
        }
        Command::Serve(a) => {
            let home = a.home.or_else(home).unwrap_or_else(|| PathBuf::from("."));
            let service = Arc::new(doclabeler_service::Service::open(home)?);
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Io(e.to_string()))?;
            rt.block_on(doclabeler_service::serve(service, a.addr))
                .map_err(|e| CliError::Io(format!("{}: {e}", a.addr)))?;
        }
    }
    Ok(())
}

fn parse(args: Vec<OsString>) -> Result<Cli, CliError> {
    let cmd = Cli::command().mut_subcommands(|s| s.args_override_self(true));
    let args = config::expand(&cmd, args)?;
    let matches = match cmd.try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            std::process::exit(0);
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or_default().trim_start_matches("error: ");
            return Err(CliError::Usage(first.to_string()));
        }
    };
    Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let result = parse(std::env::args_os().collect()).and_then(|cli| {
        let level = match cli.verbose {
            0 => log::LevelFilter::Warn,
            1 => log::LevelFilter::Info,
            _ => log::LevelFilter::Debug,
        };
        env_logger::Builder::new()
            .filter_level(level)
            .parse_default_env()
            .init();
        run(cli)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace(['\n', '\r'], " ");
            eprintln!("error[{}]: {message}", e.kind());
            ExitCode::from(e.exit_code())
        }
    }
}
