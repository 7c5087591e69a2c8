//! The `psytest` command line.

use std::io::{self, BufRead, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context};
use chrono::Utc;
use clap::{Args, Parser, Subcommand, ValueEnum};
use psytest_core::format::{
    parse_test, parse_test_unchecked, serialize_test_unchecked, TestDocument,
};
use psytest_core::generator::{
    add_category, add_demographic, bind_scale, delete_item, insert_item, insert_item_with_id,
    move_item, set_bands,
};
use psytest_core::session_log::{append_record, load_session_file, persist_session, LogRecord};
use psytest_core::statistics::{aggregate, export_matrix_csv, export_summary_csv, Aggregate};
use psytest_core::{
    validate, CategoryId, DemographicField, DemographicKind, ItemId, ScoreTuple, TestDefinition,
};
use rust_decimal::Decimal;

use crate::http::{ServiceConfig, DEFAULT_IDLE_TIMEOUT_SECS};
use crate::run::{run_session, RunOptions, RunOutcome};

pub const DATA_DIR_ENV: &str = "PSYTEST_DATA_DIR";
pub const DEFAULT_LOG_NAME: &str = "psytest.sessions.ndjson";

#[derive(Debug, Parser)]
#[command(
    name = "psytest",
    version,
    about = "Author, administer and analyse personality tests"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create and edit test definition files.
    #[command(subcommand)]
    Generate(GenerateCommand),
    /// Administer a test interactively on the terminal.
    Run(RunArgs),
    /// Statistics over the session log.
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Serve tests over HTTP.
    Serve(ServeArgs),
}

#[derive(Debug, Subcommand)]
pub enum GenerateCommand {
    /// Create a new, empty test file.
    New {
        file: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        title: String,
        /// Answer option; repeat in order.
        #[arg(long = "answer", required = true)]
        answers: Vec<String>,
        #[arg(long, default_value = "")]
        instruction: String,
        /// Overwrite an existing file.
        #[arg(long)]
        force: bool,
    },
    /// Insert an item, renumbering the items after it.
    AddItem {
        file: PathBuf,
        /// Position 1..=m+1; defaults to the end.
        #[arg(long)]
        pos: Option<u32>,
        #[arg(long)]
        text: String,
        #[arg(long)]
        id: Option<String>,
    },
    /// Delete the item at an ordinal together with its scale values.
    DelItem {
        file: PathBuf,
        #[arg(long)]
        ordinal: u32,
    },
    /// Move an item to another position.
    MoveItem {
        file: PathBuf,
        #[arg(long)]
        from: u32,
        #[arg(long)]
        to: u32,
    },
    AddCategory {
        file: PathBuf,
        #[arg(long)]
        id: String,
        #[arg(long)]
        name: String,
    },
    AddDemographic {
        file: PathBuf,
        #[arg(long)]
        name: String,
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Allowed value for a choice field; repeat in order.
        #[arg(long = "choice")]
        choices: Vec<String>,
    },
    /// Set the points a category awards for each answer to an item.
    Bind {
        file: PathBuf,
        #[arg(long)]
        category: String,
        /// Item id.
        #[arg(long, conflicts_with = "ordinal", required_unless_present = "ordinal")]
        item: Option<String>,
        /// Item ordinal, as an alternative to --item.
        #[arg(long)]
        ordinal: Option<u32>,
        /// Comma-separated decimals, one per answer option.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Replace the norm bands of a category.
    SetBands {
        file: PathBuf,
        #[arg(long)]
        category: String,
        /// Comma-separated ascending boundaries from minimum to maximum score.
        #[arg(long, allow_hyphen_values = true)]
        boundaries: String,
        /// Interpretation of each band, in order.
        #[arg(long = "text", required = true)]
        texts: Vec<String>,
    },
    /// Check a test file; exits 1 when it has errors.
    Validate { file: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Text,
    Integer,
    Choice,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub test: PathBuf,
    /// Session log; defaults to $PSYTEST_DATA_DIR/psytest.sessions.ndjson.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub show_interpretation: bool,
    #[arg(long)]
    pub session_id: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Print per-category and per-item statistics.
    Summary(StatsArgs),
    /// Write sessions or statistics as CSV.
    Export {
        #[command(flatten)]
        args: StatsArgs,
        #[arg(long, value_enum, default_value = "csv")]
        format: ExportFormat,
        /// `matrix`: one row per session. `summary`: one row per category.
        #[arg(long, value_enum, default_value = "matrix")]
        table: ExportTable,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub log: Option<PathBuf>,
    /// Abort on the first corrupt log line instead of skipping it.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExportFormat {
    Csv,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ExportTable {
    Matrix,
    Summary,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// JSON config file with keys listen, tests_dir, session_log,
    /// reveal_results, idle_timeout_secs. Flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub listen: Option<SocketAddr>,
    #[arg(long)]
    pub tests_dir: Option<PathBuf>,
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub reveal_results: bool,
    #[arg(long)]
    pub idle_timeout_secs: Option<u64>,
}

fn data_dir() -> PathBuf {
    std::env::var_os(DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

fn log_path(explicit: Option<&PathBuf>) -> PathBuf {
    explicit
        .cloned()
        .unwrap_or_else(|| data_dir().join(DEFAULT_LOG_NAME))
}

fn read_draft(path: &Path) -> anyhow::Result<TestDefinition> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_test_unchecked(&bytes)
        .with_context(|| format!("parsing {}", path.display()))?
        .test)
}

fn read_valid(path: &Path) -> anyhow::Result<TestDefinition> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(parse_test(&bytes)
        .with_context(|| format!("loading {}", path.display()))?
        .test)
}

fn write_draft(path: &Path, test: TestDefinition) -> anyhow::Result<()> {
    let bytes = serialize_test_unchecked(&TestDocument::new(test));
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

fn decimals(list: &str) -> anyhow::Result<Vec<Decimal>> {
    list.split(',')
        .map(|s| {
            Decimal::from_str(s.trim()).map_err(|e| anyhow!("`{}` is not a decimal: {e}", s.trim()))
        })
        .collect()
}

/// Runs one parsed command. Returns the process exit code.
pub fn execute<R: BufRead, W: Write, E: Write>(
    cli: Cli,
    stdin: &mut R,
    out: &mut W,
    err: &mut E,
) -> i32 {
    let result = match cli.command {
        Command::Generate(cmd) => generate(cmd, out, err),
        Command::Run(args) => run(args, stdin, out, err),
        Command::Stats(cmd) => stats(cmd, out, err),
        Command::Serve(args) => serve(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "psytest: {e:#}");
            1
        }
    }
}

fn edit(
    file: &Path,
    f: impl FnOnce(&TestDefinition) -> anyhow::Result<TestDefinition>,
) -> anyhow::Result<i32> {
    let test = read_draft(file)?;
    write_draft(file, f(&test)?)?;
    Ok(0)
}

fn generate<W: Write, E: Write>(
    cmd: GenerateCommand,
    out: &mut W,
    err: &mut E,
) -> anyhow::Result<i32> {
    match cmd {
        GenerateCommand::New {
            file,
            id,
            title,
            answers,
            instruction,
            force,
        } => {
            if file.exists() && !force {
                bail!(
                    "{} already exists (use --force to overwrite)",
                    file.display()
                );
            }
            let mut test = TestDefinition::new(id, title, answers);
            test.instruction = instruction;
            write_draft(&file, test)?;
            Ok(0)
        }
        GenerateCommand::AddItem {
            file,
            pos,
            text,
            id,
        } => edit(&file, |t| {
            let pos = pos.unwrap_or(t.items.len() as u32 + 1);
            Ok(match id {
                Some(id) => insert_item_with_id(t, pos, &text, ItemId::new(id))?,
                None => insert_item(t, pos, &text)?,
            })
        }),
        GenerateCommand::DelItem { file, ordinal } => edit(&file, |t| Ok(delete_item(t, ordinal)?)),
        GenerateCommand::MoveItem { file, from, to } => {
            edit(&file, |t| Ok(move_item(t, from, to)?))
        }
        GenerateCommand::AddCategory { file, id, name } => {
            edit(&file, |t| Ok(add_category(t, CategoryId::new(id), &name)?))
        }
        GenerateCommand::AddDemographic {
            file,
            name,
            kind,
            choices,
        } => edit(&file, |t| {
            let kind = match kind {
                KindArg::Text => DemographicKind::Text,
                KindArg::Integer => DemographicKind::Integer,
                KindArg::Choice if choices.is_empty() => {
                    bail!("a choice field needs --choice values")
                }
                KindArg::Choice => DemographicKind::Choice(choices),
            };
            Ok(add_demographic(t, DemographicField { name, kind })?)
        }),
        GenerateCommand::Bind {
            file,
            category,
            item,
            ordinal,
            values,
        } => edit(&file, |t| {
            let item = match (item, ordinal) {
                (Some(id), _) => ItemId::new(id),
                (None, Some(o)) => t
                    .item_at(o)
                    .ok_or_else(|| anyhow!("no item has ordinal {o}"))?
                    .id
                    .clone(),
                (None, None) => bail!("--item or --ordinal is required"),
            };
            let tuple = ScoreTuple::new(decimals(&values)?);
            Ok(bind_scale(t, &CategoryId::new(category), &item, tuple)?)
        }),
        GenerateCommand::SetBands {
            file,
            category,
            boundaries,
            texts,
        } => edit(&file, |t| {
            Ok(set_bands(
                t,
                &CategoryId::new(category),
                &decimals(&boundaries)?,
                &texts,
            )?)
        }),
        GenerateCommand::Validate { file } => {
            let test = read_draft(&file)?;
            let violations = validate(&test);
            for v in &violations {
                writeln!(err, "{v}")?;
            }
            if violations.iter().any(|v| v.is_error()) {
                Ok(1)
            } else {
                writeln!(out, "{}: ok", file.display())?;
                Ok(0)
            }
        }
    }
}

fn run<R: BufRead, W: Write, E: Write>(
    args: RunArgs,
    stdin: &mut R,
    out: &mut W,
    err: &mut E,
) -> anyhow::Result<i32> {
    let test = read_valid(&args.test)?;
    let log = log_path(args.log.as_ref());
    let opts = RunOptions {
        session_id: args
            .session_id
            .unwrap_or_else(|| uuid::Uuid::new_v4().to_string()),
        show_interpretation: args.show_interpretation,
        clock: &Utc::now,
    };
    match run_session(&test, stdin, out, &opts)? {
        RunOutcome::Completed(done) => {
            let (session, result) = *done;
            let line = persist_session(&session, &result)?;
            append_record(&log, &line)
                .with_context(|| format!("appending to {}", log.display()))?;
            Ok(0)
        }
        RunOutcome::Interrupted => {
            writeln!(err, "\npsytest: session interrupted; nothing was recorded")?;
            Ok(130)
        }
    }
}

fn load_records<E: Write>(
    args: &StatsArgs,
    test: &TestDefinition,
    err: &mut E,
) -> anyhow::Result<Vec<LogRecord>> {
    let path = log_path(args.log.as_ref());
    let loaded = load_session_file(&path, args.strict)?;
    for c in &loaded.corrupt {
        writeln!(
            err,
            "psytest: skipping corrupt record on line {}: {}",
            c.line, c.message
        )?;
    }
    Ok(loaded
        .records
        .into_iter()
        .filter(|r| r.session.test_id == test.test_id)
        .collect())
}

fn stats<W: Write, E: Write>(cmd: StatsCommand, out: &mut W, err: &mut E) -> anyhow::Result<i32> {
    match cmd {
        StatsCommand::Summary(args) => {
            let test = read_valid(&args.test)?;
            let records = load_records(&args, &test, err)?;
            match aggregate(&records, &test)? {
                Aggregate::Empty => writeln!(out, "no sessions")?,
                Aggregate::Summary(s) => {
                    writeln!(out, "{} ({} sessions)", test.title, records.len())?;
                    writeln!(out, "standard deviations are population (divide by n)")?;
                    for c in &s.categories {
                        let name = test
                            .category(&c.category_id)
                            .map_or("", |x| x.name.as_str());
                        writeln!(out, "\n{name} [{}]", c.category_id)?;
                        writeln!(
                            out,
                            "  n={} mean={} std_dev={} min={} max={}",
                            c.n, c.mean, c.std_dev, c.min, c.max
                        )?;
                        for (i, count) in c.band_histogram.iter().enumerate() {
                            writeln!(out, "  band {}: {count}", i + 1)?;
                        }
                    }
                    writeln!(
                        out,
                        "\nanswer frequencies ({})",
                        test.answer_set.options.join(" / ")
                    )?;
                    for i in &s.items {
                        let f: Vec<String> =
                            i.answer_frequencies.iter().map(u64::to_string).collect();
                        writeln!(out, "  item {}: {}", i.ordinal, f.join(" / "))?;
                    }
                }
            }
            Ok(0)
        }
        StatsCommand::Export {
            args,
            format: ExportFormat::Csv,
            table,
            out: target,
        } => {
            let test = read_valid(&args.test)?;
            let records = load_records(&args, &test, err)?;
            let bytes = match table {
                ExportTable::Matrix => export_matrix_csv(&records, &test),
                ExportTable::Summary => export_summary_csv(&aggregate(&records, &test)?, &test),
            };
            match target {
                Some(path) => std::fs::write(&path, bytes)
                    .with_context(|| format!("writing {}", path.display()))?,
                None => out.write_all(&bytes)?,
            }
            Ok(0)
        }
    }
}

fn serve(args: ServeArgs) -> anyhow::Result<i32> {
    let mut config = match &args.config {
        Some(path) => {
            let bytes =
                std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_slice::<ServiceConfig>(&bytes)
                .with_context(|| format!("parsing {}", path.display()))?
        }
        None => ServiceConfig {
            listen: "127.0.0.1:8080".parse().expect("valid address"),
            tests_dir: data_dir(),
            session_log: data_dir().join(DEFAULT_LOG_NAME),
            reveal_results: false,
            idle_timeout_secs: DEFAULT_IDLE_TIMEOUT_SECS,
        },
    };
    if let Some(l) = args.listen {
        config.listen = l;
    }
    if let Some(d) = args.tests_dir {
        config.tests_dir = d;
    }
    if let Some(l) = args.log {
        config.session_log = l;
    }
    if args.reveal_results {
        config.reveal_results = true;
    }
    if let Some(s) = args.idle_timeout_secs {
        config.idle_timeout_secs = s;
    }
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(crate::http::serve(config))?;
    Ok(0)
}

/// Entry point used by the binary.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let stdin = io::stdin();
    execute(
        cli,
        &mut stdin.lock(),
        &mut io::stdout().lock(),
        &mut io::stderr().lock(),
    )
}
