//! `mcas`: run a gender association audit from a manifest, an image tree and
//! an embedding store.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::Failure;

#[derive(Debug, Parser)]
#[command(name = "mcas", version, about = "Multimodal composite association score audits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a built-in manifest to disk.
    Init(InitArgs),
    /// Fill the embedding store for every manifest item.
    Embed(EmbedArgs),
    /// Score every target and write report.json.
    Score(ScoreArgs),
    /// Render a report.json as JSON, CSV, Markdown or chart data.
    Report(ReportArgs),
    /// Check a manifest against its image tree and, optionally, a store.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
struct InitArgs {
    /// `appendix-a`, or `appendix-a:stable-diffusion` for the alternative
    /// attribute image prompts.
    #[arg(long, default_value = "appendix-a")]
    builtin: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct DatasetArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Defaults to the manifest's `images_root`, relative to the manifest file.
    #[arg(long)]
    images_root: Option<PathBuf>,
    /// Embedding model id. Defaults to the manifest's model hint, then to the
    /// only model in the store.
    #[arg(long)]
    model: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ProviderKind {
    File,
    Http,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long)]
    store: PathBuf,
    #[arg(long, value_enum, default_value = "file")]
    provider: ProviderKind,
    #[arg(long, env = "MCAS_ENDPOINT")]
    endpoint: Option<String>,
    #[arg(long, env = "MCAS_TOKEN", hide_env_values = true)]
    token: Option<String>,
    #[arg(long, default_value_t = 4)]
    concurrency: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 3)]
    max_retries: u32,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    #[arg(long)]
    store: PathBuf,
    #[arg(long, default_value = "report.json")]
    out: PathBuf,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    #[value(alias = "markdown")]
    Md,
    /// `category,target_id,mcas` rows for bar charts.
    Chart,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[arg(long = "in", value_name = "REPORT_JSON")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
    /// Standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Debug, Args)]
struct ValidateArgs {
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Also check that the store holds every embedding the manifest needs.
    #[arg(long)]
    store: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let outcome = match cli.command {
        Command::Init(a) => commands::init(&a.builtin, &a.out, a.force),
        Command::Embed(a) => commands::embed(&a),
        Command::Score(a) => commands::score(&a.dataset, &a.store, &a.out, a.force),
        Command::Report(a) => commands::report(&a.input, a.format, a.out.as_deref(), a.force),
        Command::Validate(a) => commands::validate(&a.dataset, a.store.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, message }) => {
            eprintln!("mcas: {message}");
            ExitCode::from(code)
        }
    }
}
