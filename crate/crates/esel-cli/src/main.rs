//! `esel` — demonstration selection, simulation, and evaluation pipelines.
//!
//! Subcommands: `ingest`, `select`, `simulate`, `render`, `eval`, `report`.
//! Every output embeds the configuration that produced it, and identical
//! flags plus seeds give byte-identical outputs at any `--threads` setting.

mod commands;
mod files;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "esel", version, about = "Demonstration selection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Rand,
    Topk,
    Div,
    #[value(name = "topk-div")]
    TopkDiv,
    Kmeans,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Example1,
    Example2,
    General,
}

#[derive(Clone, Copy, ValueEnum)]
enum TemplateArg {
    Qa,
    Reading,
    Math,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Generation,
    Classification,
    Multichoice,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExtractorArg {
    Exact,
    Math,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a JSONL pool and write it in the binary pool format.
    Ingest(IngestArgs),
    /// Run a selection method for every query in a pool.
    Select(SelectArgs),
    /// Run the min-norm loss/coverage simulation.
    Simulate(SimulateArgs),
    /// Render few-shot prompts from selections.
    Render(RenderArgs),
    /// Score generations or provider outputs into an accuracy report.
    Eval(EvalArgs),
    /// Derived reports over evaluation outputs.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Args)]
struct IngestArgs {
    /// Input pool (JSONL).
    #[arg(long = "in")]
    input: String,
    /// Output pool (binary).
    #[arg(long = "out")]
    output: String,
}

#[derive(Args)]
struct SelectArgs {
    #[arg(long)]
    method: MethodArg,
    #[arg(long)]
    k: usize,
    /// Similarity/diversity trade-off for topk-div.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Coreset size for div.
    #[arg(long = "coreset", default_value_t = 100)]
    coreset_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Demo pool (binary or JSONL).
    #[arg(long)]
    demos: String,
    /// Query pool (binary or JSONL).
    #[arg(long)]
    queries: String,
    /// Output selections (JSONL). For div, the coreset id list is also
    /// written to `<out>.coreset.json`.
    #[arg(long = "out")]
    output: String,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    dist: DistArg,
    #[arg(long)]
    l: usize,
    /// Embedding dimension (general only; the block families fix d = 4l).
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long = "train-scale", default_value_t = 1)]
    train_scale: usize,
    /// Trials (test queries) per seed slot.
    #[arg(long)]
    trials: usize,
    /// Number of independent seed slots.
    #[arg(long, default_value_t = 1)]
    seeds: usize,
    /// Master seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Report output path (JSON). The table always prints to stdout.
    #[arg(long = "out")]
    output: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    template: TemplateArg,
    #[arg(long)]
    demos: String,
    #[arg(long)]
    queries: String,
    /// Selections JSONL from `esel select`.
    #[arg(long)]
    selections: String,
    #[arg(long = "out")]
    output: String,
    /// Demo-order permutation seed; 0 keeps the selection order.
    #[arg(long = "permutation-seed", default_value_t = 0)]
    permutation_seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    /// Rendered prompts (JSONL from `esel render`).
    #[arg(long)]
    prompts: Option<String>,
    /// Precomputed predictions (JSONL); replaces the provider.
    #[arg(long)]
    predictions: Option<String>,
    /// Mock provider fixture (JSONL). Without it, MODEL_BASE_URL selects the
    /// HTTP provider; absent both, eval requires --predictions.
    #[arg(long)]
    mock: Option<String>,
    #[arg(long)]
    task: TaskArg,
    /// Answer extractor for generation tasks.
    #[arg(long, default_value = "exact")]
    extractor: ExtractorArg,
    /// Query pool carrying gold answers and subgroup tags.
    #[arg(long)]
    queries: String,
    /// Gold answers JSON {query_id: [answer, ...]}; overrides pool answers.
    #[arg(long)]
    gold: Option<String>,
    /// Options JSON {query_id: [option, ...]} for multichoice.
    #[arg(long)]
    options: Option<String>,
    /// Verbalizer whose score means "positive" (classification).
    #[arg(long, default_value = "great")]
    positive: String,
    /// Verbalizer whose score means "negative" (classification).
    #[arg(long, default_value = "terrible")]
    negative: String,
    #[arg(long = "max-tokens", default_value_t = 256)]
    max_tokens: usize,
    /// In-flight provider request cap (default 8).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long = "out")]
    output: String,
}

#[derive(Subcommand)]
enum ReportCommand {
    /// Average high-alpha accuracy minus low-alpha accuracy over the ten-point grid.
    Delta(DeltaArgs),
}

#[derive(Args)]
struct DeltaArgs {
    /// Alpha-grid accuracies JSON: {"0.1": acc, ..., "1.0": acc}.
    #[arg(long)]
    grid: String,
    #[arg(long = "out")]
    output: Option<String>,
}

fn main() -> ExitCode {
    // Exit codes: 0 success, 1 validation/user error, 2 internal error.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let outcome = std::panic::catch_unwind(|| run(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(_) => {
            eprintln!("error: internal failure");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> esel_core::Result<()> {
    match cli.command {
        Command::Ingest(args) => commands::ingest(&args),
        Command::Select(args) => commands::select(&args),
        Command::Simulate(args) => commands::simulate(&args),
        Command::Render(args) => commands::render(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Report(ReportCommand::Delta(args)) => commands::report_delta(&args),
    }
}
