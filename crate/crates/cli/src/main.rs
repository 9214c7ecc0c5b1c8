mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use manifest::BackendKind;

/// An error that stops the command; exits with status 2.
#[derive(Debug)]
pub struct Fatal {
    pub message: String,
}

impl Fatal {
    pub fn new(message: impl Into<String>) -> Self {
        Self { message: message.into() }
    }
}

/// How a command finished when it did not hit a fatal error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    ItemFailures,
}

#[derive(Parser)]
#[command(name = "funkbqa", version, about = "Question answering over knowledge bases with unanswerability")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate or prune a knowledge base.
    #[command(subcommand)]
    Kb(KbCommand),
    /// Derive unanswerable datasets and few-shot samples.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Answer every question of a dataset and score the answers.
    Run(RunArgs),
    /// Score predictions against a gold dataset.
    Eval(EvalArgs),
    /// Run the verifiers on one logical form for one question.
    Verify(VerifyArgs),
    /// Inspect trace files.
    #[command(subcommand)]
    Trace(TraceCommand),
}

#[derive(Subcommand)]
enum KbCommand {
    /// Load a KB directory and check referential integrity.
    Validate {
        #[arg(long)]
        kb: PathBuf,
    },
    /// Apply a deletion plan and write the reduced KB.
    Delete {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct PlanSizeArgs {
    #[arg(long, default_value_t = 0)]
    classes: usize,
    #[arg(long, default_value_t = 0)]
    relations: usize,
    #[arg(long, default_value_t = 0)]
    entities: usize,
    #[arg(long, default_value_t = 0)]
    facts: usize,
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Delete KB elements and relabel an answerable split.
    Inject {
        #[arg(long)]
        kb: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Deletion plan file; otherwise a plan is drawn with --seed.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        sizes: PlanSizeArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Draw a stratified few-shot sample.
    Sample {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value_t = 0)]
        answerable: usize,
        #[arg(long, default_value_t = 0)]
        unanswerable: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Debug, Default)]
pub struct RunArgs {
    /// Run manifest (TOML or JSON); flags override its fields.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Pipeline configuration (TOML or JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub kb: Option<PathBuf>,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// Scripted reply fixture for the mock backend.
    #[arg(long)]
    pub mock: Option<PathBuf>,
    /// Repair rounds per question.
    #[arg(long)]
    pub n_iter: Option<usize>,
    #[arg(long)]
    pub answerable_mode: bool,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Outcomes file written by `run`.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// KB the logical forms are executed on.
    #[arg(long)]
    pub kb: PathBuf,
    /// Directory for report.json and records.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub kb: PathBuf,
    #[arg(long)]
    pub question: String,
    /// SPARQL or s-expression text, or NK.
    #[arg(long)]
    pub lf: String,
    /// Linked entity id; repeatable.
    #[arg(long = "entity")]
    pub entities: Vec<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "mock")]
    pub backend: BackendKind,
    #[arg(long)]
    pub mock: Option<PathBuf>,
    #[arg(long)]
    pub answerable_mode: bool,
}

#[derive(Subcommand)]
enum TraceCommand {
    /// Print one question's trace in readable form.
    Show {
        #[arg(long)]
        traces: PathBuf,
        /// Question id; the first trace when neither --id nor --index is given.
        #[arg(long)]
        id: Option<String>,
        /// 0-based line number.
        #[arg(long, conflicts_with = "id")]
        index: Option<usize>,
    },
}

fn dispatch(cli: Cli) -> Result<Status, Fatal> {
    match cli.command {
        Command::Kb(KbCommand::Validate { kb }) => commands::kb_validate(&kb),
        Command::Kb(KbCommand::Delete { kb, plan, out }) => commands::kb_delete(&kb, &plan, &out),
        Command::Dataset(DatasetCommand::Inject { kb, dataset, plan, seed, sizes, out }) => {
            let sizes = funkbqa::dataset::PlanSizes {
                classes: sizes.classes,
                relations: sizes.relations,
                entities: sizes.entities,
                facts: sizes.facts,
            };
            commands::dataset_inject(&kb, &dataset, plan.as_deref(), seed, sizes, &out)
        }
        Command::Dataset(DatasetCommand::Sample { dataset, answerable, unanswerable, seed, out }) => {
            commands::dataset_sample(&dataset, answerable, unanswerable, seed, &out)
        }
        Command::Run(args) => commands::run(&args),
        Command::Eval(args) => commands::eval(&args),
        Command::Verify(args) => commands::verify(&args),
        Command::Trace(TraceCommand::Show { traces, id, index }) => commands::trace_show(&traces, id.as_deref(), index),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::ItemFailures) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(2)
        }
    }
}
