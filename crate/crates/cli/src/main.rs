use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use glucevo::eval::{cmd_eval, load_model, write_table, ModelSource};
use glucevo::map::{cmd_map, parse_codons};
use glucevo::summary::{cmd_summarize, render_tables};
use glucevo::train::{cmd_train, ExperimentSpec};
use glucevo::GrammarSource;
use glucevo_core::dataset::load_patient;
use glucevo_core::evolver::{GaConfig, MutationMode};
use glucevo_core::fitness::ObjectiveId;
use glucevo_core::grammars::GrammarId;

/// Exit status when `map` runs out of codons.
const EXIT_WRAPPED_OUT: u8 = 3;

#[derive(Parser)]
#[command(name = "glucevo", version, about = "Evolve personalized blood-glucose models with grammatical evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded GA batches and write one report per run plus summary.csv.
    Train(TrainArgs),
    /// Evaluate a fixed model on a dataset.
    Eval(EvalArgs),
    /// Decode a codon list through a grammar and print the trace.
    Map(MapArgs),
    /// Rebuild summary.csv and tables from the reports in a directory.
    Summarize(SummarizeArgs),
}

#[derive(Args)]
struct GrammarArgs {
    /// Bundled grammar(s): G10, G11, G12, G13 or example.
    #[arg(long, value_delimiter = ',')]
    grammar: Vec<GrammarId>,
    /// Custom grammar file(s), used in addition to --grammar.
    #[arg(long)]
    grammar_file: Vec<PathBuf>,
}

impl GrammarArgs {
    fn sources(&self) -> Vec<GrammarSource> {
        self.grammar
            .iter()
            .map(|&g| GrammarSource::Bundled(g))
            .chain(self.grammar_file.iter().cloned().map(GrammarSource::File))
            .collect()
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MutationArg {
    PerIndividual,
    PerCodon,
}

#[derive(Args)]
struct TrainArgs {
    /// Patient CSV file(s) with columns k,GL,CH,IS,IL.
    #[arg(long, required = true)]
    dataset: Vec<PathBuf>,
    #[command(flatten)]
    grammars: GrammarArgs,
    /// Objective(s): f1..f5.
    #[arg(long, value_delimiter = ',', required = true)]
    objective: Vec<ObjectiveId>,
    /// Independent runs per patient × grammar × objective cell.
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Base seed; run i uses a seed derived from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    chromosome_length: Option<usize>,
    #[arg(long)]
    max_wraps: Option<usize>,
    #[arg(long)]
    crossover_prob: Option<f64>,
    #[arg(long)]
    mutation_prob: Option<f64>,
    #[arg(long, value_enum)]
    mutation_mode: Option<MutationArg>,
    #[arg(long)]
    tournament_size: Option<usize>,
    #[arg(long)]
    elitism: Option<usize>,
}

impl TrainArgs {
    fn config(&self) -> GaConfig {
        let d = GaConfig::default();
        GaConfig {
            population_size: self.population.unwrap_or(d.population_size),
            generations: self.generations.unwrap_or(d.generations),
            chromosome_length: self.chromosome_length.unwrap_or(d.chromosome_length),
            max_wraps: self.max_wraps.unwrap_or(d.max_wraps),
            crossover_prob: self.crossover_prob.unwrap_or(d.crossover_prob),
            mutation_prob: self.mutation_prob.unwrap_or(d.mutation_prob),
            mutation_mode: match self.mutation_mode {
                Some(MutationArg::PerCodon) => MutationMode::PerCodon,
                Some(MutationArg::PerIndividual) => MutationMode::PerIndividual,
                None => d.mutation_mode,
            },
            tournament_size: self.tournament_size.unwrap_or(d.tournament_size),
            elitism: self.elitism.unwrap_or(d.elitism),
            ..d
        }
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Model text, e.g. "GL[k] + CH[k-1] - cos(IL[k-1])".
    #[arg(required_unless_present = "report", conflicts_with = "report")]
    model: Option<String>,
    /// Take the model from a run report instead.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    dataset: PathBuf,
    /// Directory for the `{patient}_estimate.csv` table.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct MapArgs {
    #[arg(long, default_value = "example", conflicts_with = "grammar_file")]
    grammar: GrammarId,
    #[arg(long)]
    grammar_file: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    max_wraps: usize,
    /// Codons, separated by spaces or commas.
    #[arg(required = true, num_args = 1..)]
    codons: Vec<String>,
}

#[derive(Args)]
struct SummarizeArgs {
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Train(args) => train(args),
        Command::Eval(args) => eval(args),
        Command::Map(args) => map(args),
        Command::Summarize(args) => {
            let rows = cmd_summarize(&args.out)?;
            print!("{}", render_tables(&rows));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn train(args: TrainArgs) -> Result<ExitCode> {
    let spec = ExperimentSpec {
        datasets: args.dataset.clone(),
        grammars: args.grammars.sources(),
        objectives: args.objective.clone(),
        runs: args.runs,
        base_seed: args.seed,
        out_dir: args.out.clone(),
        config: args.config(),
    };
    let outcome = cmd_train(&spec)?;
    print!("{}", render_tables(&outcome.summary));
    println!(
        "{} reports written; summary in {}",
        outcome.reports.len(),
        outcome.summary_path.display()
    );
    if outcome.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!("{} run(s) failed:", outcome.failures.len());
    for (cell, err) in &outcome.failures {
        eprintln!("  {cell}: {err}");
    }
    Ok(ExitCode::FAILURE)
}

fn eval(args: EvalArgs) -> Result<ExitCode> {
    let source = match (args.model, args.report) {
        (Some(t), _) => ModelSource::Text(t),
        (None, Some(p)) => ModelSource::Report(p),
        (None, None) => unreachable!("clap requires one of them"),
    };
    let model = load_model(&source)?;
    let series = load_patient(&args.dataset).with_context(|| format!("loading {}", args.dataset.display()))?;
    let evaluation = cmd_eval(&model, &series)?;
    print!("{}", evaluation.summary_text());
    std::fs::create_dir_all(&args.out)?;
    let path = args.out.join(format!("{}_estimate.csv", evaluation.patient));
    write_table(&path, &evaluation.table)?;
    println!("table   {}", path.display());
    Ok(ExitCode::SUCCESS)
}

fn map(args: MapArgs) -> Result<ExitCode> {
    let source = match args.grammar_file {
        Some(p) => GrammarSource::File(p),
        None => GrammarSource::Bundled(args.grammar),
    };
    let grammar = source.load()?;
    let codons = parse_codons(&args.codons.join(" "))?;
    let report = cmd_map(&grammar, &codons, args.max_wraps)?;
    println!("step, codon_index, codon_value, non_terminal, choices, chosen");
    for line in &report.trace {
        println!("{line}");
    }
    println!("codons consumed: {}", report.codons_consumed);
    println!("wraps used: {}", report.wraps_used);
    match &report.phenotype {
        Ok(text) => {
            println!("phenotype: {text}");
            if let Some(e) = &report.expression {
                println!("expression: {e}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            eprintln!("mapping failed: {e}");
            Ok(ExitCode::from(EXIT_WRAPPED_OUT))
        }
    }
}
