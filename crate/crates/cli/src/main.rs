use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use sciwealth::pipeline::{self, InputPaths, Mode, PipelineError, RunOptions};
use sciwealth::report::OutputFormat;
use sciwealth::synth::{self, SynthParams};
use sciwealth::territory::Level;

/// Territorial knowledge capital and research productivity indicators.
#[derive(Parser)]
#[command(name = "sciwealth", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and cross-check all inputs, then stop.
    Validate(InputArgs),
    /// Per-specialty corpus statistics (publications, citations,
    /// authorships, provinces, regions).
    Summary {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
    /// Compute every score and write the score tables.
    Score {
        #[command(flatten)]
        inputs: InputArgs,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score, then write scatter and choropleth data as well.
    Report {
        #[command(flatten)]
        inputs: InputArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Specialty name, or `overall`; all of them when omitted.
        #[arg(long)]
        specialty: Option<String>,
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
    /// Match bylines to the roster and grade the result against a gold file.
    MatchEval {
        #[command(flatten)]
        inputs: InputArgs,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic input set (with gold.csv) for testing.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        publications: usize,
        #[arg(long, default_value_t = 12)]
        max_authors: usize,
        /// Adjust bylines to exactly this many authorship rows.
        #[arg(long)]
        authorships: Option<usize>,
    },
}

#[derive(Args)]
struct InputArgs {
    /// Directory holding the inputs under their conventional names; the
    /// per-file flags override it.
    #[arg(long)]
    inputs: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    journals: Option<PathBuf>,
    #[arg(long)]
    institutions: Option<PathBuf>,
    #[arg(long)]
    roster: Option<PathBuf>,
    #[arg(long)]
    costs: Option<PathBuf>,
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    gazetteer: Option<PathBuf>,
    #[arg(long)]
    population: Option<PathBuf>,
    #[arg(long)]
    specialties: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    out: PathBuf,
    /// Also score this level (configured levels are always scored).
    #[arg(long)]
    level: Option<Level>,
    /// Citation weight for (year, subject category) cells without one.
    #[arg(long)]
    default_weight: Option<f64>,
}

impl InputArgs {
    fn paths(&self) -> Result<InputPaths, String> {
        let base = self.inputs.as_deref().map(InputPaths::in_dir);
        let pick = |flag: &Option<PathBuf>, default: Option<PathBuf>, name: &str| {
            flag.clone().or(default).ok_or_else(|| format!("--{name} (or --inputs) is required"))
        };
        let b = base.as_ref();
        Ok(InputPaths {
            corpus: pick(&self.corpus, b.map(|b| b.corpus.clone()), "corpus")?,
            journals: pick(&self.journals, b.map(|b| b.journals.clone()), "journals")?,
            institutions: pick(&self.institutions, b.map(|b| b.institutions.clone()), "institutions")?,
            roster: pick(&self.roster, b.map(|b| b.roster.clone()), "roster")?,
            costs: pick(&self.costs, b.map(|b| b.costs.clone()), "costs")?,
            weights: self.weights.clone().or_else(|| b.and_then(|b| b.weights.clone())),
            gazetteer: pick(&self.gazetteer, b.map(|b| b.gazetteer.clone()), "gazetteer")?,
            population: pick(&self.population, b.map(|b| b.population.clone()), "population")?,
            specialties: pick(&self.specialties, b.map(|b| b.specialties.clone()), "specialties")?,
        })
    }
}

impl RunArgs {
    fn options(&self, format: OutputFormat, specialty: Option<String>) -> RunOptions {
        RunOptions { default_weight: self.default_weight, format, levels: self.level.into_iter().collect(), specialty }
    }
}

const EXIT_INVALID: u8 = 2;

fn fail(e: PipelineError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn paths_or_exit(args: &InputArgs) -> Result<InputPaths, ExitCode> {
    args.paths().map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_INVALID)
    })
}

fn run(cli: Cli) -> Result<ExitCode, ExitCode> {
    match cli.command {
        Command::Validate(args) => {
            let inputs = pipeline::load_inputs(&paths_or_exit(&args)?).map_err(fail)?;
            println!(
                "ok: {} publications ({} outside the window dropped), {} authorships, {} professors, {} institutions ({} unresolved)",
                inputs.corpus.publications().len(),
                inputs.outside_window,
                inputs.corpus.authorship_count(),
                inputs.roster.professors().len(),
                inputs.corpus.institutions().len(),
                inputs.locations.unresolved().len(),
            );
        }
        Command::Summary { inputs, out, format } => {
            let rows = pipeline::run_summary(&paths_or_exit(&inputs)?, &out, format).map_err(fail)?;
            for r in rows {
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    r.specialty, r.publications, r.citations, r.authorships, r.provinces, r.regions
                );
            }
        }
        Command::Score { inputs, run } => {
            let paths = paths_or_exit(&inputs)?;
            let manifest = pipeline::run_pipeline(&paths, &run.out, &run.options(OutputFormat::Csv, None), Mode::Score)
                .map_err(fail)?;
            println!("manifest {}", manifest.digest());
        }
        Command::Report { inputs, run, specialty, format } => {
            let paths = paths_or_exit(&inputs)?;
            let manifest = pipeline::run_pipeline(&paths, &run.out, &run.options(format, specialty), Mode::Report)
                .map_err(fail)?;
            println!("manifest {}", manifest.digest());
        }
        Command::MatchEval { inputs, gold, out } => {
            let eval = pipeline::run_match_eval(&paths_or_exit(&inputs)?, &gold, out.as_deref()).map_err(fail)?;
            let q = eval.quality;
            println!(
                "precision {:.6} recall {:.6} f_measure {:.6} (tp {} fp {} fn {}; {} ambiguous)",
                q.precision, q.recall, q.f_measure, q.tp, q.fp, q.fn_, eval.ambiguous
            );
        }
        Command::Synth { out, seed, publications, max_authors, authorships } => {
            let params = SynthParams {
                seed,
                publications,
                max_authors,
                target_authorships: authorships,
                ..SynthParams::default()
            };
            let data = synth::generate(&params);
            data.write(&out).with_context(|| format!("writing {}", out.display())).map_err(|e| {
                eprintln!("error: {e:#}");
                ExitCode::from(3)
            })?;
            println!(
                "wrote {} publications, {} authorships, {} professors to {}",
                data.publication_count(),
                data.authorships,
                data.professor_count(),
                out.display()
            );
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    run(Cli::parse()).unwrap_or_else(|code| code)
}
