//! End-to-end run: load → baselines → impact → credit → match → indicators
//! → reports, with a manifest tying every output to its inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{SpecialtyConfig, OVERALL};
use crate::corpus::{corpus_summary, load_corpus, load_roster, Corpus, DomesticCountry, Roster, SummaryRow};
use crate::credit::{credit_table, PublicationCredit};
use crate::fold::fold;
use crate::indicators::{
    kc_tally, professor_scores, territory_overview, territory_scores, KcTally, ProfessorScores, TerritoryOverview,
    TerritoryScore,
};
use crate::matching::{evaluate_matching, load_gold, match_authorships, MatchQuality, MatchResult};
use crate::normalize::{compute_baselines, impact_table, Baselines, ImpactScore, WeightTable};
use crate::report::{self, OutputFormat, ReportError};
use crate::territory::{build_index, locate_institutions, InstitutionLocations, Level, Location, TerritoryIndex};

/// Pipeline stage, named in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Load,
    Baselines,
    Normalize,
    Credit,
    Match,
    Indicators,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Load => "load",
            Stage::Baselines => "baselines",
            Stage::Normalize => "normalize",
            Stage::Credit => "credit",
            Stage::Match => "match",
            Stage::Indicators => "indicators",
            Stage::Report => "report",
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{} stage failed: {message}", stage.as_str())]
pub struct PipelineError {
    pub stage: Stage,
    pub message: String,
}

impl PipelineError {
    fn new(stage: Stage, message: impl std::fmt::Display) -> Self {
        PipelineError { stage, message: message.to_string() }
    }

    /// 2 for invalid inputs, 3 for failures while computing or writing.
    pub fn exit_code(&self) -> i32 {
        match self.stage {
            Stage::Load => 2,
            _ => 3,
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, PipelineError>;
}

impl<T, E: std::fmt::Display> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> Result<T, PipelineError> {
        self.map_err(|e| PipelineError::new(stage, e))
    }
}

#[derive(Debug, Clone, Default)]
pub struct InputPaths {
    pub corpus: PathBuf,
    pub journals: PathBuf,
    pub institutions: PathBuf,
    pub roster: PathBuf,
    pub costs: PathBuf,
    pub weights: Option<PathBuf>,
    pub gazetteer: PathBuf,
    pub population: PathBuf,
    pub specialties: PathBuf,
}

impl InputPaths {
    /// The conventional file names inside one directory.
    pub fn in_dir(dir: &Path) -> Self {
        InputPaths {
            corpus: dir.join("publications.jsonl"),
            journals: dir.join("journals.csv"),
            institutions: dir.join("institutions.csv"),
            roster: dir.join("roster.csv"),
            costs: dir.join("costs.csv"),
            weights: Some(dir.join("weights.csv")),
            gazetteer: dir.join("gazetteer.csv"),
            population: dir.join("population.csv"),
            specialties: dir.join("specialties.json"),
        }
    }

    fn named(&self) -> Vec<(&'static str, &Path)> {
        let mut v = vec![
            ("publications", self.corpus.as_path()),
            ("journals", self.journals.as_path()),
            ("institutions", self.institutions.as_path()),
            ("roster", self.roster.as_path()),
            ("costs", self.costs.as_path()),
            ("gazetteer", self.gazetteer.as_path()),
            ("population", self.population.as_path()),
            ("specialties", self.specialties.as_path()),
        ];
        if let Some(w) = &self.weights {
            v.push(("weights", w.as_path()));
        }
        v
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Citation weight for cells missing from the weights file (or for all
    /// cells when there is no weights file). Off by default.
    pub default_weight: Option<f64>,
    pub format: OutputFormat,
    /// Extra levels to score besides the configured ones.
    pub levels: Vec<Level>,
    /// Restricts reports to one specialty (or [`OVERALL`]).
    pub specialty: Option<String>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { default_weight: None, format: OutputFormat::Csv, levels: Vec::new(), specialty: None }
    }
}

/// Validated inputs of a run.
#[derive(Debug)]
pub struct Inputs {
    pub config: SpecialtyConfig,
    pub corpus: Corpus,
    pub roster: Roster,
    pub index: TerritoryIndex,
    pub locations: InstitutionLocations,
    /// `None` when no weights file exists.
    pub weights: Option<WeightTable>,
    pub digests: BTreeMap<String, String>,
    pub outside_window: usize,
}

pub fn file_digest(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

/// Loads and cross-checks every input. All failures are [`Stage::Load`].
pub fn load_inputs(paths: &InputPaths) -> Result<Inputs, PipelineError> {
    let config = SpecialtyConfig::load(&paths.specialties).at(Stage::Load)?;
    let index = build_index(&paths.gazetteer, &paths.population).at(Stage::Load)?;
    if !index.is_domestic_country(&config.country) {
        return Err(PipelineError::new(
            Stage::Load,
            format!("country `{}` does not name the gazetteer's nation `{}`", config.country, index.nation().name),
        ));
    }
    let nation = index.nation();
    let domestic = DomesticCountry::new(&config.country, std::iter::once(&nation.name).chain(&nation.aliases));
    let mut corpus = load_corpus(&paths.corpus, &paths.journals, &paths.institutions, domestic).at(Stage::Load)?;
    let window = config.observation_window.bounds();
    let outside_window = corpus.restrict_to_window(window.0, window.1);
    let roster = load_roster(&paths.roster, &paths.costs, &corpus, window).at(Stage::Load)?;
    let locations = locate_institutions(&corpus, &index).at(Stage::Load)?;
    let weights = match &paths.weights {
        Some(p) if p.exists() => Some(WeightTable::load(p).at(Stage::Load)?),
        _ => None,
    };
    let mut digests = BTreeMap::new();
    for (name, path) in paths.named() {
        if path.exists() {
            digests.insert(
                name.to_owned(),
                file_digest(path).map_err(|e| PipelineError::new(Stage::Load, format!("{}: {e}", path.display())))?,
            );
        }
    }
    Ok(Inputs { config, corpus, roster, index, locations, weights, digests, outside_window })
}

/// Everything computed from the inputs.
#[derive(Debug)]
pub struct Scored {
    pub baselines: Baselines,
    pub impacts: Vec<ImpactScore>,
    pub credit: Vec<PublicationCredit>,
    pub matches: MatchResult,
    pub professors: ProfessorScores,
    pub tallies: Vec<KcTally>,
    pub levels: Vec<Level>,
    /// Per level, one score vector per configured specialty.
    pub territory: BTreeMap<Level, Vec<Vec<TerritoryScore>>>,
    pub overview: BTreeMap<Level, Vec<TerritoryOverview>>,
    pub summary: Vec<SummaryRow>,
}

fn effective_weights(inputs: &Inputs, options: &RunOptions) -> Result<WeightTable, PipelineError> {
    match (&inputs.weights, options.default_weight) {
        (Some(w), fallback) => w.clone().with_fallback(fallback).at(Stage::Normalize),
        (None, Some(fallback)) => {
            WeightTable::new(BTreeMap::new()).and_then(|w| w.with_fallback(Some(fallback))).at(Stage::Normalize)
        }
        (None, None) => {
            Err(PipelineError::new(Stage::Normalize, "no citation weights file and no default weight given"))
        }
    }
}

pub fn credit_stage(inputs: &Inputs) -> Result<Vec<PublicationCredit>, PipelineError> {
    credit_table(&inputs.corpus, &inputs.locations).at(Stage::Credit)
}

pub fn match_stage(inputs: &Inputs) -> Result<MatchResult, PipelineError> {
    match_authorships(&inputs.corpus, &inputs.roster, &inputs.config.match_rules).at(Stage::Match)
}

pub fn score(inputs: &Inputs, options: &RunOptions) -> Result<Scored, PipelineError> {
    let baselines = compute_baselines(&inputs.corpus);
    let weights = effective_weights(inputs, options)?;
    let impacts = impact_table(&inputs.corpus, &baselines, &weights).at(Stage::Normalize)?;
    let credit = credit_stage(inputs)?;
    let matches = match_stage(inputs)?;

    let professors = professor_scores(&inputs.corpus, &inputs.roster, &matches, &credit, &impacts, &inputs.locations)
        .at(Stage::Indicators)?;
    let tallies: Vec<KcTally> =
        inputs.config.specialties.iter().map(|s| kc_tally(s, &inputs.corpus, &credit, &impacts)).collect();
    let levels: Vec<Level> = inputs
        .config
        .score_levels
        .iter()
        .chain(&options.levels)
        .copied()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut territory = BTreeMap::new();
    let mut overview = BTreeMap::new();
    for &level in &levels {
        let per_specialty = inputs
            .config
            .specialties
            .iter()
            .zip(&tallies)
            .map(|(s, t)| territory_scores(s, level, t, &inputs.index, &inputs.roster, &professors))
            .collect::<Result<Vec<_>, _>>()
            .at(Stage::Indicators)?;
        overview.insert(
            level,
            territory_overview(&inputs.config, level, &per_specialty, &inputs.index, &inputs.roster, &professors),
        );
        territory.insert(level, per_specialty);
    }
    let summary = corpus_summary(&inputs.corpus, &inputs.config, &inputs.index, &credit);
    Ok(Scored { baselines, impacts, credit, matches, professors, tallies, levels, territory, overview, summary })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnresolvedReport {
    pub institutions: usize,
    /// Authorship-affiliation splits landing on unresolved institutions.
    pub splits: usize,
    pub sample: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunCounts {
    pub publications: usize,
    pub publications_outside_window: usize,
    pub authorships: usize,
    pub professors: usize,
    pub territories: BTreeMap<Level, usize>,
    pub assigned: usize,
    pub unmatched: usize,
    pub ambiguous: usize,
}

/// Provenance of a run. Contains no timestamps, so identical inputs give
/// an identical manifest and digest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub inputs: BTreeMap<String, String>,
    pub config: SpecialtyConfig,
    pub census_date: String,
    pub default_weight: Option<f64>,
    pub counts: RunCounts,
    pub unresolved_addresses: UnresolvedReport,
    pub degenerate_baselines: Vec<String>,
    pub degenerate_fields: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    /// SHA-256 of [`RunManifest::to_json`]; stamped on every output.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

const SAMPLE: usize = 10;

fn unresolved_report(inputs: &Inputs, credit: &[PublicationCredit]) -> UnresolvedReport {
    let ids = inputs.locations.unresolved();
    let splits = credit
        .iter()
        .flat_map(|c| &c.authors)
        .flat_map(|a| &a.splits)
        .filter(|s| s.location == Location::Unresolved)
        .count();
    UnresolvedReport {
        institutions: ids.len(),
        splits,
        sample: ids.iter().take(SAMPLE).map(|s| s.to_string()).collect(),
    }
}

fn manifest(inputs: &Inputs, scored: &Scored, options: &RunOptions, command: &str, outputs: &[String]) -> RunManifest {
    RunManifest {
        tool: env!("CARGO_PKG_NAME").to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        command: command.to_owned(),
        inputs: inputs.digests.clone(),
        config: inputs.config.clone(),
        census_date: inputs.config.census_date.to_string(),
        default_weight: options.default_weight,
        counts: RunCounts {
            publications: inputs.corpus.publications().len(),
            publications_outside_window: inputs.outside_window,
            authorships: inputs.corpus.authorship_count(),
            professors: inputs.roster.professors().len(),
            territories: scored.levels.iter().map(|&l| (l, inputs.index.count_at(l))).collect(),
            assigned: scored.matches.assignments.len(),
            unmatched: scored.matches.unmatched.len(),
            ambiguous: scored.matches.ambiguous.len(),
        },
        unresolved_addresses: unresolved_report(inputs, &scored.credit),
        degenerate_baselines: scored.baselines.degenerate().map(|b| format!("{} {}", b.year, b.sc_code)).collect(),
        degenerate_fields: scored.professors.degenerate_fields.clone(),
        outputs: outputs.to_vec(),
    }
}

fn level_slug(level: Level) -> String {
    level.as_str().to_ascii_lowercase()
}

/// File-name form of a specialty name.
pub fn slug(name: &str) -> String {
    fold(name).to_lowercase().replace(' ', "_")
}

fn write_file(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> Result<(), ReportError>,
) -> Result<(), PipelineError> {
    let path = dir.join(name);
    let fail = |e: &dyn std::fmt::Display| PipelineError::new(Stage::Report, format!("{}: {e}", path.display()));
    let mut out = BufWriter::new(File::create(&path).map_err(|e| fail(&e))?);
    f(&mut out).map_err(|e| fail(&e))?;
    out.flush().map_err(|e| fail(&e))
}

/// Which outputs a run writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Score,
    Report,
}

fn selected_specialties(inputs: &Inputs, options: &RunOptions) -> Result<Vec<Option<usize>>, PipelineError> {
    // `None` stands for the all-specialty view.
    match options.specialty.as_deref() {
        None => Ok(std::iter::once(None).chain((0..inputs.config.specialties.len()).map(Some)).collect()),
        Some(name) if name.eq_ignore_ascii_case(OVERALL) => Ok(vec![None]),
        Some(name) => match inputs.config.specialties.iter().position(|s| s.name == name) {
            Some(i) => Ok(vec![Some(i)]),
            None => Err(PipelineError::new(Stage::Load, ReportError::UnknownSpecialty(name.to_owned()))),
        },
    }
}

fn output_names(
    inputs: &Inputs,
    scored: &Scored,
    options: &RunOptions,
    mode: Mode,
) -> Result<Vec<String>, PipelineError> {
    let mut names: Vec<String> = [
        "baselines.csv",
        "impact.csv",
        "credit.csv",
        "matches.csv",
        "professors_scores.csv",
        "territory_scores.csv",
        "summary.csv",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for level in &scored.levels {
        names.push(format!("overview_{}.csv", level_slug(*level)));
    }
    if scored.levels.contains(&Level::Nuts2) {
        names.push("region_overview.csv".into());
    }
    if mode == Mode::Report {
        let ext = options.format.extension();
        for level in &scored.levels {
            for sel in selected_specialties(inputs, options)? {
                let label = sel.map_or_else(|| OVERALL.to_owned(), |i| slug(&inputs.config.specialties[i].name));
                names.push(format!("scatter_{}_{label}.{ext}", level_slug(*level)));
                names.push(format!("choropleth_{}_{label}.{ext}", level_slug(*level)));
            }
        }
    }
    names.sort();
    Ok(names)
}

/// Writes every output of `mode` into `dir` and returns the manifest.
pub fn write_outputs(
    inputs: &Inputs,
    scored: &Scored,
    dir: &Path,
    options: &RunOptions,
    mode: Mode,
) -> Result<RunManifest, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::new(Stage::Report, format!("{}: {e}", dir.display())))?;
    let command = match mode {
        Mode::Score => "score",
        Mode::Report => "report",
    };
    let names = output_names(inputs, scored, options, mode)?;
    let manifest = manifest(inputs, scored, options, command, &names);
    let digest = manifest.digest();
    let d = Some(digest.as_str());

    write_file(dir, "baselines.csv", |w| report::write_baselines(&scored.baselines, d, w))?;
    write_file(dir, "impact.csv", |w| report::write_impact(&scored.impacts, d, w))?;
    write_file(dir, "credit.csv", |w| report::write_credit(&inputs.corpus, &scored.credit, d, w))?;
    write_file(dir, "matches.csv", |w| report::write_matches(&scored.matches, d, w))?;
    write_file(dir, "professors_scores.csv", |w| report::write_professor_scores(&scored.professors, d, w))?;
    let all_scores: Vec<TerritoryScore> = scored.territory.values().flatten().flatten().cloned().collect();
    write_file(dir, "territory_scores.csv", |w| report::write_territory_scores(&all_scores, d, w))?;
    write_file(dir, "summary.csv", |w| report::write_summary(&scored.summary, OutputFormat::Csv, d, w))?;
    for (level, rows) in &scored.overview {
        write_file(dir, &format!("overview_{}.csv", level_slug(*level)), |w| {
            report::write_overview(&inputs.config, rows, &inputs.index, d, w)
        })?;
        if *level == Level::Nuts2 {
            write_file(dir, "region_overview.csv", |w| {
                report::write_overview(&inputs.config, rows, &inputs.index, d, w)
            })?;
        }
    }

    if mode == Mode::Report {
        let ext = options.format.extension();
        let selected = selected_specialties(inputs, options)?;
        for &level in &scored.levels {
            let overview = &scored.overview[&level];
            for &sel in &selected {
                let (label, scatter, values) = match sel {
                    None => (
                        OVERALL.to_owned(),
                        report::overall_scatter(overview, &inputs.index, OVERALL),
                        overview.iter().map(|o| (o.code.clone(), o.kc_total)).collect::<BTreeMap<_, _>>(),
                    ),
                    Some(i) => {
                        let scores = &scored.territory[&level][i];
                        let mut scatter = report::specialty_scatter(scores, &inputs.index);
                        scatter.level = level;
                        scatter.specialty = inputs.config.specialties[i].name.clone();
                        (
                            slug(&inputs.config.specialties[i].name),
                            scatter,
                            scores.iter().map(|s| (s.code.clone(), s.normalized_kc_pc)).collect(),
                        )
                    }
                };
                write_file(dir, &format!("scatter_{}_{label}.{ext}", level_slug(level)), |w| {
                    report::emit_scatter(&scatter, options.format, d, w)
                })?;
                let map = report::choropleth(&values, level, "normalized_kc_pc", &inputs.index).at(Stage::Report)?;
                write_file(dir, &format!("choropleth_{}_{label}.{ext}", level_slug(level)), |w| {
                    report::emit_choropleth(&map, options.format, d, w)
                })?;
            }
        }
    }

    std::fs::write(dir.join("manifest.json"), manifest.to_json())
        .map_err(|e| PipelineError::new(Stage::Report, format!("manifest.json: {e}")))?;
    Ok(manifest)
}

/// Full run: load, score and write the outputs of `mode` into `out`.
pub fn run_pipeline(
    paths: &InputPaths,
    out: &Path,
    options: &RunOptions,
    mode: Mode,
) -> Result<RunManifest, PipelineError> {
    let inputs = load_inputs(paths)?;
    // Reject an unknown specialty before doing any work.
    selected_specialties(&inputs, options)?;
    let scored = score(&inputs, options)?;
    write_outputs(&inputs, &scored, out, options, mode)
}

/// Corpus summary only; needs no weights, roster matching or scoring.
pub fn run_summary(paths: &InputPaths, out: &Path, format: OutputFormat) -> Result<Vec<SummaryRow>, PipelineError> {
    let inputs = load_inputs(paths)?;
    let credit = credit_stage(&inputs)?;
    let rows = corpus_summary(&inputs.corpus, &inputs.config, &inputs.index, &credit);
    std::fs::create_dir_all(out).map_err(|e| PipelineError::new(Stage::Report, format!("{}: {e}", out.display())))?;
    let digest = inputs_digest(&inputs);
    write_file(out, &format!("summary.{}", format.extension()), |w| {
        report::write_summary(&rows, format, Some(&digest), w)
    })?;
    Ok(rows)
}

/// Digest of the input digests, for outputs written without a full manifest.
fn inputs_digest(inputs: &Inputs) -> String {
    let text = serde_json::to_string(&inputs.digests).expect("digests serialize");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, Serialize)]
pub struct MatchEvaluation {
    pub quality: MatchQuality,
    pub gold_rows: usize,
    pub assigned: usize,
    pub unmatched: usize,
    pub ambiguous: usize,
}

/// Matches the roster and grades the result against a gold standard.
pub fn run_match_eval(paths: &InputPaths, gold: &Path, out: Option<&Path>) -> Result<MatchEvaluation, PipelineError> {
    let inputs = load_inputs(paths)?;
    let gold_rows = load_gold(gold).at(Stage::Load)?;
    let result = match_stage(&inputs)?;
    let quality = evaluate_matching(&result, &gold_rows, &inputs.corpus).at(Stage::Load)?;
    let eval = MatchEvaluation {
        quality,
        gold_rows: gold_rows.len(),
        assigned: result.assignments.len(),
        unmatched: result.unmatched.len(),
        ambiguous: result.ambiguous.len(),
    };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .map_err(|e| PipelineError::new(Stage::Report, format!("{}: {e}", dir.display())))?;
        let digest = inputs_digest(&inputs);
        write_file(dir, "matches.csv", |w| report::write_matches(&result, Some(&digest), w))?;
        write_file(dir, "match_quality.json", |w| {
            serde_json::to_writer_pretty(&mut *w, &eval)?;
            writeln!(w)?;
            Ok(())
        })?;
    }
    Ok(eval)
}
