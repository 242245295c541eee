//! Professor productivity (FSS), territorial knowledge capital (KC) and
//! their normalized, per-capita and regional forms.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::config::{Specialty, SpecialtyConfig};
use crate::corpus::{Corpus, CostParameters, Roster};
use crate::credit::PublicationCredit;
use crate::matching::{assignments_by_professor, MatchResult};
use crate::normalize::ImpactScore;
use crate::territory::{InstitutionLocations, Level, Location, TerritoryError, TerritoryIndex};

/// Territories with fewer professors than this are flagged.
pub const LOW_HEADCOUNT: usize = 5;

#[derive(Debug, Error, PartialEq)]
pub enum IndicatorError {
    #[error("professor has no year of activity in the observation window")]
    NoActiveYears,
    #[error("research cost must be positive, got {0}")]
    NonPositiveCost(f64),
    #[error("no cost parameters for field `{0}`")]
    MissingCost(String),
    #[error("territory `{code}` has no positive population")]
    MissingPopulation { code: String },
    #[error("national population is unknown")]
    MissingNationalPopulation,
    #[error("{0}")]
    Territory(String),
}

impl From<TerritoryError> for IndicatorError {
    fn from(e: TerritoryError) -> Self {
        IndicatorError::Territory(e.to_string())
    }
}

/// Yearly value of output, `Σ c_i f_i / t`.
pub fn output_rate(
    years_active: u32,
    contributions: impl IntoIterator<Item = (f64, f64)>,
) -> Result<f64, IndicatorError> {
    if years_active == 0 {
        return Err(IndicatorError::NoActiveYears);
    }
    let total: f64 = contributions.into_iter().map(|(c, f)| c * f).sum();
    Ok(total / years_active as f64)
}

/// Fractional scientific strength: yearly value of output per unit of
/// research cost, with half the salary charged to research.
///
/// `contributions` yields `(impact, author weight)` for each matched
/// publication.
pub fn fss(
    years_active: u32,
    contributions: impl IntoIterator<Item = (f64, f64)>,
    cost: &CostParameters,
) -> Result<f64, IndicatorError> {
    let research_cost = cost.research_cost();
    if research_cost.is_nan() || research_cost <= 0.0 {
        return Err(IndicatorError::NonPositiveCost(research_cost));
    }
    Ok(output_rate(years_active, contributions)? / research_cost)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedGroup {
    pub values: Vec<f64>,
    /// No member has a positive score.
    pub degenerate: bool,
}

/// Divides every value by the mean of the group's positive values.
pub fn normalize_scores(values: &[f64]) -> NormalizedGroup {
    let positive: Vec<f64> = values.iter().copied().filter(|v| *v > 0.0).collect();
    if positive.is_empty() {
        return NormalizedGroup { values: vec![0.0; values.len()], degenerate: true };
    }
    let mean = positive.iter().sum::<f64>() / positive.len() as f64;
    NormalizedGroup {
        values: values.iter().map(|v| if *v > 0.0 { v / mean } else { 0.0 }).collect(),
        degenerate: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfessorScore {
    pub professor_id: String,
    pub sds_code: String,
    pub raw_fss: f64,
    pub normalized_fss: f64,
    /// LAU of the professor's university, when it is located domestically.
    pub lau: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ProfessorScores {
    /// Ordered by professor id.
    pub scores: Vec<ProfessorScore>,
    /// Fields whose professors all scored zero.
    pub degenerate_fields: Vec<String>,
}

/// Raw and field-normalized FSS of every roster professor.
///
/// A professor's weight in a publication is their full positional weight.
/// Normalization runs on the yearly output `Σ c f / t` within each field:
/// the research cost is a per-field constant, so this equals dividing raw
/// FSS by the field mean while staying exactly invariant to cost scaling.
pub fn professor_scores(
    corpus: &Corpus,
    roster: &Roster,
    matches: &MatchResult,
    credit: &[PublicationCredit],
    impacts: &[ImpactScore],
    locations: &InstitutionLocations,
) -> Result<ProfessorScores, IndicatorError> {
    let slots = assignments_by_professor(matches, corpus);
    let mut rates = Vec::with_capacity(roster.professors().len());
    let mut raws = Vec::with_capacity(roster.professors().len());
    for p in roster.professors() {
        let contributions = slots.get(&p.professor_id).into_iter().flatten().map(|&(i, pos)| {
            let weight = credit[i].author_weight(pos).unwrap_or(0.0);
            (impacts[i].c, weight)
        });
        let cost = roster.cost(&p.sds_code).ok_or_else(|| IndicatorError::MissingCost(p.sds_code.clone()))?;
        let rate = output_rate(p.years_active(), contributions)?;
        let research_cost = cost.research_cost();
        if research_cost.is_nan() || research_cost <= 0.0 {
            return Err(IndicatorError::NonPositiveCost(research_cost));
        }
        rates.push(rate);
        raws.push(rate / research_cost);
    }

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in roster.professors().iter().enumerate() {
        groups.entry(p.sds_code.as_str()).or_default().push(i);
    }
    let mut normalized = vec![0.0; rates.len()];
    let mut degenerate_fields = Vec::new();
    for (field, members) in groups {
        let values: Vec<f64> = members.iter().map(|&i| rates[i]).collect();
        let group = normalize_scores(&values);
        if group.degenerate {
            degenerate_fields.push(field.to_owned());
        }
        for (&i, v) in members.iter().zip(group.values) {
            normalized[i] = v;
        }
    }

    let scores = roster
        .professors()
        .iter()
        .enumerate()
        .map(|(i, p)| ProfessorScore {
            professor_id: p.professor_id.clone(),
            sds_code: p.sds_code.clone(),
            raw_fss: raws[i],
            normalized_fss: normalized[i],
            lau: match locations.get(&p.university_id) {
                Some(Location::Lau(code)) => Some(code.clone()),
                _ => None,
            },
        })
        .collect();
    Ok(ProfessorScores { scores, degenerate_fields })
}

/// Knowledge capital: `Σ c_i × share_i` over `(impact, territory share)`
/// pairs.
pub fn kc(contributions: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    contributions.into_iter().map(|(c, share)| c * share).sum()
}

/// Knowledge capital of one specialty, split by LAU, with the parts that
/// went abroad or to unresolved domestic addresses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KcTally {
    pub by_lau: BTreeMap<String, f64>,
    pub foreign: f64,
    pub unresolved: f64,
    /// `Σ c_i` over the specialty's publications.
    pub total_impact: f64,
    pub publications: usize,
}

impl KcTally {
    /// Domestic knowledge capital located in some LAU.
    pub fn national(&self) -> f64 {
        self.by_lau.values().sum()
    }
}

pub fn kc_tally(
    specialty: &Specialty,
    corpus: &Corpus,
    credit: &[PublicationCredit],
    impacts: &[ImpactScore],
) -> KcTally {
    let mut tally = KcTally::default();
    for (i, p) in corpus.publications().iter().enumerate() {
        if !specialty.covers_publication(p) {
            continue;
        }
        let c = impacts[i].c;
        let shares = &credit[i].shares;
        for (lau, share) in &shares.by_lau {
            *tally.by_lau.entry(lau.clone()).or_insert(0.0) += c * share;
        }
        tally.foreign += c * shares.foreign;
        tally.unresolved += c * shares.unresolved;
        tally.total_impact += c;
        tally.publications += 1;
    }
    tally
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KcPerCapita {
    pub code: String,
    pub kc: f64,
    pub population: u64,
    /// KC per million residents.
    pub kc_pc: f64,
    /// `kc_pc` over the national KC per million residents.
    pub normalized_kc_pc: f64,
}

/// Per-capita knowledge capital for every territory at `level`.
///
/// `kc_at_level` holds the rolled-up KC (missing codes count as 0) and
/// `national_kc` the domestic total. The baseline is the nation's own
/// density, national KC over national population; if it is zero every
/// normalized value is 0.
pub fn kc_per_capita_normalized(
    kc_at_level: &BTreeMap<String, f64>,
    level: Level,
    index: &TerritoryIndex,
    national_kc: f64,
) -> Result<Vec<KcPerCapita>, IndicatorError> {
    let national_pop = index.nation().population.filter(|p| *p > 0).ok_or(IndicatorError::MissingNationalPopulation)?;
    let baseline = national_kc / (national_pop as f64 / 1e6);
    index
        .nodes_at(level)
        .map(|node| {
            let population = node
                .population
                .filter(|p| *p > 0)
                .ok_or_else(|| IndicatorError::MissingPopulation { code: node.code.clone() })?;
            let kc = kc_at_level.get(&node.code).copied().unwrap_or(0.0);
            let kc_pc = kc / (population as f64 / 1e6);
            let normalized_kc_pc = if baseline > 0.0 { kc_pc / baseline } else { 0.0 };
            Ok(KcPerCapita { code: node.code.clone(), kc, population, kc_pc, normalized_kc_pc })
        })
        .collect()
}

/// Mean over all configured specialties; a specialty without KC counts as 0.
pub fn aggregate_region_specialties(scores: &[Option<f64>]) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().map(|s| s.unwrap_or(0.0)).sum::<f64>() / scores.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FssCell {
    pub mean: f64,
    pub count: usize,
    pub low_headcount: bool,
}

/// Mean normalized FSS of the professors of one territory and specialty;
/// `None` when there are none.
pub fn region_mean_fss(normalized: &[f64]) -> Option<FssCell> {
    if normalized.is_empty() {
        return None;
    }
    Some(FssCell {
        mean: normalized.iter().sum::<f64>() / normalized.len() as f64,
        count: normalized.len(),
        low_headcount: normalized.len() < LOW_HEADCOUNT,
    })
}

/// Mean over the specialties where the territory has professors; `None`
/// when it has none in any.
pub fn covered_mean(cells: &[Option<f64>]) -> Option<f64> {
    let covered: Vec<f64> = cells.iter().flatten().copied().collect();
    if covered.is_empty() {
        None
    } else {
        Some(covered.iter().sum::<f64>() / covered.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerritoryScore {
    pub code: String,
    pub level: Level,
    pub specialty: String,
    pub kc: f64,
    pub kc_pc: f64,
    pub normalized_kc_pc: f64,
    pub mean_normalized_fss: Option<f64>,
    pub professor_count: usize,
    pub low_headcount_flag: bool,
}

/// Professors of `specialty` grouped by their territory at `level`.
fn professors_by_territory<'a>(
    roster: &Roster,
    scores: &'a ProfessorScores,
    specialty: &Specialty,
    level: Level,
    index: &TerritoryIndex,
) -> BTreeMap<String, Vec<&'a ProfessorScore>> {
    let mut out: BTreeMap<String, Vec<&ProfessorScore>> = BTreeMap::new();
    for (p, s) in roster.professors().iter().zip(&scores.scores) {
        if !specialty.covers_field(&p.sds_code) {
            continue;
        }
        let Some(lau) = &s.lau else { continue };
        if let Some(node) = index.ancestor_at(lau, level) {
            out.entry(node.code.clone()).or_default().push(s);
        }
    }
    out
}

/// Scores of every territory at `level` for one specialty.
#[allow(clippy::too_many_arguments)]
pub fn territory_scores(
    specialty: &Specialty,
    level: Level,
    tally: &KcTally,
    index: &TerritoryIndex,
    roster: &Roster,
    professors: &ProfessorScores,
) -> Result<Vec<TerritoryScore>, IndicatorError> {
    let at_level = crate::territory::rollup(&tally.by_lau, level, index)?;
    let per_capita = kc_per_capita_normalized(&at_level, level, index, tally.national())?;
    let staff = professors_by_territory(roster, professors, specialty, level, index);
    Ok(per_capita
        .into_iter()
        .map(|pc| {
            let normalized: Vec<f64> = staff.get(&pc.code).into_iter().flatten().map(|s| s.normalized_fss).collect();
            let cell = region_mean_fss(&normalized);
            TerritoryScore {
                code: pc.code,
                level,
                specialty: specialty.name.clone(),
                kc: pc.kc,
                kc_pc: pc.kc_pc,
                normalized_kc_pc: pc.normalized_kc_pc,
                mean_normalized_fss: cell.map(|c| c.mean),
                professor_count: normalized.len(),
                low_headcount_flag: normalized.len() < LOW_HEADCOUNT,
            }
        })
        .collect())
}

/// One territory's row across all specialties: normalized KC_PC with the
/// all-specialty mean, and mean FSS with the mean over covered specialties.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TerritoryOverview {
    pub code: String,
    pub level: Level,
    pub population: u64,
    /// Distinct professors in any configured specialty.
    pub professor_count: usize,
    pub specialties_covered: usize,
    pub normalized_kc_pc: Vec<f64>,
    pub kc_total: f64,
    pub mean_fss: Vec<Option<FssCell>>,
    pub fss_total: Option<f64>,
}

/// Builds the overview rows at `level` from the per-specialty scores (one
/// inner vector per configured specialty, in configuration order).
pub fn territory_overview(
    config: &SpecialtyConfig,
    level: Level,
    per_specialty: &[Vec<TerritoryScore>],
    index: &TerritoryIndex,
    roster: &Roster,
    professors: &ProfessorScores,
) -> Vec<TerritoryOverview> {
    let mut staff: BTreeMap<String, BTreeSet<&str>> = BTreeMap::new();
    for (p, s) in roster.professors().iter().zip(&professors.scores) {
        if !config.specialties.iter().any(|sp| sp.covers_field(&p.sds_code)) {
            continue;
        }
        if let Some(node) = s.lau.as_deref().and_then(|lau| index.ancestor_at(lau, level)) {
            staff.entry(node.code.clone()).or_default().insert(&p.professor_id);
        }
    }
    index
        .nodes_at(level)
        .enumerate()
        .map(|(row, node)| {
            let kc: Vec<Option<f64>> =
                per_specialty.iter().map(|scores| scores.get(row).map(|s| s.normalized_kc_pc)).collect();
            let fss: Vec<Option<FssCell>> = per_specialty
                .iter()
                .map(|scores| {
                    scores.get(row).and_then(|s| {
                        s.mean_normalized_fss.map(|mean| FssCell {
                            mean,
                            count: s.professor_count,
                            low_headcount: s.low_headcount_flag,
                        })
                    })
                })
                .collect();
            let fss_means: Vec<Option<f64>> = fss.iter().map(|c| c.map(|c| c.mean)).collect();
            TerritoryOverview {
                code: node.code.clone(),
                level,
                population: node.population.unwrap_or(0),
                professor_count: staff.get(&node.code).map_or(0, BTreeSet::len),
                specialties_covered: fss.iter().filter(|c| c.is_some()).count(),
                normalized_kc_pc: kc.iter().map(|v| v.unwrap_or(0.0)).collect(),
                kc_total: aggregate_region_specialties(&kc),
                mean_fss: fss,
                fss_total: covered_mean(&fss_means),
            }
        })
        .collect()
}
