//! Decision-ready outputs: quadrant classification, scatter and choropleth
//! data, and the tabular reports written by a run.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::SpecialtyConfig;
use crate::corpus::{Corpus, SummaryRow};
use crate::credit::PublicationCredit;
use crate::format::{csv_writer, decimal, flag, optional_decimal, MANIFEST_COMMENT};
use crate::indicators::{ProfessorScores, TerritoryOverview, TerritoryScore, LOW_HEADCOUNT};
use crate::matching::MatchResult;
use crate::normalize::{Baselines, ImpactScore};
use crate::territory::{Level, Location, TerritoryIndex};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown specialty `{0}`")]
    UnknownSpecialty(String),
    #[error("territory `{0}` is not in the gazetteer")]
    UnknownTerritory(String),
    #[error("territory `{code}` is a {found}, expected {expected}")]
    WrongLevel { code: String, found: Level, expected: Level },
    #[error("level `{0}` was not scored in this run")]
    LevelNotScored(Level),
    #[error("value for `{code}` is not finite")]
    NonFinite { code: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum QuadrantLabel {
    UpperRight,
    UpperLeft,
    LowerRight,
    LowerLeft,
}

impl QuadrantLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            QuadrantLabel::UpperRight => "UpperRight",
            QuadrantLabel::UpperLeft => "UpperLeft",
            QuadrantLabel::LowerRight => "LowerRight",
            QuadrantLabel::LowerLeft => "LowerLeft",
        }
    }
}

impl std::fmt::Display for QuadrantLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Places `(x, y)` = (normalized KC_PC, mean normalized FSS) against the
/// national averages. A score of exactly 1 counts as above average.
pub fn classify_quadrant(normalized_kc_pc: f64, mean_normalized_fss: f64) -> QuadrantLabel {
    match (normalized_kc_pc >= 1.0, mean_normalized_fss >= 1.0) {
        (true, true) => QuadrantLabel::UpperRight,
        (false, true) => QuadrantLabel::UpperLeft,
        (true, false) => QuadrantLabel::LowerRight,
        (false, false) => QuadrantLabel::LowerLeft,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

/// Value as printed in every output: six decimals, parsed back for JSON.
fn json_number(value: f64) -> Value {
    json!(decimal(value).parse::<f64>().unwrap_or(0.0))
}

fn json_optional(value: Option<f64>) -> Value {
    value.map_or(Value::Null, json_number)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub code: String,
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub quadrant: QuadrantLabel,
    pub professor_count: usize,
    pub low_headcount_flag: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Excluded {
    pub code: String,
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scatter {
    pub level: Level,
    pub specialty: String,
    pub points: Vec<ScatterPoint>,
    pub excluded: Vec<Excluded>,
}

const NO_STAFF: &str = "no professors";

/// Scatter of one specialty: x = normalized KC_PC, y = mean normalized FSS.
/// Territories without professors go to the excluded list.
pub fn specialty_scatter(scores: &[TerritoryScore], index: &TerritoryIndex) -> Scatter {
    let level = scores.first().map_or(Level::Nuts2, |s| s.level);
    let specialty = scores.first().map_or_else(String::new, |s| s.specialty.clone());
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for s in scores {
        let name = index.get(&s.code).map_or_else(String::new, |n| n.name.clone());
        match s.mean_normalized_fss {
            Some(y) => points.push(ScatterPoint {
                code: s.code.clone(),
                name,
                x: s.normalized_kc_pc,
                y,
                quadrant: classify_quadrant(s.normalized_kc_pc, y),
                professor_count: s.professor_count,
                low_headcount_flag: s.low_headcount_flag,
            }),
            None => excluded.push(Excluded { code: s.code.clone(), name, reason: NO_STAFF.into() }),
        }
    }
    Scatter { level, specialty, points, excluded }
}

/// Scatter over all specialties: x = mean normalized KC_PC over every
/// specialty, y = mean FSS over the specialties the territory covers.
pub fn overall_scatter(overview: &[TerritoryOverview], index: &TerritoryIndex, label: &str) -> Scatter {
    let level = overview.first().map_or(Level::Nuts2, |o| o.level);
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for o in overview {
        let name = index.get(&o.code).map_or_else(String::new, |n| n.name.clone());
        match o.fss_total {
            Some(y) => points.push(ScatterPoint {
                code: o.code.clone(),
                name,
                x: o.kc_total,
                y,
                quadrant: classify_quadrant(o.kc_total, y),
                professor_count: o.professor_count,
                low_headcount_flag: o.professor_count < LOW_HEADCOUNT,
            }),
            None => excluded.push(Excluded { code: o.code.clone(), name, reason: NO_STAFF.into() }),
        }
    }
    Scatter { level, specialty: label.to_owned(), points, excluded }
}

pub fn emit_scatter<W: Write>(
    scatter: &Scatter,
    format: OutputFormat,
    manifest: Option<&str>,
    mut out: W,
) -> Result<(), ReportError> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv_writer(&mut out, manifest)?;
            w.write_record(["code", "name", "x", "y", "quadrant", "professor_count", "low_headcount_flag"])?;
            for p in &scatter.points {
                w.write_record([
                    p.code.as_str(),
                    &p.name,
                    &decimal(p.x),
                    &decimal(p.y),
                    p.quadrant.as_str(),
                    &p.professor_count.to_string(),
                    flag(p.low_headcount_flag),
                ])?;
            }
            w.flush()?;
            drop(w);
            // Excluded territories trail the table as comments so the file
            // stays a plain CSV.
            for e in &scatter.excluded {
                writeln!(out, "# excluded {},{},{}", e.code, e.name, e.reason)?;
            }
        }
        OutputFormat::Json => {
            let doc = json!({
                "manifest_sha256": manifest,
                "level": scatter.level,
                "specialty": scatter.specialty,
                "points": scatter.points.iter().map(|p| json!({
                    "code": p.code,
                    "name": p.name,
                    "x": json_number(p.x),
                    "y": json_number(p.y),
                    "quadrant": p.quadrant,
                    "professor_count": p.professor_count,
                    "low_headcount_flag": p.low_headcount_flag,
                })).collect::<Vec<_>>(),
                "excluded": scatter.excluded,
            });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChoroplethRow {
    pub code: String,
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Choropleth {
    pub level: Level,
    pub metric: String,
    pub rows: Vec<ChoroplethRow>,
}

impl Choropleth {
    /// `(min, max, mean)` of the values, `None` when there are none.
    pub fn legend(&self) -> Option<(f64, f64, f64)> {
        if self.rows.is_empty() {
            return None;
        }
        let min = self.rows.iter().map(|r| r.value).fold(f64::INFINITY, f64::min);
        let max = self.rows.iter().map(|r| r.value).fold(f64::NEG_INFINITY, f64::max);
        let mean = self.rows.iter().map(|r| r.value).sum::<f64>() / self.rows.len() as f64;
        Some((min, max, mean))
    }
}

/// Map data for any per-territory series at `level`, including series
/// supplied by the caller. Rows follow the code order.
pub fn choropleth(
    values: &BTreeMap<String, f64>,
    level: Level,
    metric: &str,
    index: &TerritoryIndex,
) -> Result<Choropleth, ReportError> {
    let mut rows = Vec::with_capacity(values.len());
    for (code, &value) in values {
        let node = index.get(code).ok_or_else(|| ReportError::UnknownTerritory(code.clone()))?;
        if node.level != level {
            return Err(ReportError::WrongLevel { code: code.clone(), found: node.level, expected: level });
        }
        if !value.is_finite() {
            return Err(ReportError::NonFinite { code: code.clone() });
        }
        rows.push(ChoroplethRow { code: code.clone(), name: node.name.clone(), value });
    }
    Ok(Choropleth { level, metric: metric.to_owned(), rows })
}

pub fn emit_choropleth<W: Write>(
    map: &Choropleth,
    format: OutputFormat,
    manifest: Option<&str>,
    mut out: W,
) -> Result<(), ReportError> {
    let legend = map.legend();
    match format {
        OutputFormat::Csv => {
            if let Some(digest) = manifest {
                writeln!(out, "{MANIFEST_COMMENT}{digest}")?;
            }
            writeln!(out, "# level={}", map.level)?;
            writeln!(out, "# metric={}", map.metric)?;
            let (min, max, mean) = legend.map_or((None, None, None), |(a, b, c)| (Some(a), Some(b), Some(c)));
            writeln!(out, "# min={}", optional_decimal(min))?;
            writeln!(out, "# max={}", optional_decimal(max))?;
            writeln!(out, "# mean={}", optional_decimal(mean))?;
            let mut w = csv_writer(&mut out, None)?;
            w.write_record(["code", "name", "value"])?;
            for r in &map.rows {
                w.write_record([r.code.as_str(), &r.name, &decimal(r.value)])?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            let doc = json!({
                "manifest_sha256": manifest,
                "level": map.level,
                "metric": map.metric,
                "min": json_optional(legend.map(|l| l.0)),
                "max": json_optional(legend.map(|l| l.1)),
                "mean": json_optional(legend.map(|l| l.2)),
                "rows": map.rows.iter().map(|r| json!({
                    "code": r.code,
                    "name": r.name,
                    "value": json_number(r.value),
                })).collect::<Vec<_>>(),
            });
            serde_json::to_writer_pretty(&mut out, &doc)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Summary layout: one row per specialty plus the total.
pub fn write_summary<W: Write>(
    rows: &[SummaryRow],
    format: OutputFormat,
    manifest: Option<&str>,
    mut out: W,
) -> Result<(), ReportError> {
    match format {
        OutputFormat::Csv => {
            let mut w = csv_writer(out, manifest)?;
            w.write_record(["specialty", "publications", "citations", "authorships", "nuts3_units", "nuts2_units"])?;
            for r in rows {
                w.write_record([
                    r.specialty.clone(),
                    r.publications.to_string(),
                    r.citations.to_string(),
                    r.authorships.to_string(),
                    r.provinces.to_string(),
                    r.regions.to_string(),
                ])?;
            }
            w.flush()?;
        }
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &json!({ "manifest_sha256": manifest, "rows": rows }))?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// Tables 3 and 4 side by side: per-specialty normalized KC_PC with the
/// all-specialty mean, then per-specialty mean FSS with the covered mean.
pub fn write_overview<W: Write>(
    config: &SpecialtyConfig,
    rows: &[TerritoryOverview],
    index: &TerritoryIndex,
    manifest: Option<&str>,
    out: W,
) -> Result<(), ReportError> {
    let n = config.specialties.len();
    let mut w = csv_writer(out, manifest)?;
    let mut header = vec![
        "territory_code".to_owned(),
        "name".to_owned(),
        "level".to_owned(),
        "population".to_owned(),
        "professor_count".to_owned(),
        "specialties_covered_pct".to_owned(),
    ];
    header.extend(config.specialties.iter().map(|s| format!("kc_pc:{}", s.name)));
    header.push("kc_pc:total".into());
    header.extend(config.specialties.iter().map(|s| format!("fss:{}", s.name)));
    header.push("fss:total".into());
    w.write_record(&header)?;
    for o in rows {
        let covered = if n == 0 { 0.0 } else { 100.0 * o.specialties_covered as f64 / n as f64 };
        let mut record = vec![
            o.code.clone(),
            index.get(&o.code).map_or_else(String::new, |t| t.name.clone()),
            o.level.to_string(),
            o.population.to_string(),
            o.professor_count.to_string(),
            decimal(covered),
        ];
        record.extend(o.normalized_kc_pc.iter().map(|v| decimal(*v)));
        record.push(decimal(o.kc_total));
        record.extend(o.mean_fss.iter().map(|c| optional_decimal(c.map(|c| c.mean))));
        record.push(optional_decimal(o.fss_total));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_professor_scores<W: Write>(
    scores: &ProfessorScores,
    manifest: Option<&str>,
    out: W,
) -> Result<(), ReportError> {
    let mut w = csv_writer(out, manifest)?;
    w.write_record(["professor_id", "sds_code", "raw_fss", "normalized_fss", "lau_code"])?;
    for s in &scores.scores {
        w.write_record([
            s.professor_id.as_str(),
            &s.sds_code,
            &decimal(s.raw_fss),
            &decimal(s.normalized_fss),
            s.lau.as_deref().unwrap_or(""),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_territory_scores<W: Write>(
    scores: &[TerritoryScore],
    manifest: Option<&str>,
    out: W,
) -> Result<(), ReportError> {
    let mut w = csv_writer(out, manifest)?;
    w.write_record([
        "territory_code",
        "level",
        "specialty",
        "kc",
        "kc_pc",
        "normalized_kc_pc",
        "mean_normalized_fss",
        "professor_count",
        "low_headcount_flag",
    ])?;
    for s in scores {
        w.write_record([
            s.code.as_str(),
            s.level.as_str(),
            &s.specialty,
            &decimal(s.kc),
            &decimal(s.kc_pc),
            &decimal(s.normalized_kc_pc),
            &optional_decimal(s.mean_normalized_fss),
            &s.professor_count.to_string(),
            flag(s.low_headcount_flag),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_baselines<W: Write>(baselines: &Baselines, manifest: Option<&str>, out: W) -> Result<(), ReportError> {
    let mut w = csv_writer(out, manifest)?;
    w.write_record([
        "year",
        "sc_code",
        "mean_citations_of_cited",
        "mean_if",
        "cited_count",
        "total_count",
        "degenerate_flag",
    ])?;
    for b in baselines.iter() {
        w.write_record([
            b.year.to_string(),
            b.sc_code.clone(),
            decimal(b.mean_citations_of_cited),
            decimal(b.mean_if),
            b.cited_count.to_string(),
            b.total_count.to_string(),
            flag(b.degenerate).to_owned(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_impact<W: Write>(impacts: &[ImpactScore], manifest: Option<&str>, out: W) -> Result<(), ReportError> {
    let mut w = csv_writer(out, manifest)?;
    w.write_record(["pub_id", "fnc", "fnif", "citation_weight", "c"])?;
    for s in impacts {
        w.write_record([
            s.pub_id.as_str(),
            &decimal(s.fnc),
            &decimal(s.fnif),
            &decimal(s.citation_weight),
            &decimal(s.c),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_credit<W: Write>(
    corpus: &Corpus,
    credit: &[PublicationCredit],
    manifest: Option<&str>,
    out: W,
) -> Result<(), ReportError> {
    let mut w = csv_writer(out, manifest)?;
    w.write_record(["pub_id", "position", "author_weight", "institution_id", "lau_code", "share"])?;
    for (p, c) in corpus.publications().iter().zip(credit) {
        for a in &c.authors {
            for s in &a.splits {
                let lau = match &s.location {
                    Location::Lau(code) => code.as_str(),
                    Location::Foreign => "FOREIGN",
                    Location::Unresolved => "UNRESOLVED",
                };
                w.write_record([
                    p.pub_id.as_str(),
                    &a.position.to_string(),
                    &decimal(a.author_weight),
                    &s.institution_id,
                    lau,
                    &decimal(s.share),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Every byline slot once: assigned, unmatched or ambiguous (candidates
/// joined with `;`).
pub fn write_matches<W: Write>(result: &MatchResult, manifest: Option<&str>, out: W) -> Result<(), ReportError> {
    let mut rows: Vec<(&str, u32, String, &str)> = Vec::new();
    rows.extend(result.assignments.iter().map(|a| (a.pub_id.as_str(), a.position, a.professor_id.clone(), "assigned")));
    rows.extend(result.unmatched.iter().map(|u| (u.pub_id.as_str(), u.position, String::new(), "unmatched")));
    rows.extend(result.ambiguous.iter().map(|a| (a.pub_id.as_str(), a.position, a.candidates.join(";"), "ambiguous")));
    rows.sort();
    let mut w = csv_writer(out, manifest)?;
    w.write_record(["pub_id", "position", "professor_id", "status"])?;
    for (pub_id, position, professor, status) in rows {
        w.write_record([pub_id, &position.to_string(), &professor, status])?;
    }
    w.flush()?;
    Ok(())
}
