use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::Deserialize;

use super::{
    check_cost, check_institution, malformed, Authorship, Corpus, CorpusError, CostParameters, DomesticCountry,
    Institution, Journal, Professor, Publication, Roster, Year,
};

#[derive(Deserialize)]
struct RawAuthor {
    name: String,
    position: i64,
    affiliations: Vec<String>,
}

#[derive(Deserialize)]
struct RawPublication {
    pub_id: String,
    year: Year,
    #[serde(default)]
    doi: Option<String>,
    journal_id: String,
    subject_categories: Vec<String>,
    citation_count: i64,
    byline: Vec<RawAuthor>,
}

#[derive(Deserialize)]
struct JournalRow {
    journal_id: String,
    year: String,
    impact_factor: String,
    sc_codes: String,
}

#[derive(Deserialize)]
struct InstitutionRow {
    institution_id: String,
    name: String,
    city: String,
    country: String,
    lau_code: String,
}

#[derive(Deserialize)]
struct ProfessorRow {
    professor_id: String,
    full_name: String,
    university_id: String,
    sds_code: String,
    active_years: String,
    rank: String,
}

#[derive(Deserialize)]
struct CostRow {
    sds_code: String,
    w_r: String,
    k: String,
}

fn open(path: &Path) -> Result<File, CorpusError> {
    File::open(path).map_err(|source| CorpusError::Io { path: path.to_owned(), source })
}

/// Reads every row of a headed CSV file, pairing it with its 1-based line.
pub(crate) fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(u64, T)>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    let headers = reader.headers().map_err(|e| malformed(path, 1, "<header>", e.to_string()))?.clone();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(path, line, "<row>", e.to_string())
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let row = record.deserialize(Some(&headers)).map_err(|e| {
            let field = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => {
                    err.field().and_then(|i| headers.get(i as usize)).unwrap_or("<row>")
                }
                _ => "<row>",
            }
            .to_owned();
            malformed(path, line, &field, e.to_string())
        })?;
        rows.push((line, row));
    }
    Ok(rows)
}

pub(crate) fn parse_number<T: std::str::FromStr>(
    path: &Path,
    line: u64,
    field: &str,
    value: &str,
) -> Result<T, CorpusError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| malformed(path, line, field, format!("`{value}`: {e}")))
}

pub(crate) fn split_list(value: &str) -> Vec<String> {
    value.split(';').map(str::trim).filter(|s| !s.is_empty()).map(str::to_owned).collect()
}

fn read_publications(path: &Path) -> Result<Vec<(u64, Publication)>, CorpusError> {
    let reader = BufReader::new(open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line.map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPublication =
            serde_json::from_str(&line).map_err(|e| malformed(path, line_no, "<record>", e.to_string()))?;
        if raw.citation_count < 0 {
            return Err(malformed(
                path,
                line_no,
                "citation_count",
                format!("publication `{}`: {} is negative", raw.pub_id, raw.citation_count),
            ));
        }
        let mut byline = Vec::with_capacity(raw.byline.len());
        for a in raw.byline {
            if a.position < 1 || a.position > u32::MAX as i64 {
                return Err(malformed(
                    path,
                    line_no,
                    "byline.position",
                    format!("publication `{}`: {}", raw.pub_id, a.position),
                ));
            }
            byline.push(Authorship { name: a.name, position: a.position as u32, affiliations: a.affiliations });
        }
        out.push((
            line_no,
            Publication {
                pub_id: raw.pub_id,
                year: raw.year,
                doi: raw.doi.filter(|d| !d.is_empty()),
                journal_id: raw.journal_id,
                subject_categories: raw.subject_categories,
                citation_count: raw.citation_count as u64,
                byline,
            },
        ));
    }
    Ok(out)
}

fn read_journals(path: &Path) -> Result<BTreeMap<String, Journal>, CorpusError> {
    let mut journals: BTreeMap<String, Journal> = BTreeMap::new();
    for (line, row) in read_csv::<JournalRow>(path)? {
        let year: Year = parse_number(path, line, "year", &row.year)?;
        let impact: f64 = parse_number(path, line, "impact_factor", &row.impact_factor)?;
        if !(impact.is_finite() && impact >= 0.0) {
            return Err(malformed(
                path,
                line,
                "impact_factor",
                format!("journal `{}`: {impact} is negative", row.journal_id),
            ));
        }
        let scs = split_list(&row.sc_codes);
        if scs.is_empty() {
            return Err(malformed(
                path,
                line,
                "sc_codes",
                format!("journal `{}` has no subject category", row.journal_id),
            ));
        }
        let entry = journals.entry(row.journal_id.clone()).or_insert_with(|| Journal {
            journal_id: row.journal_id.clone(),
            impact_factors: BTreeMap::new(),
            subject_categories: scs.clone(),
        });
        if entry.subject_categories != scs {
            return Err(malformed(
                path,
                line,
                "sc_codes",
                format!("journal `{}` lists different subject categories across rows", row.journal_id),
            ));
        }
        if entry.impact_factors.insert(year, impact).is_some() {
            return Err(CorpusError::Duplicate {
                path: path.to_owned(),
                kind: "journal year",
                id: format!("{} {year}", row.journal_id),
            });
        }
    }
    Ok(journals)
}

fn read_institutions(path: &Path, domestic: &DomesticCountry) -> Result<BTreeMap<String, Institution>, CorpusError> {
    let mut out = BTreeMap::new();
    for (line, row) in read_csv::<InstitutionRow>(path)? {
        let inst = Institution {
            institution_id: row.institution_id,
            name: row.name,
            city: row.city,
            country: row.country,
            lau_code: Some(row.lau_code).filter(|s| !s.is_empty()),
        };
        check_institution(&inst, domestic, path, line)?;
        let id = inst.institution_id.clone();
        if out.insert(id.clone(), inst).is_some() {
            return Err(CorpusError::Duplicate { path: path.to_owned(), kind: "institution", id });
        }
    }
    Ok(out)
}

/// Loads and validates publications (JSON lines), journals and institutions.
///
/// `domestic` is the analysis country (a name, or a name with aliases):
/// every publication must have at least one affiliation located there.
pub fn load_corpus(
    publications_path: &Path,
    journals_path: &Path,
    institutions_path: &Path,
    domestic: impl Into<DomesticCountry>,
) -> Result<Corpus, CorpusError> {
    let domestic = domestic.into();
    let journals = read_journals(journals_path)?;
    let institutions = read_institutions(institutions_path, &domestic)?;
    let pubs = read_publications(publications_path)?;
    Corpus::assemble(pubs, journals, institutions, domestic, publications_path)
}

/// Loads the professor roster and the per-field cost table. Active years
/// outside `window` are dropped; a professor left with none is an error.
pub fn load_roster(
    roster_path: &Path,
    costs_path: &Path,
    corpus: &Corpus,
    window: (Year, Year),
) -> Result<Roster, CorpusError> {
    let mut costs = BTreeMap::new();
    for (line, row) in read_csv::<CostRow>(costs_path)? {
        let cost = CostParameters {
            salary: parse_number(costs_path, line, "w_r", &row.w_r)?,
            research_capital: parse_number(costs_path, line, "k", &row.k)?,
        };
        check_cost(&row.sds_code, &cost, costs_path, line)?;
        if costs.insert(row.sds_code.clone(), cost).is_some() {
            return Err(CorpusError::Duplicate { path: costs_path.to_owned(), kind: "sds_code", id: row.sds_code });
        }
    }
    let mut professors = Vec::new();
    for (line, row) in read_csv::<ProfessorRow>(roster_path)? {
        let mut years = BTreeSet::new();
        for y in split_list(&row.active_years) {
            years.insert(parse_number::<Year>(roster_path, line, "active_years", &y)?);
        }
        professors.push((
            line,
            Professor {
                professor_id: row.professor_id,
                full_name: row.full_name,
                university_id: row.university_id,
                sds_code: row.sds_code,
                active_years: years,
                rank: row.rank,
            },
        ));
    }
    Roster::assemble(professors, costs, corpus, window, roster_path)
}

/// Writes the publications as canonical JSON lines: ordered by `pub_id`,
/// bylines ordered by position.
pub fn write_publications<W: Write>(corpus: &Corpus, mut out: W) -> std::io::Result<()> {
    for p in corpus.publications() {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_journals<W: Write>(corpus: &Corpus, out: W) -> csv::Result<()> {
    let mut w = crate::format::csv_writer(out, None)?;
    w.write_record(["journal_id", "year", "impact_factor", "sc_codes"])?;
    for j in corpus.journals().values() {
        let scs = j.subject_categories.join(";");
        for (year, impact) in &j.impact_factors {
            w.write_record([j.journal_id.as_str(), &year.to_string(), &impact.to_string(), &scs])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_institutions<W: Write>(corpus: &Corpus, out: W) -> csv::Result<()> {
    let mut w = crate::format::csv_writer(out, None)?;
    w.write_record(["institution_id", "name", "city", "country", "lau_code"])?;
    for i in corpus.institutions().values() {
        w.write_record([i.institution_id.as_str(), &i.name, &i.city, &i.country, i.lau_code.as_deref().unwrap_or("")])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_roster<W: Write>(roster: &Roster, out: W) -> csv::Result<()> {
    let mut w = crate::format::csv_writer(out, None)?;
    w.write_record(["professor_id", "full_name", "university_id", "sds_code", "active_years", "rank"])?;
    for p in roster.professors() {
        let years: Vec<String> = p.active_years.iter().map(Year::to_string).collect();
        w.write_record([
            p.professor_id.as_str(),
            &p.full_name,
            &p.university_id,
            &p.sds_code,
            &years.join(";"),
            &p.rank,
        ])?;
    }
    w.flush()?;
    Ok(())
}
