//! Domain data model and validated ingestion of the input files.
//!
//! Everything downstream works on a [`Corpus`] and a [`Roster`]; both are
//! immutable once built and every record in them satisfies the invariants
//! checked here.

mod load;
mod summary;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fold::fold;

pub use load::{load_corpus, load_roster, write_institutions, write_journals, write_publications, write_roster};
pub(crate) use load::{parse_number, read_csv, split_list};
pub use summary::{corpus_summary, SummaryRow, TOTAL_ROW};

pub type Year = i32;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: field `{field}`: {message}")]
    Malformed { path: PathBuf, line: u64, field: String, message: String },
    #[error("{path}: unresolved {kind} reference(s): {}", ids.join(", "))]
    Dangling { path: PathBuf, kind: &'static str, ids: Vec<String> },
    #[error("{path}: duplicate {kind} `{id}`")]
    Duplicate { path: PathBuf, kind: &'static str, id: String },
    #[error("publication `{pub_id}` has no address in {country}")]
    ForeignOnly { pub_id: String, country: String },
    #[error("no cost parameters for field `{sds_code}`")]
    MissingCost { sds_code: String },
    #[error("professor `{professor_id}` has no active year within {start}-{end}")]
    NoActiveYears { professor_id: String, start: Year, end: Year },
    #[error("invalid configuration {path}: {message}")]
    Config { path: PathBuf, message: String },
}

/// One author slot in a publication byline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Authorship {
    /// Name as printed in the byline, e.g. `"De Caterina, R"`.
    pub name: String,
    /// 1-based position in the byline.
    pub position: u32,
    /// Institution ids; never empty.
    pub affiliations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Publication {
    pub pub_id: String,
    pub year: Year,
    pub doi: Option<String>,
    pub journal_id: String,
    pub subject_categories: Vec<String>,
    pub citation_count: u64,
    /// Sorted by position; positions are exactly `1..=len`.
    pub byline: Vec<Authorship>,
}

impl Publication {
    pub fn authorship_count(&self) -> usize {
        self.byline.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Journal {
    pub journal_id: String,
    pub impact_factors: BTreeMap<Year, f64>,
    pub subject_categories: Vec<String>,
}

impl Journal {
    pub fn impact_factor(&self, year: Year) -> Option<f64> {
        self.impact_factors.get(&year).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Institution {
    pub institution_id: String,
    pub name: String,
    pub city: String,
    pub country: String,
    /// Present only for domestic institutions. A domestic institution
    /// without one is located from its city.
    pub lau_code: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Professor {
    pub professor_id: String,
    pub full_name: String,
    pub university_id: String,
    pub sds_code: String,
    /// Clipped to the observation window; never empty.
    pub active_years: BTreeSet<Year>,
    pub rank: String,
}

impl Professor {
    /// Years of activity inside the observation window.
    pub fn years_active(&self) -> u32 {
        self.active_years.len() as u32
    }
}

/// Per-field cost of research: average yearly salary and research capital.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParameters {
    pub salary: f64,
    pub research_capital: f64,
}

impl CostParameters {
    /// Yearly research cost of one professor. Half of the salary is
    /// charged to research.
    pub fn research_cost(&self) -> f64 {
        self.salary / 2.0 + self.research_capital
    }

    pub fn scaled(&self, factor: f64) -> Self {
        CostParameters { salary: self.salary * factor, research_capital: self.research_capital * factor }
    }
}

/// The analysis country: a display name plus every accepted spelling,
/// compared after folding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomesticCountry {
    name: String,
    folded: BTreeSet<String>,
}

impl DomesticCountry {
    pub fn new<S: AsRef<str>>(name: &str, aliases: impl IntoIterator<Item = S>) -> Self {
        let mut folded: BTreeSet<String> = aliases.into_iter().map(|a| fold(a.as_ref())).collect();
        folded.insert(fold(name));
        DomesticCountry { name: name.to_owned(), folded }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn contains(&self, country: &str) -> bool {
        self.folded.contains(&fold(country))
    }
}

impl From<&str> for DomesticCountry {
    fn from(name: &str) -> Self {
        DomesticCountry::new::<&str>(name, [])
    }
}

/// Validated publication corpus with its journal and institution tables.
#[derive(Debug, Clone)]
pub struct Corpus {
    publications: Vec<Publication>,
    by_id: HashMap<String, usize>,
    journals: BTreeMap<String, Journal>,
    institutions: BTreeMap<String, Institution>,
    domestic: DomesticCountry,
}

impl Corpus {
    /// Builds a corpus from in-memory records, applying the same checks as
    /// [`load_corpus`]. Publications are reordered by `pub_id`.
    pub fn new(
        publications: Vec<Publication>,
        journals: Vec<Journal>,
        institutions: Vec<Institution>,
        domestic: impl Into<DomesticCountry>,
    ) -> Result<Self, CorpusError> {
        let domestic = domestic.into();
        let source = PathBuf::from("<memory>");
        let mut journal_map = BTreeMap::new();
        for j in journals {
            if j.subject_categories.is_empty() {
                return Err(malformed(
                    &source,
                    0,
                    "sc_codes",
                    format!("journal `{}` has no subject category", j.journal_id),
                ));
            }
            if let Some((year, v)) = j.impact_factors.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
                return Err(malformed(
                    &source,
                    0,
                    "impact_factor",
                    format!("journal `{}` year {year}: {v}", j.journal_id),
                ));
            }
            let id = j.journal_id.clone();
            if journal_map.insert(id.clone(), j).is_some() {
                return Err(CorpusError::Duplicate { path: source, kind: "journal", id });
            }
        }
        let mut inst_map = BTreeMap::new();
        for i in institutions {
            check_institution(&i, &domestic, &source, 0)?;
            let id = i.institution_id.clone();
            if inst_map.insert(id.clone(), i).is_some() {
                return Err(CorpusError::Duplicate { path: source, kind: "institution", id });
            }
        }
        let numbered = publications.into_iter().map(|p| (0, p)).collect();
        Self::assemble(numbered, journal_map, inst_map, domestic, &source)
    }

    /// Shared tail of [`Corpus::new`] and [`load_corpus`]; `pubs` carries the
    /// source line of each record for error reporting.
    fn assemble(
        mut pubs: Vec<(u64, Publication)>,
        journals: BTreeMap<String, Journal>,
        institutions: BTreeMap<String, Institution>,
        domestic: DomesticCountry,
        source: &std::path::Path,
    ) -> Result<Self, CorpusError> {
        let mut missing_journals = BTreeSet::new();
        let mut missing_institutions = BTreeSet::new();
        for (line, p) in &mut pubs {
            check_publication(p, source, *line)?;
            if !journals.contains_key(&p.journal_id) {
                missing_journals.insert(p.journal_id.clone());
            }
            let mut has_domestic = false;
            for a in &p.byline {
                for inst in &a.affiliations {
                    match institutions.get(inst) {
                        Some(i) => has_domestic |= domestic.contains(&i.country),
                        None => {
                            missing_institutions.insert(inst.clone());
                        }
                    }
                }
            }
            if !has_domestic && missing_institutions.is_empty() {
                return Err(CorpusError::ForeignOnly { pub_id: p.pub_id.clone(), country: domestic.name().to_owned() });
            }
        }
        if !missing_journals.is_empty() {
            return Err(CorpusError::Dangling {
                path: source.to_owned(),
                kind: "journal",
                ids: missing_journals.into_iter().collect(),
            });
        }
        if !missing_institutions.is_empty() {
            return Err(CorpusError::Dangling {
                path: source.to_owned(),
                kind: "institution",
                ids: missing_institutions.into_iter().collect(),
            });
        }
        pubs.sort_by(|a, b| a.1.pub_id.cmp(&b.1.pub_id));
        if let Some(w) = pubs.windows(2).find(|w| w[0].1.pub_id == w[1].1.pub_id) {
            return Err(CorpusError::Duplicate { path: source.to_owned(), kind: "pub_id", id: w[1].1.pub_id.clone() });
        }
        let publications: Vec<Publication> = pubs.into_iter().map(|(_, p)| p).collect();
        let by_id = publications.iter().enumerate().map(|(i, p)| (p.pub_id.clone(), i)).collect();
        Ok(Corpus { publications, by_id, journals, institutions, domestic })
    }

    /// Publications ordered by `pub_id`.
    pub fn publications(&self) -> &[Publication] {
        &self.publications
    }

    pub fn publication(&self, pub_id: &str) -> Option<&Publication> {
        self.by_id.get(pub_id).map(|&i| &self.publications[i])
    }

    pub fn publication_index(&self, pub_id: &str) -> Option<usize> {
        self.by_id.get(pub_id).copied()
    }

    pub fn journals(&self) -> &BTreeMap<String, Journal> {
        &self.journals
    }

    pub fn journal(&self, journal_id: &str) -> Option<&Journal> {
        self.journals.get(journal_id)
    }

    pub fn institutions(&self) -> &BTreeMap<String, Institution> {
        &self.institutions
    }

    pub fn institution(&self, institution_id: &str) -> Option<&Institution> {
        self.institutions.get(institution_id)
    }

    pub fn domestic_country(&self) -> &str {
        self.domestic.name()
    }

    pub fn is_domestic(&self, country: &str) -> bool {
        self.domestic.contains(country)
    }

    pub fn authorship_count(&self) -> usize {
        self.publications.iter().map(Publication::authorship_count).sum()
    }

    /// Keeps the publications whose year falls inside `[start, end]` and
    /// returns the number dropped.
    pub fn restrict_to_window(&mut self, start: Year, end: Year) -> usize {
        let before = self.publications.len();
        self.publications.retain(|p| (start..=end).contains(&p.year));
        self.by_id = self.publications.iter().enumerate().map(|(i, p)| (p.pub_id.clone(), i)).collect();
        before - self.publications.len()
    }
}

/// Professors and the cost table, validated against a corpus.
#[derive(Debug, Clone)]
pub struct Roster {
    professors: Vec<Professor>,
    costs: BTreeMap<String, CostParameters>,
}

impl Roster {
    /// Builds a roster from in-memory records. Active years are clipped to
    /// `[start, end]`.
    pub fn new(
        professors: Vec<Professor>,
        costs: BTreeMap<String, CostParameters>,
        corpus: &Corpus,
        window: (Year, Year),
    ) -> Result<Self, CorpusError> {
        let numbered = professors.into_iter().map(|p| (0, p)).collect();
        Self::assemble(numbered, costs, corpus, window, std::path::Path::new("<memory>"))
    }

    fn assemble(
        mut professors: Vec<(u64, Professor)>,
        costs: BTreeMap<String, CostParameters>,
        corpus: &Corpus,
        (start, end): (Year, Year),
        source: &std::path::Path,
    ) -> Result<Self, CorpusError> {
        for (sds, c) in &costs {
            check_cost(sds, c, source, 0)?;
        }
        let mut missing_universities = BTreeSet::new();
        for (_, p) in &mut professors {
            p.active_years.retain(|y| (start..=end).contains(y));
            if p.active_years.is_empty() {
                return Err(CorpusError::NoActiveYears { professor_id: p.professor_id.clone(), start, end });
            }
            if corpus.institution(&p.university_id).is_none() {
                missing_universities.insert(p.university_id.clone());
            }
            if !costs.contains_key(&p.sds_code) {
                return Err(CorpusError::MissingCost { sds_code: p.sds_code.clone() });
            }
        }
        if !missing_universities.is_empty() {
            return Err(CorpusError::Dangling {
                path: source.to_owned(),
                kind: "university",
                ids: missing_universities.into_iter().collect(),
            });
        }
        professors.sort_by(|a, b| a.1.professor_id.cmp(&b.1.professor_id));
        if let Some(w) = professors.windows(2).find(|w| w[0].1.professor_id == w[1].1.professor_id) {
            return Err(CorpusError::Duplicate {
                path: source.to_owned(),
                kind: "professor_id",
                id: w[1].1.professor_id.clone(),
            });
        }
        Ok(Roster { professors: professors.into_iter().map(|(_, p)| p).collect(), costs })
    }

    /// Professors ordered by `professor_id`.
    pub fn professors(&self) -> &[Professor] {
        &self.professors
    }

    pub fn costs(&self) -> &BTreeMap<String, CostParameters> {
        &self.costs
    }

    pub fn cost(&self, sds_code: &str) -> Option<&CostParameters> {
        self.costs.get(sds_code)
    }

    /// Copy with every cost row multiplied by `factor`.
    pub fn with_scaled_costs(&self, factor: f64) -> Roster {
        Roster {
            professors: self.professors.clone(),
            costs: self.costs.iter().map(|(k, c)| (k.clone(), c.scaled(factor))).collect(),
        }
    }
}

fn malformed(path: &std::path::Path, line: u64, field: &str, message: impl Into<String>) -> CorpusError {
    CorpusError::Malformed { path: path.to_owned(), line, field: field.to_owned(), message: message.into() }
}

fn check_publication(p: &mut Publication, path: &std::path::Path, line: u64) -> Result<(), CorpusError> {
    if p.pub_id.trim().is_empty() {
        return Err(malformed(path, line, "pub_id", "empty"));
    }
    if p.subject_categories.is_empty() {
        return Err(malformed(path, line, "subject_categories", format!("publication `{}` has none", p.pub_id)));
    }
    if p.byline.is_empty() {
        return Err(malformed(path, line, "byline", format!("publication `{}` has no authors", p.pub_id)));
    }
    p.byline.sort_by_key(|a| a.position);
    for (i, a) in p.byline.iter().enumerate() {
        if a.position as usize != i + 1 {
            return Err(malformed(
                path,
                line,
                "byline.position",
                format!("publication `{}`: positions must be 1..={} without gaps or repeats", p.pub_id, p.byline.len()),
            ));
        }
        if a.affiliations.is_empty() {
            return Err(malformed(
                path,
                line,
                "byline.affiliations",
                format!("publication `{}` position {} has no affiliation", p.pub_id, a.position),
            ));
        }
    }
    Ok(())
}

fn check_institution(
    i: &Institution,
    domestic: &DomesticCountry,
    path: &std::path::Path,
    line: u64,
) -> Result<(), CorpusError> {
    if i.institution_id.trim().is_empty() {
        return Err(malformed(path, line, "institution_id", "empty"));
    }
    if i.lau_code.is_some() && !domestic.contains(&i.country) {
        return Err(malformed(
            path,
            line,
            "lau_code",
            format!("institution `{}` in {} cannot carry a {} LAU code", i.institution_id, i.country, domestic.name()),
        ));
    }
    Ok(())
}

fn check_cost(sds: &str, c: &CostParameters, path: &std::path::Path, line: u64) -> Result<(), CorpusError> {
    if !(c.salary.is_finite() && c.salary > 0.0) {
        return Err(malformed(path, line, "w_r", format!("field `{sds}`: salary must be positive, got {}", c.salary)));
    }
    if !(c.research_capital.is_finite() && c.research_capital >= 0.0) {
        return Err(malformed(
            path,
            line,
            "k",
            format!("field `{sds}`: research capital must be non-negative, got {}", c.research_capital),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn inst(id: &str, city: &str, country: &str, lau: Option<&str>) -> Institution {
        Institution {
            institution_id: id.into(),
            name: format!("Institute {id}"),
            city: city.into(),
            country: country.into(),
            lau_code: lau.map(Into::into),
        }
    }

    fn journal(id: &str) -> Journal {
        Journal {
            journal_id: id.into(),
            impact_factors: [(2016, 2.0)].into_iter().collect(),
            subject_categories: vec!["VIR".into()],
        }
    }

    fn publication(id: &str, journal: &str, affs: &[&[&str]]) -> Publication {
        Publication {
            pub_id: id.into(),
            year: 2016,
            doi: None,
            journal_id: journal.into(),
            subject_categories: vec!["VIR".into()],
            citation_count: 3,
            byline: affs
                .iter()
                .enumerate()
                .map(|(i, a)| Authorship {
                    name: format!("Author{i}, A"),
                    position: i as u32 + 1,
                    affiliations: a.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn fully_foreign_publication_is_rejected() {
        let err = Corpus::new(
            vec![publication("P1", "J1", &[&["F1"]])],
            vec![journal("J1")],
            vec![inst("F1", "Lyon", "France", None)],
            "Italy",
        )
        .unwrap_err();
        assert!(matches!(err, CorpusError::ForeignOnly { ref pub_id, .. } if pub_id == "P1"));
    }

    #[test]
    fn dangling_institution_is_listed() {
        let err = Corpus::new(
            vec![publication("P1", "J1", &[&["U1", "U9"]])],
            vec![journal("J1")],
            vec![inst("U1", "Rome", "Italy", Some("L1"))],
            "Italy",
        )
        .unwrap_err();
        match err {
            CorpusError::Dangling { kind, ids, .. } => {
                assert_eq!(kind, "institution");
                assert_eq!(ids, vec!["U9".to_string()]);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn byline_positions_must_be_contiguous() {
        let mut p = publication("P1", "J1", &[&["U1"], &["U1"]]);
        p.byline[1].position = 3;
        let err =
            Corpus::new(vec![p], vec![journal("J1")], vec![inst("U1", "Rome", "Italy", None)], "Italy").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { ref field, .. } if field == "byline.position"));
    }

    #[test]
    fn byline_is_sorted_by_position() {
        let mut p = publication("P1", "J1", &[&["U1"], &["U2"]]);
        p.byline.swap(0, 1);
        let c = Corpus::new(
            vec![p],
            vec![journal("J1")],
            vec![inst("U1", "Rome", "Italy", None), inst("U2", "Milan", "Italy", None)],
            "Italy",
        )
        .unwrap();
        let positions: Vec<u32> = c.publications()[0].byline.iter().map(|a| a.position).collect();
        assert_eq!(positions, vec![1, 2]);
    }

    #[test]
    fn foreign_institution_cannot_carry_lau() {
        let err = Corpus::new(vec![], vec![], vec![inst("F1", "Lyon", "France", Some("L1"))], "Italy").unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { ref field, .. } if field == "lau_code"));
    }

    #[test]
    fn window_restriction_drops_outside_years() {
        let mut p2 = publication("P2", "J1", &[&["U1"]]);
        p2.year = 2013;
        let mut c = Corpus::new(
            vec![publication("P1", "J1", &[&["U1"]]), p2],
            vec![journal("J1")],
            vec![inst("U1", "Rome", "Italy", None)],
            "Italy",
        )
        .unwrap();
        assert_eq!(c.restrict_to_window(2014, 2018), 1);
        assert!(c.publication("P2").is_none());
        assert_eq!(c.publication_index("P1"), Some(0));
    }

    #[test]
    fn research_cost_halves_salary() {
        let c = CostParameters { salary: 100.0, research_capital: 20.0 };
        assert_eq!(c.research_cost(), 70.0);
    }
}
