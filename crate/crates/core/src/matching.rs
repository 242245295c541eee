//! Linking byline authorships to roster professors, and grading the links
//! against a gold standard.
//!
//! The matcher is a small deterministic rule engine: folded surname
//! equality, a given-name policy, an optional university constraint and an
//! explicit policy for ambiguous cases.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{parse_number, read_csv, Corpus, CorpusError, Professor, Publication, Roster};
use crate::fold::fold;

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("publication `{pub_id}` position {position} matches several professors: {}", candidates.join(", "))]
    Ambiguous { pub_id: String, position: u32, candidates: Vec<String> },
    #[error("gold standard refers to unknown publication `{pub_id}`")]
    UnknownGoldPublication { pub_id: String },
    #[error(transparent)]
    Input(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamePolicy {
    /// Surname and full given names must agree after folding.
    ExactFolded,
    /// Surname must agree; the byline initials must be a prefix of the
    /// professor's initials.
    SurnameInitials,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmbiguityPolicy {
    RejectAmbiguous,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchRuleConfig {
    pub require_university_match: bool,
    pub name_policy: NamePolicy,
    pub ambiguity_policy: AmbiguityPolicy,
}

impl Default for MatchRuleConfig {
    fn default() -> Self {
        MatchRuleConfig {
            require_university_match: true,
            name_policy: NamePolicy::SurnameInitials,
            ambiguity_policy: AmbiguityPolicy::RejectAmbiguous,
        }
    }
}

/// A parsed person name: folded surname tokens and given-name tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
struct PersonName {
    surname: Vec<String>,
    given: Vec<String>,
}

impl PersonName {
    /// `"Surname, Given"` form, as printed in bylines. Without a comma the
    /// last token is taken as the surname.
    fn parse(raw: &str) -> Self {
        match raw.split_once(',') {
            Some((surname, given)) => PersonName { surname: tokens(surname), given: tokens(given) },
            None => {
                let mut t = tokens(raw);
                let surname = t.pop().into_iter().collect();
                PersonName { surname, given: t }
            }
        }
    }

    /// Initials of the given names. A byline token such as `MA` (no
    /// separator) stands for two initials.
    fn initials(&self, compact_tokens_are_initials: bool) -> String {
        self.given
            .iter()
            .flat_map(|g| {
                if compact_tokens_are_initials && g.chars().count() <= 3 {
                    g.chars().collect::<Vec<_>>()
                } else {
                    g.chars().next().into_iter().collect()
                }
            })
            .collect()
    }
}

fn tokens(s: &str) -> Vec<String> {
    fold(s).split(' ').filter(|t| !t.is_empty()).map(str::to_owned).collect()
}

/// Roster professor name. `"Surname, Given"` is unambiguous; otherwise any
/// split of the tokens into leading given names and a trailing surname is
/// a candidate, so "Raffaele De Caterina" can match surname "De Caterina".
fn professor_name_variants(full_name: &str) -> Vec<PersonName> {
    if full_name.contains(',') {
        return vec![PersonName::parse(full_name)];
    }
    let t = tokens(full_name);
    (1..t.len().max(1)).map(|split| PersonName { given: t[..split].to_vec(), surname: t[split..].to_vec() }).collect()
}

fn name_matches(byline: &PersonName, professor: &PersonName, policy: NamePolicy) -> bool {
    if byline.surname.is_empty() || byline.surname != professor.surname {
        return false;
    }
    match policy {
        NamePolicy::ExactFolded => byline.given == professor.given,
        NamePolicy::SurnameInitials => {
            let b = byline.initials(true);
            let p = professor.initials(false);
            !b.is_empty() && p.starts_with(&b)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub pub_id: String,
    pub position: u32,
    pub professor_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BylineRef {
    pub pub_id: String,
    pub position: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AmbiguousMatch {
    pub pub_id: String,
    pub position: u32,
    pub candidates: Vec<String>,
}

/// Outcome of matching. Every byline slot lands in exactly one list; all
/// lists are ordered by (pub_id, position).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MatchResult {
    pub assignments: Vec<Assignment>,
    pub unmatched: Vec<BylineRef>,
    pub ambiguous: Vec<AmbiguousMatch>,
}

/// Roster lookup by the last folded surname token.
struct RosterIndex<'a> {
    by_last_surname_token: HashMap<String, Vec<(usize, PersonName)>>,
    professors: &'a [Professor],
}

impl<'a> RosterIndex<'a> {
    fn new(roster: &'a Roster) -> Self {
        let mut by_last_surname_token: HashMap<String, Vec<(usize, PersonName)>> = HashMap::new();
        for (i, p) in roster.professors().iter().enumerate() {
            for variant in professor_name_variants(&p.full_name) {
                if let Some(last) = variant.surname.last() {
                    by_last_surname_token.entry(last.clone()).or_default().push((i, variant));
                }
            }
        }
        RosterIndex { by_last_surname_token, professors: roster.professors() }
    }

    fn candidates(&self, name: &PersonName, affiliations: &[String], rules: &MatchRuleConfig) -> Vec<&'a Professor> {
        let Some(last) = name.surname.last() else {
            return Vec::new();
        };
        let mut hits: BTreeSet<usize> = BTreeSet::new();
        for (i, variant) in self.by_last_surname_token.get(last).into_iter().flatten() {
            if !name_matches(name, variant, rules.name_policy) {
                continue;
            }
            let professor = &self.professors[*i];
            if rules.require_university_match && !affiliations.contains(&professor.university_id) {
                continue;
            }
            hits.insert(*i);
        }
        hits.into_iter().map(|i| &self.professors[i]).collect()
    }
}

enum SlotOutcome {
    Assigned(Assignment),
    Unmatched(BylineRef),
    Ambiguous(AmbiguousMatch),
}

fn match_publication(p: &Publication, index: &RosterIndex<'_>, rules: &MatchRuleConfig) -> Vec<SlotOutcome> {
    p.byline
        .iter()
        .map(|a| {
            let name = PersonName::parse(&a.name);
            let candidates = index.candidates(&name, &a.affiliations, rules);
            match candidates.as_slice() {
                [] => SlotOutcome::Unmatched(BylineRef { pub_id: p.pub_id.clone(), position: a.position }),
                [one] => SlotOutcome::Assigned(Assignment {
                    pub_id: p.pub_id.clone(),
                    position: a.position,
                    professor_id: one.professor_id.clone(),
                }),
                many => SlotOutcome::Ambiguous(AmbiguousMatch {
                    pub_id: p.pub_id.clone(),
                    position: a.position,
                    candidates: many.iter().map(|p| p.professor_id.clone()).collect(),
                }),
            }
        })
        .collect()
}

/// Matches every byline slot of the corpus against the roster.
pub fn match_authorships(corpus: &Corpus, roster: &Roster, rules: &MatchRuleConfig) -> Result<MatchResult, MatchError> {
    let index = RosterIndex::new(roster);
    let per_pub: Vec<Vec<SlotOutcome>> =
        corpus.publications().par_iter().map(|p| match_publication(p, &index, rules)).collect();
    let mut result = MatchResult::default();
    for outcome in per_pub.into_iter().flatten() {
        match outcome {
            SlotOutcome::Assigned(a) => result.assignments.push(a),
            SlotOutcome::Unmatched(u) => result.unmatched.push(u),
            SlotOutcome::Ambiguous(amb) => {
                if rules.ambiguity_policy == AmbiguityPolicy::Error {
                    return Err(MatchError::Ambiguous {
                        pub_id: amb.pub_id,
                        position: amb.position,
                        candidates: amb.candidates,
                    });
                }
                result.ambiguous.push(amb);
            }
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchQuality {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

impl MatchQuality {
    /// Precision and recall are 1 when their denominator is 0; F is the
    /// harmonic mean (1 when there is nothing to find and nothing found).
    pub fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
        // 2PR/(P+R) written on the counts, which avoids rounding the ratios twice.
        let f_measure = if 2 * tp + fp + fn_ == 0 { 1.0 } else { (2 * tp) as f64 / (2 * tp + fp + fn_) as f64 };
        MatchQuality { precision, recall, f_measure, tp, fp, fn_ }
    }
}

/// Set comparison of assignment triples against the gold standard.
pub fn evaluate_matching(
    result: &MatchResult,
    gold: &[Assignment],
    corpus: &Corpus,
) -> Result<MatchQuality, MatchError> {
    if let Some(g) = gold.iter().find(|g| corpus.publication(&g.pub_id).is_none()) {
        return Err(MatchError::UnknownGoldPublication { pub_id: g.pub_id.clone() });
    }
    let predicted: HashSet<&Assignment> = result.assignments.iter().collect();
    let truth: HashSet<&Assignment> = gold.iter().collect();
    let tp = predicted.intersection(&truth).count() as u64;
    let fp = predicted.len() as u64 - tp;
    let fn_ = truth.len() as u64 - tp;
    Ok(MatchQuality::from_counts(tp, fp, fn_))
}

#[derive(Deserialize)]
struct GoldRow {
    pub_id: String,
    position: String,
    professor_id: String,
}

/// Reads `gold.csv` (`pub_id, position, professor_id`).
pub fn load_gold(path: &Path) -> Result<Vec<Assignment>, CorpusError> {
    let mut out = Vec::new();
    for (line, row) in read_csv::<GoldRow>(path)? {
        out.push(Assignment {
            pub_id: row.pub_id,
            position: parse_number(path, line, "position", &row.position)?,
            professor_id: row.professor_id,
        });
    }
    Ok(out)
}

/// Matched professor slots per professor id, each as (publication index,
/// position), ordered by publication then position.
pub fn assignments_by_professor(result: &MatchResult, corpus: &Corpus) -> BTreeMap<String, Vec<(usize, u32)>> {
    let mut out: BTreeMap<String, Vec<(usize, u32)>> = BTreeMap::new();
    for a in &result.assignments {
        if let Some(i) = corpus.publication_index(&a.pub_id) {
            out.entry(a.professor_id.clone()).or_default().push((i, a.position));
        }
    }
    for v in out.values_mut() {
        v.sort_unstable();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Authorship, CostParameters, Institution, Journal};
    use proptest::prelude::*;

    fn corpus(bylines: &[(&str, &[(&str, &[&str])])]) -> Corpus {
        let pubs = bylines
            .iter()
            .map(|(id, authors)| Publication {
                pub_id: id.to_string(),
                year: 2016,
                doi: None,
                journal_id: "J1".into(),
                subject_categories: vec!["VIR".into()],
                citation_count: 1,
                byline: authors
                    .iter()
                    .enumerate()
                    .map(|(i, (name, affs))| Authorship {
                        name: name.to_string(),
                        position: i as u32 + 1,
                        affiliations: affs.iter().map(|s| s.to_string()).collect(),
                    })
                    .collect(),
            })
            .collect();
        let insts = ["U1", "U2"]
            .iter()
            .map(|id| Institution {
                institution_id: id.to_string(),
                name: id.to_string(),
                city: "Rome".into(),
                country: "Italy".into(),
                lau_code: None,
            })
            .collect();
        let journal = Journal {
            journal_id: "J1".into(),
            impact_factors: [(2016, 1.0)].into_iter().collect(),
            subject_categories: vec!["VIR".into()],
        };
        Corpus::new(pubs, vec![journal], insts, "Italy").unwrap()
    }

    fn roster(corpus: &Corpus, profs: &[(&str, &str, &str)]) -> Roster {
        let professors = profs
            .iter()
            .map(|(id, name, uni)| Professor {
                professor_id: id.to_string(),
                full_name: name.to_string(),
                university_id: uni.to_string(),
                sds_code: "MED/07".into(),
                active_years: [2016].into_iter().collect(),
                rank: "full".into(),
            })
            .collect();
        let costs =
            [("MED/07".to_string(), CostParameters { salary: 100.0, research_capital: 20.0 })].into_iter().collect();
        Roster::new(professors, costs, corpus, (2014, 2018)).unwrap()
    }

    #[test]
    fn unique_candidate_is_assigned() {
        let c = corpus(&[("P1", &[("Rossi, M", &["U1"])])]);
        let r = roster(&c, &[("A1", "Mario Rossi", "U1")]);
        let m = match_authorships(&c, &r, &MatchRuleConfig::default()).unwrap();
        assert_eq!(m.assignments, vec![Assignment { pub_id: "P1".into(), position: 1, professor_id: "A1".into() }]);
        assert!(m.unmatched.is_empty() && m.ambiguous.is_empty());
    }

    #[test]
    fn homonyms_are_ambiguous() {
        let c = corpus(&[("P1", &[("Rossi, M", &["U1"])])]);
        let r = roster(&c, &[("A1", "Maria Rossi", "U1"), ("A2", "Marco Rossi", "U1")]);
        let m = match_authorships(&c, &r, &MatchRuleConfig::default()).unwrap();
        assert!(m.assignments.is_empty());
        assert_eq!(m.ambiguous.len(), 1);
        assert_eq!(m.ambiguous[0].candidates, vec!["A1".to_string(), "A2".to_string()]);

        let strict = MatchRuleConfig { ambiguity_policy: AmbiguityPolicy::Error, ..MatchRuleConfig::default() };
        assert!(
            matches!(match_authorships(&c, &r, &strict), Err(MatchError::Ambiguous { ref candidates, .. }) if candidates.len() == 2)
        );
    }

    #[test]
    fn university_constraint_excludes_candidate() {
        let c = corpus(&[("P1", &[("Rossi, M", &["U1"])])]);
        let r = roster(&c, &[("A1", "Mario Rossi", "U2")]);
        let m = match_authorships(&c, &r, &MatchRuleConfig::default()).unwrap();
        assert!(m.assignments.is_empty());
        assert_eq!(m.unmatched, vec![BylineRef { pub_id: "P1".into(), position: 1 }]);

        let loose = MatchRuleConfig { require_university_match: false, ..MatchRuleConfig::default() };
        assert_eq!(match_authorships(&c, &r, &loose).unwrap().assignments.len(), 1);
    }

    #[test]
    fn name_rules() {
        let byline = PersonName::parse("De Caterina, R");
        let variants = professor_name_variants("Raffaele De Caterina");
        assert!(variants.iter().any(|v| name_matches(&byline, v, NamePolicy::SurnameInitials)));
        let comma = professor_name_variants("De Caterina, Raffaele");
        assert!(name_matches(&byline, &comma[0], NamePolicy::SurnameInitials));

        // Diacritics and case fold away.
        let accented = PersonName::parse("NICOLÒ, g");
        assert!(name_matches(&accented, &PersonName::parse("Nicolo, Giulia"), NamePolicy::SurnameInitials));

        // Byline initials must be a prefix of the professor's initials.
        let two = PersonName::parse("Rossi, MA");
        assert!(name_matches(&two, &PersonName::parse("Rossi, Mario Alberto"), NamePolicy::SurnameInitials));
        assert!(!name_matches(&two, &PersonName::parse("Rossi, Mario"), NamePolicy::SurnameInitials));
        assert!(name_matches(
            &PersonName::parse("Rossi, M"),
            &PersonName::parse("Rossi, Mario Alberto"),
            NamePolicy::SurnameInitials
        ));

        let full = PersonName::parse("Rossi, Mario");
        assert!(name_matches(&full, &PersonName::parse("Rossi, Mario"), NamePolicy::ExactFolded));
        assert!(!name_matches(
            &PersonName::parse("Rossi, M"),
            &PersonName::parse("Rossi, Mario"),
            NamePolicy::ExactFolded
        ));
    }

    #[test]
    fn quality_arithmetic() {
        let q = MatchQuality::from_counts(8, 2, 2);
        assert_eq!((q.precision, q.recall, q.f_measure), (0.8, 0.8, 0.8));
        let perfect = MatchQuality::from_counts(5, 0, 0);
        assert_eq!((perfect.precision, perfect.recall, perfect.f_measure), (1.0, 1.0, 1.0));
        let empty = MatchQuality::from_counts(0, 0, 3);
        assert_eq!((empty.precision, empty.recall, empty.f_measure), (1.0, 0.0, 0.0));
    }

    #[test]
    fn evaluation_against_gold() {
        let c = corpus(&[("P1", &[("Rossi, M", &["U1"]), ("Bianchi, L", &["U1"])])]);
        let r = roster(&c, &[("A1", "Mario Rossi", "U1")]);
        let m = match_authorships(&c, &r, &MatchRuleConfig::default()).unwrap();
        let gold = m.assignments.clone();
        let q = evaluate_matching(&m, &gold, &c).unwrap();
        assert_eq!(q.f_measure, 1.0);

        let empty = MatchResult::default();
        let q = evaluate_matching(&empty, &gold, &c).unwrap();
        assert_eq!((q.precision, q.recall, q.f_measure), (1.0, 0.0, 0.0));

        let bad_gold = vec![Assignment { pub_id: "P404".into(), position: 1, professor_id: "A1".into() }];
        assert!(matches!(evaluate_matching(&m, &bad_gold, &c), Err(MatchError::UnknownGoldPublication { .. })));
    }

    fn triple() -> impl Strategy<Value = Assignment> {
        (0u8..6, 1u32..4, 0u8..4).prop_map(|(p, pos, prof)| Assignment {
            pub_id: format!("P{p}"),
            position: pos,
            professor_id: format!("A{prof}"),
        })
    }

    proptest! {
        #[test]
        fn quality_is_order_free_and_harmonic(
            predicted in proptest::collection::vec(triple(), 0..20),
            gold in proptest::collection::vec(triple(), 0..20),
        ) {
            let c = corpus(&[
                ("P0", &[("X, Y", &["U1"])]), ("P1", &[("X, Y", &["U1"])]), ("P2", &[("X, Y", &["U1"])]),
                ("P3", &[("X, Y", &["U1"])]), ("P4", &[("X, Y", &["U1"])]), ("P5", &[("X, Y", &["U1"])]),
            ]);
            let mut predicted = predicted;
            predicted.sort();
            predicted.dedup();
            let result = MatchResult { assignments: predicted.clone(), ..Default::default() };
            let q = evaluate_matching(&result, &gold, &c).unwrap();
            let mut reversed = predicted;
            reversed.reverse();
            let q2 = evaluate_matching(&MatchResult { assignments: reversed, ..Default::default() }, &gold, &c).unwrap();
            prop_assert_eq!(q, q2);
            prop_assert!((0.0..=1.0).contains(&q.f_measure));
            if q.precision + q.recall > 0.0 {
                let h = 2.0 * q.precision * q.recall / (q.precision + q.recall);
                prop_assert!((q.f_measure - h).abs() < 1e-15);
            }
            prop_assert!(q.f_measure <= q.precision.max(q.recall) + 1e-15);
        }
    }
}
