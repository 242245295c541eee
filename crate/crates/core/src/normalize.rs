//! Field normalization of citations and impact factors, and their weighted
//! combination into a single impact score per publication.
//!
//! Baselines are built from the corpus itself, one cell per (year, subject
//! category). The citation baseline averages only cited publications.
//! Publications listed under several subject categories take the
//! arithmetic mean of their per-category ratios, and likewise the mean of
//! the per-category weights.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{parse_number, read_csv, Corpus, CorpusError, Journal, Publication, Year};

#[derive(Debug, Error, PartialEq)]
pub enum NormalizeError {
    #[error("no baseline for year {year}, subject category `{sc_code}`")]
    MissingBaseline { year: Year, sc_code: String },
    #[error("journal `{journal_id}` has no impact factor for {year}")]
    MissingImpactFactor { journal_id: String, year: Year },
    #[error("unknown journal `{journal_id}`")]
    UnknownJournal { journal_id: String },
    #[error("no citation weight for year {year}, subject category `{sc_code}` (pass a default weight to fall back)")]
    MissingWeight { year: Year, sc_code: String },
    #[error("citation weight {value} is outside [0, 1]")]
    WeightOutOfRange { value: f64 },
}

/// Baseline statistics for one (year, subject category) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizationBaseline {
    pub year: Year,
    pub sc_code: String,
    /// Sum of citations over the cell (uncited publications add nothing).
    pub citation_sum: u64,
    pub cited_count: u64,
    pub total_count: u64,
    /// Mean citations over cited publications; 0 in a degenerate cell.
    pub mean_citations_of_cited: f64,
    /// Mean impact factor over the cell's publications, each publication
    /// contributing its journal's IF for the publication year.
    pub mean_if: f64,
    pub if_count: u64,
    /// No publication in the cell is cited.
    pub degenerate: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Baselines {
    cells: BTreeMap<(Year, String), NormalizationBaseline>,
}

impl Baselines {
    pub fn get(&self, year: Year, sc_code: &str) -> Option<&NormalizationBaseline> {
        self.cells.get(&(year, sc_code.to_owned()))
    }

    /// Cells ordered by (year, subject category).
    pub fn iter(&self) -> impl Iterator<Item = &NormalizationBaseline> {
        self.cells.values()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn degenerate(&self) -> impl Iterator<Item = &NormalizationBaseline> {
        self.cells.values().filter(|c| c.degenerate)
    }
}

/// Builds one baseline cell per (year, subject category) present in the
/// corpus. Publications whose journal lacks an IF for their year are left
/// out of the IF mean only.
pub fn compute_baselines(corpus: &Corpus) -> Baselines {
    struct Acc {
        citation_sum: u64,
        cited: u64,
        total: u64,
        if_sum: f64,
        if_count: u64,
    }
    let mut acc: BTreeMap<(Year, String), Acc> = BTreeMap::new();
    // Publications are ordered by pub_id, so the float IF sums are
    // independent of input row order.
    for p in corpus.publications() {
        let impact = corpus.journal(&p.journal_id).and_then(|j| j.impact_factor(p.year));
        for sc in &p.subject_categories {
            let a = acc.entry((p.year, sc.clone())).or_insert(Acc {
                citation_sum: 0,
                cited: 0,
                total: 0,
                if_sum: 0.0,
                if_count: 0,
            });
            a.total += 1;
            if p.citation_count > 0 {
                a.cited += 1;
                a.citation_sum += p.citation_count;
            }
            if let Some(v) = impact {
                a.if_sum += v;
                a.if_count += 1;
            }
        }
    }
    let cells = acc
        .into_iter()
        .map(|((year, sc_code), a)| {
            let degenerate = a.cited == 0;
            let cell = NormalizationBaseline {
                year,
                sc_code: sc_code.clone(),
                citation_sum: a.citation_sum,
                cited_count: a.cited,
                total_count: a.total,
                mean_citations_of_cited: if degenerate { 0.0 } else { a.citation_sum as f64 / a.cited as f64 },
                mean_if: if a.if_count == 0 { 0.0 } else { a.if_sum / a.if_count as f64 },
                if_count: a.if_count,
                degenerate,
            };
            ((year, sc_code), cell)
        })
        .collect();
    Baselines { cells }
}

fn cell<'a>(baselines: &'a Baselines, year: Year, sc_code: &str) -> Result<&'a NormalizationBaseline, NormalizeError> {
    baselines.get(year, sc_code).ok_or_else(|| NormalizeError::MissingBaseline { year, sc_code: sc_code.to_owned() })
}

fn mean(values: impl ExactSizeIterator<Item = f64>) -> f64 {
    let n = values.len();
    values.sum::<f64>() / n as f64
}

/// Citations divided by the mean citations of the cited publications of
/// the same year and subject category.
///
/// The ratio is evaluated as `(citations × cited_count) / citation_sum` on
/// exact integers, so scaling every count in a cell by the same integer
/// leaves it bit-identical.
pub fn field_normalized_citations(publication: &Publication, baselines: &Baselines) -> Result<f64, NormalizeError> {
    let mut ratios = Vec::with_capacity(publication.subject_categories.len());
    for sc in &publication.subject_categories {
        let b = cell(baselines, publication.year, sc)?;
        let ratio = if publication.citation_count == 0 || b.degenerate {
            0.0
        } else {
            let numerator = publication.citation_count as u128 * b.cited_count as u128;
            numerator as f64 / b.citation_sum as f64
        };
        ratios.push(ratio);
    }
    Ok(mean(ratios.into_iter()))
}

/// Journal IF at the publication year divided by the cell's mean IF.
pub fn field_normalized_if(
    publication: &Publication,
    journal: &Journal,
    baselines: &Baselines,
) -> Result<f64, NormalizeError> {
    let impact = journal.impact_factor(publication.year).ok_or_else(|| NormalizeError::MissingImpactFactor {
        journal_id: journal.journal_id.clone(),
        year: publication.year,
    })?;
    let mut ratios = Vec::with_capacity(publication.subject_categories.len());
    for sc in &publication.subject_categories {
        let b = cell(baselines, publication.year, sc)?;
        ratios.push(if b.mean_if > 0.0 { impact / b.mean_if } else { 0.0 });
    }
    Ok(mean(ratios.into_iter()))
}

/// `weight × fnc + (1 − weight) × fnif`.
pub fn combined_impact(fnc: f64, fnif: f64, citation_weight: f64) -> Result<f64, NormalizeError> {
    if !(0.0..=1.0).contains(&citation_weight) {
        return Err(NormalizeError::WeightOutOfRange { value: citation_weight });
    }
    Ok(citation_weight * fnc + (1.0 - citation_weight) * fnif)
}

/// Citation weights per (year, subject category), with an optional
/// fallback for missing cells.
#[derive(Debug, Clone, Default)]
pub struct WeightTable {
    entries: BTreeMap<(Year, String), f64>,
    fallback: Option<f64>,
}

#[derive(Deserialize)]
struct WeightRow {
    year: String,
    sc_code: String,
    citation_weight: String,
}

impl WeightTable {
    pub fn new(entries: BTreeMap<(Year, String), f64>) -> Result<Self, NormalizeError> {
        if let Some(&value) = entries.values().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(NormalizeError::WeightOutOfRange { value });
        }
        Ok(WeightTable { entries, fallback: None })
    }

    /// Weight 0.5 for every cell. For fixtures and smoke runs only; it
    /// carries no bibliometric meaning.
    pub fn neutral() -> Self {
        WeightTable { entries: BTreeMap::new(), fallback: Some(0.5) }
    }

    pub fn with_fallback(mut self, weight: Option<f64>) -> Result<Self, NormalizeError> {
        if let Some(value) = weight.filter(|w| !(0.0..=1.0).contains(w)) {
            return Err(NormalizeError::WeightOutOfRange { value });
        }
        self.fallback = weight;
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let mut entries = BTreeMap::new();
        for (line, row) in read_csv::<WeightRow>(path)? {
            let year: Year = parse_number(path, line, "year", &row.year)?;
            let w: f64 = parse_number(path, line, "citation_weight", &row.citation_weight)?;
            if !(0.0..=1.0).contains(&w) {
                return Err(CorpusError::Malformed {
                    path: path.to_owned(),
                    line,
                    field: "citation_weight".into(),
                    message: format!("{w} is outside [0, 1]"),
                });
            }
            if entries.insert((year, row.sc_code.clone()), w).is_some() {
                return Err(CorpusError::Duplicate {
                    path: path.to_owned(),
                    kind: "weight cell",
                    id: format!("{year} {}", row.sc_code),
                });
            }
        }
        Ok(WeightTable { entries, fallback: None })
    }

    pub fn weight(&self, year: Year, sc_code: &str) -> Result<f64, NormalizeError> {
        self.entries
            .get(&(year, sc_code.to_owned()))
            .copied()
            .or(self.fallback)
            .ok_or_else(|| NormalizeError::MissingWeight { year, sc_code: sc_code.to_owned() })
    }

    /// Mean of the per-category weights of a publication.
    pub fn weight_for(&self, publication: &Publication) -> Result<f64, NormalizeError> {
        let mut ws = Vec::with_capacity(publication.subject_categories.len());
        for sc in &publication.subject_categories {
            ws.push(self.weight(publication.year, sc)?);
        }
        Ok(mean(ws.into_iter()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactScore {
    pub pub_id: String,
    pub fnc: f64,
    pub fnif: f64,
    pub citation_weight: f64,
    pub c: f64,
}

pub fn impact_score(
    publication: &Publication,
    corpus: &Corpus,
    baselines: &Baselines,
    weights: &WeightTable,
) -> Result<ImpactScore, NormalizeError> {
    let journal = corpus
        .journal(&publication.journal_id)
        .ok_or_else(|| NormalizeError::UnknownJournal { journal_id: publication.journal_id.clone() })?;
    let fnc = field_normalized_citations(publication, baselines)?;
    let fnif = field_normalized_if(publication, journal, baselines)?;
    let w = weights.weight_for(publication)?;
    Ok(ImpactScore {
        pub_id: publication.pub_id.clone(),
        fnc,
        fnif,
        citation_weight: w,
        c: combined_impact(fnc, fnif, w)?,
    })
}

/// Impact scores for every publication, aligned with
/// [`Corpus::publications`]. The first error in publication order wins.
pub fn impact_table(
    corpus: &Corpus,
    baselines: &Baselines,
    weights: &WeightTable,
) -> Result<Vec<ImpactScore>, NormalizeError> {
    corpus.publications().par_iter().map(|p| impact_score(p, corpus, baselines, weights)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Authorship, Institution};
    use proptest::prelude::*;

    fn pubn(id: &str, journal: &str, scs: &[&str], citations: u64) -> Publication {
        Publication {
            pub_id: id.into(),
            year: 2016,
            doi: None,
            journal_id: journal.into(),
            subject_categories: scs.iter().map(|s| s.to_string()).collect(),
            citation_count: citations,
            byline: vec![Authorship { name: "A, B".into(), position: 1, affiliations: vec!["U1".into()] }],
        }
    }

    fn journal(id: &str, impact: f64, scs: &[&str]) -> Journal {
        Journal {
            journal_id: id.into(),
            impact_factors: [(2016, impact)].into_iter().collect(),
            subject_categories: scs.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn corpus(pubs: Vec<Publication>, journals: Vec<Journal>) -> Corpus {
        let inst = Institution {
            institution_id: "U1".into(),
            name: "U".into(),
            city: "Rome".into(),
            country: "Italy".into(),
            lau_code: None,
        };
        Corpus::new(pubs, journals, vec![inst], "Italy").unwrap()
    }

    fn virology() -> Corpus {
        corpus(
            vec![pubn("P1", "J1", &["VIR"], 2), pubn("P2", "J2", &["VIR"], 4), pubn("P3", "J1", &["VIR"], 0)],
            vec![journal("J1", 2.0, &["VIR"]), journal("J2", 4.0, &["VIR"])],
        )
    }

    #[test]
    fn virology_cell_baseline() {
        let b = compute_baselines(&virology());
        let cell = b.get(2016, "VIR").unwrap();
        assert_eq!(cell.mean_citations_of_cited, 3.0);
        assert_eq!(cell.cited_count, 2);
        assert_eq!(cell.total_count, 3);
        assert!(!cell.degenerate);
        // IFs {2, 4, 2} counted per publication.
        assert!((cell.mean_if - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn single_cited_publication() {
        let c = corpus(vec![pubn("P1", "J1", &["VIR"], 5)], vec![journal("J1", 1.0, &["VIR"])]);
        let b = compute_baselines(&c);
        assert_eq!(b.get(2016, "VIR").unwrap().mean_citations_of_cited, 5.0);
        assert_eq!(field_normalized_citations(&c.publications()[0], &b).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_cell() {
        let c = corpus(
            vec![pubn("P1", "J1", &["VIR"], 0), pubn("P2", "J1", &["VIR"], 0)],
            vec![journal("J1", 1.0, &["VIR"])],
        );
        let b = compute_baselines(&c);
        assert!(b.get(2016, "VIR").unwrap().degenerate);
        assert_eq!(b.degenerate().count(), 1);
        for p in c.publications() {
            assert_eq!(field_normalized_citations(p, &b).unwrap(), 0.0);
        }
    }

    #[test]
    fn fnc_examples() {
        let c = virology();
        let b = compute_baselines(&c);
        let fnc = |id: &str| field_normalized_citations(c.publication(id).unwrap(), &b).unwrap();
        assert!((fnc("P2") - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(fnc("P3"), 0.0);
        let c2 = corpus(
            vec![pubn("P1", "J1", &["VIR"], 3), pubn("P2", "J1", &["VIR"], 3)],
            vec![journal("J1", 1.0, &["VIR"])],
        );
        let b2 = compute_baselines(&c2);
        assert_eq!(field_normalized_citations(&c2.publications()[0], &b2).unwrap(), 1.0);
    }

    #[test]
    fn missing_baseline_cell() {
        let c = virology();
        let mut p = c.publications()[0].clone();
        p.subject_categories = vec!["IMM".into()];
        let err = field_normalized_citations(&p, &compute_baselines(&c)).unwrap_err();
        assert_eq!(err, NormalizeError::MissingBaseline { year: 2016, sc_code: "IMM".into() });
    }

    #[test]
    fn fnif_examples() {
        // Two journals with IFs {2, 4}, one publication each: mean IF 3.
        let c = corpus(
            vec![pubn("P1", "J1", &["VIR"], 1), pubn("P2", "J2", &["VIR"], 1)],
            vec![journal("J1", 2.0, &["VIR"]), journal("J2", 4.0, &["VIR"])],
        );
        let b = compute_baselines(&c);
        let probe = pubn("PX", "J6", &["VIR"], 0);
        let six = journal("J6", 6.0, &["VIR"]);
        assert_eq!(field_normalized_if(&probe, &six, &b).unwrap(), 2.0);
        let three = journal("J3", 3.0, &["VIR"]);
        assert_eq!(field_normalized_if(&probe, &three, &b).unwrap(), 1.0);
        let zero = journal("J0", 0.0, &["VIR"]);
        assert_eq!(field_normalized_if(&probe, &zero, &b).unwrap(), 0.0);
        let mut other_year = probe.clone();
        other_year.year = 2017;
        assert!(matches!(field_normalized_if(&other_year, &six, &b), Err(NormalizeError::MissingImpactFactor { .. })));
    }

    #[test]
    fn multi_category_takes_mean_of_ratios() {
        let c = corpus(
            vec![pubn("P1", "J1", &["VIR", "IMM"], 6), pubn("P2", "J1", &["VIR"], 2), pubn("P3", "J2", &["IMM"], 12)],
            vec![journal("J1", 2.0, &["VIR", "IMM"]), journal("J2", 2.0, &["IMM"])],
        );
        let b = compute_baselines(&c);
        // VIR mean 4 -> 1.5; IMM mean 9 -> 2/3.
        let fnc = field_normalized_citations(c.publication("P1").unwrap(), &b).unwrap();
        assert!((fnc - (1.5 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        let weights = WeightTable::new(
            [((2016, "VIR".to_string()), 0.8), ((2016, "IMM".to_string()), 0.4)].into_iter().collect(),
        )
        .unwrap();
        assert!((weights.weight_for(c.publication("P1").unwrap()).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn combined_examples() {
        assert_eq!(combined_impact(0.7, 9.9, 1.0).unwrap(), 0.7);
        for w in [0.0, 0.1, 0.3, 0.5, 0.77, 1.0] {
            assert!((combined_impact(1.0, 1.0, w).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!((combined_impact(2.0, 0.5, 0.7).unwrap() - 1.55).abs() < 1e-15);
        assert!(combined_impact(1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn weights_fallback() {
        let t = WeightTable::default();
        assert!(matches!(t.weight(2016, "VIR"), Err(NormalizeError::MissingWeight { .. })));
        let t = t.with_fallback(Some(0.25)).unwrap();
        assert_eq!(t.weight(2016, "VIR").unwrap(), 0.25);
        assert_eq!(WeightTable::neutral().weight(1999, "ANY").unwrap(), 0.5);
        assert!(WeightTable::default().with_fallback(Some(2.0)).is_err());
    }

    fn cell_corpus(citations: &[u64], impacts: &[f64]) -> Corpus {
        let journals: Vec<Journal> =
            impacts.iter().enumerate().map(|(i, v)| journal(&format!("J{i}"), *v, &["VIR"])).collect();
        let pubs = citations
            .iter()
            .enumerate()
            .map(|(i, c)| pubn(&format!("P{i:03}"), &format!("J{}", i % impacts.len()), &["VIR"], *c))
            .collect();
        corpus(pubs, journals)
    }

    proptest! {
        #[test]
        fn citation_scaling_leaves_fnc_bit_identical(
            citations in proptest::collection::vec(0u64..5000, 1..40),
            factor in 1u64..1000,
        ) {
            let a = cell_corpus(&citations, &[1.0]);
            let scaled: Vec<u64> = citations.iter().map(|c| c * factor).collect();
            let b = cell_corpus(&scaled, &[1.0]);
            let (ba, bb) = (compute_baselines(&a), compute_baselines(&b));
            for (pa, pb) in a.publications().iter().zip(b.publications()) {
                prop_assert_eq!(
                    field_normalized_citations(pa, &ba).unwrap().to_bits(),
                    field_normalized_citations(pb, &bb).unwrap().to_bits()
                );
            }
        }

        #[test]
        fn if_scaling_leaves_fnif_unchanged(
            impacts in proptest::collection::vec(0.0f64..50.0, 1..10),
            n in 1usize..30,
            factor in 0.01f64..100.0,
        ) {
            let citations = vec![1; n];
            let a = cell_corpus(&citations, &impacts);
            let scaled: Vec<f64> = impacts.iter().map(|v| v * factor).collect();
            let b = cell_corpus(&citations, &scaled);
            let (ba, bb) = (compute_baselines(&a), compute_baselines(&b));
            for (pa, pb) in a.publications().iter().zip(b.publications()) {
                let x = field_normalized_if(pa, a.journal(&pa.journal_id).unwrap(), &ba).unwrap();
                let y = field_normalized_if(pb, b.journal(&pb.journal_id).unwrap(), &bb).unwrap();
                prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
            }
        }

        #[test]
        fn fnc_of_cited_publications_averages_to_one(citations in proptest::collection::vec(0u64..10_000, 1..60)) {
            prop_assume!(citations.iter().any(|c| *c > 0));
            let c = cell_corpus(&citations, &[1.0]);
            let b = compute_baselines(&c);
            let cited: Vec<f64> = c
                .publications()
                .iter()
                .filter(|p| p.citation_count > 0)
                .map(|p| field_normalized_citations(p, &b).unwrap())
                .collect();
            let m = cited.iter().sum::<f64>() / cited.len() as f64;
            prop_assert!((m - 1.0).abs() < 1e-12);
        }

        #[test]
        fn combined_is_monotone(fnc in 0.0f64..10.0, fnif in 0.0f64..10.0, d in 0.0f64..5.0, w in 0.0f64..=1.0) {
            let base = combined_impact(fnc, fnif, w).unwrap();
            prop_assert!(combined_impact(fnc + d, fnif, w).unwrap() >= base);
            prop_assert!(combined_impact(fnc, fnif + d, w).unwrap() >= base);
        }

        #[test]
        fn baselines_ignore_input_order(citations in proptest::collection::vec(0u64..100, 1..30), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let a = cell_corpus(&citations, &[1.5, 2.5, 0.3]);
            let mut shuffled = a.publications().to_vec();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let journals: Vec<Journal> = a.journals().values().cloned().collect();
            let b = corpus(shuffled, journals);
            let (ba, bb) = (compute_baselines(&a), compute_baselines(&b));
            let ta = impact_table(&a, &ba, &WeightTable::neutral()).unwrap();
            let tb = impact_table(&b, &bb, &WeightTable::neutral()).unwrap();
            prop_assert_eq!(ta, tb);
        }
    }
}
