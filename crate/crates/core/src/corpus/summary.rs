//! Per-specialty bibliographic counts (publications, citations, authorships
//! and territorial spread).

use std::collections::BTreeSet;

use serde::Serialize;

use crate::config::SpecialtyConfig;
use crate::credit::PublicationCredit;
use crate::territory::{Level, TerritoryIndex};

use super::Corpus;

/// Label of the grand-total row.
pub const TOTAL_ROW: &str = "Total";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SummaryRow {
    pub specialty: String,
    pub publications: u64,
    pub citations: u64,
    pub authorships: u64,
    /// NUTS3 units receiving a positive share of some publication.
    pub provinces: u64,
    /// NUTS2 units receiving a positive share of some publication.
    pub regions: u64,
}

#[derive(Default)]
struct Acc {
    publications: u64,
    citations: u64,
    authorships: u64,
    provinces: BTreeSet<String>,
    regions: BTreeSet<String>,
}

impl Acc {
    fn add(&mut self, corpus: &Corpus, credit: &[PublicationCredit], index: &TerritoryIndex, i: usize) {
        let p = &corpus.publications()[i];
        self.publications += 1;
        self.citations += p.citation_count;
        self.authorships += p.authorship_count() as u64;
        for (lau, share) in &credit[i].shares.by_lau {
            if *share <= 0.0 {
                continue;
            }
            if let Some(n) = index.ancestor_at(lau, Level::Nuts3) {
                self.provinces.insert(n.code.clone());
            }
            if let Some(n) = index.ancestor_at(lau, Level::Nuts2) {
                self.regions.insert(n.code.clone());
            }
        }
    }

    fn row(self, specialty: &str) -> SummaryRow {
        SummaryRow {
            specialty: specialty.to_owned(),
            publications: self.publications,
            citations: self.citations,
            authorships: self.authorships,
            provinces: self.provinces.len() as u64,
            regions: self.regions.len() as u64,
        }
    }
}

/// One row per configured specialty followed by the [`TOTAL_ROW`].
///
/// A publication belongs to every specialty one of its subject categories
/// maps to. The total row counts each publication once (and each territory
/// once), so it is generally below the column sums when specialties share
/// subject categories. Publications outside every specialty are ignored.
pub fn corpus_summary(
    corpus: &Corpus,
    config: &SpecialtyConfig,
    index: &TerritoryIndex,
    credit: &[PublicationCredit],
) -> Vec<SummaryRow> {
    let mut rows = Vec::with_capacity(config.specialties.len() + 1);
    let mut total = Acc::default();
    let mut accs: Vec<Acc> = config.specialties.iter().map(|_| Acc::default()).collect();
    for (i, p) in corpus.publications().iter().enumerate() {
        let mut any = false;
        for (s, acc) in config.specialties.iter().zip(accs.iter_mut()) {
            if s.covers_publication(p) {
                acc.add(corpus, credit, index, i);
                any = true;
            }
        }
        if any {
            total.add(corpus, credit, index, i);
        }
    }
    for (s, acc) in config.specialties.iter().zip(accs) {
        rows.push(acc.row(&s.name));
    }
    rows.push(total.row(TOTAL_ROW));
    rows
}
