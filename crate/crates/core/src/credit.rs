//! Fractional counting: collaboration class, positional author weights,
//! multi-affiliation splits and per-territory publication shares.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::{Authorship, Corpus, Publication};
use crate::territory::{InstitutionLocations, Location};

#[derive(Debug, Error, PartialEq)]
pub enum CreditError {
    #[error("byline must have at least one author")]
    EmptyByline,
    #[error("institution `{institution_id}` has not been located")]
    Unlocated { institution_id: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CollaborationClass {
    /// Every author affiliated only to one and the same institution.
    Intramural,
    Extramural,
}

/// Intramural: first and last author 40% each, the rest share 20%.
const INTRA_BOUNDARY: f64 = 0.40;
const INTRA_MIDDLE_POOL: f64 = 0.20;
/// Extramural: first and last 30% each, second and second-to-last 15%
/// each, the rest share 10%.
const EXTRA_BOUNDARY: f64 = 0.30;
const EXTRA_INNER: f64 = 0.15;
const EXTRA_MIDDLE_POOL: f64 = 0.10;

/// Single-author publications are always intramural.
pub fn classify_collaboration(byline: &[Authorship]) -> CollaborationClass {
    if byline.len() <= 1 {
        return CollaborationClass::Intramural;
    }
    let mut affiliations = byline.iter().flat_map(|a| a.affiliations.iter());
    let Some(first) = affiliations.next() else {
        return CollaborationClass::Intramural;
    };
    if affiliations.all(|i| i == first) {
        CollaborationClass::Intramural
    } else {
        CollaborationClass::Extramural
    }
}

/// Positional weights for a byline of `n` authors; they always sum to 1.
///
/// Short bylines where roles collide or the middle pool has nobody to go to
/// give each author the sum of every role they hold, then rescale to 1:
/// `n = 2` yields `[0.5, 0.5]` and `n = 4` extramural `[1/3, 1/6, 1/6, 1/3]`.
pub fn author_weights(n: usize, class: CollaborationClass) -> Result<Vec<f64>, CreditError> {
    if n == 0 {
        return Err(CreditError::EmptyByline);
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    let last = n - 1;
    let mut weights = vec![0.0; n];
    let (pool, middle) = match class {
        CollaborationClass::Intramural => {
            weights[0] += INTRA_BOUNDARY;
            weights[last] += INTRA_BOUNDARY;
            (INTRA_MIDDLE_POOL, 1..last)
        }
        CollaborationClass::Extramural => {
            weights[0] += EXTRA_BOUNDARY;
            weights[last] += EXTRA_BOUNDARY;
            weights[1] += EXTRA_INNER;
            weights[last - 1] += EXTRA_INNER;
            (EXTRA_MIDDLE_POOL, 2..last - 1)
        }
    };
    if middle.is_empty() {
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
    } else {
        let share = pool / middle.len() as f64;
        for w in &mut weights[middle] {
            *w = share;
        }
    }
    Ok(weights)
}

/// Splits an author's weight evenly across their `m` affiliations.
pub fn affiliation_split(author_weight: f64, affiliations: &[String]) -> Vec<(&str, f64)> {
    let share = author_weight / affiliations.len() as f64;
    affiliations.iter().map(|a| (a.as_str(), share)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Split {
    pub institution_id: String,
    pub location: Location,
    pub share: f64,
}

/// Credit of one byline author.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CreditShare {
    pub position: u32,
    pub author_weight: f64,
    pub splits: Vec<Split>,
}

/// A publication's fractions per LAU, plus what went abroad or to domestic
/// addresses that matched no LAU. All parts together sum to 1.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TerritoryShares {
    pub by_lau: BTreeMap<String, f64>,
    pub foreign: f64,
    pub unresolved: f64,
}

impl TerritoryShares {
    pub fn total(&self) -> f64 {
        self.by_lau.values().sum::<f64>() + self.foreign + self.unresolved
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PublicationCredit {
    pub class: CollaborationClass,
    pub authors: Vec<CreditShare>,
    pub shares: TerritoryShares,
}

impl PublicationCredit {
    pub fn author_weight(&self, position: u32) -> Option<f64> {
        self.authors.get(position as usize - 1).map(|a| a.author_weight)
    }
}

/// Sums the splits of every author by location.
pub fn territory_shares(authors: &[CreditShare]) -> TerritoryShares {
    let mut out = TerritoryShares::default();
    for split in authors.iter().flat_map(|a| &a.splits) {
        match &split.location {
            Location::Lau(code) => *out.by_lau.entry(code.clone()).or_insert(0.0) += split.share,
            Location::Foreign => out.foreign += split.share,
            Location::Unresolved => out.unresolved += split.share,
        }
    }
    out
}

/// Full credit breakdown of one publication.
pub fn publication_credit(
    publication: &Publication,
    locations: &InstitutionLocations,
) -> Result<PublicationCredit, CreditError> {
    let class = classify_collaboration(&publication.byline);
    let weights = author_weights(publication.byline.len(), class)?;
    let mut authors = Vec::with_capacity(weights.len());
    for (author, &weight) in publication.byline.iter().zip(&weights) {
        let mut splits = Vec::with_capacity(author.affiliations.len());
        for (inst, share) in affiliation_split(weight, &author.affiliations) {
            let location =
                locations.get(inst).ok_or_else(|| CreditError::Unlocated { institution_id: inst.to_owned() })?;
            splits.push(Split { institution_id: inst.to_owned(), location: location.clone(), share });
        }
        authors.push(CreditShare { position: author.position, author_weight: weight, splits });
    }
    let shares = territory_shares(&authors);
    Ok(PublicationCredit { class, authors, shares })
}

/// Credit of every corpus publication, aligned with
/// [`Corpus::publications`].
pub fn credit_table(corpus: &Corpus, locations: &InstitutionLocations) -> Result<Vec<PublicationCredit>, CreditError> {
    corpus.publications().par_iter().map(|p| publication_credit(p, locations)).collect()
}
