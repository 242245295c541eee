//! Territorial hierarchy (LAU → NUTS3 → NUTS2 → NUTS1 → nation), address
//! reduction to LAUs, and additive rollup through the hierarchy.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError};
use crate::fold::fold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Level {
    Lau,
    Nuts3,
    Nuts2,
    Nuts1,
    Nation,
}

impl Level {
    pub const ALL: [Level; 5] = [Level::Lau, Level::Nuts3, Level::Nuts2, Level::Nuts1, Level::Nation];

    pub fn parent(self) -> Option<Level> {
        match self {
            Level::Lau => Some(Level::Nuts3),
            Level::Nuts3 => Some(Level::Nuts2),
            Level::Nuts2 => Some(Level::Nuts1),
            Level::Nuts1 => Some(Level::Nation),
            Level::Nation => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Lau => "LAU",
            Level::Nuts3 => "NUTS3",
            Level::Nuts2 => "NUTS2",
            Level::Nuts1 => "NUTS1",
            Level::Nation => "NATION",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LAU" => Ok(Level::Lau),
            "NUTS3" => Ok(Level::Nuts3),
            "NUTS2" => Ok(Level::Nuts2),
            "NUTS1" => Ok(Level::Nuts1),
            "NATION" => Ok(Level::Nation),
            other => Err(format!("unknown territorial level `{other}`")),
        }
    }
}

#[derive(Debug, Error)]
pub enum TerritoryError {
    #[error(transparent)]
    Input(#[from] CorpusError),
    #[error("{path}: invalid level `{value}` at line {line}")]
    BadLevel { path: PathBuf, line: u64, value: String },
    #[error("duplicate territory code `{code}`")]
    Duplicate { code: String },
    #[error("territory `{code}` refers to missing parent `{parent}`")]
    Orphan { code: String, parent: String },
    #[error("{level} territory `{code}` must have a parent")]
    MissingParent { code: String, level: Level },
    #[error("territory `{code}` ({level}) has parent `{parent}` at level {parent_level}; expected {expected}")]
    ParentLevel { code: String, level: Level, parent: String, parent_level: Level, expected: Level },
    #[error("cycle in territorial hierarchy through `{code}`")]
    Cycle { code: String },
    #[error("NATION node `{code}` cannot have a parent")]
    NationWithParent { code: String },
    #[error("gazetteer must contain exactly one NATION node, found {found}")]
    Nation { found: usize },
    #[error("city name `{name}` matches several LAUs: {}", codes.join(", "))]
    AmbiguousCity { name: String, codes: Vec<String> },
    #[error("population row for unknown territory `{code}`")]
    UnknownPopulationCode { code: String },
    #[error("unknown territory code `{code}`")]
    UnknownCode { code: String },
    #[error("territory `{code}` is at level {level}, above the rollup target {target}")]
    AboveTarget { code: String, level: Level, target: Level },
    #[error("institution `{institution_id}` refers to `{code}`, which is not a LAU in the gazetteer")]
    BadInstitutionLau { institution_id: String, code: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerritoryNode {
    pub code: String,
    pub level: Level,
    pub name: String,
    pub parent: Option<String>,
    pub aliases: Vec<String>,
    /// Loaded from the population file, or else derived as the sum of the
    /// children when every child has one.
    pub population: Option<u64>,
    pub population_loaded: bool,
}

/// Where an address or institution sits in the hierarchy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Location {
    Lau(String),
    Foreign,
    /// Domestic, but the city matched no LAU.
    Unresolved,
}

/// Immutable, read-only index over the gazetteer.
#[derive(Debug, Clone)]
pub struct TerritoryIndex {
    nodes: Vec<TerritoryNode>,
    by_code: HashMap<String, usize>,
    children: Vec<Vec<usize>>,
    /// Parent node index, `usize::MAX` for the nation.
    parents: Vec<usize>,
    by_city: HashMap<String, usize>,
    nation: usize,
    country_names: BTreeSet<String>,
}

#[derive(Deserialize)]
struct GazetteerRow {
    code: String,
    level: String,
    name: String,
    parent_code: String,
    #[serde(default)]
    aliases: String,
}

#[derive(Deserialize)]
struct PopulationRow {
    code: String,
    population: String,
    #[allow(dead_code)]
    #[serde(default)]
    reference_year: String,
}

/// Loads `gazetteer.csv` and `population.csv` and builds the index.
pub fn build_index(gazetteer_path: &Path, population_path: &Path) -> Result<TerritoryIndex, TerritoryError> {
    use crate::corpus::{parse_number, read_csv, split_list};

    let mut nodes = Vec::new();
    for (line, row) in read_csv::<GazetteerRow>(gazetteer_path)? {
        let level = row.level.parse().map_err(|_| TerritoryError::BadLevel {
            path: gazetteer_path.to_owned(),
            line,
            value: row.level.clone(),
        })?;
        nodes.push(TerritoryNode {
            code: row.code,
            level,
            name: row.name,
            parent: Some(row.parent_code).filter(|p| !p.is_empty()),
            aliases: split_list(&row.aliases),
            population: None,
            population_loaded: false,
        });
    }
    let mut populations = BTreeMap::new();
    for (line, row) in read_csv::<PopulationRow>(population_path)? {
        let pop: u64 = parse_number(population_path, line, "population", &row.population)?;
        populations.insert(row.code, pop);
    }
    TerritoryIndex::new(nodes, &populations)
}

impl TerritoryIndex {
    /// Builds the index from gazetteer nodes (their `population` fields are
    /// ignored) and a population table keyed by code.
    pub fn new(mut nodes: Vec<TerritoryNode>, populations: &BTreeMap<String, u64>) -> Result<Self, TerritoryError> {
        nodes.sort_by(|a, b| a.code.cmp(&b.code));
        let mut by_code = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if by_code.insert(n.code.clone(), i).is_some() {
                return Err(TerritoryError::Duplicate { code: n.code.clone() });
            }
        }
        let nations: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].level == Level::Nation).collect();
        if nations.len() != 1 {
            return Err(TerritoryError::Nation { found: nations.len() });
        }
        let mut parents = vec![usize::MAX; nodes.len()];
        for (i, n) in nodes.iter().enumerate() {
            match (&n.parent, n.level) {
                (None, Level::Nation) => {}
                (Some(_), Level::Nation) => return Err(TerritoryError::NationWithParent { code: n.code.clone() }),
                (None, level) => return Err(TerritoryError::MissingParent { code: n.code.clone(), level }),
                (Some(p), _) => {
                    let &pi = by_code
                        .get(p)
                        .ok_or_else(|| TerritoryError::Orphan { code: n.code.clone(), parent: p.clone() })?;
                    parents[i] = pi;
                }
            }
        }
        for start in 0..nodes.len() {
            let mut seen = BTreeSet::new();
            let mut cur = start;
            while cur != usize::MAX {
                if !seen.insert(cur) {
                    return Err(TerritoryError::Cycle { code: nodes[start].code.clone() });
                }
                cur = parents[cur];
            }
        }
        for (i, n) in nodes.iter().enumerate() {
            if parents[i] == usize::MAX {
                continue;
            }
            let p = &nodes[parents[i]];
            let expected = n.level.parent().expect("only the nation lacks a parent level");
            if p.level != expected {
                return Err(TerritoryError::ParentLevel {
                    code: n.code.clone(),
                    level: n.level,
                    parent: p.code.clone(),
                    parent_level: p.level,
                    expected,
                });
            }
        }
        let mut children = vec![Vec::new(); nodes.len()];
        for (i, &p) in parents.iter().enumerate() {
            if p != usize::MAX {
                children[p].push(i);
            }
        }

        let mut by_city: HashMap<String, usize> = HashMap::new();
        let mut clashes: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (i, n) in nodes.iter().enumerate().filter(|(_, n)| n.level == Level::Lau) {
            let keys: BTreeSet<String> = std::iter::once(&n.name).chain(&n.aliases).map(|s| fold(s)).collect();
            for key in keys {
                if let Some(&other) = by_city.get(&key) {
                    let set = clashes.entry(key).or_default();
                    set.insert(nodes[other].code.clone());
                    set.insert(n.code.clone());
                } else {
                    by_city.insert(key, i);
                }
            }
        }
        if let Some((name, codes)) = clashes.into_iter().next() {
            return Err(TerritoryError::AmbiguousCity { name, codes: codes.into_iter().collect() });
        }

        for code in populations.keys() {
            if !by_code.contains_key(code) {
                return Err(TerritoryError::UnknownPopulationCode { code: code.clone() });
            }
        }
        for level in Level::ALL {
            for i in 0..nodes.len() {
                if nodes[i].level != level {
                    continue;
                }
                if let Some(&p) = populations.get(&nodes[i].code) {
                    nodes[i].population = Some(p);
                    nodes[i].population_loaded = true;
                } else if !children[i].is_empty() {
                    nodes[i].population = children[i].iter().map(|&c| nodes[c].population).sum();
                }
            }
        }

        let nation = nations[0];
        let country_names =
            std::iter::once(&nodes[nation].name).chain(&nodes[nation].aliases).map(|s| fold(s)).collect();
        Ok(TerritoryIndex { nodes, by_code, children, parents, by_city, nation, country_names })
    }

    pub fn get(&self, code: &str) -> Option<&TerritoryNode> {
        self.by_code.get(code).map(|&i| &self.nodes[i])
    }

    pub fn nation(&self) -> &TerritoryNode {
        &self.nodes[self.nation]
    }

    /// Nodes at `level`, ordered by code.
    pub fn nodes_at(&self, level: Level) -> impl Iterator<Item = &TerritoryNode> {
        self.nodes.iter().filter(move |n| n.level == level)
    }

    pub fn count_at(&self, level: Level) -> usize {
        self.nodes_at(level).count()
    }

    pub fn children(&self, code: &str) -> Vec<&TerritoryNode> {
        match self.by_code.get(code) {
            Some(&i) => self.children[i].iter().map(|&c| &self.nodes[c]).collect(),
            None => Vec::new(),
        }
    }

    pub fn parent(&self, code: &str) -> Option<&TerritoryNode> {
        let &i = self.by_code.get(code)?;
        self.parents.get(i).filter(|&&p| p != usize::MAX).map(|&p| &self.nodes[p])
    }

    /// The node itself followed by its ancestors up to the nation.
    pub fn ancestors(&self, code: &str) -> Vec<&TerritoryNode> {
        let mut out = Vec::new();
        let mut cur = self.by_code.get(code).copied().unwrap_or(usize::MAX);
        while cur != usize::MAX {
            out.push(&self.nodes[cur]);
            cur = self.parents[cur];
        }
        out
    }

    /// Ancestor (or self) of `code` at `level`.
    pub fn ancestor_at(&self, code: &str, level: Level) -> Option<&TerritoryNode> {
        self.ancestors(code).into_iter().find(|n| n.level == level)
    }

    pub fn is_domestic_country(&self, country: &str) -> bool {
        self.country_names.contains(&fold(country))
    }

    pub fn lau_for_city(&self, city: &str) -> Option<&TerritoryNode> {
        self.by_city.get(&fold(city)).map(|&i| &self.nodes[i])
    }
}

/// Reduces a `city, country` address to a LAU.
pub fn reduce_address(city: &str, country: &str, index: &TerritoryIndex) -> Location {
    if !index.is_domestic_country(country) {
        return Location::Foreign;
    }
    match index.lau_for_city(city) {
        Some(node) => Location::Lau(node.code.clone()),
        None => Location::Unresolved,
    }
}

/// Locations of every institution of a corpus.
#[derive(Debug, Clone, Default)]
pub struct InstitutionLocations {
    locations: BTreeMap<String, Location>,
}

impl InstitutionLocations {
    pub fn get(&self, institution_id: &str) -> Option<&Location> {
        self.locations.get(institution_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Location)> {
        self.locations.iter()
    }

    /// Domestic institutions whose city matched no LAU.
    pub fn unresolved(&self) -> Vec<&str> {
        self.locations.iter().filter(|(_, l)| **l == Location::Unresolved).map(|(k, _)| k.as_str()).collect()
    }

    pub fn from_map(locations: BTreeMap<String, Location>) -> Self {
        InstitutionLocations { locations }
    }
}

/// Locates each institution: an explicit LAU code wins (and must exist);
/// otherwise the city and country are reduced against the gazetteer.
pub fn locate_institutions(corpus: &Corpus, index: &TerritoryIndex) -> Result<InstitutionLocations, TerritoryError> {
    let mut locations = BTreeMap::new();
    for (id, inst) in corpus.institutions() {
        let loc = match &inst.lau_code {
            Some(code) => match index.get(code) {
                Some(n) if n.level == Level::Lau => Location::Lau(code.clone()),
                _ => return Err(TerritoryError::BadInstitutionLau { institution_id: id.clone(), code: code.clone() }),
            },
            None => reduce_address(&inst.city, &inst.country, index),
        };
        locations.insert(id.clone(), loc);
    }
    Ok(InstitutionLocations { locations })
}

/// Sums values up the hierarchy to `target`.
///
/// Keys may sit at any level at or below `target`. Aggregation proceeds one
/// level at a time, so rolling up to NUTS1 directly gives bit-identical
/// results to rolling up to NUTS3 first and then to NUTS1.
pub fn rollup(
    values: &BTreeMap<String, f64>,
    target: Level,
    index: &TerritoryIndex,
) -> Result<BTreeMap<String, f64>, TerritoryError> {
    let mut by_level: BTreeMap<Level, BTreeMap<String, f64>> = BTreeMap::new();
    for (code, &v) in values {
        let node = index.get(code).ok_or_else(|| TerritoryError::UnknownCode { code: code.clone() })?;
        if node.level > target {
            return Err(TerritoryError::AboveTarget { code: code.clone(), level: node.level, target });
        }
        *by_level.entry(node.level).or_default().entry(code.clone()).or_insert(0.0) += v;
    }
    let mut level = Level::Lau;
    while level < target {
        let parent_level = level.parent().expect("below target implies a parent level");
        if let Some(current) = by_level.remove(&level) {
            let next = by_level.entry(parent_level).or_default();
            for (code, v) in current {
                let parent = index.parent(&code).expect("validated hierarchy");
                *next.entry(parent.code.clone()).or_insert(0.0) += v;
            }
        }
        level = parent_level;
    }
    Ok(by_level.remove(&target).unwrap_or_default())
}
