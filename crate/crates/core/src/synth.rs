//! Seeded generator of a synthetic but structurally realistic Italian
//! corpus: 5 macro-regions, 20 regions, provinces and municipalities,
//! universities, professors, journals and publications, plus a gold
//! standard for matching.
//!
//! Professor surnames are unique and never reused for non-roster authors,
//! so the default matching rules attribute every slot correctly.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::pipeline::InputPaths;

#[derive(Debug, Clone)]
pub struct SynthParams {
    pub seed: u64,
    pub publications: usize,
    /// Byline lengths are drawn uniformly from `1..=max_authors`.
    pub max_authors: usize,
    /// When set, byline lengths are adjusted so the corpus has exactly this
    /// many authorship rows.
    pub target_authorships: Option<usize>,
    /// Upper bound of professors per (university, field).
    pub professors_per_unit: usize,
    /// Probability that a non-roster author is affiliated abroad.
    pub foreign_share: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            seed: 7,
            publications: 2_000,
            max_authors: 12,
            target_authorships: None,
            professors_per_unit: 4,
            foreign_share: 0.15,
        }
    }
}

/// (code, name, macro-region, provinces, population in thousands, capital)
const REGIONS: [(&str, &str, &str, usize, u64, &str); 20] = [
    ("ITC1", "Piedmont", "ITC", 8, 4_356, "Torino"),
    ("ITC2", "Valle d'Aosta", "ITC", 1, 126, "Aosta"),
    ("ITC3", "Liguria", "ITC", 4, 1_551, "Genova"),
    ("ITC4", "Lombardy", "ITC", 12, 10_060, "Milano"),
    ("ITH1", "Trentino Alto Adige", "ITH", 2, 1_072, "Trento"),
    ("ITH3", "Veneto", "ITH", 7, 4_906, "Venezia"),
    ("ITH4", "Friuli Venezia Giulia", "ITH", 4, 1_215, "Trieste"),
    ("ITH5", "Emilia Romagna", "ITH", 9, 4_459, "Bologna"),
    ("ITI1", "Tuscany", "ITI", 10, 3_730, "Firenze"),
    ("ITI2", "Umbria", "ITI", 2, 882, "Perugia"),
    ("ITI3", "Marche", "ITI", 5, 1_525, "Ancona"),
    ("ITI4", "Lazio", "ITI", 5, 5_879, "Roma"),
    ("ITF1", "Abruzzo", "ITF", 4, 1_312, "L'Aquila"),
    ("ITF2", "Molise", "ITF", 2, 306, "Campobasso"),
    ("ITF3", "Campania", "ITF", 5, 5_802, "Napoli"),
    ("ITF4", "Puglia", "ITF", 6, 4_029, "Bari"),
    ("ITF5", "Basilicata", "ITF", 2, 563, "Potenza"),
    ("ITF6", "Calabria", "ITF", 5, 1_947, "Catanzaro"),
    ("ITG1", "Sicily", "ITG", 9, 5_000, "Palermo"),
    ("ITG2", "Sardinia", "ITG", 5, 1_640, "Cagliari"),
];

const MACRO: [(&str, &str); 5] =
    [("ITC", "Northwest"), ("ITH", "Northeast"), ("ITI", "Center"), ("ITF", "South"), ("ITG", "Islands")];

const LAUS_PER_PROVINCE: usize = 3;

/// (specialty, subject category, field code)
const SPECIALTIES: [(&str, &str, &str); 4] = [
    ("Virology", "VIR", "MED/07"),
    ("Immunology", "IMM", "MED/04"),
    ("Cardiology", "CAR", "MED/11"),
    ("Oncology", "ONC", "MED/06"),
];

/// Journal subject-category sets; `GEN` belongs to no specialty.
const SC_SETS: [&[&str]; 8] =
    [&["VIR"], &["IMM"], &["VIR", "IMM"], &["CAR"], &["ONC"], &["IMM", "ONC"], &["GEN"], &["CAR", "GEN"]];

const FOREIGN: [(&str, &str); 6] = [
    ("Paris", "France"),
    ("Berlin", "Germany"),
    ("Madrid", "Spain"),
    ("Boston", "USA"),
    ("London", "United Kingdom"),
    ("Zurich", "Switzerland"),
];

const GIVEN: [&str; 16] = [
    "Mario",
    "Giulia",
    "Luca",
    "Anna",
    "Paolo",
    "Chiara",
    "Marco",
    "Elena",
    "Stefano",
    "Sara",
    "Davide",
    "Laura",
    "Andrea",
    "Francesca",
    "Nicola",
    "Valeria",
];

const WINDOW: (i32, i32) = (2014, 2018);

const SYLLABLES: [&str; 16] =
    ["ba", "ro", "le", "ti", "ca", "mo", "ne", "ri", "sa", "fo", "lu", "de", "pa", "vi", "gu", "zo"];

/// Distinct word for every `n`, built from syllables in base 16.
fn word(mut n: usize, min_syllables: usize) -> String {
    let mut parts = Vec::new();
    while n > 0 || parts.len() < min_syllables {
        parts.push(SYLLABLES[n % SYLLABLES.len()]);
        n /= SYLLABLES.len();
    }
    let mut w: String = parts.concat();
    if let Some(first) = w.get_mut(0..1) {
        first.make_ascii_uppercase();
    }
    w
}

#[derive(Debug, Clone)]
struct Node {
    code: String,
    level: &'static str,
    name: String,
    parent: String,
    aliases: String,
}

#[derive(Debug, Clone)]
struct Inst {
    id: String,
    name: String,
    city: String,
    country: String,
    lau_code: String,
    region: Option<usize>,
}

#[derive(Debug, Clone)]
struct Prof {
    id: String,
    surname: String,
    given: String,
    comma_form: bool,
    university: usize,
    field: usize,
    years: Vec<i32>,
    rank: &'static str,
}

#[derive(Debug, Clone)]
struct Journal {
    id: String,
    scs: Vec<&'static str>,
    impact: BTreeMap<i32, f64>,
}

/// A generated dataset, ready to be written to disk.
#[derive(Debug, Clone)]
pub struct Synth {
    nodes: Vec<Node>,
    populations: Vec<(String, u64)>,
    institutions: Vec<Inst>,
    professors: Vec<Prof>,
    journals: Vec<Journal>,
    /// One JSON document per line.
    publications: Vec<String>,
    gold: Vec<(String, u32, String)>,
    costs: Vec<(&'static str, f64, f64)>,
    weights: Vec<(i32, &'static str, f64)>,
    pub authorships: usize,
}

pub fn generate(params: &SynthParams) -> Synth {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    // Territory.
    let mut nodes = vec![Node {
        code: "IT".into(),
        level: "NATION",
        name: "Italy".into(),
        parent: String::new(),
        aliases: "Italia".into(),
    }];
    for (code, name) in MACRO {
        nodes.push(Node {
            code: code.into(),
            level: "NUTS1",
            name: name.into(),
            parent: "IT".into(),
            aliases: String::new(),
        });
    }
    let mut populations = Vec::new();
    let mut region_laus: Vec<Vec<(String, String)>> = Vec::new();
    let mut lau_counter = 0usize;
    for (code, name, macro_code, provinces, pop_k, capital) in REGIONS {
        nodes.push(Node {
            code: code.into(),
            level: "NUTS2",
            name: name.into(),
            parent: macro_code.into(),
            aliases: String::new(),
        });
        let mut laus = Vec::new();
        for p in 1..=provinces {
            // NUTS style: ITC41 … ITC49, ITC4A, ITC4B, …
            let prov = format!("{code}{}", char::from_digit(p as u32, 36).unwrap().to_ascii_uppercase());
            nodes.push(Node {
                code: prov.clone(),
                level: "NUTS3",
                name: format!("{name} province {p}"),
                parent: code.into(),
                aliases: String::new(),
            });
            for l in 1..=LAUS_PER_PROVINCE {
                let lau_code = format!("{prov}_{l:03}");
                let lau_name = if p == 1 && l == 1 {
                    capital.to_owned()
                } else {
                    lau_counter += 1;
                    format!("{}ano", word(lau_counter, 2))
                };
                nodes.push(Node {
                    code: lau_code.clone(),
                    level: "LAU",
                    name: lau_name.clone(),
                    parent: prov.clone(),
                    aliases: String::new(),
                });
                laus.push((lau_code, lau_name));
            }
        }
        // Split the regional population across municipalities.
        let weights: Vec<f64> = (0..laus.len()).map(|i| if i == 0 { 4.0 } else { rng.gen_range(0.5..2.0) }).collect();
        let total: f64 = weights.iter().sum();
        for ((lau, _), w) in laus.iter().zip(&weights) {
            populations.push((lau.clone(), ((pop_k as f64 * 1000.0) * w / total).round().max(1.0) as u64));
        }
        region_laus.push(laus);
    }

    // Institutions: universities (none in Valle d'Aosta), one research
    // institute per region, foreign partners and one unresolvable address.
    let mut institutions = Vec::new();
    let mut universities = Vec::new();
    for (r, (code, name, _, _, pop_k, _)) in REGIONS.iter().enumerate() {
        let n_univ = if *code == "ITC2" { 0 } else { 1 + (*pop_k / 3_000) as usize };
        for u in 0..n_univ {
            let (lau, city) =
                if u == 0 { region_laus[r][0].clone() } else { region_laus[r].choose(&mut rng).unwrap().clone() };
            universities.push(institutions.len());
            institutions.push(Inst {
                id: format!("U_{code}_{}", u + 1),
                name: format!("University of {name} {}", u + 1),
                city,
                country: "Italy".into(),
                lau_code: if u % 2 == 0 { String::new() } else { lau },
                region: Some(r),
            });
        }
        let (_, city) = region_laus[r].choose(&mut rng).unwrap().clone();
        institutions.push(Inst {
            id: format!("R_{code}"),
            name: format!("Research Institute {name}"),
            city,
            country: if r % 3 == 0 { "Italia".into() } else { "Italy".into() },
            lau_code: String::new(),
            region: Some(r),
        });
    }
    let domestic: Vec<usize> = (0..institutions.len()).collect();
    let unresolved = institutions.len();
    institutions.push(Inst {
        id: "X_UNRESOLVED".into(),
        name: "Institute of Nowhere".into(),
        city: "Atlantide".into(),
        country: "Italy".into(),
        lau_code: String::new(),
        region: None,
    });
    let mut foreign = Vec::new();
    for (i, (city, country)) in FOREIGN.iter().enumerate() {
        foreign.push(institutions.len());
        institutions.push(Inst {
            id: format!("F_{}", i + 1),
            name: format!("{city} Institute"),
            city: city.to_string(),
            country: country.to_string(),
            lau_code: String::new(),
            region: None,
        });
    }

    // Professors.
    let mut professors = Vec::new();
    for &u in &universities {
        for field in 0..SPECIALTIES.len() {
            let n = rng.gen_range(0..=params.professors_per_unit);
            for _ in 0..n {
                let idx = professors.len();
                let start = if rng.gen_bool(0.2) { rng.gen_range(2015..=2017) } else { WINDOW.0 };
                let first = if rng.gen_bool(0.1) { 2012 } else { start };
                let years: Vec<i32> = (first..=WINDOW.1).filter(|y| *y < WINDOW.0 || *y >= start).collect();
                professors.push(Prof {
                    id: format!("P{:05}", idx + 1),
                    surname: format!("{}ini", word(idx + 1, 2)),
                    given: GIVEN[rng.gen_range(0..GIVEN.len())].to_owned(),
                    comma_form: rng.gen_bool(0.8),
                    university: u,
                    field,
                    years,
                    rank: ["full", "associate", "assistant"][rng.gen_range(0..3)],
                });
            }
        }
    }
    let mut by_sc: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, p) in professors.iter().enumerate() {
        by_sc.entry(SPECIALTIES[p.field].1).or_default().push(i);
    }

    // Journals.
    let journals: Vec<Journal> = (0..30)
        .map(|j| Journal {
            id: format!("J{:03}", j + 1),
            scs: SC_SETS[j % SC_SETS.len()].to_vec(),
            impact: (WINDOW.0 - 1..=WINDOW.1)
                .map(|y| (y, (rng.gen_range(0.3..12.0f64) * 1000.0).round() / 1000.0))
                .collect(),
        })
        .collect();

    // Byline lengths.
    let mut lengths: Vec<usize> = (0..params.publications).map(|_| rng.gen_range(1..=params.max_authors)).collect();
    if let Some(target) = params.target_authorships {
        let mut total: usize = lengths.iter().sum();
        let mut i = 0;
        while total != target && !lengths.is_empty() {
            let k = i % lengths.len();
            if total < target && lengths[k] < params.max_authors.max(1) * 2 {
                lengths[k] += 1;
                total += 1;
            } else if total > target && lengths[k] > 1 {
                lengths[k] -= 1;
                total -= 1;
            }
            i += 1;
        }
    }

    let mut publications = Vec::with_capacity(params.publications);
    let mut gold = Vec::new();
    let mut authorships = 0;
    let mut external_counter = 0usize;
    for (n, &len) in lengths.iter().enumerate() {
        let pub_id = format!("W{:07}", n + 1);
        let year = if rng.gen_bool(0.03) { WINDOW.0 - 1 } else { rng.gen_range(WINDOW.0..=WINDOW.1) };
        let journal = &journals[rng.gen_range(0..journals.len())];
        let pool: Vec<usize> = journal.scs.iter().flat_map(|sc| by_sc.get(sc).into_iter().flatten().copied()).collect();
        let pool = if pool.is_empty() { (0..professors.len()).collect() } else { pool };
        let wanted = rng.gen_range(0..=3usize).min(len).min(pool.len());
        let mut chosen: Vec<usize> = pool.choose_multiple(&mut rng, wanted).copied().collect();
        chosen.sort_unstable();
        chosen.dedup();
        let mut positions: Vec<usize> = (0..len).collect();
        positions.shuffle(&mut rng);
        let slots: BTreeMap<usize, usize> = positions.into_iter().zip(chosen).collect();

        let mut byline = Vec::with_capacity(len);
        let mut any_domestic = false;
        for pos in 0..len {
            let (name, mut affs) = match slots.get(&pos) {
                Some(&p) => {
                    let prof = &professors[p];
                    if year >= WINDOW.0 {
                        gold.push((pub_id.clone(), pos as u32 + 1, prof.id.clone()));
                    }
                    let initial = &prof.given[..1];
                    let mut affs = vec![institutions[prof.university].id.clone()];
                    if rng.gen_bool(0.1) {
                        let r = institutions[prof.university].region.unwrap();
                        affs.push(format!("R_{}", REGIONS[r].0));
                    }
                    (format!("{}, {initial}.", prof.surname), affs)
                }
                None => {
                    external_counter += 1;
                    let name =
                        format!("{}son, {}.", word(external_counter, 2), &GIVEN[external_counter % GIVEN.len()][..1]);
                    let n_aff = if rng.gen_bool(0.85) { 1 } else { rng.gen_range(2..=3) };
                    let affs: Vec<String> = (0..n_aff)
                        .map(|_| {
                            let i = if rng.gen_bool(params.foreign_share) {
                                *foreign.choose(&mut rng).unwrap()
                            } else if rng.gen_bool(0.01) {
                                unresolved
                            } else {
                                *domestic.choose(&mut rng).unwrap()
                            };
                            institutions[i].id.clone()
                        })
                        .collect();
                    (name, affs)
                }
            };
            affs.dedup();
            any_domestic |= affs.iter().any(|a| !a.starts_with("F_"));
            byline.push((name, affs));
        }
        if !any_domestic {
            let u = universities[rng.gen_range(0..universities.len())];
            byline[0].1 = vec![institutions[u].id.clone()];
        }
        authorships += len;
        let citations: u64 = if rng.gen_bool(0.25) { 0 } else { rng.gen_range(0.0..5.5f64).exp().floor() as u64 };
        let doi = if rng.gen_bool(0.8) { Some(format!("10.9999/synth.{}", n + 1)) } else { None };
        let doc = json!({
            "pub_id": pub_id,
            "year": year,
            "doi": doi,
            "journal_id": journal.id,
            "subject_categories": journal.scs,
            "citation_count": citations,
            "byline": byline.iter().enumerate().map(|(i, (name, affs))| json!({
                "name": name,
                "position": i + 1,
                "affiliations": affs,
            })).collect::<Vec<_>>(),
        });
        publications.push(doc.to_string());
    }

    let costs = SPECIALTIES
        .iter()
        // Thousands of euro per year.
        .map(|(_, _, sds)| (*sds, rng.gen_range(55.0..95.0f64).round(), rng.gen_range(8.0..30.0f64).round()))
        .collect();
    let mut weights = Vec::new();
    for year in WINDOW.0..=WINDOW.1 {
        for sc in ["VIR", "IMM", "CAR", "ONC", "GEN"] {
            weights.push((year, sc, (rng.gen_range(0.4..0.9f64) * 100.0).round() / 100.0));
        }
    }

    Synth { nodes, populations, institutions, professors, journals, publications, gold, costs, weights, authorships }
}

impl Synth {
    pub fn publication_count(&self) -> usize {
        self.publications.len()
    }

    pub fn professor_count(&self) -> usize {
        self.professors.len()
    }

    /// Writes every input file plus `gold.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> std::io::Result<InputPaths> {
        std::fs::create_dir_all(dir)?;
        let paths = InputPaths::in_dir(dir);

        let mut w = csv::Writer::from_path(&paths.gazetteer)?;
        w.write_record(["code", "level", "name", "parent_code", "aliases"])?;
        for n in &self.nodes {
            w.write_record([&n.code, n.level, &n.name, &n.parent, &n.aliases])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(&paths.population)?;
        w.write_record(["code", "population", "reference_year"])?;
        for (code, pop) in &self.populations {
            w.write_record([code.as_str(), &pop.to_string(), "2019"])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(&paths.institutions)?;
        w.write_record(["institution_id", "name", "city", "country", "lau_code"])?;
        for i in &self.institutions {
            w.write_record([&i.id, &i.name, &i.city, &i.country, &i.lau_code])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(&paths.journals)?;
        w.write_record(["journal_id", "year", "impact_factor", "sc_codes"])?;
        for j in &self.journals {
            for (year, v) in &j.impact {
                w.write_record([j.id.as_str(), &year.to_string(), &v.to_string(), &j.scs.join(";")])?;
            }
        }
        w.flush()?;

        let mut out = std::io::BufWriter::new(std::fs::File::create(&paths.corpus)?);
        for line in &self.publications {
            writeln!(out, "{line}")?;
        }
        out.flush()?;

        let mut w = csv::Writer::from_path(&paths.roster)?;
        w.write_record(["professor_id", "full_name", "university_id", "sds_code", "active_years", "rank"])?;
        for p in &self.professors {
            let full_name =
                if p.comma_form { format!("{}, {}", p.surname, p.given) } else { format!("{} {}", p.given, p.surname) };
            let years: Vec<String> = p.years.iter().map(ToString::to_string).collect();
            w.write_record([
                p.id.as_str(),
                &full_name,
                &self.institutions[p.university].id,
                SPECIALTIES[p.field].2,
                &years.join(";"),
                p.rank,
            ])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(&paths.costs)?;
        w.write_record(["sds_code", "w_r", "k"])?;
        for (sds, salary, k) in &self.costs {
            w.write_record([sds.to_string(), salary.to_string(), k.to_string()])?;
        }
        w.flush()?;

        let weights_path = paths.weights.clone().expect("in_dir sets a weights path");
        let mut w = csv::Writer::from_path(&weights_path)?;
        w.write_record(["year", "sc_code", "citation_weight"])?;
        for (year, sc, weight) in &self.weights {
            w.write_record([year.to_string(), sc.to_string(), weight.to_string()])?;
        }
        w.flush()?;

        let config = json!({
            "country": "Italy",
            "observation_window": {"start": WINDOW.0, "end": WINDOW.1},
            "census_date": "2019-12-31",
            "specialties": SPECIALTIES.iter().map(|(name, sc, sds)| json!({
                "name": name, "sc_codes": [sc], "sds_codes": [sds],
            })).collect::<Vec<_>>(),
            "match_rules": {
                "require_university_match": true,
                "name_policy": "surname-initials",
                "ambiguity_policy": "reject-ambiguous",
            },
            "score_levels": ["nuts3", "nuts2", "nuts1"],
        });
        std::fs::write(&paths.specialties, serde_json::to_string_pretty(&config)? + "\n")?;

        let mut w = csv::Writer::from_path(dir.join("gold.csv"))?;
        w.write_record(["pub_id", "position", "professor_id"])?;
        for (pub_id, pos, prof) in &self.gold {
            w.write_record([pub_id.as_str(), &pos.to_string(), prof])?;
        }
        w.flush()?;
        Ok(paths)
    }
}
