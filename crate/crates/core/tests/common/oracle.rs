//! Brute-force recomputation of FSS and KC straight from
//! the input files. Deliberately shares no code with the library: files are
//! parsed as untyped JSON / CSV records and every rule is re-derived here in
//! its plainest closed form.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde_json::Value;

type Row = BTreeMap<String, String>;

fn rows(path: &Path) -> Vec<Row> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path).unwrap();
    let headers = r.headers().unwrap().clone();
    r.records()
        .map(|rec| {
            headers.iter().zip(rec.unwrap().iter()).map(|(h, v)| (h.to_string(), v.trim().to_string())).collect()
        })
        .collect()
}

fn key(s: &str) -> String {
    s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect()
}

/// Closed-form positional weights.
pub fn weights(n: usize, intramural: bool) -> Vec<f64> {
    match (n, intramural) {
        (1, _) => vec![1.0],
        (2, _) => vec![0.5, 0.5],
        (_, true) => (0..n).map(|i| if i == 0 || i == n - 1 { 0.4 } else { 0.2 / (n - 2) as f64 }).collect(),
        (3, false) => vec![1.0 / 3.0; 3],
        (4, false) => vec![1.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 3.0],
        (_, false) => (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    0.3
                } else if i == 1 || i == n - 2 {
                    0.15
                } else {
                    0.1 / (n - 4) as f64
                }
            })
            .collect(),
    }
}

pub struct Pub {
    pub id: String,
    pub year: i64,
    pub journal: String,
    pub scs: Vec<String>,
    pub citations: f64,
    /// (affiliations) per author in byline order.
    pub authors: Vec<Vec<String>>,
}

#[derive(Default)]
pub struct Oracle {
    /// Impact `c` per publication.
    pub impact: BTreeMap<String, f64>,
    /// Raw FSS per professor.
    pub raw_fss: BTreeMap<String, f64>,
    pub normalized_fss: BTreeMap<String, f64>,
    /// (specialty, territory code) → KC, for every gazetteer node.
    pub kc: BTreeMap<(String, String), f64>,
    /// (specialty, territory code) → normalized KC per capita.
    pub normalized_kc_pc: BTreeMap<(String, String), f64>,
    /// (specialty, territory code) → mean normalized FSS of its professors.
    pub mean_fss: BTreeMap<(String, String), f64>,
    /// territory code → level
    pub levels: BTreeMap<String, String>,
    pub specialties: Vec<String>,
    /// Publications of each specialty, and of any specialty.
    pub specialty_pubs: BTreeMap<String, BTreeSet<String>>,
    pub any_specialty_pubs: BTreeSet<String>,
}

pub fn run(dir: &Path) -> Oracle {
    let config: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("specialties.json")).unwrap()).unwrap();
    let start = config["observation_window"]["start"].as_i64().unwrap();
    let end = config["observation_window"]["end"].as_i64().unwrap();

    // Gazetteer: parent links, LAU name lookup, domestic country names.
    let gaz = rows(&dir.join("gazetteer.csv"));
    let mut parent: BTreeMap<String, String> = BTreeMap::new();
    let mut levels = BTreeMap::new();
    let mut city_lau: BTreeMap<String, String> = BTreeMap::new();
    let mut domestic: BTreeSet<String> = BTreeSet::new();
    for r in &gaz {
        levels.insert(r["code"].clone(), r["level"].to_uppercase());
        if !r["parent_code"].is_empty() {
            parent.insert(r["code"].clone(), r["parent_code"].clone());
        }
        let names = std::iter::once(r["name"].as_str()).chain(r["aliases"].split(';').filter(|s| !s.is_empty()));
        match r["level"].to_uppercase().as_str() {
            "LAU" => names.for_each(|n| {
                city_lau.insert(key(n), r["code"].clone());
            }),
            "NATION" => names.for_each(|n| {
                domestic.insert(key(n));
            }),
            _ => {}
        }
    }
    let ancestors = |code: &str| {
        let mut out = vec![code.to_string()];
        let mut c = code.to_string();
        while let Some(p) = parent.get(&c) {
            out.push(p.clone());
            c = p.clone();
        }
        out
    };

    // Population: LAU rows summed upward (the fixtures load LAUs only).
    let mut pop: BTreeMap<String, f64> = BTreeMap::new();
    for r in rows(&dir.join("population.csv")) {
        let v: f64 = r["population"].parse().unwrap();
        for a in ancestors(&r["code"]) {
            *pop.entry(a).or_insert(0.0) += v;
        }
    }

    // Institution → LAU (None: foreign or unresolved).
    let mut inst_lau: BTreeMap<String, Option<String>> = BTreeMap::new();
    for r in rows(&dir.join("institutions.csv")) {
        let lau = if !r["lau_code"].is_empty() {
            Some(r["lau_code"].clone())
        } else if domestic.contains(&key(&r["country"])) {
            city_lau.get(&key(&r["city"])).cloned()
        } else {
            None
        };
        inst_lau.insert(r["institution_id"].clone(), lau);
    }

    let mut impact_factor: BTreeMap<(String, i64), f64> = BTreeMap::new();
    for r in rows(&dir.join("journals.csv")) {
        impact_factor
            .insert((r["journal_id"].clone(), r["year"].parse().unwrap()), r["impact_factor"].parse().unwrap());
    }
    let mut cw: BTreeMap<(i64, String), f64> = BTreeMap::new();
    for r in rows(&dir.join("weights.csv")) {
        cw.insert((r["year"].parse().unwrap(), r["sc_code"].clone()), r["citation_weight"].parse().unwrap());
    }

    let pubs: Vec<Pub> = std::fs::read_to_string(dir.join("publications.jsonl"))
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            let mut byline: Vec<(i64, Vec<String>)> = v["byline"]
                .as_array()
                .unwrap()
                .iter()
                .map(|a| {
                    (
                        a["position"].as_i64().unwrap(),
                        a["affiliations"].as_array().unwrap().iter().map(|x| x.as_str().unwrap().to_string()).collect(),
                    )
                })
                .collect();
            byline.sort_by_key(|b| b.0);
            Pub {
                id: v["pub_id"].as_str().unwrap().to_string(),
                year: v["year"].as_i64().unwrap(),
                journal: v["journal_id"].as_str().unwrap().to_string(),
                scs: v["subject_categories"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|x| x.as_str().unwrap().to_string())
                    .collect(),
                citations: v["citation_count"].as_f64().unwrap(),
                authors: byline.into_iter().map(|b| b.1).collect(),
            }
        })
        .filter(|p| (start..=end).contains(&p.year))
        .collect();

    // Field baselines, brute force per cell.
    let mut o = Oracle { levels, ..Oracle::default() };
    for p in &pubs {
        let mut fnc = 0.0;
        let mut fnif = 0.0;
        let mut w = 0.0;
        let my_if = impact_factor[&(p.journal.clone(), p.year)];
        for sc in &p.scs {
            let cell: Vec<&Pub> = pubs.iter().filter(|q| q.year == p.year && q.scs.contains(sc)).collect();
            let cited: Vec<f64> = cell.iter().map(|q| q.citations).filter(|c| *c > 0.0).collect();
            if !cited.is_empty() {
                fnc += p.citations / (cited.iter().sum::<f64>() / cited.len() as f64);
            }
            let mean_if =
                cell.iter().map(|q| impact_factor[&(q.journal.clone(), q.year)]).sum::<f64>() / cell.len() as f64;
            if mean_if > 0.0 {
                fnif += my_if / mean_if;
            }
            w += cw[&(p.year, sc.clone())];
        }
        let k = p.scs.len() as f64;
        let (fnc, fnif, w) = (fnc / k, fnif / k, w / k);
        o.impact.insert(p.id.clone(), w * fnc + (1.0 - w) * fnif);
    }

    let author_weights = |p: &Pub| {
        let all: BTreeSet<&String> = p.authors.iter().flatten().collect();
        weights(p.authors.len(), p.authors.len() == 1 || all.len() == 1)
    };

    // FSS, with attribution taken from the gold standard.
    let gold: BTreeMap<(String, usize), String> = rows(&dir.join("gold.csv"))
        .into_iter()
        .map(|r| ((r["pub_id"].clone(), r["position"].parse().unwrap()), r["professor_id"].clone()))
        .collect();
    let costs: BTreeMap<String, (f64, f64)> = rows(&dir.join("costs.csv"))
        .into_iter()
        .map(|r| (r["sds_code"].clone(), (r["w_r"].parse().unwrap(), r["k"].parse().unwrap())))
        .collect();
    let roster = rows(&dir.join("roster.csv"));
    let mut field_of = BTreeMap::new();
    for prof in &roster {
        let id = &prof["professor_id"];
        let t = prof["active_years"]
            .split(';')
            .map(|y| y.trim().parse::<i64>().unwrap())
            .filter(|y| (start..=end).contains(y))
            .count() as f64;
        let mut sum = 0.0;
        for p in &pubs {
            let ws = author_weights(p);
            for (pos, w) in ws.iter().enumerate() {
                if gold.get(&(p.id.clone(), pos + 1)) == Some(id) {
                    sum += o.impact[&p.id] * w;
                }
            }
        }
        let (w_r, k) = costs[&prof["sds_code"]];
        o.raw_fss.insert(id.clone(), (1.0 / (w_r / 2.0 + k)) * (1.0 / t) * sum);
        field_of.insert(id.clone(), prof["sds_code"].clone());
    }
    for prof in &roster {
        let id = &prof["professor_id"];
        let peers: Vec<f64> = roster
            .iter()
            .filter(|q| q["sds_code"] == prof["sds_code"])
            .map(|q| o.raw_fss[&q["professor_id"]])
            .filter(|v| *v > 0.0)
            .collect();
        let v = o.raw_fss[id];
        let n = if v > 0.0 { v / (peers.iter().sum::<f64>() / peers.len() as f64) } else { 0.0 };
        o.normalized_fss.insert(id.clone(), n);
    }

    // KC per specialty, then per-capita normalization.
    let nation = gaz.iter().find(|r| r["level"].eq_ignore_ascii_case("NATION")).unwrap()["code"].clone();
    for s in config["specialties"].as_array().unwrap() {
        let name = s["name"].as_str().unwrap().to_string();
        o.specialties.push(name.clone());
        let scs: BTreeSet<&str> = s["sc_codes"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
        let sds: BTreeSet<&str> = s["sds_codes"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
        let mut ids = BTreeSet::new();
        for p in pubs.iter().filter(|p| p.scs.iter().any(|sc| scs.contains(sc.as_str()))) {
            ids.insert(p.id.clone());
            o.any_specialty_pubs.insert(p.id.clone());
            let ws = author_weights(p);
            for (affs, w) in p.authors.iter().zip(&ws) {
                for inst in affs {
                    if let Some(lau) = &inst_lau[inst] {
                        for t in ancestors(lau) {
                            *o.kc.entry((name.clone(), t)).or_insert(0.0) += o.impact[&p.id] * w / affs.len() as f64;
                        }
                    }
                }
            }
        }
        o.specialty_pubs.insert(name.clone(), ids);
        let national = o.kc.get(&(name.clone(), nation.clone())).copied().unwrap_or(0.0) / (pop[&nation] / 1e6);
        for code in o.levels.keys() {
            let kc = o.kc.get(&(name.clone(), code.clone())).copied().unwrap_or(0.0);
            let v = if national > 0.0 { (kc / (pop[code] / 1e6)) / national } else { 0.0 };
            o.normalized_kc_pc.insert((name.clone(), code.clone()), v);
        }
        let insts: BTreeMap<String, Option<String>> = inst_lau.clone();
        for code in o.levels.keys() {
            let members: Vec<f64> = roster
                .iter()
                .filter(|q| sds.contains(q["sds_code"].as_str()))
                .filter(|q| insts[&q["university_id"]].as_ref().is_some_and(|lau| ancestors(lau).contains(code)))
                .map(|q| o.normalized_fss[&q["professor_id"]])
                .collect();
            if !members.is_empty() {
                o.mean_fss.insert((name.clone(), code.clone()), members.iter().sum::<f64>() / members.len() as f64);
            }
        }
    }
    let _ = field_of;
    o
}

/// Relative-or-absolute closeness used by every oracle comparison.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}
