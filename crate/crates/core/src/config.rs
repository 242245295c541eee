//! Run configuration: analysed specialties, observation window, census
//! date, matching rules and the territorial levels to score.

use std::collections::BTreeSet;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::corpus::{CorpusError, Publication, Year};
use crate::matching::MatchRuleConfig;
use crate::territory::Level;

/// Reserved specialty key for averages over all specialties.
pub const OVERALL: &str = "overall";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Specialty {
    pub name: String,
    /// Journal subject categories mapped to the specialty.
    pub sc_codes: BTreeSet<String>,
    /// Professor field codes mapped to the specialty.
    pub sds_codes: BTreeSet<String>,
}

impl Specialty {
    pub fn covers_publication(&self, p: &Publication) -> bool {
        p.subject_categories.iter().any(|sc| self.sc_codes.contains(sc))
    }

    pub fn covers_field(&self, sds_code: &str) -> bool {
        self.sds_codes.contains(sds_code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationWindow {
    pub start: Year,
    pub end: Year,
}

impl ObservationWindow {
    pub fn bounds(&self) -> (Year, Year) {
        (self.start, self.end)
    }
}

fn default_levels() -> Vec<Level> {
    vec![Level::Nuts3, Level::Nuts2, Level::Nuts1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecialtyConfig {
    /// Analysis country; must match the gazetteer's NATION node name or
    /// one of its aliases.
    pub country: String,
    pub observation_window: ObservationWindow,
    /// Date at which citations were counted. Recorded in the run manifest.
    pub census_date: NaiveDate,
    pub specialties: Vec<Specialty>,
    /// Required: production runs never fall back to implicit rules.
    pub match_rules: MatchRuleConfig,
    #[serde(default = "default_levels")]
    pub score_levels: Vec<Level>,
}

impl SpecialtyConfig {
    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        let text = std::fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_owned(), source })?;
        let config: SpecialtyConfig = serde_json::from_str(&text)
            .map_err(|e| CorpusError::Config { path: path.to_owned(), message: e.to_string() })?;
        config.validate().map_err(|message| CorpusError::Config { path: path.to_owned(), message })?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        let w = self.observation_window;
        if w.start > w.end {
            return Err(format!("observation window start {} is after end {}", w.start, w.end));
        }
        let mut names = BTreeSet::new();
        for s in &self.specialties {
            if s.name.trim().is_empty() {
                return Err("specialty with empty name".into());
            }
            if s.name.eq_ignore_ascii_case(OVERALL) {
                return Err(format!("`{OVERALL}` is reserved and cannot name a specialty"));
            }
            if !names.insert(s.name.as_str()) {
                return Err(format!("duplicate specialty `{}`", s.name));
            }
            if s.sc_codes.is_empty() {
                return Err(format!("specialty `{}` lists no subject category", s.name));
            }
        }
        if self.score_levels.contains(&Level::Nation) {
            return Err("NATION cannot be a scoring level".into());
        }
        Ok(())
    }

    pub fn specialty(&self, name: &str) -> Option<&Specialty> {
        self.specialties.iter().find(|s| s.name == name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = r#"{
        "country": "Italy",
        "observation_window": {"start": 2014, "end": 2018},
        "census_date": "2019-12-31",
        "specialties": [
            {"name": "Virology", "sc_codes": ["VIR"], "sds_codes": ["MED/07"]},
            {"name": "Immunology", "sc_codes": ["IMM", "VIR"], "sds_codes": ["MED/04"]}
        ],
        "match_rules": {"require_university_match": true, "name_policy": "surname-initials", "ambiguity_policy": "reject-ambiguous"}
    }"#;

    #[test]
    fn parses_and_defaults_levels() {
        let c: SpecialtyConfig = serde_json::from_str(CONFIG).unwrap();
        c.validate().unwrap();
        assert_eq!(c.score_levels, vec![Level::Nuts3, Level::Nuts2, Level::Nuts1]);
        assert_eq!(c.census_date, NaiveDate::from_ymd_opt(2019, 12, 31).unwrap());
        assert_eq!(c.match_rules, MatchRuleConfig::default());
        assert!(c.specialty("Virology").unwrap().covers_field("MED/07"));
    }

    #[test]
    fn match_rules_are_mandatory() {
        let mut v: serde_json::Value = serde_json::from_str(CONFIG).unwrap();
        v.as_object_mut().unwrap().remove("match_rules");
        assert!(serde_json::from_value::<SpecialtyConfig>(v).is_err());
    }

    #[test]
    fn validation_failures() {
        let mut c: SpecialtyConfig = serde_json::from_str(CONFIG).unwrap();
        c.observation_window = ObservationWindow { start: 2019, end: 2014 };
        assert!(c.validate().is_err());

        let mut c: SpecialtyConfig = serde_json::from_str(CONFIG).unwrap();
        c.specialties[1].name = "Virology".into();
        assert!(c.validate().unwrap_err().contains("duplicate"));

        let mut c: SpecialtyConfig = serde_json::from_str(CONFIG).unwrap();
        c.specialties[1].name = "Overall".into();
        assert!(c.validate().is_err());
    }
}
