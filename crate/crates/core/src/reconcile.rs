//! Resolution of raw affiliation strings to canonical institutions and
//! territories through a controlled vocabulary of prioritized rules.
//!
//! Matching is deliberately simple and auditable: addresses and patterns are
//! put into one normal form, then exact or substring rules apply with
//! priority precedence. Unmatched addresses are recorded and never guessed;
//! [`unmatched_report`] exists so the vocabulary can be grown instead.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::corpus::{Corpus, PublicationRecord, TerritoryRegistry};

#[derive(Debug, Error)]
pub enum ReconcileError {
    #[error("cannot normalize an empty affiliation string")]
    EmptyAffiliation,
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path} line {line}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("duplicate inst_id '{0}'")]
    DuplicateInstitution(String),
    #[error("duplicate rule_id '{0}'")]
    DuplicateRule(String),
    #[error("institution '{inst_id}' references unknown province '{province_code}'")]
    UnknownProvince {
        inst_id: String,
        province_code: String,
    },
    #[error("rule '{rule_id}' references unknown institution '{inst_id}'")]
    UnknownInstitution { rule_id: String, inst_id: String },
    #[error("rule '{rule_id}': pattern '{pattern}' is not in normalized form (expected '{expected}')")]
    UnnormalizedPattern {
        rule_id: String,
        pattern: String,
        expected: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstitutionKind {
    University,
    ResearchInstitution,
    ResearchHospital,
    Other,
}

impl InstitutionKind {
    fn parse(s: &str) -> Option<InstitutionKind> {
        match s {
            "university" => Some(InstitutionKind::University),
            "research_institution" => Some(InstitutionKind::ResearchInstitution),
            "research_hospital" => Some(InstitutionKind::ResearchHospital),
            "other" => Some(InstitutionKind::Other),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Institution {
    pub inst_id: String,
    pub canonical_name: String,
    pub province_code: String,
    pub kind: InstitutionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    Exact,
    Substring,
}

/// One vocabulary entry. Patterns are stored pre-normalized; the loader
/// re-normalizes and rejects any drift. Lower priority wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReconciliationRule {
    pub rule_id: String,
    pub match_mode: MatchMode,
    pub pattern: String,
    pub inst_id: String,
    pub priority: i32,
}

/// Validated rules plus the institutions they point at. Immutable after
/// load; matching is a pure function of this set.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<ReconciliationRule>,
    pub institutions: BTreeMap<String, Institution>,
}

impl RuleSet {
    pub fn new(
        rules: Vec<ReconciliationRule>,
        institutions: Vec<Institution>,
        territories: &TerritoryRegistry,
    ) -> Result<RuleSet, ReconcileError> {
        let mut by_id = BTreeMap::new();
        for inst in institutions {
            if !territories.provinces.contains_key(&inst.province_code) {
                return Err(ReconcileError::UnknownProvince {
                    inst_id: inst.inst_id.clone(),
                    province_code: inst.province_code.clone(),
                });
            }
            let id = inst.inst_id.clone();
            if by_id.insert(id.clone(), inst).is_some() {
                return Err(ReconcileError::DuplicateInstitution(id));
            }
        }
        let mut seen = BTreeSet::new();
        for rule in &rules {
            if !seen.insert(rule.rule_id.clone()) {
                return Err(ReconcileError::DuplicateRule(rule.rule_id.clone()));
            }
            if !by_id.contains_key(&rule.inst_id) {
                return Err(ReconcileError::UnknownInstitution {
                    rule_id: rule.rule_id.clone(),
                    inst_id: rule.inst_id.clone(),
                });
            }
            let expected = normalize_affiliation(&rule.pattern)?;
            if expected != rule.pattern {
                return Err(ReconcileError::UnnormalizedPattern {
                    rule_id: rule.rule_id.clone(),
                    pattern: rule.pattern.clone(),
                    expected,
                });
            }
        }
        Ok(RuleSet {
            rules,
            institutions: by_id,
        })
    }
}

/// Puts an affiliation string into the matching normal form: lowercase,
/// diacritics folded to base letters, punctuation replaced by spaces, runs
/// of whitespace collapsed. Idempotent.
pub fn normalize_affiliation(raw: &str) -> Result<String, ReconcileError> {
    if raw.is_empty() {
        return Err(ReconcileError::EmptyAffiliation);
    }
    let folded: String = raw
        .nfkd()
        .filter(|c| !is_combining_mark(*c))
        .collect::<String>()
        .to_lowercase();
    let mut out = String::with_capacity(folded.len());
    let mut pending_space = false;
    for c in folded.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.push(c);
        } else {
            pending_space = true;
        }
    }
    Ok(out)
}

/// Picks the winning institution for one normalized address, or `None` when
/// no rule matches. Precedence: lowest priority, then longest pattern, then
/// smallest rule_id.
pub fn match_affiliation<'a>(normalized: &str, rules: &'a RuleSet) -> Option<&'a str> {
    rules
        .rules
        .iter()
        .filter(|rule| match rule.match_mode {
            MatchMode::Exact => normalized == rule.pattern,
            MatchMode::Substring => normalized.contains(&rule.pattern),
        })
        .min_by(|a, b| {
            a.priority
                .cmp(&b.priority)
                .then(b.pattern.len().cmp(&a.pattern.len()))
                .then(a.rule_id.cmp(&b.rule_id))
        })
        .map(|rule| rule.inst_id.as_str())
}

/// Territorial attribution of a single publication. Provinces and regions
/// are sets: co-author institutions in the same territory count it once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributionResult {
    pub pub_id: String,
    /// (index into raw_affiliations, matched inst_id)
    pub matched: Vec<(usize, String)>,
    pub unmatched: Vec<usize>,
    pub provinces: BTreeSet<String>,
    pub regions: BTreeSet<String>,
}

/// Normalizes and matches each raw affiliation independently, then takes
/// the set image through institutions to provinces and regions.
pub fn attribute_publication(
    record: &PublicationRecord,
    rules: &RuleSet,
    territories: &TerritoryRegistry,
) -> AttributionResult {
    let mut result = AttributionResult {
        pub_id: record.pub_id.clone(),
        ..AttributionResult::default()
    };
    for (index, raw) in record.raw_affiliations.iter().enumerate() {
        let Ok(normalized) = normalize_affiliation(raw) else {
            result.unmatched.push(index);
            continue;
        };
        match match_affiliation(&normalized, rules) {
            Some(inst_id) => {
                let institution = &rules.institutions[inst_id];
                result.provinces.insert(institution.province_code.clone());
                if let Some(region) = territories.region_of(&institution.province_code) {
                    result.regions.insert(region.to_string());
                }
                result.matched.push((index, inst_id.to_string()));
            }
            None => result.unmatched.push(index),
        }
    }
    result
}

/// Distinct unmatched normalized strings across the in-scope corpus, sorted
/// by descending frequency then ascending string. A rule-authoring aid.
pub fn unmatched_report(corpus: &Corpus, rules: &RuleSet) -> Vec<(String, u64)> {
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for record in corpus.scope_filter() {
        for raw in &record.raw_affiliations {
            let Ok(normalized) = normalize_affiliation(raw) else {
                continue;
            };
            if match_affiliation(&normalized, rules).is_none() {
                *counts.entry(normalized).or_default() += 1;
            }
        }
    }
    let mut out: Vec<(String, u64)> = counts.into_iter().collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    out
}

// ---------------------------------------------------------------------------
// File loading
// ---------------------------------------------------------------------------

fn row_err(path: &Path, line: u64, message: impl Into<String>) -> ReconcileError {
    ReconcileError::Row {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn load_rule_set(
    institution_path: &Path,
    rules_path: &Path,
    territories: &TerritoryRegistry,
) -> Result<RuleSet, ReconcileError> {
    let institutions = load_institutions(institution_path)?;
    let rules = load_rules(rules_path)?;
    RuleSet::new(rules, institutions, territories)
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, ReconcileError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| ReconcileError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

fn load_institutions(path: &Path) -> Result<Vec<Institution>, ReconcileError> {
    #[derive(Deserialize)]
    struct Row {
        inst_id: String,
        canonical_name: String,
        province_code: String,
        kind: String,
    }
    let mut out = Vec::new();
    for (idx, row) in reader(path)?.deserialize::<Row>().enumerate() {
        let line = idx as u64 + 2;
        let row = row.map_err(|e| row_err(path, line, e.to_string()))?;
        let kind = InstitutionKind::parse(&row.kind)
            .ok_or_else(|| row_err(path, line, format!("unknown institution kind '{}'", row.kind)))?;
        out.push(Institution {
            inst_id: row.inst_id,
            canonical_name: row.canonical_name,
            province_code: row.province_code,
            kind,
        });
    }
    Ok(out)
}

fn load_rules(path: &Path) -> Result<Vec<ReconciliationRule>, ReconcileError> {
    #[derive(Deserialize)]
    struct Row {
        rule_id: String,
        match_mode: String,
        pattern: String,
        inst_id: String,
        priority: i32,
    }
    let mut out = Vec::new();
    for (idx, row) in reader(path)?.deserialize::<Row>().enumerate() {
        let line = idx as u64 + 2;
        let row = row.map_err(|e| row_err(path, line, e.to_string()))?;
        let match_mode = match row.match_mode.as_str() {
            "exact" => MatchMode::Exact,
            "substring" => MatchMode::Substring,
            other => return Err(row_err(path, line, format!("unknown match_mode '{other}'"))),
        };
        out.push(ReconciliationRule {
            rule_id: row.rule_id,
            match_mode,
            pattern: row.pattern,
            inst_id: row.inst_id,
            priority: row.priority,
        });
    }
    Ok(out)
}

/// Writes the unmatched report as CSV (`normalized_string,frequency`).
pub fn write_unmatched_report<W: std::io::Write>(
    entries: &[(String, u64)],
    writer: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["normalized_string", "frequency"])?;
    for (text, freq) in entries {
        w.write_record([text.as_str(), &freq.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DocType;

    fn territories() -> TerritoryRegistry {
        crate::corpus::tests::test_territories()
    }

    fn institution(inst_id: &str, province: &str) -> Institution {
        Institution {
            inst_id: inst_id.to_string(),
            canonical_name: inst_id.to_string(),
            province_code: province.to_string(),
            kind: InstitutionKind::University,
        }
    }

    fn rule(rule_id: &str, mode: MatchMode, pattern: &str, inst: &str, priority: i32) -> ReconciliationRule {
        ReconciliationRule {
            rule_id: rule_id.to_string(),
            match_mode: mode,
            pattern: pattern.to_string(),
            inst_id: inst.to_string(),
            priority,
        }
    }

    fn rules_fixture() -> RuleSet {
        RuleSet::new(
            vec![
                rule("r1", MatchMode::Substring, "univ of milan", "UMI", 10),
                rule("r2", MatchMode::Substring, "polytechnic of milan", "PMI", 10),
                rule("r3", MatchMode::Substring, "univ of rome tor vergata", "UTV", 10),
                rule("r4", MatchMode::Exact, "iasi cnr roma", "CNR", 5),
            ],
            vec![
                institution("UMI", "MI"),
                institution("PMI", "MI"),
                institution("UTV", "RM"),
                institution("CNR", "RM"),
            ],
            &territories(),
        )
        .unwrap()
    }

    #[test]
    fn normalize_strips_punctuation_and_case() {
        assert_eq!(
            normalize_affiliation("Univ. of Rome 'Tor Vergata', Dept of Eng.").unwrap(),
            "univ of rome tor vergata dept of eng"
        );
    }

    #[test]
    fn normalize_collapses_whitespace() {
        assert_eq!(normalize_affiliation("IASI-CNR,  Roma").unwrap(), "iasi cnr roma");
    }

    #[test]
    fn normalize_folds_diacritics() {
        assert_eq!(normalize_affiliation("già normalizzato").unwrap(), "gia normalizzato");
    }

    #[test]
    fn normalize_rejects_empty_input() {
        assert!(matches!(
            normalize_affiliation(""),
            Err(ReconcileError::EmptyAffiliation)
        ));
    }

    #[test]
    fn substring_rule_matches_containment() {
        let rules = rules_fixture();
        assert_eq!(
            match_affiliation("univ of rome tor vergata dept of eng", &rules),
            Some("UTV")
        );
    }

    #[test]
    fn lowest_priority_wins() {
        let rules = RuleSet::new(
            vec![
                rule("a", MatchMode::Substring, "milan", "UMI", 10),
                rule("b", MatchMode::Substring, "milan", "PMI", 5),
            ],
            vec![institution("UMI", "MI"), institution("PMI", "MI")],
            &territories(),
        )
        .unwrap();
        assert_eq!(match_affiliation("univ milan", &rules), Some("PMI"));
    }

    #[test]
    fn priority_ties_break_on_longest_pattern_then_rule_id() {
        let rules = RuleSet::new(
            vec![
                rule("z", MatchMode::Substring, "milan", "UMI", 5),
                rule("a", MatchMode::Substring, "univ milan", "PMI", 5),
            ],
            vec![institution("UMI", "MI"), institution("PMI", "MI")],
            &territories(),
        )
        .unwrap();
        assert_eq!(match_affiliation("the univ milan campus", &rules), Some("PMI"));

        let tied = RuleSet::new(
            vec![
                rule("m2", MatchMode::Substring, "milan", "UMI", 5),
                rule("m1", MatchMode::Substring, "milan", "PMI", 5),
            ],
            vec![institution("UMI", "MI"), institution("PMI", "MI")],
            &territories(),
        )
        .unwrap();
        assert_eq!(match_affiliation("milan", &tied), Some("PMI"));
    }

    #[test]
    fn no_match_is_a_value() {
        let rules = rules_fixture();
        assert_eq!(match_affiliation("unknown research center", &rules), None);
    }

    #[test]
    fn unnormalized_pattern_is_rejected_at_load() {
        let err = RuleSet::new(
            vec![rule("r1", MatchMode::Substring, "Univ. Milan", "UMI", 10)],
            vec![institution("UMI", "MI")],
            &territories(),
        )
        .unwrap_err();
        assert!(matches!(err, ReconcileError::UnnormalizedPattern { .. }));
    }

    fn record_with(affiliations: &[&str]) -> PublicationRecord {
        PublicationRecord {
            pub_id: "P1".to_string(),
            year: 2008,
            doc_type: DocType::Article,
            citations: 1,
            journal_id: "J1".to_string(),
            raw_affiliations: affiliations.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn same_province_institutions_attribute_once() {
        let rules = rules_fixture();
        let record = record_with(&["Univ. of Milan", "Polytechnic of Milan, Dept of Physics"]);
        let result = attribute_publication(&record, &rules, &territories());
        assert_eq!(result.provinces, ["MI".to_string()].into());
        assert_eq!(result.regions, ["LOM".to_string()].into());
        assert_eq!(result.matched.len(), 2);
    }

    #[test]
    fn distinct_provinces_map_to_their_regions() {
        let rules = rules_fixture();
        let record = record_with(&["Univ. of Milan", "Univ. of Rome 'Tor Vergata'"]);
        let result = attribute_publication(&record, &rules, &territories());
        assert_eq!(result.provinces, ["MI".to_string(), "RM".to_string()].into());
        assert_eq!(result.regions, ["LAZ".to_string(), "LOM".to_string()].into());
    }

    #[test]
    fn unresolvable_addresses_are_recorded_not_guessed() {
        let rules = rules_fixture();
        let record = record_with(&["Univ. of Milan", "Mystery Institute"]);
        let result = attribute_publication(&record, &rules, &territories());
        assert_eq!(result.provinces, ["MI".to_string()].into());
        assert_eq!(result.unmatched, vec![1]);
    }

    #[test]
    fn empty_rule_set_matches_nothing() {
        let rules = RuleSet::new(Vec::new(), Vec::new(), &territories()).unwrap();
        let record = record_with(&["Univ. of Milan"]);
        let result = attribute_publication(&record, &rules, &territories());
        assert!(result.provinces.is_empty());
        assert_eq!(result.unmatched, vec![0]);
    }

    fn corpus_with(pubs: Vec<PublicationRecord>) -> Corpus {
        Corpus::from_parts(
            crate::corpus::CorpusHeader {
                census_date: "2011-12-31".to_string(),
                year_min: 2006,
                year_max: 2010,
            },
            pubs,
            crate::corpus::tests::test_journals(),
            crate::corpus::tests::test_categories(),
            territories(),
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn unmatched_report_counts_and_orders() {
        let rules = rules_fixture();
        let mut p1 = record_with(&["Foo Inst", "Univ. of Milan"]);
        p1.pub_id = "P1".to_string();
        let mut p2 = record_with(&["Foo-Inst."]);
        p2.pub_id = "P2".to_string();
        let mut p3 = record_with(&["Bar Lab", "Bar Lab"]);
        p3.pub_id = "P3".to_string();
        let corpus = corpus_with(vec![p1, p2, p3]);
        let report = unmatched_report(&corpus, &rules);
        assert_eq!(
            report,
            vec![
                ("bar lab".to_string(), 2),
                ("foo inst".to_string(), 2),
            ]
        );
    }

    #[test]
    fn unmatched_report_empty_when_everything_matches() {
        let rules = rules_fixture();
        let corpus = corpus_with(vec![record_with(&["Univ. of Milan"])]);
        assert!(unmatched_report(&corpus, &rules).is_empty());
    }
}
