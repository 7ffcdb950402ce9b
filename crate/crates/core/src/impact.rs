//! National citation baselines per (year, category) stratum and the
//! citation-standardized impact index of every in-scope publication.
//!
//! A publication's index is its citation count divided by a baseline: the
//! mean citations of the other national publications of the same year and
//! subject category. For journals carrying several categories the baseline
//! is the arithmetic mean of the per-category means, and the index is split
//! equally across the categories. Two baseline modes exist because the
//! verbal definition is ambiguous about self-exclusion; leave-one-out is
//! the default, the inclusive mean is kept behind a switch so the choice
//! stays auditable.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CategoryRegistry, Corpus, Journal, PublicationRecord};

#[derive(Debug, Error)]
pub enum ImpactError {
    #[error(
        "publication '{pub_id}' missing from baseline stratum ({year}, {category}): \
         table was built from a different publication set"
    )]
    MissingStratum {
        pub_id: String,
        year: i32,
        category: String,
    },
    #[error("multidisciplinary constituent '{0}' is not an in-scope category")]
    BadConstituent(String),
}

/// Whether the focal publication is excluded from its own baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMode {
    #[default]
    LeaveOneOut,
    Inclusive,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImpactConfig {
    pub mode: BaselineMode,
    /// Constituent categories substituted for the synthetic category of
    /// journals flagged multidisciplinary that list a single category.
    /// `None` leaves those publications undefined.
    pub multidisciplinary_constituents: Option<BTreeSet<String>>,
}

impl ImpactConfig {
    pub fn leave_one_out() -> Self {
        ImpactConfig::default()
    }

    pub fn inclusive() -> Self {
        ImpactConfig {
            mode: BaselineMode::Inclusive,
            ..ImpactConfig::default()
        }
    }

    pub fn validate(&self, registry: &CategoryRegistry) -> Result<(), ImpactError> {
        if let Some(constituents) = &self.multidisciplinary_constituents {
            for code in constituents {
                if !registry.is_in_scope(code) {
                    return Err(ImpactError::BadConstituent(code.clone()));
                }
            }
        }
        Ok(())
    }
}

/// The categories a publication's journal contributes to and is normalized
/// against. `None` marks a multidisciplinary journal whose synthetic
/// category has no configured constituent list: its publications stay
/// undefined rather than being normalized against a fabricated baseline.
pub fn effective_categories(
    journal: &Journal,
    registry: &CategoryRegistry,
    config: &ImpactConfig,
) -> Option<BTreeSet<String>> {
    if journal.multidisciplinary && journal.categories.len() == 1 {
        return config
            .multidisciplinary_constituents
            .clone()
            .filter(|c| !c.is_empty());
    }
    let cats: BTreeSet<String> = journal
        .in_scope_categories(registry)
        .into_iter()
        .map(str::to_string)
        .collect();
    (!cats.is_empty()).then_some(cats)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stratum {
    pub sum_citations: u64,
    pub count: u64,
}

/// Citation totals per (year, category). Every in-scope publication
/// contributes once to each stratum of each of its categories, with
/// membership weight 1 regardless of how many categories the journal has.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineTable {
    pub strata: BTreeMap<(i32, String), Stratum>,
}

impl BaselineTable {
    pub fn get(&self, year: i32, category: &str) -> Option<Stratum> {
        self.strata.get(&(year, category.to_string())).copied()
    }
}

pub fn compute_baselines(
    corpus: &Corpus,
    pubs: &[&PublicationRecord],
    config: &ImpactConfig,
) -> BaselineTable {
    let mut strata: BTreeMap<(i32, String), Stratum> = BTreeMap::new();
    for record in pubs {
        let journal = corpus.journal_of(record);
        let Some(categories) = effective_categories(journal, &corpus.categories, config) else {
            continue;
        };
        for category in categories {
            let stratum = strata.entry((record.year, category)).or_default();
            stratum.sum_citations += record.citations;
            stratum.count += 1;
        }
    }
    BaselineTable { strata }
}

/// Per-publication impact. `category_shares` splits the index equally over
/// the journal's in-scope categories; `defined` is false when no baseline
/// exists (singleton stratum under leave-one-out, zero baseline with
/// nonzero citations, or an unresolved multidisciplinary journal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRecord {
    pub pub_id: String,
    pub aii: f64,
    pub category_shares: BTreeMap<String, f64>,
    pub defined: bool,
}

impl ImpactRecord {
    fn undefined(pub_id: &str, categories: BTreeSet<String>) -> ImpactRecord {
        ImpactRecord {
            pub_id: pub_id.to_string(),
            aii: 0.0,
            category_shares: categories.into_iter().map(|c| (c, 0.0)).collect(),
            defined: false,
        }
    }
}

/// Computes one publication's impact index against the baseline table.
pub fn aii(
    corpus: &Corpus,
    record: &PublicationRecord,
    table: &BaselineTable,
    config: &ImpactConfig,
) -> Result<ImpactRecord, ImpactError> {
    let journal = corpus.journal_of(record);
    let Some(categories) = effective_categories(journal, &corpus.categories, config) else {
        return Ok(ImpactRecord::undefined(&record.pub_id, BTreeSet::new()));
    };

    let mut means = Vec::with_capacity(categories.len());
    for category in &categories {
        let stratum = table
            .get(record.year, category)
            .ok_or_else(|| ImpactError::MissingStratum {
                pub_id: record.pub_id.clone(),
                year: record.year,
                category: category.clone(),
            })?;
        if stratum.count == 0 || record.citations > stratum.sum_citations {
            return Err(ImpactError::MissingStratum {
                pub_id: record.pub_id.clone(),
                year: record.year,
                category: category.clone(),
            });
        }
        match config.mode {
            BaselineMode::LeaveOneOut => {
                if stratum.count <= 1 {
                    return Ok(ImpactRecord::undefined(&record.pub_id, categories));
                }
                let others = (stratum.sum_citations - record.citations) as f64;
                means.push(others / (stratum.count - 1) as f64);
            }
            BaselineMode::Inclusive => {
                means.push(stratum.sum_citations as f64 / stratum.count as f64);
            }
        }
    }

    let baseline = means.iter().sum::<f64>() / means.len() as f64;
    let aii = if baseline == 0.0 {
        if record.citations > 0 {
            return Ok(ImpactRecord::undefined(&record.pub_id, categories));
        }
        0.0
    } else {
        record.citations as f64 / baseline
    };
    let k = categories.len() as f64;
    Ok(ImpactRecord {
        pub_id: record.pub_id.clone(),
        aii,
        category_shares: categories.into_iter().map(|c| (c, aii / k)).collect(),
        defined: true,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ImpactBatch {
    pub records: Vec<ImpactRecord>,
    pub undefined: usize,
}

/// One record per in-scope publication, ascending pub_id.
pub fn impact_all(
    corpus: &Corpus,
    pubs: &[&PublicationRecord],
    table: &BaselineTable,
    config: &ImpactConfig,
) -> Result<ImpactBatch, ImpactError> {
    let mut ordered: Vec<&PublicationRecord> = pubs.to_vec();
    ordered.sort_by(|a, b| a.pub_id.cmp(&b.pub_id));
    let mut records = Vec::with_capacity(ordered.len());
    let mut undefined = 0;
    for record in ordered {
        let impact = aii(corpus, record, table, config)?;
        if !impact.defined {
            undefined += 1;
        }
        records.push(impact);
    }
    Ok(ImpactBatch { records, undefined })
}

/// CSV dump: `pub_id,aii,defined` plus one column per contributing
/// category, blank where a record has no share in that category.
pub fn write_impact_csv<W: std::io::Write>(
    records: &[ImpactRecord],
    writer: W,
) -> Result<(), csv::Error> {
    let columns: BTreeSet<&str> = records
        .iter()
        .flat_map(|r| r.category_shares.keys().map(String::as_str))
        .collect();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["pub_id".to_string(), "aii".to_string(), "defined".to_string()];
    header.extend(columns.iter().map(|c| c.to_string()));
    w.write_record(&header)?;
    for record in records {
        let mut row = vec![
            record.pub_id.clone(),
            record.aii.to_string(),
            record.defined.to_string(),
        ];
        for column in &columns {
            row.push(
                record
                    .category_shares
                    .get(*column)
                    .map(|v| v.to_string())
                    .unwrap_or_default(),
            );
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tests::CorpusBuilder;

    const TOL: f64 = 1e-9;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= TOL * f64::max(1.0, f64::max(a.abs(), b.abs()))
    }

    /// Four publications, one stratum (2008, X), citations 4/6/8/10.
    fn single_stratum_corpus() -> Corpus {
        CorpusBuilder::new()
            .category("X", true)
            .journal("J", &["X"], false)
            .publication("P1", 2008, 4, "J")
            .publication("P2", 2008, 6, "J")
            .publication("P3", 2008, 8, "J")
            .publication("P4", 2008, 10, "J")
            .build()
    }

    fn impacts_of(corpus: &Corpus, config: &ImpactConfig) -> ImpactBatch {
        let pubs = corpus.scope_filter();
        let table = compute_baselines(corpus, &pubs, config);
        impact_all(corpus, &pubs, &table, config).unwrap()
    }

    #[test]
    fn baselines_sum_and_count_per_stratum() {
        let corpus = single_stratum_corpus();
        let pubs = corpus.scope_filter();
        let table = compute_baselines(&corpus, &pubs, &ImpactConfig::leave_one_out());
        let stratum = table.get(2008, "X").unwrap();
        assert_eq!(stratum.sum_citations, 28);
        assert_eq!(stratum.count, 4);
    }

    #[test]
    fn multi_category_journal_feeds_each_stratum_with_weight_one() {
        let corpus = CorpusBuilder::new()
            .category("A", true)
            .category("B", true)
            .journal("J", &["A", "B"], false)
            .publication("P1", 2008, 10, "J")
            .build();
        let pubs = corpus.scope_filter();
        let table = compute_baselines(&corpus, &pubs, &ImpactConfig::leave_one_out());
        for code in ["A", "B"] {
            let stratum = table.get(2008, code).unwrap();
            assert_eq!(stratum.sum_citations, 10);
            assert_eq!(stratum.count, 1);
        }
    }

    #[test]
    fn empty_input_yields_empty_table() {
        let corpus = CorpusBuilder::new()
            .category("X", true)
            .journal("J", &["X"], false)
            .build();
        let pubs = corpus.scope_filter();
        let table = compute_baselines(&corpus, &pubs, &ImpactConfig::leave_one_out());
        assert!(table.strata.is_empty());
    }

    #[test]
    fn leave_one_out_values_match_enumeration() {
        // citations {4,6,8,10}: for the 4-citation paper the others average
        // to (6+8+10)/3 = 8, for the 8-citation paper to (4+6+10)/3 = 20/3.
        let corpus = single_stratum_corpus();
        let batch = impacts_of(&corpus, &ImpactConfig::leave_one_out());
        let by_id: BTreeMap<&str, &ImpactRecord> = batch
            .records
            .iter()
            .map(|r| (r.pub_id.as_str(), r))
            .collect();
        assert!(close(by_id["P1"].aii, 0.5));
        assert!(close(by_id["P3"].aii, 1.2));
        assert!(close(by_id["P2"].aii, 6.0 / (22.0 / 3.0)));
        assert!(close(by_id["P4"].aii, 10.0 / 6.0));
        assert_eq!(batch.undefined, 0);
    }

    #[test]
    fn two_category_baseline_averages_the_per_category_means() {
        // Stratum A: focal(10) + two 5s -> leave-one-out mean 5.
        // Stratum B: focal(10) + two 15s -> leave-one-out mean 15.
        // Baseline = (5+15)/2 = 10, index 1.0, shares 0.5/0.5.
        let corpus = CorpusBuilder::new()
            .category("A", true)
            .category("B", true)
            .journal("JA", &["A"], false)
            .journal("JB", &["B"], false)
            .journal("JAB", &["A", "B"], false)
            .publication("F", 2008, 10, "JAB")
            .publication("A1", 2008, 5, "JA")
            .publication("A2", 2008, 5, "JA")
            .publication("B1", 2008, 15, "JB")
            .publication("B2", 2008, 15, "JB")
            .build();
        let batch = impacts_of(&corpus, &ImpactConfig::leave_one_out());
        let focal = batch.records.iter().find(|r| r.pub_id == "F").unwrap();
        assert!(close(focal.aii, 1.0));
        assert!(close(focal.category_shares["A"], 0.5));
        assert!(close(focal.category_shares["B"], 0.5));
    }

    #[test]
    fn singleton_stratum_is_undefined_under_leave_one_out() {
        let corpus = CorpusBuilder::new()
            .category("X", true)
            .journal("J", &["X"], false)
            .publication("P1", 2008, 7, "J")
            .build();
        let batch = impacts_of(&corpus, &ImpactConfig::leave_one_out());
        assert_eq!(batch.undefined, 1);
        assert!(!batch.records[0].defined);
        assert_eq!(batch.records[0].aii, 0.0);
    }

    #[test]
    fn zero_baseline_zero_citations_is_defined_zero() {
        let corpus = CorpusBuilder::new()
            .category("X", true)
            .journal("J", &["X"], false)
            .publication("P1", 2008, 0, "J")
            .publication("P2", 2008, 0, "J")
            .build();
        let batch = impacts_of(&corpus, &ImpactConfig::leave_one_out());
        assert_eq!(batch.undefined, 0);
        assert!(batch.records.iter().all(|r| r.defined && r.aii == 0.0));
    }

    #[test]
    fn zero_baseline_nonzero_citations_is_undefined() {
        let corpus = CorpusBuilder::new()
            .category("X", true)
            .journal("J", &["X"], false)
            .publication("P1", 2008, 9, "J")
            .publication("P2", 2008, 0, "J")
            .publication("P3", 2008, 0, "J")
            .build();
        let batch = impacts_of(&corpus, &ImpactConfig::leave_one_out());
        let focal = batch.records.iter().find(|r| r.pub_id == "P1").unwrap();
        assert!(!focal.defined);
        // the zero-citation papers have a positive baseline and index 0
        let other = batch.records.iter().find(|r| r.pub_id == "P2").unwrap();
        assert!(other.defined);
        assert_eq!(other.aii, 0.0);
    }

    #[test]
    fn inclusive_mode_centers_stratum_mean_at_one() {
        let corpus = single_stratum_corpus();
        let batch = impacts_of(&corpus, &ImpactConfig::inclusive());
        let mean = batch.records.iter().map(|r| r.aii).sum::<f64>() / batch.records.len() as f64;
        assert!(close(mean, 1.0));
        let p1 = batch.records.iter().find(|r| r.pub_id == "P1").unwrap();
        assert!(close(p1.aii, 4.0 / 7.0));
    }

    #[test]
    fn unresolved_multidisciplinary_journal_is_undefined() {
        let corpus = CorpusBuilder::new()
            .category("MULTI", true)
            .category("X", true)
            .journal("JM", &["MULTI"], true)
            .journal("J", &["X"], false)
            .publication("P1", 2008, 5, "JM")
            .publication("P2", 2008, 5, "J")
            .publication("P3", 2008, 7, "J")
            .build();
        let batch = impacts_of(&corpus, &ImpactConfig::leave_one_out());
        let multi = batch.records.iter().find(|r| r.pub_id == "P1").unwrap();
        assert!(!multi.defined);
        assert!(multi.category_shares.is_empty());
        assert_eq!(batch.undefined, 1);
    }

    #[test]
    fn configured_constituents_resolve_multidisciplinary_journals() {
        let config = ImpactConfig {
            mode: BaselineMode::LeaveOneOut,
            multidisciplinary_constituents: Some(
                ["A".to_string(), "B".to_string()].into_iter().collect(),
            ),
        };
        let corpus = CorpusBuilder::new()
            .category("A", true)
            .category("B", true)
            .category("MULTI", true)
            .journal("JM", &["MULTI"], true)
            .journal("JA", &["A"], false)
            .journal("JB", &["B"], false)
            .publication("F", 2008, 10, "JM")
            .publication("A1", 2008, 5, "JA")
            .publication("A2", 2008, 5, "JA")
            .publication("B1", 2008, 15, "JB")
            .publication("B2", 2008, 15, "JB")
            .build();
        let batch = impacts_of(&corpus, &config);
        let focal = batch.records.iter().find(|r| r.pub_id == "F").unwrap();
        assert!(focal.defined);
        assert!(close(focal.aii, 1.0));
        assert_eq!(
            focal.category_shares.keys().collect::<Vec<_>>(),
            vec!["A", "B"]
        );
        // the substituted publication joined the constituent strata
        let table = compute_baselines(&corpus, &corpus.scope_filter(), &config);
        assert_eq!(table.get(2008, "A").unwrap().count, 3);
        assert!(table.get(2008, "MULTI").is_none());
    }

    #[test]
    fn multidisciplinary_flag_with_listed_categories_behaves_normally() {
        let corpus = CorpusBuilder::new()
            .category("A", true)
            .category("B", true)
            .journal("JM", &["A", "B"], true)
            .publication("P1", 2008, 4, "JM")
            .publication("P2", 2008, 6, "JM")
            .build();
        let batch = impacts_of(&corpus, &ImpactConfig::leave_one_out());
        assert!(batch.records.iter().all(|r| r.defined));
    }

    #[test]
    fn shares_sum_to_aii() {
        let corpus = CorpusBuilder::new()
            .category("A", true)
            .category("B", true)
            .category("C", true)
            .journal("J3", &["A", "B", "C"], false)
            .publication("P1", 2008, 3, "J3")
            .publication("P2", 2008, 9, "J3")
            .publication("P3", 2008, 27, "J3")
            .build();
        let batch = impacts_of(&corpus, &ImpactConfig::leave_one_out());
        for record in &batch.records {
            let total: f64 = record.category_shares.values().sum();
            assert!(close(total, record.aii), "{} vs {}", total, record.aii);
        }
    }

    #[test]
    fn scale_equivariance_within_stratum() {
        let base = single_stratum_corpus();
        let scaled = CorpusBuilder::new()
            .category("X", true)
            .journal("J", &["X"], false)
            .publication("P1", 2008, 12, "J")
            .publication("P2", 2008, 18, "J")
            .publication("P3", 2008, 24, "J")
            .publication("P4", 2008, 30, "J")
            .build();
        let a = impacts_of(&base, &ImpactConfig::leave_one_out());
        let b = impacts_of(&scaled, &ImpactConfig::leave_one_out());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert!(close(x.aii, y.aii));
        }
    }

    #[test]
    fn missing_stratum_is_an_internal_error() {
        let corpus = single_stratum_corpus();
        let empty = BaselineTable::default();
        let err = aii(
            &corpus,
            corpus.scope_filter()[0],
            &empty,
            &ImpactConfig::leave_one_out(),
        )
        .unwrap_err();
        assert!(matches!(err, ImpactError::MissingStratum { .. }));
    }

    #[test]
    fn impact_all_orders_by_pub_id_and_handles_empty_input() {
        let corpus = single_stratum_corpus();
        let pubs = corpus.scope_filter();
        let table = compute_baselines(&corpus, &pubs, &ImpactConfig::leave_one_out());
        let mut reversed = pubs.clone();
        reversed.reverse();
        let batch = impact_all(&corpus, &reversed, &table, &ImpactConfig::leave_one_out()).unwrap();
        let ids: Vec<&str> = batch.records.iter().map(|r| r.pub_id.as_str()).collect();
        assert_eq!(ids, vec!["P1", "P2", "P3", "P4"]);

        let none = impact_all(&corpus, &[], &table, &ImpactConfig::leave_one_out()).unwrap();
        assert!(none.records.is_empty());
    }
}
