//! CSV emission of the report table families. Percentages are carried at
//! full precision upstream and rounded to one decimal here; Gini
//! coefficients get two decimals. Fields containing commas (many category
//! names do) are quoted by the writer.

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concentration::{CategoryShare, ConcentrationResult};
use crate::strength::Pairing;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown table kind '{0}'")]
    UnknownTableKind(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// The eight table families of the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    T2Prevalent,
    T3MostConcentrated,
    T4LeastConcentrated,
    T5ProvinceConcentrated,
    T6SsPerCapita,
    T7OutputPerCapita,
    T8SsPerGdp,
    T9ProvincePerCapita,
}

impl TableKind {
    pub const ALL: [TableKind; 8] = [
        TableKind::T2Prevalent,
        TableKind::T3MostConcentrated,
        TableKind::T4LeastConcentrated,
        TableKind::T5ProvinceConcentrated,
        TableKind::T6SsPerCapita,
        TableKind::T7OutputPerCapita,
        TableKind::T8SsPerGdp,
        TableKind::T9ProvincePerCapita,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TableKind::T2Prevalent => "t2_prevalent",
            TableKind::T3MostConcentrated => "t3_most_concentrated",
            TableKind::T4LeastConcentrated => "t4_least_concentrated",
            TableKind::T5ProvinceConcentrated => "t5_province_concentrated",
            TableKind::T6SsPerCapita => "t6_ss_per_capita",
            TableKind::T7OutputPerCapita => "t7_output_per_capita",
            TableKind::T8SsPerGdp => "t8_ss_per_gdp",
            TableKind::T9ProvincePerCapita => "t9_province_per_capita",
        }
    }

    pub fn parse(s: &str) -> Result<TableKind, ReportError> {
        TableKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| ReportError::UnknownTableKind(s.to_string()))
    }

    pub fn file_name(self) -> String {
        format!("{}.csv", self.name())
    }
}

/// One-decimal percentage, the emission contract for every share and ratio.
pub fn format_pct(value: f64) -> String {
    format!("{value:.1}")
}

/// Two-decimal Gini coefficient.
pub fn format_gini(value: f64) -> String {
    format!("{value:.2}")
}

/// `Name (47.1%)` cell text used throughout the tables.
pub fn labeled_share(name: &str, pct: f64) -> String {
    format!("{name} ({}%)", format_pct(pct))
}

/// Prevalent-category table: one row per region, the leading `k` categories
/// inline. Returns the number of data rows written.
pub fn write_prevalent_table<W: Write>(
    rows: &[(String, Vec<CategoryShare>)],
    k: usize,
    writer: W,
) -> Result<usize, ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["region".to_string()];
    for i in 1..=k {
        header.push(format!("category_{i}"));
    }
    w.write_record(&header)?;
    for (region, shares) in rows {
        let mut record = vec![region.clone()];
        for i in 0..k {
            record.push(
                shares
                    .get(i)
                    .map(|s| labeled_share(&s.category_name, s.share_pct))
                    .unwrap_or_default(),
            );
        }
        w.write_record(&record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(rows.len())
}

/// Concentration table (most/least concentrated categories): category,
/// discipline, three leading territories, cumulative incidence and both
/// Gini columns.
pub fn write_concentration_table<W: Write>(
    rows: &[ConcentrationResult],
    territory_label: &str,
    writer: W,
) -> Result<usize, ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "category".to_string(),
        "discipline".to_string(),
        format!("{territory_label}_1"),
        format!("{territory_label}_2"),
        format!("{territory_label}_3"),
        "cumulative_pct".to_string(),
        "gini".to_string(),
        "gini_uncorrected".to_string(),
    ])?;
    for row in rows {
        let mut record = vec![row.category_name.clone(), row.discipline.label().to_string()];
        for i in 0..3 {
            record.push(
                row.top
                    .get(i)
                    .map(|(name, share)| labeled_share(name, *share))
                    .unwrap_or_default(),
            );
        }
        record.push(format_pct(row.cumulative_top3_pct));
        record.push(format_gini(row.gini));
        record.push(format_gini(row.gini_uncorrected));
        w.write_record(&record)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(rows.len())
}

/// Pairing table (difference from the national average): category plus the
/// territory with the ratio embedded, the format the report families share.
pub fn write_pairing_table<W: Write>(
    pairings: &[Pairing],
    territory_label: &str,
    writer: W,
) -> Result<usize, ReportError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["category", territory_label])?;
    for pairing in pairings {
        w.write_record([
            pairing.category_name.clone(),
            labeled_share(&pairing.territory_name, pairing.ratio_pct),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(pairings.len())
}
