//! Territorial concentration of scientific strength per subject category:
//! Gini coefficients over the full territory vector, leading-territory
//! lists with cumulative incidence, and prevalent categories per region.
//!
//! Gini input vectors include every territory of the level, zero-strength
//! ones too: leaving them out would understate concentration. The
//! sample-corrected coefficient (factor n/(n-1)) is the primary value so a
//! single holder scores exactly 1; the uncorrected value stays available
//! in a secondary column.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CategoryRegistry, Discipline, TerritoryRegistry};
use crate::strength::{national_share, StrengthMatrix, TerritoryLevel};

#[derive(Debug, Error)]
pub enum ConcentrationError {
    #[error("cannot compute a Gini coefficient of an empty vector")]
    EmptyInput,
    #[error("cannot compute a Gini coefficient when every value is zero")]
    AllZeroInput,
    #[error("negative value {0} in Gini input")]
    NegativeValue(f64),
    #[error("unknown category '{0}'")]
    UnknownCategory(String),
    #[error("unknown region '{0}'")]
    UnknownRegion(String),
    #[error("no national strength in category '{0}'")]
    NoNationalStrength(String),
}

/// Both variants of the inequality coefficient over one vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gini {
    pub corrected: f64,
    pub uncorrected: f64,
}

/// Gini coefficient of a non-negative vector with at least one positive
/// entry. The corrected variant scales by n/(n-1) and is clamped to [0,1],
/// so complete inequality (one holder) scores exactly 1; a single-element
/// vector scores 0.
pub fn gini(values: &[f64]) -> Result<Gini, ConcentrationError> {
    if values.is_empty() {
        return Err(ConcentrationError::EmptyInput);
    }
    if let Some(negative) = values.iter().find(|v| **v < 0.0) {
        return Err(ConcentrationError::NegativeValue(*negative));
    }
    let total: f64 = values.iter().sum();
    if total == 0.0 {
        return Err(ConcentrationError::AllZeroInput);
    }
    let n = values.len();
    if n == 1 {
        return Ok(Gini {
            corrected: 0.0,
            uncorrected: 0.0,
        });
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // sum of pairwise absolute differences via the sorted identity
    let pairwise: f64 = 2.0
        * sorted
            .iter()
            .enumerate()
            .map(|(i, x)| (2.0 * i as f64 - n as f64 + 1.0) * x)
            .sum::<f64>();
    let mean = total / n as f64;
    let uncorrected = pairwise / (2.0 * (n * n) as f64 * mean);
    let corrected = (uncorrected * n as f64 / (n - 1) as f64).clamp(0.0, 1.0);
    Ok(Gini {
        corrected,
        uncorrected,
    })
}

/// Concentration summary of one category at one territorial level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationResult {
    pub category: String,
    pub category_name: String,
    pub discipline: Discipline,
    pub gini: f64,
    pub gini_uncorrected: f64,
    /// Leading territories as (display name, national share in percent),
    /// descending share, ties on ascending name.
    pub top: Vec<(String, f64)>,
    pub cumulative_top3_pct: f64,
}

fn level_codes<'a>(
    registry: &'a TerritoryRegistry,
    level: TerritoryLevel,
) -> Vec<(&'a str, &'a str)> {
    match level {
        TerritoryLevel::Province => registry
            .provinces
            .iter()
            .map(|(code, p)| (code.as_str(), p.name.as_str()))
            .collect(),
        TerritoryLevel::Region => registry
            .regions
            .iter()
            .map(|(code, r)| (code.as_str(), r.name.as_str()))
            .collect(),
        TerritoryLevel::Nation => {
            vec![(registry.nation.code.as_str(), registry.nation.name.as_str())]
        }
    }
}

/// Ranks the territories of the matrix's level by national incidence in
/// one category; the Gini runs over the full territory vector of the level.
pub fn rank_territories(
    matrix: &StrengthMatrix,
    nation: &StrengthMatrix,
    territories: &TerritoryRegistry,
    categories: &CategoryRegistry,
    category: &str,
    k: usize,
) -> Result<ConcentrationResult, ConcentrationError> {
    let info = categories
        .entries
        .get(category)
        .ok_or_else(|| ConcentrationError::UnknownCategory(category.to_string()))?;
    let codes = level_codes(territories, matrix.level);
    let vector: Vec<f64> = codes
        .iter()
        .map(|(code, _)| matrix.ss(code, category))
        .collect();
    let coefficients = gini(&vector).map_err(|e| match e {
        ConcentrationError::AllZeroInput => {
            ConcentrationError::NoNationalStrength(category.to_string())
        }
        other => other,
    })?;
    let mut top: Vec<(String, f64)> = codes
        .iter()
        .filter(|(code, _)| matrix.ss(code, category) > 0.0)
        .filter_map(|(code, name)| {
            national_share(matrix, nation, code, category).map(|share| (name.to_string(), share))
        })
        .collect();
    top.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    top.truncate(k);
    let cumulative = top.iter().take(3).map(|(_, share)| share).sum();
    Ok(ConcentrationResult {
        category: category.to_string(),
        category_name: info.name.clone(),
        discipline: info.discipline,
        gini: coefficients.corrected,
        gini_uncorrected: coefficients.uncorrected,
        top,
        cumulative_top3_pct: cumulative,
    })
}

/// One category's national share held by a region, for the prevalence list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryShare {
    pub category: String,
    pub category_name: String,
    pub share_pct: f64,
}

/// The region's leading categories by incidence in national strength,
/// descending share, ties on ascending category name, truncated to `k`.
pub fn prevalent_categories(
    region_matrix: &StrengthMatrix,
    nation: &StrengthMatrix,
    territories: &TerritoryRegistry,
    categories: &CategoryRegistry,
    region: &str,
    k: usize,
) -> Result<Vec<CategoryShare>, ConcentrationError> {
    if !territories.regions.contains_key(region) {
        return Err(ConcentrationError::UnknownRegion(region.to_string()));
    }
    let mut shares: Vec<CategoryShare> = region_matrix
        .cells
        .iter()
        .filter(|((territory, _), cell)| territory == region && cell.ss > 0.0)
        .filter_map(|((_, category), _)| {
            national_share(region_matrix, nation, region, category).map(|share| CategoryShare {
                category: category.clone(),
                category_name: categories.name_of(category).to_string(),
                share_pct: share,
            })
        })
        .collect();
    shares.sort_by(|a, b| {
        b.share_pct
            .partial_cmp(&a.share_pct)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.category_name.cmp(&b.category_name))
    });
    shares.truncate(k);
    Ok(shares)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Most,
    Least,
}

/// Concentration rows for every in-scope category with national strength,
/// sorted by cumulative top-3 incidence (descending for `Most`, ascending
/// for `Least`), ties on category name, truncated to `n`.
pub fn concentration_table(
    matrix: &StrengthMatrix,
    nation: &StrengthMatrix,
    territories: &TerritoryRegistry,
    categories: &CategoryRegistry,
    direction: Direction,
    n: usize,
) -> Result<Vec<ConcentrationResult>, ConcentrationError> {
    let nation_code = territories.nation.code.as_str();
    let mut rows = Vec::new();
    for category in categories.in_scope_codes() {
        if nation.ss(nation_code, category) <= 0.0 {
            continue;
        }
        rows.push(rank_territories(
            matrix,
            nation,
            territories,
            categories,
            category,
            3,
        )?);
    }
    rows.sort_by(|a, b| {
        let ordering = a
            .cumulative_top3_pct
            .partial_cmp(&b.cumulative_top3_pct)
            .unwrap_or(std::cmp::Ordering::Equal);
        match direction {
            Direction::Most => ordering.reverse(),
            Direction::Least => ordering,
        }
        .then_with(|| a.category_name.cmp(&b.category_name))
    });
    rows.truncate(n);
    Ok(rows)
}
