//! Aggregation of fractional impact into Scientific Strength per
//! (territory, category) at province, region and nation level, plus the
//! count-based analog and the socio-economic standardizations.
//!
//! Counting follows two rules. Within a territory a publication counts
//! once, no matter how many of its co-author institutions sit there. Across
//! territories counting is full: a publication spanning two regions is
//! credited whole to both, and once to the nation. Sums over territories
//! may therefore exceed the national figure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CategoryRegistry, TerritoryRegistry};
use crate::impact::ImpactRecord;
use crate::reconcile::AttributionResult;

#[derive(Debug, Error)]
pub enum StrengthError {
    #[error("no attribution for publication '{0}'")]
    MissingAttribution(String),
    #[error("attribution for unknown publication '{0}'")]
    UnknownPublication(String),
    #[error("territory '{0}' is not in the registry")]
    UnknownTerritory(String),
    #[error("GDP standardization is unavailable at province level: no provincial GDP data")]
    GdpUnavailableAtProvince,
    #[error("top_n must be at least 1")]
    InvalidTopN,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerritoryLevel {
    Province,
    Region,
    Nation,
}

impl TerritoryLevel {
    pub fn label(self) -> &'static str {
        match self {
            TerritoryLevel::Province => "province",
            TerritoryLevel::Region => "region",
            TerritoryLevel::Nation => "nation",
        }
    }
}

/// One cell of the strength matrix. `ss` sums fractional impact over the
/// defined records; `pub_count` is the deduplicated whole-publication
/// count; `output_share` is the fractional (1/k per category) count used
/// by the count-based analyses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StrengthCell {
    pub ss: f64,
    pub pub_count: u64,
    pub output_share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrengthMatrix {
    pub level: TerritoryLevel,
    pub cells: BTreeMap<(String, String), StrengthCell>,
    /// Records with undefined impact: excluded from `ss`, still counted.
    pub skipped_undefined: u64,
}

impl StrengthMatrix {
    pub fn ss(&self, territory: &str, category: &str) -> f64 {
        self.cells
            .get(&(territory.to_string(), category.to_string()))
            .map_or(0.0, |c| c.ss)
    }
}

/// Sums each publication's category shares into every territory of its
/// attribution set at the given level, once per (publication, territory).
pub fn aggregate_ss(
    impacts: &[ImpactRecord],
    attributions: &BTreeMap<String, AttributionResult>,
    registry: &TerritoryRegistry,
    level: TerritoryLevel,
) -> Result<StrengthMatrix, StrengthError> {
    for pub_id in attributions.keys() {
        if !impacts.iter().any(|i| &i.pub_id == pub_id) {
            return Err(StrengthError::UnknownPublication(pub_id.clone()));
        }
    }
    let mut cells: BTreeMap<(String, String), StrengthCell> = BTreeMap::new();
    let mut skipped = 0;
    for impact in impacts {
        let attribution = attributions
            .get(&impact.pub_id)
            .ok_or_else(|| StrengthError::MissingAttribution(impact.pub_id.clone()))?;
        if !impact.defined {
            skipped += 1;
        }
        let territories: Vec<&str> = match level {
            TerritoryLevel::Province => attribution.provinces.iter().map(String::as_str).collect(),
            TerritoryLevel::Region => attribution.regions.iter().map(String::as_str).collect(),
            TerritoryLevel::Nation => {
                if attribution.provinces.is_empty() {
                    Vec::new()
                } else {
                    vec![registry.nation.code.as_str()]
                }
            }
        };
        if impact.category_shares.is_empty() {
            continue;
        }
        let fraction = 1.0 / impact.category_shares.len() as f64;
        for territory in territories {
            for (category, share) in &impact.category_shares {
                let cell = cells
                    .entry((territory.to_string(), category.clone()))
                    .or_default();
                if impact.defined {
                    cell.ss += share;
                }
                cell.pub_count += 1;
                cell.output_share += fraction;
            }
        }
    }
    Ok(StrengthMatrix {
        level,
        cells,
        skipped_undefined: skipped,
    })
}

/// Incidence of a territory's strength in the national total, in percent.
/// `None` when the nation has no strength in the category.
pub fn national_share(
    matrix: &StrengthMatrix,
    nation: &StrengthMatrix,
    territory: &str,
    category: &str,
) -> Option<f64> {
    let nation_code = nation.cells.keys().next().map(|(code, _)| code.clone())?;
    let denominator = nation.ss(&nation_code, category);
    if denominator == 0.0 {
        return None;
    }
    Some(matrix.ss(territory, category) / denominator * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Denominator {
    Population,
    Gdp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMode {
    #[default]
    Ss,
    OutputCount,
}

impl ValueMode {
    fn numerator(self, cell: &StrengthCell) -> f64 {
        match self {
            ValueMode::Ss => cell.ss,
            ValueMode::OutputCount => cell.output_share,
        }
    }
}

/// Strength (or output) per inhabitant or per GDP unit, related to the
/// national average: 100% means exactly the national rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizedCell {
    pub territory: String,
    pub category: String,
    pub value_per_inhabitant: f64,
    pub value_per_gdp: Option<f64>,
    pub ratio_to_national: f64,
}

fn denominators(
    registry: &TerritoryRegistry,
    level: TerritoryLevel,
    territory: &str,
) -> Result<(f64, Option<f64>), StrengthError> {
    match level {
        TerritoryLevel::Province => registry
            .provinces
            .get(territory)
            .map(|p| (p.population, None))
            .ok_or_else(|| StrengthError::UnknownTerritory(territory.to_string())),
        TerritoryLevel::Region => registry
            .regions
            .get(territory)
            .map(|r| (r.population, Some(r.gdp)))
            .ok_or_else(|| StrengthError::UnknownTerritory(territory.to_string())),
        TerritoryLevel::Nation => Ok((registry.nation.population, Some(registry.nation.gdp))),
    }
}

/// Standardizes every cell of the matrix by territorial population or GDP.
/// Categories without national strength are skipped (no ratio exists).
pub fn standardize(
    matrix: &StrengthMatrix,
    nation: &StrengthMatrix,
    registry: &TerritoryRegistry,
    denominator: Denominator,
    mode: ValueMode,
) -> Result<BTreeMap<(String, String), StandardizedCell>, StrengthError> {
    if denominator == Denominator::Gdp && matrix.level == TerritoryLevel::Province {
        return Err(StrengthError::GdpUnavailableAtProvince);
    }
    let nation_pop = registry.nation.population;
    let nation_gdp = registry.nation.gdp;
    let mut out = BTreeMap::new();
    for ((territory, category), cell) in &matrix.cells {
        let national_value = nation
            .cells
            .get(&(registry.nation.code.clone(), category.clone()))
            .map(|c| mode.numerator(c))
            .unwrap_or(0.0);
        if national_value == 0.0 {
            continue;
        }
        let (population, gdp) = denominators(registry, matrix.level, territory)?;
        let value = mode.numerator(cell);
        let per_inhabitant = value / population;
        let per_gdp = gdp.map(|g| value / g);
        let ratio = match denominator {
            Denominator::Population => (per_inhabitant / (national_value / nation_pop)) * 100.0,
            Denominator::Gdp => {
                let per_gdp = per_gdp.expect("GDP present at region and nation level");
                (per_gdp / (national_value / nation_gdp)) * 100.0
            }
        };
        out.insert(
            (territory.clone(), category.clone()),
            StandardizedCell {
                territory: territory.clone(),
                category: category.clone(),
                value_per_inhabitant: per_inhabitant,
                value_per_gdp: per_gdp,
                ratio_to_national: ratio,
            },
        );
    }
    Ok(out)
}

/// One (category, territory) pairing of the difference-from-national
/// rankings, with display names resolved for emission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    pub category: String,
    pub category_name: String,
    pub territory: String,
    pub territory_name: String,
    pub ratio_pct: f64,
}

/// Top `n` pairings by descending ratio to the national average. Ties break
/// on ascending category name, then territory name; nation rows are
/// excluded.
pub fn top_pairings(
    standardized: &BTreeMap<(String, String), StandardizedCell>,
    registry: &TerritoryRegistry,
    categories: &CategoryRegistry,
    n: usize,
) -> Result<Vec<Pairing>, StrengthError> {
    if n == 0 {
        return Err(StrengthError::InvalidTopN);
    }
    let mut pairings: Vec<Pairing> = standardized
        .values()
        .filter(|cell| cell.territory != registry.nation.code)
        .map(|cell| {
            let territory_name = registry
                .province_name(&cell.territory)
                .or_else(|| registry.region_name(&cell.territory))
                .unwrap_or(&cell.territory)
                .to_string();
            Pairing {
                category: cell.category.clone(),
                category_name: categories.name_of(&cell.category).to_string(),
                territory: cell.territory.clone(),
                territory_name,
                ratio_pct: cell.ratio_to_national,
            }
        })
        .collect();
    pairings.sort_by(|a, b| {
        b.ratio_pct
            .partial_cmp(&a.ratio_pct)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.category_name.cmp(&b.category_name))
            .then_with(|| a.territory_name.cmp(&b.territory_name))
    });
    pairings.truncate(n);
    Ok(pairings)
}

/// CSV dump of strength matrices: `level,territory,category,ss,pub_count`.
pub fn write_matrix_csv<W: std::io::Write>(
    matrices: &[&StrengthMatrix],
    writer: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["level", "territory", "category", "ss", "pub_count"])?;
    for matrix in matrices {
        for ((territory, category), cell) in &matrix.cells {
            w.write_record([
                matrix.level.label(),
                territory,
                category,
                &cell.ss.to_string(),
                &cell.pub_count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// CSV dump of standardized cells:
/// `level,territory,category,mode,denominator,ratio_to_national_pct`.
pub fn write_standardized_csv<W: std::io::Write>(
    sections: &[(
        TerritoryLevel,
        Denominator,
        ValueMode,
        &BTreeMap<(String, String), StandardizedCell>,
    )],
    writer: W,
) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "level",
        "territory",
        "category",
        "mode",
        "denominator",
        "ratio_to_national_pct",
    ])?;
    for (level, denominator, mode, cells) in sections {
        let mode_label = match mode {
            ValueMode::Ss => "ss",
            ValueMode::OutputCount => "output_count",
        };
        let denominator_label = match denominator {
            Denominator::Population => "population",
            Denominator::Gdp => "gdp",
        };
        for cell in cells.values() {
            w.write_record([
                level.label(),
                &cell.territory,
                &cell.category,
                mode_label,
                denominator_label,
                &cell.ratio_to_national.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
