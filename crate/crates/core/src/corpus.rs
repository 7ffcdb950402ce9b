//! Loading, validation and indexing of the three input datasets:
//! publications, the subject-category registry and the territory registry.
//!
//! The publications file is line-delimited JSON: the first line is a header
//! declaring the citation census date and the admissible year window, every
//! following line is one record. Registries are CSV with declared headers.
//! After a successful load the [`Corpus`] is immutable and safe to share
//! across threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for population roll-up checks in the territory
/// registry (registries are typically rounded to the thousand).
const POPULATION_TOLERANCE: f64 = 0.005;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("publications file is empty: expected a header line")]
    MissingHeader,
    #[error("invalid corpus header: {0}")]
    InvalidHeader(String),
    #[error("invalid year window: year_min {year_min} > year_max {year_max}")]
    InvalidWindow { year_min: i32, year_max: i32 },
    #[error("duplicate pub_id '{0}'")]
    DuplicatePubId(String),
    #[error("publication '{pub_id}' references unknown journal '{journal_id}'")]
    UnknownJournal { pub_id: String, journal_id: String },
    #[error("journal '{journal_id}' references unknown category '{code}'")]
    UnknownCategory { journal_id: String, code: String },
    #[error("duplicate journal_id '{0}'")]
    DuplicateJournal(String),
    #[error("duplicate category code '{0}'")]
    DuplicateCategory(String),
    #[error("province '{province_code}' references unknown region '{region_code}'")]
    UnknownRegion {
        province_code: String,
        region_code: String,
    },
    #[error("{path} line {line}: {message}")]
    RegistryRow {
        path: PathBuf,
        line: u64,
        message: String,
    },
    #[error("territory registry has no nation row")]
    MissingNation,
    #[error("territory registry has more than one nation row")]
    DuplicateNation,
    #[error(
        "population of {scope} ({declared}) differs from the sum of its parts ({summed}) by more than {tolerance_pct}%"
    )]
    PopulationMismatch {
        scope: String,
        declared: f64,
        summed: f64,
        tolerance_pct: f64,
    },
    #[error("{what} of territory '{code}' must be positive")]
    NonPositive { what: &'static str, code: String },
}

/// Document types distinguished by the corpus; only the first four count as
/// scientific output for territorial analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocType {
    Article,
    Review,
    ProceedingPaper,
    Letter,
    Other,
}

impl DocType {
    pub fn in_scope(self) -> bool {
        !matches!(self, DocType::Other)
    }
}

/// One indexed publication. `citations` are counted as of the census date
/// declared in the corpus header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicationRecord {
    pub pub_id: String,
    pub year: i32,
    pub doc_type: DocType,
    pub citations: u64,
    pub journal_id: String,
    pub raw_affiliations: Vec<String>,
}

/// Journal identity plus its set of subject categories. The category count
/// drives the fractional split of a publication's impact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Journal {
    pub journal_id: String,
    pub categories: BTreeSet<String>,
    pub multidisciplinary: bool,
}

impl Journal {
    /// Category codes of this journal that are flagged in scope.
    pub fn in_scope_categories<'a>(&'a self, registry: &CategoryRegistry) -> Vec<&'a str> {
        self.categories
            .iter()
            .filter(|c| registry.is_in_scope(c))
            .map(String::as_str)
            .collect()
    }
}

/// The eight hard-science disciplines grouping the subject categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Discipline {
    Biology,
    BiomedicalResearch,
    Chemistry,
    ClinicalMedicine,
    EarthAndSpaceSciences,
    Engineering,
    Mathematics,
    Physics,
}

impl Discipline {
    pub fn label(self) -> &'static str {
        match self {
            Discipline::Biology => "Biology",
            Discipline::BiomedicalResearch => "Biomedical research",
            Discipline::Chemistry => "Chemistry",
            Discipline::ClinicalMedicine => "Clinical medicine",
            Discipline::EarthAndSpaceSciences => "Earth and space sciences",
            Discipline::Engineering => "Engineering",
            Discipline::Mathematics => "Mathematics",
            Discipline::Physics => "Physics",
        }
    }

    pub fn parse(s: &str) -> Option<Discipline> {
        let folded = s.trim().to_lowercase();
        [
            Discipline::Biology,
            Discipline::BiomedicalResearch,
            Discipline::Chemistry,
            Discipline::ClinicalMedicine,
            Discipline::EarthAndSpaceSciences,
            Discipline::Engineering,
            Discipline::Mathematics,
            Discipline::Physics,
        ]
        .into_iter()
        .find(|d| d.label().to_lowercase() == folded)
    }
}

impl std::fmt::Display for Discipline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryInfo {
    pub name: String,
    pub discipline: Discipline,
    pub in_scope: bool,
}

/// Registry of subject categories keyed by category code.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryRegistry {
    pub entries: BTreeMap<String, CategoryInfo>,
}

impl CategoryRegistry {
    pub fn is_in_scope(&self, code: &str) -> bool {
        self.entries.get(code).is_some_and(|c| c.in_scope)
    }

    /// Display name of a category, falling back to the code itself.
    pub fn name_of<'a>(&'a self, code: &'a str) -> &'a str {
        self.entries.get(code).map_or(code, |c| c.name.as_str())
    }

    pub fn in_scope_codes(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|(_, info)| info.in_scope)
            .map(|(code, _)| code.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Province {
    pub name: String,
    pub region_code: String,
    pub population: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub macro_area: String,
    pub population: f64,
    pub gdp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nation {
    pub code: String,
    pub name: String,
    pub population: f64,
    pub gdp: f64,
}

/// NUTS3 provinces nested in NUTS2 regions, with population everywhere and
/// GDP at region and nation level only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerritoryRegistry {
    pub provinces: BTreeMap<String, Province>,
    pub regions: BTreeMap<String, Region>,
    pub nation: Nation,
}

impl TerritoryRegistry {
    pub fn region_of(&self, province_code: &str) -> Option<&str> {
        self.provinces
            .get(province_code)
            .map(|p| p.region_code.as_str())
    }

    pub fn province_name(&self, code: &str) -> Option<&str> {
        self.provinces.get(code).map(|p| p.name.as_str())
    }

    pub fn region_name(&self, code: &str) -> Option<&str> {
        self.regions.get(code).map(|r| r.name.as_str())
    }

    /// Checks referential integrity, positivity and the population roll-ups
    /// (region = sum of provinces, nation = sum of regions, both within the
    /// registry rounding tolerance).
    pub fn validate(&self) -> Result<(), CorpusError> {
        for (code, province) in &self.provinces {
            if !self.regions.contains_key(&province.region_code) {
                return Err(CorpusError::UnknownRegion {
                    province_code: code.clone(),
                    region_code: province.region_code.clone(),
                });
            }
            if province.population <= 0.0 {
                return Err(CorpusError::NonPositive {
                    what: "population",
                    code: code.clone(),
                });
            }
        }
        let mut province_sums: BTreeMap<&str, f64> = BTreeMap::new();
        for province in self.provinces.values() {
            *province_sums.entry(province.region_code.as_str()).or_default() +=
                province.population;
        }
        for (code, region) in &self.regions {
            if region.population <= 0.0 {
                return Err(CorpusError::NonPositive {
                    what: "population",
                    code: code.clone(),
                });
            }
            if region.gdp <= 0.0 {
                return Err(CorpusError::NonPositive {
                    what: "gdp",
                    code: code.clone(),
                });
            }
            let summed = province_sums.get(code.as_str()).copied().unwrap_or(0.0);
            check_rollup(&format!("region '{code}'"), region.population, summed)?;
        }
        if self.nation.population <= 0.0 {
            return Err(CorpusError::NonPositive {
                what: "population",
                code: self.nation.code.clone(),
            });
        }
        if self.nation.gdp <= 0.0 {
            return Err(CorpusError::NonPositive {
                what: "gdp",
                code: self.nation.code.clone(),
            });
        }
        let region_total: f64 = self.regions.values().map(|r| r.population).sum();
        check_rollup("the nation", self.nation.population, region_total)?;
        Ok(())
    }
}

fn check_rollup(scope: &str, declared: f64, summed: f64) -> Result<(), CorpusError> {
    if (declared - summed).abs() > POPULATION_TOLERANCE * declared {
        return Err(CorpusError::PopulationMismatch {
            scope: scope.to_string(),
            declared,
            summed,
            tolerance_pct: POPULATION_TOLERANCE * 100.0,
        });
    }
    Ok(())
}

/// First line of the publications file: citation census date plus the
/// admissible calendar-year window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub census_date: String,
    pub year_min: i32,
    pub year_max: i32,
}

impl CorpusHeader {
    fn validate(&self) -> Result<(), CorpusError> {
        if self.year_min > self.year_max {
            return Err(CorpusError::InvalidWindow {
                year_min: self.year_min,
                year_max: self.year_max,
            });
        }
        let bytes = self.census_date.as_bytes();
        let shape_ok = bytes.len() == 10
            && bytes[4] == b'-'
            && bytes[7] == b'-'
            && bytes
                .iter()
                .enumerate()
                .all(|(i, b)| i == 4 || i == 7 || b.is_ascii_digit());
        if !shape_ok {
            return Err(CorpusError::InvalidHeader(format!(
                "census_date '{}' is not an ISO date (YYYY-MM-DD)",
                self.census_date
            )));
        }
        Ok(())
    }
}

/// One rejected or malformed input line, kept for the load report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadIssue {
    pub line: u64,
    pub message: String,
}

/// Counts gathered while loading; `loaded = in_scope + excluded`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub loaded: usize,
    pub in_scope: usize,
    pub excluded: usize,
    pub unattributable: usize,
    pub issues: Vec<LoadIssue>,
}

/// The validated, immutable in-memory corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub header: CorpusHeader,
    pub publications: BTreeMap<String, PublicationRecord>,
    pub journals: BTreeMap<String, Journal>,
    pub categories: CategoryRegistry,
    pub territories: TerritoryRegistry,
    pub load_report: LoadReport,
}

impl Corpus {
    /// Assembles and validates a corpus from already-parsed parts. Line
    /// issues collected by the caller are folded into the load report.
    pub fn from_parts(
        header: CorpusHeader,
        records: Vec<PublicationRecord>,
        journals: BTreeMap<String, Journal>,
        categories: CategoryRegistry,
        territories: TerritoryRegistry,
        issues: Vec<LoadIssue>,
    ) -> Result<Corpus, CorpusError> {
        header.validate()?;
        territories.validate()?;
        for (journal_id, journal) in &journals {
            for code in &journal.categories {
                if !categories.entries.contains_key(code) {
                    return Err(CorpusError::UnknownCategory {
                        journal_id: journal_id.clone(),
                        code: code.clone(),
                    });
                }
            }
        }
        let mut publications = BTreeMap::new();
        for record in records {
            if !journals.contains_key(&record.journal_id) {
                return Err(CorpusError::UnknownJournal {
                    pub_id: record.pub_id.clone(),
                    journal_id: record.journal_id.clone(),
                });
            }
            let key = record.pub_id.clone();
            if publications.insert(key.clone(), record).is_some() {
                return Err(CorpusError::DuplicatePubId(key));
            }
        }
        let mut corpus = Corpus {
            header,
            publications,
            journals,
            categories,
            territories,
            load_report: LoadReport {
                issues,
                ..LoadReport::default()
            },
        };
        corpus.load_report.loaded = corpus.publications.len();
        corpus.load_report.in_scope = corpus.scope_filter().len();
        corpus.load_report.excluded = corpus.load_report.loaded - corpus.load_report.in_scope;
        corpus.load_report.unattributable = corpus
            .publications
            .values()
            .filter(|r| r.raw_affiliations.is_empty())
            .count();
        Ok(corpus)
    }

    pub fn journal_of(&self, record: &PublicationRecord) -> &Journal {
        &self.journals[&record.journal_id]
    }

    /// A record is in scope when its document type counts as scientific
    /// output and its journal carries at least one in-scope category.
    pub fn is_in_scope(&self, record: &PublicationRecord) -> bool {
        record.doc_type.in_scope()
            && !self
                .journal_of(record)
                .in_scope_categories(&self.categories)
                .is_empty()
    }

    /// Exactly the in-scope records, in ascending `pub_id` order.
    pub fn scope_filter(&self) -> Vec<&PublicationRecord> {
        self.publications
            .values()
            .filter(|r| self.is_in_scope(r))
            .collect()
    }
}

// ---------------------------------------------------------------------------
// File loading
// ---------------------------------------------------------------------------

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn registry_row(path: &Path, line: u64, message: impl Into<String>) -> CorpusError {
    CorpusError::RegistryRow {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Loads and validates the whole corpus from the four input files.
///
/// Malformed publication lines and records outside the declared year window
/// are collected into the load report; duplicate keys and dangling
/// references are fatal. Malformed registry rows are always fatal.
pub fn load_corpus(
    pub_path: &Path,
    journal_path: &Path,
    category_path: &Path,
    territory_path: &Path,
) -> Result<Corpus, CorpusError> {
    let categories = load_categories(category_path)?;
    let journals = load_journals(journal_path)?;
    let territories = load_territories(territory_path)?;
    let (header, records, issues) = load_publications(pub_path)?;
    Corpus::from_parts(header, records, journals, categories, territories, issues)
}

fn load_publications(
    path: &Path,
) -> Result<(CorpusHeader, Vec<PublicationRecord>, Vec<LoadIssue>), CorpusError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = match lines.next() {
        Some(line) => line.map_err(io_err(path))?,
        None => return Err(CorpusError::MissingHeader),
    };
    let header: CorpusHeader = serde_json::from_str(&header_line)
        .map_err(|e| CorpusError::InvalidHeader(e.to_string()))?;
    header.validate()?;

    let mut records = Vec::new();
    let mut issues = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx as u64 + 2;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PublicationRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                issues.push(LoadIssue {
                    line: line_no,
                    message: format!("malformed record: {e}"),
                });
                continue;
            }
        };
        if record.pub_id.is_empty() {
            issues.push(LoadIssue {
                line: line_no,
                message: "empty pub_id".to_string(),
            });
            continue;
        }
        if record.year < header.year_min || record.year > header.year_max {
            issues.push(LoadIssue {
                line: line_no,
                message: format!(
                    "year {} outside corpus window {}-{}",
                    record.year, header.year_min, header.year_max
                ),
            });
            continue;
        }
        if record.raw_affiliations.iter().any(|a| a.trim().is_empty()) {
            issues.push(LoadIssue {
                line: line_no,
                message: "blank affiliation string".to_string(),
            });
            continue;
        }
        records.push(record);
    }
    Ok((header, records, issues))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<File>, CorpusError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| CorpusError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

fn parse_flag(path: &Path, line: u64, field: &str, value: &str) -> Result<bool, CorpusError> {
    match value {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(registry_row(
            path,
            line,
            format!("{field} must be 0 or 1, got '{value}'"),
        )),
    }
}

fn load_categories(path: &Path) -> Result<CategoryRegistry, CorpusError> {
    #[derive(Deserialize)]
    struct Row {
        code: String,
        name: String,
        discipline: String,
        in_scope: String,
    }
    let mut reader = csv_reader(path)?;
    let mut entries = BTreeMap::new();
    for (idx, row) in reader.deserialize::<Row>().enumerate() {
        let line = idx as u64 + 2;
        let row = row.map_err(|e| registry_row(path, line, e.to_string()))?;
        let discipline = Discipline::parse(&row.discipline)
            .ok_or_else(|| registry_row(path, line, format!("unknown discipline '{}'", row.discipline)))?;
        let in_scope = parse_flag(path, line, "in_scope", &row.in_scope)?;
        if entries
            .insert(
                row.code.clone(),
                CategoryInfo {
                    name: row.name,
                    discipline,
                    in_scope,
                },
            )
            .is_some()
        {
            return Err(CorpusError::DuplicateCategory(row.code));
        }
    }
    Ok(CategoryRegistry { entries })
}

fn load_journals(path: &Path) -> Result<BTreeMap<String, Journal>, CorpusError> {
    #[derive(Deserialize)]
    struct Row {
        journal_id: String,
        categories: String,
        multidisciplinary: String,
    }
    let mut reader = csv_reader(path)?;
    let mut journals = BTreeMap::new();
    for (idx, row) in reader.deserialize::<Row>().enumerate() {
        let line = idx as u64 + 2;
        let row = row.map_err(|e| registry_row(path, line, e.to_string()))?;
        let mut categories = BTreeSet::new();
        for code in row.categories.split(';') {
            let code = code.trim();
            if code.is_empty() {
                continue;
            }
            if !categories.insert(code.to_string()) {
                return Err(registry_row(
                    path,
                    line,
                    format!("duplicate category code '{code}'"),
                ));
            }
        }
        if categories.is_empty() {
            return Err(registry_row(path, line, "journal has no categories"));
        }
        let multidisciplinary = parse_flag(path, line, "multidisciplinary", &row.multidisciplinary)?;
        let journal = Journal {
            journal_id: row.journal_id.clone(),
            categories,
            multidisciplinary,
        };
        if journals.insert(row.journal_id.clone(), journal).is_some() {
            return Err(CorpusError::DuplicateJournal(row.journal_id));
        }
    }
    Ok(journals)
}

fn load_territories(path: &Path) -> Result<TerritoryRegistry, CorpusError> {
    #[derive(Deserialize)]
    struct Row {
        level: String,
        code: String,
        name: String,
        region_code: String,
        macro_area: String,
        population: String,
        gdp: String,
    }
    let parse_pop = |path: &Path, line, value: &str| -> Result<f64, CorpusError> {
        value
            .replace(',', "")
            .parse::<f64>()
            .map_err(|_| registry_row(path, line, format!("bad population '{value}'")))
    };
    let mut reader = csv_reader(path)?;
    let mut provinces = BTreeMap::new();
    let mut regions = BTreeMap::new();
    let mut nation: Option<Nation> = None;
    for (idx, row) in reader.deserialize::<Row>().enumerate() {
        let line = idx as u64 + 2;
        let row = row.map_err(|e| registry_row(path, line, e.to_string()))?;
        match row.level.as_str() {
            "province" => {
                if !row.gdp.is_empty() {
                    return Err(registry_row(path, line, "GDP is not recorded at province level"));
                }
                if row.region_code.is_empty() {
                    return Err(registry_row(path, line, "province row missing region_code"));
                }
                let province = Province {
                    name: row.name,
                    region_code: row.region_code,
                    population: parse_pop(path, line, &row.population)?,
                };
                if provinces.insert(row.code.clone(), province).is_some() {
                    return Err(registry_row(
                        path,
                        line,
                        format!("duplicate province code '{}'", row.code),
                    ));
                }
            }
            "region" => {
                let gdp = row
                    .gdp
                    .replace(',', "")
                    .parse::<f64>()
                    .map_err(|_| registry_row(path, line, format!("bad gdp '{}'", row.gdp)))?;
                let region = Region {
                    name: row.name,
                    macro_area: row.macro_area,
                    population: parse_pop(path, line, &row.population)?,
                    gdp,
                };
                if regions.insert(row.code.clone(), region).is_some() {
                    return Err(registry_row(
                        path,
                        line,
                        format!("duplicate region code '{}'", row.code),
                    ));
                }
            }
            "nation" => {
                let gdp = row
                    .gdp
                    .replace(',', "")
                    .parse::<f64>()
                    .map_err(|_| registry_row(path, line, format!("bad gdp '{}'", row.gdp)))?;
                let n = Nation {
                    code: row.code,
                    name: row.name,
                    population: parse_pop(path, line, &row.population)?,
                    gdp,
                };
                if nation.replace(n).is_some() {
                    return Err(CorpusError::DuplicateNation);
                }
            }
            other => {
                return Err(registry_row(
                    path,
                    line,
                    format!("unknown territory level '{other}'"),
                ));
            }
        }
    }
    let nation = nation.ok_or(CorpusError::MissingNation)?;
    Ok(TerritoryRegistry {
        provinces,
        regions,
        nation,
    })
}
