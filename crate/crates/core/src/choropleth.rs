//! Self-contained SVG choropleths of territorial strength values.
//!
//! Geometry comes from a GeoJSON feature collection whose features carry a
//! `code` property matching territory codes. Classing is by quantiles
//! (equal counts), robust to the heavy right skew of strength values;
//! polygons are projected with a plate carrée that corrects the aspect at
//! the mean latitude, which is adequate at national extent and needs no
//! dependencies. Rendering is byte-deterministic for identical inputs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::TerritoryRegistry;
use crate::strength::TerritoryLevel;

#[derive(Debug, Error)]
pub enum ChoroplethError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("geometry file {path}: {message}")]
    BadGeometry { path: PathBuf, message: String },
    #[error("duplicate geometry code '{0}'")]
    DuplicateCode(String),
    #[error("geometry code '{0}' is not a registered territory")]
    UnknownCode(String),
    #[error("bin count {0} out of range (2..=9)")]
    BadBinCount(usize),
    #[error("no values to render")]
    NoValues,
}

/// One territory's outline: polygons of rings of (lon, lat) points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerritoryShape {
    pub code: String,
    pub polygons: Vec<Vec<Vec<(f64, f64)>>>,
}

/// Parses a GeoJSON FeatureCollection of Polygon/MultiPolygon features,
/// each carrying a `code` property. Shapes come back sorted by code.
pub fn load_geometry(path: &Path) -> Result<Vec<TerritoryShape>, ChoroplethError> {
    let text = std::fs::read_to_string(path).map_err(|source| ChoroplethError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_geometry(&text).map_err(|message| ChoroplethError::BadGeometry {
        path: path.to_path_buf(),
        message,
    })
}

pub fn parse_geometry(text: &str) -> Result<Vec<TerritoryShape>, String> {
    let root: serde_json::Value =
        serde_json::from_str(text).map_err(|e| format!("invalid JSON: {e}"))?;
    if root["type"] != "FeatureCollection" {
        return Err("expected a FeatureCollection".to_string());
    }
    let features = root["features"]
        .as_array()
        .ok_or("missing features array")?;
    let mut shapes = Vec::new();
    let mut seen = BTreeSet::new();
    for (index, feature) in features.iter().enumerate() {
        let code = feature["properties"]["code"]
            .as_str()
            .ok_or(format!("feature {index}: missing string property 'code'"))?
            .to_string();
        if !seen.insert(code.clone()) {
            return Err(format!("duplicate feature code '{code}'"));
        }
        let geometry = &feature["geometry"];
        let coordinates = &geometry["coordinates"];
        let polygons = match geometry["type"].as_str() {
            Some("Polygon") => vec![parse_polygon(coordinates)
                .map_err(|e| format!("feature {index} ('{code}'): {e}"))?],
            Some("MultiPolygon") => coordinates
                .as_array()
                .ok_or(format!("feature {index} ('{code}'): bad coordinates"))?
                .iter()
                .map(parse_polygon)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| format!("feature {index} ('{code}'): {e}"))?,
            other => {
                return Err(format!(
                    "feature {index} ('{code}'): unsupported geometry type {other:?}"
                ))
            }
        };
        shapes.push(TerritoryShape { code, polygons });
    }
    shapes.sort_by(|a, b| a.code.cmp(&b.code));
    Ok(shapes)
}

fn parse_polygon(value: &serde_json::Value) -> Result<Vec<Vec<(f64, f64)>>, String> {
    value
        .as_array()
        .ok_or("polygon is not an array of rings")?
        .iter()
        .map(|ring| {
            ring.as_array()
                .ok_or("ring is not an array of points")?
                .iter()
                .map(|point| {
                    let pair = point.as_array().ok_or("point is not an array")?;
                    let lon = pair.first().and_then(|v| v.as_f64()).ok_or("bad longitude")?;
                    let lat = pair.get(1).and_then(|v| v.as_f64()).ok_or("bad latitude")?;
                    Ok((lon, lat))
                })
                .collect::<Result<Vec<_>, String>>()
        })
        .collect()
}

/// Everything needed to render one map.
#[derive(Debug, Clone)]
pub struct ChoroplethSpec<'a> {
    /// Map title, typically the category display name.
    pub title: String,
    pub level: TerritoryLevel,
    pub shapes: &'a [TerritoryShape],
    pub values: &'a BTreeMap<String, f64>,
    pub bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedMap {
    pub svg: String,
    pub bins_used: usize,
    pub warnings: Vec<String>,
}

const NO_DATA_FILL: &str = "#d9d9d9";
const RAMP_LIGHT: (u8, u8, u8) = (0xde, 0xeb, 0xf7);
const RAMP_DARK: (u8, u8, u8) = (0x08, 0x30, 0x6b);

fn ramp_color(index: usize, bins: usize) -> String {
    let t = if bins <= 1 {
        1.0
    } else {
        index as f64 / (bins - 1) as f64
    };
    let channel = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        channel(RAMP_LIGHT.0, RAMP_DARK.0),
        channel(RAMP_LIGHT.1, RAMP_DARK.1),
        channel(RAMP_LIGHT.2, RAMP_DARK.2)
    )
}

/// Quantile (equal-count) bin upper bounds by nearest rank; thresholds are
/// deduplicated, so ties can reduce the class count.
fn quantile_thresholds(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let mut thresholds: Vec<f64> = (1..=bins)
        .map(|i| sorted[(i * n).div_ceil(bins).clamp(1, n) - 1])
        .collect();
    thresholds.dedup();
    thresholds
}

fn bin_of(value: f64, thresholds: &[f64]) -> usize {
    thresholds
        .iter()
        .position(|t| value <= *t)
        .unwrap_or(thresholds.len() - 1)
}

fn escape_xml(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

/// Renders the map: one `<path>` per territory, quantile fills, a no-data
/// style for territories without values, a legend and a title.
pub fn render_choropleth(
    spec: &ChoroplethSpec,
    registry: &TerritoryRegistry,
) -> Result<RenderedMap, ChoroplethError> {
    if !(2..=9).contains(&spec.bins) {
        return Err(ChoroplethError::BadBinCount(spec.bins));
    }
    for shape in spec.shapes {
        let known = match spec.level {
            TerritoryLevel::Province => registry.provinces.contains_key(&shape.code),
            TerritoryLevel::Region => registry.regions.contains_key(&shape.code),
            TerritoryLevel::Nation => shape.code == registry.nation.code,
        };
        if !known {
            return Err(ChoroplethError::UnknownCode(shape.code.clone()));
        }
    }
    let mut warnings = Vec::new();
    let values: Vec<f64> = spec
        .values
        .iter()
        .filter(|(code, _)| spec.shapes.iter().any(|s| &s.code == *code))
        .map(|(_, v)| *v)
        .collect();
    if values.is_empty() {
        return Err(ChoroplethError::NoValues);
    }
    let thresholds = quantile_thresholds(&values, spec.bins);
    let bins_used = thresholds.len();
    if bins_used < spec.bins {
        warnings.push(format!(
            "only {bins_used} distinct class(es) for {} requested bins",
            spec.bins
        ));
    }
    let colors: Vec<String> = (0..bins_used).map(|i| ramp_color(i, bins_used)).collect();

    // projected bounds over every ring of every shape
    let mut lon_min = f64::INFINITY;
    let mut lon_max = f64::NEG_INFINITY;
    let mut lat_min = f64::INFINITY;
    let mut lat_max = f64::NEG_INFINITY;
    for shape in spec.shapes {
        for polygon in &shape.polygons {
            for ring in polygon {
                for (lon, lat) in ring {
                    lon_min = lon_min.min(*lon);
                    lon_max = lon_max.max(*lon);
                    lat_min = lat_min.min(*lat);
                    lat_max = lat_max.max(*lat);
                }
            }
        }
    }
    let lat_mid = (lat_min + lat_max) / 2.0;
    let aspect = lat_mid.to_radians().cos();
    let span_x = ((lon_max - lon_min) * aspect).max(1e-9);
    let span_y = (lat_max - lat_min).max(1e-9);

    const MAP_WIDTH: f64 = 720.0;
    const MARGIN: f64 = 20.0;
    const LEGEND_WIDTH: f64 = 230.0;
    const TITLE_HEIGHT: f64 = 40.0;
    let scale = (MAP_WIDTH - 2.0 * MARGIN) / span_x;
    let map_height = span_y * scale + 2.0 * MARGIN;
    let width = MAP_WIDTH + LEGEND_WIDTH;
    let height = map_height + TITLE_HEIGHT;
    let project = |lon: f64, lat: f64| -> (f64, f64) {
        (
            MARGIN + (lon - lon_min) * aspect * scale,
            TITLE_HEIGHT + MARGIN + (lat_max - lat) * scale,
        )
    };

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        fmt2(width),
        fmt2(height),
        fmt2(width),
        fmt2(height)
    );
    let _ = writeln!(
        svg,
        r#"  <text x="{}" y="26" font-family="sans-serif" font-size="18" font-weight="bold">{}</text>"#,
        fmt2(MARGIN),
        escape_xml(&spec.title)
    );
    let _ = writeln!(svg, r#"  <g stroke="#555555" stroke-width="0.5">"#);
    for shape in spec.shapes {
        let mut data = String::new();
        for polygon in &shape.polygons {
            for ring in polygon {
                for (i, (lon, lat)) in ring.iter().enumerate() {
                    let (x, y) = project(*lon, *lat);
                    let op = if i == 0 { 'M' } else { 'L' };
                    let _ = write!(data, "{op}{},{} ", fmt2(x), fmt2(y));
                }
                data.push_str("Z ");
            }
        }
        let fill = match spec.values.get(&shape.code) {
            Some(value) => colors[bin_of(*value, &thresholds)].clone(),
            None => NO_DATA_FILL.to_string(),
        };
        let _ = writeln!(
            svg,
            r#"    <path id="territory-{}" fill="{}" fill-rule="evenodd" d="{}"/>"#,
            escape_xml(&shape.code),
            fill,
            data.trim_end()
        );
    }
    let _ = writeln!(svg, "  </g>");

    // legend: one swatch per class plus the no-data entry
    let legend_x = MAP_WIDTH + 10.0;
    let mut legend_y = TITLE_HEIGHT + 10.0;
    let _ = writeln!(svg, r#"  <g font-family="sans-serif" font-size="12">"#);
    let sorted_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut lower = sorted_min;
    for (i, threshold) in thresholds.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"    <rect x="{}" y="{}" width="16" height="16" fill="{}" stroke="#555555"/>"#,
            fmt2(legend_x),
            fmt2(legend_y),
            colors[i]
        );
        let label = if i == 0 {
            format!("{} – {}", fmt2(lower), fmt2(*threshold))
        } else {
            format!("&gt; {} – {}", fmt2(lower), fmt2(*threshold))
        };
        let _ = writeln!(
            svg,
            r#"    <text x="{}" y="{}">{}</text>"#,
            fmt2(legend_x + 22.0),
            fmt2(legend_y + 12.0),
            label
        );
        lower = *threshold;
        legend_y += 22.0;
    }
    if spec.shapes.iter().any(|s| !spec.values.contains_key(&s.code)) {
        let _ = writeln!(
            svg,
            r#"    <rect x="{}" y="{}" width="16" height="16" fill="{}" stroke="#555555"/>"#,
            fmt2(legend_x),
            fmt2(legend_y),
            NO_DATA_FILL
        );
        let _ = writeln!(
            svg,
            r#"    <text x="{}" y="{}">no data</text>"#,
            fmt2(legend_x + 22.0),
            fmt2(legend_y + 12.0)
        );
    }
    let _ = writeln!(svg, "  </g>");
    let _ = writeln!(svg, "</svg>");

    Ok(RenderedMap {
        svg,
        bins_used,
        warnings,
    })
}
