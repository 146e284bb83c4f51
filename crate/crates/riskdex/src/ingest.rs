//! Loading of indicator tables, region geometries, and arrival gates,
//! plus the gate-buffering rule that fills the foreign-tourist column.
//!
//! A gate contributes its full arrival count to every region whose
//! boundary or interior lies within the gate's buffer radius; counts are
//! duplicated across intersecting regions, never apportioned.

use std::collections::HashSet;
use std::path::Path;

use serde_json::value::RawValue;

use crate::error::{io_err, Error, Result};
use crate::geo::{distance_to_region_km, LatLon, RegionGeometry, Ring};

/// Default buffer radius in kilometers for arrival gates.
pub const DEFAULT_BUFFER_KM: f64 = 25.0;

/// An administrative region with its geometry.
#[derive(Debug, Clone)]
pub struct Region {
    pub region_id: String,
    pub name: String,
    pub geometry: RegionGeometry,
    pub group_tag: Option<String>,
    /// Original GeoJSON geometry text, preserved byte-for-byte so exports
    /// can pass it through untouched.
    pub geometry_json: Box<RawValue>,
    /// Original feature properties, re-emitted on export.
    pub properties: serde_json::Map<String, serde_json::Value>,
}

/// An arrival gate (airport, harbor, border checkpoint).
#[derive(Debug, Clone)]
pub struct Gate {
    pub gate_id: String,
    pub location: LatLon,
    pub arrivals: f64,
    pub buffer_km: f64,
}

impl Gate {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: &str| Error::InvalidGate {
            gate_id: self.gate_id.clone(),
            reason: reason.to_string(),
        };
        if !(self.arrivals.is_finite() && self.arrivals >= 0.0) {
            return Err(fail("arrivals must be a nonnegative number"));
        }
        if !(self.buffer_km.is_finite() && self.buffer_km > 0.0) {
            return Err(fail("buffer_km must be positive"));
        }
        if !(-90.0..=90.0).contains(&self.location.lat) {
            return Err(fail("latitude out of [-90, 90]"));
        }
        if !(-180.0..=180.0).contains(&self.location.lon) {
            return Err(fail("longitude out of [-180, 180]"));
        }
        Ok(())
    }
}

/// One indicator column: id, unit, one value per region, and a
/// provenance note.
#[derive(Debug, Clone)]
pub struct IndicatorColumn {
    pub id: String,
    pub unit: String,
    pub values: Vec<f64>,
    pub provenance: String,
}

/// Rectangular region-by-indicator matrix with typed column metadata.
/// Values are complete (no NaN or infinities) once ingestion finishes.
#[derive(Debug, Clone)]
pub struct IndicatorTable {
    pub regions: Vec<String>,
    pub columns: Vec<IndicatorColumn>,
}

impl IndicatorTable {
    pub fn n_regions(&self) -> usize {
        self.regions.len()
    }

    pub fn column(&self, id: &str) -> Result<&IndicatorColumn> {
        self.columns
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| Error::ColumnMismatch { column: id.into() })
    }

    pub fn column_ids(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.id.clone()).collect()
    }

    /// Replace the named column's values, or append a new column.
    pub fn set_column(&mut self, id: &str, values: Vec<f64>, provenance: &str) {
        assert_eq!(values.len(), self.regions.len(), "column length mismatch");
        if let Some(col) = self.columns.iter_mut().find(|c| c.id == id) {
            col.values = values;
            col.provenance = provenance.to_string();
        } else {
            self.columns.push(IndicatorColumn {
                id: id.to_string(),
                unit: String::new(),
                values,
                provenance: provenance.to_string(),
            });
        }
    }
}

/// Policy for cells left empty in the indicator CSV.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    #[default]
    Reject,
    MeanImpute,
    ZeroFill,
}

/// Load the indicator CSV: header row, first column `region_id`, remaining
/// columns numeric, empty cell = missing.
pub fn load_indicator_table(path: &Path, policy: MissingPolicy) -> Result<IndicatorTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 {
        return Err(Error::EmptyTable { path: path.into() });
    }
    let column_ids: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    {
        let mut seen = HashSet::new();
        for id in &column_ids {
            if !seen.insert(id) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate column {id:?} in {}",
                    path.display()
                )));
            }
        }
    }

    let mut regions: Vec<String> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    // cells[j][i] = value of column j at region i; None = missing
    let mut cells: Vec<Vec<Option<f64>>> = vec![Vec::new(); column_ids.len()];

    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let region = record.get(0).unwrap_or("").trim().to_string();
        if !seen.insert(region.clone()) {
            return Err(Error::DuplicateRegionId { region });
        }
        for (j, column) in column_ids.iter().enumerate() {
            let raw = record.get(j + 1).unwrap_or("").trim();
            if raw.is_empty() {
                cells[j].push(None);
                continue;
            }
            match raw.parse::<f64>() {
                Ok(v) if v.is_finite() => cells[j].push(Some(v)),
                _ => {
                    return Err(Error::NonNumericCell {
                        region,
                        column: column.clone(),
                        value: raw.to_string(),
                    })
                }
            }
        }
        regions.push(region);
    }
    if regions.is_empty() {
        return Err(Error::EmptyTable { path: path.into() });
    }

    let provenance = path.display().to_string();
    let mut columns = Vec::with_capacity(column_ids.len());
    for (j, id) in column_ids.iter().enumerate() {
        let values = apply_missing_policy(id, &regions, &cells[j], policy)?;
        columns.push(IndicatorColumn {
            id: id.clone(),
            unit: String::new(),
            values,
            provenance: provenance.clone(),
        });
    }
    Ok(IndicatorTable { regions, columns })
}

fn apply_missing_policy(
    column: &str,
    regions: &[String],
    cells: &[Option<f64>],
    policy: MissingPolicy,
) -> Result<Vec<f64>> {
    let first_missing = cells.iter().position(Option::is_none);
    match policy {
        MissingPolicy::Reject => {
            if let Some(i) = first_missing {
                return Err(Error::MissingCell {
                    region: regions[i].clone(),
                    column: column.to_string(),
                });
            }
            Ok(cells.iter().map(|c| c.unwrap()).collect())
        }
        MissingPolicy::ZeroFill => Ok(cells.iter().map(|c| c.unwrap_or(0.0)).collect()),
        MissingPolicy::MeanImpute => {
            let present: Vec<f64> = cells.iter().filter_map(|c| *c).collect();
            if present.is_empty() {
                // nothing to take a mean over
                return Err(Error::MissingCell {
                    region: regions[first_missing.unwrap()].clone(),
                    column: column.to_string(),
                });
            }
            let mean = present.iter().sum::<f64>() / present.len() as f64;
            Ok(cells.iter().map(|c| c.unwrap_or(mean)).collect())
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::IoFailure {
            path: path.into(),
            source: io,
        },
        other => Error::InvalidConfig(format!("csv parse error in {}: {other:?}", path.display())),
    }
}

/// Load the gates CSV: `gate_id,lat,lon,arrivals,buffer_km`.
pub fn load_gates(path: &Path) -> Result<Vec<Gate>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut gates = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let gate_id = record.get(0).unwrap_or("").trim().to_string();
        let field = |idx: usize, name: &str| -> Result<f64> {
            record
                .get(idx)
                .unwrap_or("")
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidGate {
                    gate_id: gate_id.clone(),
                    reason: format!("{name} is not numeric"),
                })
        };
        let buffer_raw = record.get(4).unwrap_or("").trim();
        let gate = Gate {
            location: LatLon::new(field(1, "lat")?, field(2, "lon")?),
            arrivals: field(3, "arrivals")?,
            // empty cell falls back to the default radius
            buffer_km: if buffer_raw.is_empty() {
                DEFAULT_BUFFER_KM
            } else {
                field(4, "buffer_km")?
            },
            gate_id,
        };
        gate.validate()?;
        gates.push(gate);
    }
    Ok(gates)
}

/// Load regions from a GeoJSON FeatureCollection. Each feature needs a
/// `region_id` property; `name` and `group_tag` are optional. Feature
/// order is preserved and geometry text is kept verbatim.
pub fn load_regions(path: &Path) -> Result<Vec<Region>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_regions(&text, path)
}

#[derive(serde::Deserialize)]
struct FeatureCollectionIn {
    #[serde(rename = "type")]
    kind: String,
    features: Vec<FeatureIn>,
}

#[derive(serde::Deserialize)]
struct FeatureIn {
    geometry: Option<Box<RawValue>>,
    #[serde(default)]
    properties: Option<serde_json::Map<String, serde_json::Value>>,
}

fn parse_regions(text: &str, path: &Path) -> Result<Vec<Region>> {
    let malformed = |reason: String| Error::MalformedGeoJson {
        path: path.into(),
        reason,
    };
    let collection: FeatureCollectionIn =
        serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    if collection.kind != "FeatureCollection" {
        return Err(malformed(format!(
            "expected a FeatureCollection, found {:?}",
            collection.kind
        )));
    }
    let mut regions = Vec::with_capacity(collection.features.len());
    let mut seen = HashSet::new();
    for (index, feature) in collection.features.into_iter().enumerate() {
        let properties = feature.properties.unwrap_or_default();
        let region_id = properties
            .get("region_id")
            .and_then(|v| v.as_str())
            .map(str::to_string)
            .ok_or(Error::MissingRegionIdProperty {
                path: path.into(),
                index,
            })?;
        if !seen.insert(region_id.clone()) {
            return Err(Error::DuplicateRegionId { region: region_id });
        }
        let geometry_json = feature.geometry.ok_or_else(|| {
            malformed(format!("feature {index} ({region_id}) has no geometry"))
        })?;
        let geometry = parse_geometry(geometry_json.get()).map_err(|reason| {
            Error::InvalidGeometry {
                region: region_id.clone(),
                reason,
            }
        })?;
        geometry.validate().map_err(|reason| Error::InvalidGeometry {
            region: region_id.clone(),
            reason,
        })?;
        let name = properties
            .get("name")
            .and_then(|v| v.as_str())
            .unwrap_or(&region_id)
            .to_string();
        let group_tag = properties
            .get("group_tag")
            .and_then(|v| v.as_str())
            .map(str::to_string);
        regions.push(Region {
            region_id,
            name,
            geometry,
            group_tag,
            geometry_json,
            properties,
        });
    }
    Ok(regions)
}

#[derive(serde::Deserialize)]
struct GeometryIn {
    #[serde(rename = "type")]
    kind: String,
    coordinates: serde_json::Value,
}

fn parse_geometry(text: &str) -> std::result::Result<RegionGeometry, String> {
    let geom: GeometryIn = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let to_ring = |v: &serde_json::Value| -> std::result::Result<Ring, String> {
        let positions = v.as_array().ok_or("ring is not an array")?;
        let mut ring = Vec::with_capacity(positions.len());
        for pos in positions {
            let pair = pos.as_array().ok_or("position is not an array")?;
            if pair.len() < 2 {
                return Err("position has fewer than two coordinates".into());
            }
            let lon = pair[0].as_f64().ok_or("longitude is not numeric")?;
            let lat = pair[1].as_f64().ok_or("latitude is not numeric")?;
            ring.push((lon, lat));
        }
        Ok(Ring(ring))
    };
    let to_polygon = |v: &serde_json::Value| -> std::result::Result<Vec<Ring>, String> {
        v.as_array()
            .ok_or_else(|| "polygon is not an array".to_string())?
            .iter()
            .map(to_ring)
            .collect()
    };
    match geom.kind.as_str() {
        "Polygon" => Ok(RegionGeometry::Polygon(to_polygon(&geom.coordinates)?)),
        "MultiPolygon" => {
            let polys = geom
                .coordinates
                .as_array()
                .ok_or_else(|| "multipolygon is not an array".to_string())?
                .iter()
                .map(to_polygon)
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Ok(RegionGeometry::MultiPolygon(polys))
        }
        other => Err(format!("unsupported geometry type {other:?}")),
    }
}

/// Sum, per region, of the arrival counts of every gate whose buffer the
/// region intersects. Counts are duplicated across regions, never split.
pub fn assign_gate_arrivals(regions: &[Region], gates: &[Gate]) -> Result<Vec<f64>> {
    if regions.is_empty() {
        return Err(Error::EmptyRegionList);
    }
    for region in regions {
        region
            .geometry
            .validate()
            .map_err(|reason| Error::InvalidGeometry {
                region: region.region_id.clone(),
                reason,
            })?;
    }
    for gate in gates {
        gate.validate()?;
    }
    let mut totals = vec![0.0; regions.len()];
    for gate in gates {
        for (i, region) in regions.iter().enumerate() {
            let distance = distance_to_region_km(gate.location, &region.geometry);
            if distance <= gate.buffer_km {
                totals[i] += gate.arrivals;
            }
        }
    }
    Ok(totals)
}
