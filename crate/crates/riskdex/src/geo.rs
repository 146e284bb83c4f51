//! Great-circle geometry for gate buffering.
//!
//! Buffer membership is decided by the haversine distance from a gate to
//! the nearest point of a region's boundary, with boundary edges sampled
//! at steps of at most [`EDGE_STEP_KM`] of arc. A gate strictly inside a
//! polygon is at distance zero.

use serde::Serialize;

/// Mean Earth radius in kilometers (IUGG).
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Maximum arc length between consecutive boundary samples.
pub const EDGE_STEP_KM: f64 = 1.0;

/// A point on the sphere in WGS84 degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }
}

/// A linear ring in GeoJSON position order (lon, lat), closed (first ==
/// last) with at least four positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring(pub Vec<(f64, f64)>);

impl Ring {
    pub fn is_closed(&self) -> bool {
        self.0.len() >= 4 && self.0.first() == self.0.last()
    }
}

/// Polygon or multipolygon geometry. Each polygon is an outer ring
/// followed by zero or more hole rings.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionGeometry {
    Polygon(Vec<Ring>),
    MultiPolygon(Vec<Vec<Ring>>),
}

impl RegionGeometry {
    pub fn polygons(&self) -> Vec<&[Ring]> {
        match self {
            RegionGeometry::Polygon(rings) => vec![rings.as_slice()],
            RegionGeometry::MultiPolygon(polys) => polys.iter().map(|p| p.as_slice()).collect(),
        }
    }

    /// All rings (outer and holes) across all polygons.
    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        self.polygons().into_iter().flatten()
    }

    /// Structural validity: at least one polygon, every ring closed.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let polygons = self.polygons();
        if polygons.is_empty() {
            return Err("geometry has no polygons".into());
        }
        for rings in polygons {
            if rings.is_empty() {
                return Err("polygon has no rings".into());
            }
            for ring in rings {
                if ring.0.len() < 4 {
                    return Err(format!("ring has {} positions, at least 4 required", ring.0.len()));
                }
                if !ring.is_closed() {
                    return Err("ring is not closed".into());
                }
            }
        }
        Ok(())
    }
}

/// Haversine great-circle distance in kilometers.
pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let s = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * s.sqrt().min(1.0).asin()
}

/// Even-odd point-in-ring test in coordinate space.
fn point_in_ring(point: LatLon, ring: &Ring) -> bool {
    let mut inside = false;
    let pts = &ring.0;
    // last position repeats the first, so skip it
    let n = pts.len() - 1;
    for i in 0..n {
        let (x1, y1) = pts[i];
        let (x2, y2) = pts[(i + 1) % n];
        if ((y1 > point.lat) != (y2 > point.lat))
            && point.lon < (x2 - x1) * (point.lat - y1) / (y2 - y1) + x1
        {
            inside = !inside;
        }
    }
    inside
}

/// Whether the point lies in the interior of the geometry (inside an
/// outer ring and outside that polygon's holes).
pub fn point_in_geometry(point: LatLon, geometry: &RegionGeometry) -> bool {
    geometry.polygons().iter().any(|rings| {
        let mut crossings = 0;
        for ring in *rings {
            if point_in_ring(point, ring) {
                crossings += 1;
            }
        }
        // outer ring plus an even number of holes
        crossings % 2 == 1
    })
}

/// Minimum haversine distance from `point` to the boundary of `geometry`,
/// sampling each edge at arc steps of at most [`EDGE_STEP_KM`].
pub fn distance_to_boundary_km(point: LatLon, geometry: &RegionGeometry) -> f64 {
    let mut best = f64::INFINITY;
    for ring in geometry.rings() {
        let pts = &ring.0;
        for pair in pts.windows(2) {
            let a = LatLon::new(pair[0].1, pair[0].0);
            let b = LatLon::new(pair[1].1, pair[1].0);
            let length = haversine_km(a, b);
            let steps = (length / EDGE_STEP_KM).ceil().max(1.0) as usize;
            for i in 0..=steps {
                let t = i as f64 / steps as f64;
                let sample = LatLon::new(
                    a.lat + t * (b.lat - a.lat),
                    a.lon + t * (b.lon - a.lon),
                );
                best = best.min(haversine_km(point, sample));
            }
        }
    }
    best
}

/// Distance from a point to a region: zero when the point is inside,
/// otherwise the distance to the nearest boundary point.
pub fn distance_to_region_km(point: LatLon, geometry: &RegionGeometry) -> f64 {
    if point_in_geometry(point, geometry) {
        0.0
    } else {
        distance_to_boundary_km(point, geometry)
    }
}

/// Square test helper used across the crate's tests and examples: a
/// closed ring spanning `[lon0, lon1] x [lat0, lat1]`.
pub fn rectangle_ring(lon0: f64, lat0: f64, lon1: f64, lat1: f64) -> Ring {
    Ring(vec![
        (lon0, lat0),
        (lon1, lat0),
        (lon1, lat1),
        (lon0, lat1),
        (lon0, lat0),
    ])
}
