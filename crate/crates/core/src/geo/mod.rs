//! Location semantics: clustering GPS fixes into places, labeling them from a
//! campus map, and deriving dwell time and distance travelled.

mod dbscan;
mod semantic;
mod visits;

pub use dbscan::{dbscan, dbscan_cluster, ClusterParams, Clustering, PlaceCluster};
pub use semantic::{MapEntry, MapError, PlaceLabel, SemanticMap};
pub use visits::{daily_distance, dwell_by_cluster, label_visits, segment_visits, significant_places, VisitSegment, SIGNIFICANT_DWELL};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatLon {
    pub lat: f64,
    pub lon: f64,
}

impl LatLon {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    /// Moves `north_m` / `east_m` meters on a local tangent plane.
    pub fn offset(self, north_m: f64, east_m: f64) -> Self {
        let dlat = north_m / EARTH_RADIUS_M;
        let dlon = east_m / (EARTH_RADIUS_M * self.lat.to_radians().cos());
        Self {
            lat: self.lat + dlat.to_degrees(),
            lon: self.lon + dlon.to_degrees(),
        }
    }
}

/// Great-circle distance in meters.
pub fn haversine_m(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

pub fn haversine_km(a: LatLon, b: LatLon) -> f64 {
    haversine_m(a, b) / 1000.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpsPoint {
    pub t: DateTime<Utc>,
    pub pos: LatLon,
    pub acc_m: f64,
}
