//! Density-based clustering of GPS fixes with the haversine metric.
//!
//! Points are visited in a fixed order (timestamp, then latitude, then
//! longitude) and clusters are numbered in order of discovery. A border point
//! reachable from several clusters therefore lands in the lowest-numbered one,
//! and the result does not depend on the order of the input slice.

use std::cmp::Ordering;
use std::collections::VecDeque;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::visits::{segment_visits, VisitSegment};
use super::{haversine_m, GpsPoint, LatLon, PlaceLabel, EARTH_RADIUS_M};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub eps_m: f64,
    pub min_pts: usize,
    /// Fixes with worse reported accuracy are dropped before clustering.
    pub max_accuracy_m: f64,
    /// Consecutive fixes of one cluster further apart than this start a new visit.
    pub max_visit_gap: Duration,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            eps_m: 30.0,
            min_pts: 5,
            max_accuracy_m: 100.0,
            max_visit_gap: Duration::minutes(10),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceCluster {
    pub cluster_id: usize,
    /// Indices into the clustered point slice, ascending.
    pub members: Vec<usize>,
    pub centroid: LatLon,
    pub first_seen: DateTime<Utc>,
    pub last_seen: DateTime<Utc>,
    pub total_dwell: Duration,
    pub label: Option<PlaceLabel>,
    pub eps_m: f64,
    pub min_pts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub clusters: Vec<PlaceCluster>,
    /// Indices of points that belong to no cluster, ascending.
    pub noise: Vec<usize>,
    /// Per-point cluster id.
    pub labels: Vec<Option<usize>>,
    pub segments: Vec<VisitSegment>,
}

fn visit_order(points: &[GpsPoint]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (&points[a], &points[b]);
        p.t.cmp(&q.t)
            .then_with(|| p.pos.lat.total_cmp(&q.pos.lat))
            .then_with(|| p.pos.lon.total_cmp(&q.pos.lon))
            .then_with(|| a.cmp(&b))
    });
    order
}

/// Latitude-sorted sweep index. Great-circle distance is never smaller than
/// the meridional distance, so only points within `eps / R` radians of
/// latitude can be neighbors.
struct LatIndex {
    by_lat: Vec<usize>,
    lats: Vec<f64>,
}

impl LatIndex {
    fn new(points: &[GpsPoint]) -> Self {
        let mut by_lat: Vec<usize> = (0..points.len()).collect();
        by_lat.sort_by(|&a, &b| points[a].pos.lat.total_cmp(&points[b].pos.lat).then(a.cmp(&b)));
        let lats = by_lat.iter().map(|&i| points[i].pos.lat).collect();
        Self { by_lat, lats }
    }

    fn neighbors(&self, points: &[GpsPoint], i: usize, eps_m: f64) -> Vec<usize> {
        // Small slack on the band; the haversine check below is exact.
        let band = (eps_m / EARTH_RADIUS_M).to_degrees() * (1.0 + 1e-9) + 1e-12;
        let lat = points[i].pos.lat;
        let lo = self.lats.partition_point(|&x| x < lat - band);
        let hi = self.lats.partition_point(|&x| x <= lat + band);
        let mut out: Vec<usize> = self.by_lat[lo..hi]
            .iter()
            .copied()
            .filter(|&j| haversine_m(points[i].pos, points[j].pos) <= eps_m)
            .collect();
        out.sort_unstable();
        out
    }
}

/// Plain DBSCAN. Returns per-point cluster ids; `min_pts` counts the point itself.
pub fn dbscan(points: &[GpsPoint], eps_m: f64, min_pts: usize) -> Vec<Option<usize>> {
    assert!(eps_m > 0.0 && min_pts >= 1, "eps_m must be positive and min_pts at least 1");
    let n = points.len();
    let index = LatIndex::new(points);
    let neighborhoods: Vec<Vec<usize>> = (0..n).map(|i| index.neighbors(points, i, eps_m)).collect();
    let is_core: Vec<bool> = neighborhoods.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next_id = 0;
    let order = visit_order(points);
    let rank = {
        let mut r = vec![0usize; n];
        for (pos, &i) in order.iter().enumerate() {
            r[i] = pos;
        }
        r
    };
    for &seed in &order {
        if labels[seed].is_some() || !is_core[seed] {
            continue;
        }
        let id = next_id;
        next_id += 1;
        labels[seed] = Some(id);
        let mut queue = VecDeque::from([seed]);
        while let Some(p) = queue.pop_front() {
            if !is_core[p] {
                continue;
            }
            let mut nb = neighborhoods[p].clone();
            nb.sort_by_key(|&j| rank[j]);
            for q in nb {
                if labels[q].is_none() {
                    labels[q] = Some(id);
                    queue.push_back(q);
                }
            }
        }
    }
    labels
}

/// Clusters fixes, then derives each cluster's visits and total dwell.
pub fn dbscan_cluster(points: &[GpsPoint], params: &ClusterParams) -> Clustering {
    let labels = dbscan(points, params.eps_m, params.min_pts);
    let n_clusters = labels.iter().flatten().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_clusters];
    let mut noise = Vec::new();
    for (i, l) in labels.iter().enumerate() {
        match l {
            Some(c) => members[*c].push(i),
            None => noise.push(i),
        }
    }
    let mut clusters: Vec<PlaceCluster> = members
        .into_iter()
        .enumerate()
        .map(|(cluster_id, members)| {
            let k = members.len() as f64;
            let lat = members.iter().map(|&i| points[i].pos.lat).sum::<f64>() / k;
            let lon = members.iter().map(|&i| points[i].pos.lon).sum::<f64>() / k;
            let first_seen = members.iter().map(|&i| points[i].t).min().unwrap();
            let last_seen = members.iter().map(|&i| points[i].t).max().unwrap();
            PlaceCluster {
                cluster_id,
                members,
                centroid: LatLon::new(lat, lon),
                first_seen,
                last_seen,
                total_dwell: Duration::zero(),
                label: None,
                eps_m: params.eps_m,
                min_pts: params.min_pts,
            }
        })
        .collect();
    let segments = segment_visits(points, &labels, &clusters, params.max_visit_gap);
    for seg in &segments {
        clusters[seg.cluster_id].total_dwell += seg.dwell();
    }
    Clustering {
        clusters,
        noise,
        labels,
        segments,
    }
}

pub(crate) fn cmp_points(a: &GpsPoint, b: &GpsPoint) -> Ordering {
    a.t.cmp(&b.t)
        .then_with(|| a.pos.lat.total_cmp(&b.pos.lat))
        .then_with(|| a.pos.lon.total_cmp(&b.pos.lon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    fn t0() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 2, 5, 12, 0, 0).unwrap()
    }

    fn blob(center: LatLon, n: usize, spread_m: f64, start_min: i64) -> Vec<GpsPoint> {
        (0..n)
            .map(|i| {
                let a = i as f64 * 2.399;
                let r = spread_m * ((i % 5) as f64 / 5.0);
                GpsPoint {
                    t: t0() + Duration::minutes(start_min + i as i64),
                    pos: center.offset(r * a.sin(), r * a.cos()),
                    acc_m: 5.0,
                }
            })
            .collect()
    }

    #[test]
    fn empty_input_gives_empty_output() {
        let c = dbscan_cluster(&[], &ClusterParams::default());
        assert!(c.clusters.is_empty() && c.noise.is_empty());
    }

    #[test]
    fn isolated_points_are_noise() {
        let base = LatLon::new(43.70, -72.29);
        let pts: Vec<_> = (0..3)
            .map(|i| GpsPoint {
                t: t0() + Duration::minutes(i),
                pos: base.offset(500.0 * i as f64, 0.0),
                acc_m: 5.0,
            })
            .collect();
        let params = ClusterParams { min_pts: 4, ..Default::default() };
        let c = dbscan_cluster(&pts, &params);
        assert_eq!(c.clusters.len(), 0);
        assert_eq!(c.noise, vec![0, 1, 2]);
    }

    #[test]
    fn two_blobs_two_clusters() {
        let a = LatLon::new(43.70, -72.29);
        let mut pts = blob(a, 10, 15.0, 0);
        pts.extend(blob(a.offset(0.0, 500.0), 10, 15.0, 100));
        let params = ClusterParams { eps_m: 50.0, min_pts: 4, ..Default::default() };
        let c = dbscan_cluster(&pts, &params);
        assert_eq!(c.clusters.len(), 2);
        assert!(c.noise.is_empty());
        for cl in &c.clusters {
            assert_eq!(cl.members.len(), 10);
            let (lo_lat, hi_lat) = cl.members.iter().fold((f64::MAX, f64::MIN), |(lo, hi), &i| {
                (lo.min(pts[i].pos.lat), hi.max(pts[i].pos.lat))
            });
            assert!(lo_lat <= cl.centroid.lat && cl.centroid.lat <= hi_lat);
            assert_eq!(cl.eps_m, 50.0);
        }
    }

    #[test]
    fn border_point_goes_to_lowest_cluster() {
        // Two dense groups 50 m apart with one point halfway; eps 26 m makes it
        // a border point of both.
        let a = LatLon::new(43.70, -72.29);
        let mut pts = Vec::new();
        for i in 0..4 {
            pts.push(GpsPoint { t: t0() + Duration::minutes(i), pos: a.offset(0.0, i as f64 * 0.5), acc_m: 1.0 });
        }
        for i in 0..4 {
            pts.push(GpsPoint { t: t0() + Duration::minutes(10 + i), pos: a.offset(0.0, 50.0 + i as f64 * 0.5), acc_m: 1.0 });
        }
        let mid = GpsPoint { t: t0() + Duration::minutes(30), pos: a.offset(0.0, 25.5), acc_m: 1.0 };
        pts.push(mid);
        let labels = dbscan(&pts, 26.0, 4);
        assert_eq!(labels[8], Some(0));
        pts.reverse();
        let labels = dbscan(&pts, 26.0, 4);
        assert_eq!(labels[0], Some(0), "label must not depend on input order");
    }
}
