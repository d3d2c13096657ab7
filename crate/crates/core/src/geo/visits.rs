use std::collections::BTreeMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::dbscan::{cmp_points, Clustering, PlaceCluster};
use super::{haversine_km, GpsPoint, LatLon, PlaceLabel, SemanticMap};
use crate::time::TimeRange;

/// A place counts as significant once the day's dwell there reaches this.
pub const SIGNIFICANT_DWELL: Duration = Duration::minutes(30);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitSegment {
    pub cluster_id: usize,
    pub label: Option<PlaceLabel>,
    pub centroid: LatLon,
    pub enter: DateTime<Utc>,
    pub exit: DateTime<Utc>,
    pub fixes: usize,
}

impl VisitSegment {
    pub fn dwell(&self) -> Duration {
        self.exit - self.enter
    }

    /// Dwell inside `range`, in seconds.
    pub fn dwell_within(&self, range: TimeRange) -> f64 {
        range.overlap_secs(self.enter, self.exit)
    }
}

/// Splits each cluster's fixes into visits. Noise fixes are ignored; a visit
/// continues while the next fix of the same cluster follows within
/// `max_gap` and no fix of another cluster intervenes. Single-fix visits
/// have no duration and are dropped.
pub fn segment_visits(
    points: &[GpsPoint],
    labels: &[Option<usize>],
    clusters: &[PlaceCluster],
    max_gap: Duration,
) -> Vec<VisitSegment> {
    let mut order: Vec<usize> = (0..points.len()).filter(|&i| labels[i].is_some()).collect();
    order.sort_by(|&a, &b| cmp_points(&points[a], &points[b]).then(a.cmp(&b)));

    let mut out = Vec::new();
    let mut current: Option<VisitSegment> = None;
    for i in order {
        let c = labels[i].unwrap();
        let t = points[i].t;
        match current.as_mut() {
            Some(seg) if seg.cluster_id == c && t - seg.exit <= max_gap => {
                seg.exit = t;
                seg.fixes += 1;
            }
            _ => {
                if let Some(seg) = current.take() {
                    if seg.exit > seg.enter {
                        out.push(seg);
                    }
                }
                current = Some(VisitSegment {
                    cluster_id: c,
                    label: clusters[c].label,
                    centroid: clusters[c].centroid,
                    enter: t,
                    exit: t,
                    fixes: 1,
                });
            }
        }
    }
    if let Some(seg) = current {
        if seg.exit > seg.enter {
            out.push(seg);
        }
    }
    out
}

/// Labels every cluster (and its visits) from the map; unmatched clusters
/// become [`PlaceLabel::Other`].
pub fn label_visits(clustering: &mut Clustering, map: &SemanticMap) -> Vec<VisitSegment> {
    for c in &mut clustering.clusters {
        c.label = Some(map.label_at(c.centroid));
    }
    for s in &mut clustering.segments {
        s.label = clustering.clusters[s.cluster_id].label;
    }
    clustering.segments.clone()
}

/// Seconds of dwell per cluster inside `range`.
pub fn dwell_by_cluster(segments: &[VisitSegment], range: TimeRange) -> BTreeMap<usize, f64> {
    let mut out = BTreeMap::new();
    for s in segments {
        let d = s.dwell_within(range);
        if d > 0.0 {
            *out.entry(s.cluster_id).or_insert(0.0) += d;
        }
    }
    out
}

fn significant_ids(segments: &[VisitSegment], day: TimeRange) -> Vec<usize> {
    let threshold = SIGNIFICANT_DWELL.num_seconds() as f64;
    dwell_by_cluster(segments, day)
        .into_iter()
        .filter(|(_, d)| *d >= threshold)
        .map(|(c, _)| c)
        .collect()
}

/// Number of distinct clusters with at least 30 minutes of dwell in `day`.
pub fn significant_places(segments: &[VisitSegment], day: TimeRange) -> usize {
    significant_ids(segments, day).len()
}

/// Kilometers travelled between consecutive significant places of the day,
/// following visit order. Repeated visits to the same place in a row count once.
pub fn daily_distance(segments: &[VisitSegment], day: TimeRange) -> f64 {
    let significant = significant_ids(segments, day);
    let mut visits: Vec<&VisitSegment> = segments
        .iter()
        .filter(|s| s.dwell_within(day) > 0.0 && significant.contains(&s.cluster_id))
        .collect();
    visits.sort_by_key(|s| s.enter);
    visits.dedup_by_key(|s| s.cluster_id);
    visits.windows(2).map(|w| haversine_km(w[0].centroid, w[1].centroid)).sum()
}
