//! Shared fixtures and reference implementations. The oracles here are
//! written independently of the library code they check.
#![allow(dead_code)]

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sensejournal::geo::{GpsPoint, LatLon, VisitSegment};
use sensejournal::profile::UserId;
use sensejournal::sim::{generate, Scenario, Trace};
use sensejournal::time::TimeRange;

pub fn user(id: &str) -> UserId {
    UserId::new(id).unwrap()
}

pub fn scenario_trace(name: &str, days: u32, seed: u64, id: &str) -> Trace {
    generate(&Scenario::named(name).unwrap(), days, seed, &user(id)).unwrap()
}

const R: f64 = 6_371_008.8;

/// Great-circle distance in meters.
pub fn great_circle_m(a: LatLon, b: LatLon) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dp = p2 - p1;
    let dl = (b.lon - a.lon).to_radians();
    let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * R * h.sqrt().min(1.0).asin()
}

/// Quadratic DBSCAN by a different route: core points by brute force,
/// clusters as connected components of the core graph (union-find), numbered
/// by their earliest core point in (time, lat, lon) order; a border point
/// joins the lowest-numbered cluster among its core neighbors.
pub fn dbscan_oracle(points: &[GpsPoint], eps_m: f64, min_pts: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let near = |i: usize, j: usize| great_circle_m(points[i].pos, points[j].pos) <= eps_m;
    let core: Vec<bool> = (0..n).map(|i| (0..n).filter(|&j| near(i, j)).count() >= min_pts).collect();

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if core[i] && core[j] && near(i, j) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (p, q) = (&points[a], &points[b]);
        (p.t, p.pos.lat, p.pos.lon, a).partial_cmp(&(q.t, q.pos.lat, q.pos.lon, b)).unwrap()
    });
    let mut id_of_root: BTreeMap<usize, usize> = BTreeMap::new();
    for &i in &order {
        if core[i] {
            let r = find(&mut parent, i);
            let next = id_of_root.len();
            id_of_root.entry(r).or_insert(next);
        }
    }
    (0..n)
        .map(|i| {
            if core[i] {
                return Some(id_of_root[&find(&mut parent, i)]);
            }
            (0..n)
                .filter(|&j| core[j] && near(i, j))
                .map(|j| id_of_root[&find(&mut parent, j)])
                .min()
        })
        .collect()
}

/// Random blobs plus uniform noise around a campus-sized area, with
/// timestamps that sometimes collide.
pub fn random_point_set(rng: &mut ChaCha8Rng, max_n: usize) -> Vec<GpsPoint> {
    let origin = LatLon::new(43.7 + rng.random_range(-0.01..0.01), -72.29 + rng.random_range(-0.01..0.01));
    let t0 = Utc.with_ymd_and_hms(2024, 1, 8, 12, 0, 0).unwrap();
    let n = rng.random_range(0..=max_n);
    let blobs: Vec<(f64, f64, f64)> = (0..rng.random_range(1..=5))
        .map(|_| (rng.random_range(-800.0..800.0), rng.random_range(-800.0..800.0), rng.random_range(5.0..40.0)))
        .collect();
    (0..n)
        .map(|_| {
            let (north, east) = if rng.random_bool(0.75) {
                let (bn, be, spread) = blobs[rng.random_range(0..blobs.len())];
                (bn + rng.random_range(-spread..spread), be + rng.random_range(-spread..spread))
            } else {
                (rng.random_range(-1000.0..1000.0), rng.random_range(-1000.0..1000.0))
            };
            GpsPoint {
                t: t0 + Duration::minutes(rng.random_range(0..600)),
                pos: origin.offset(north, east),
                acc_m: 10.0,
            }
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn overlap_s(a: DateTime<Utc>, b: DateTime<Utc>, day: TimeRange) -> f64 {
    let (s, e) = (a.max(day.start), b.min(day.end));
    if e > s {
        (e - s).num_milliseconds() as f64 / 1000.0
    } else {
        0.0
    }
}

/// Clusters with at least 30 minutes of dwell inside `day`.
pub fn significant_oracle(segments: &[VisitSegment], day: TimeRange) -> Vec<usize> {
    let mut dwell: BTreeMap<usize, f64> = BTreeMap::new();
    for s in segments {
        *dwell.entry(s.cluster_id).or_default() += overlap_s(s.enter, s.exit, day);
    }
    dwell.into_iter().filter(|(_, d)| *d >= 1800.0).map(|(c, _)| c).collect()
}

/// Pairwise sum of centroid distances along the day's significant visits,
/// counting a run of visits to one place once.
pub fn distance_oracle_km(segments: &[VisitSegment], day: TimeRange) -> f64 {
    let sig = significant_oracle(segments, day);
    let mut seq: Vec<&VisitSegment> = segments
        .iter()
        .filter(|s| sig.contains(&s.cluster_id) && overlap_s(s.enter, s.exit, day) > 0.0)
        .collect();
    seq.sort_by_key(|s| s.enter);
    let mut total = 0.0;
    let mut prev: Option<&VisitSegment> = None;
    for s in seq {
        if let Some(p) = prev {
            if p.cluster_id != s.cluster_id {
                total += great_circle_m(p.centroid, s.centroid) / 1000.0;
            }
        }
        prev = Some(s);
    }
    total
}
