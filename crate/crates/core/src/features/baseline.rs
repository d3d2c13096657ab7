use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Feature, FeatureValues};
use crate::profile::UserId;

/// Days of history behind a baseline, ending the day before `as_of`.
pub const BASELINE_DAYS: i64 = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendParams {
    /// Changes strictly inside +/- this percentage are stable.
    pub stable_pct: f64,
    pub min_days: u32,
    /// Reported change when the baseline mean is zero and today is not.
    pub zero_baseline_pct: f64,
}

impl Default for TrendParams {
    fn default() -> Self {
        Self { stable_pct: 10.0, min_days: 7, zero_baseline_pct: 999.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increase,
    Decrease,
    Stable,
    InsufficientData,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Increase => "increase",
            Direction::Decrease => "decrease",
            Direction::Stable => "stable",
            Direction::InsufficientData => "insufficient_data",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureTrend {
    pub direction: Direction,
    /// `None` exactly when the direction is insufficient data.
    pub pct_change: Option<f64>,
}

pub type TrendReport = BTreeMap<Feature, FeatureTrend>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoricalBaseline {
    pub user_id: UserId,
    pub as_of: NaiveDate,
    pub means: BTreeMap<Feature, f64>,
    /// Days in the lookback that had data for each feature.
    pub days_of_data: BTreeMap<Feature, u32>,
}

impl HistoricalBaseline {
    pub fn empty(user_id: UserId, as_of: NaiveDate) -> Self {
        Self { user_id, as_of, means: BTreeMap::new(), days_of_data: BTreeMap::new() }
    }
}

/// Classifies one value against its baseline mean.
pub fn classify(today: f64, mean: f64, days: u32, params: &TrendParams) -> FeatureTrend {
    if days < params.min_days {
        return FeatureTrend { direction: Direction::InsufficientData, pct_change: None };
    }
    let pct = if mean > 0.0 {
        100.0 * (today - mean) / mean
    } else if today > 0.0 {
        params.zero_baseline_pct
    } else {
        0.0
    };
    let direction = if pct.abs() < params.stable_pct {
        Direction::Stable
    } else if pct > 0.0 {
        Direction::Increase
    } else {
        Direction::Decrease
    };
    FeatureTrend { direction, pct_change: Some(pct) }
}

/// Trend for every feature in `today`. Features missing from `today` (no
/// data in the current window) are insufficient data.
pub fn trend(today: &FeatureValues, baseline: &HistoricalBaseline, params: &TrendParams) -> TrendReport {
    Feature::ALL
        .iter()
        .map(|&f| {
            let t = match today.get(&f) {
                Some(&v) => classify(
                    v,
                    baseline.means.get(&f).copied().unwrap_or(0.0),
                    baseline.days_of_data.get(&f).copied().unwrap_or(0),
                    params,
                ),
                None => FeatureTrend { direction: Direction::InsufficientData, pct_change: None },
            };
            (f, t)
        })
        .collect()
}

/// Per-feature mean over the given days, counting only days that carry the
/// feature. Features with no days are absent.
pub fn weekly_mean<'a>(days: impl IntoIterator<Item = &'a FeatureValues>) -> FeatureValues {
    let mut acc: BTreeMap<Feature, (f64, u32)> = BTreeMap::new();
    for day in days {
        for (&f, &v) in day {
            let e = acc.entry(f).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(f, (s, n))| (f, s / n as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> TrendParams {
        TrendParams::default()
    }

    #[test]
    fn boundaries() {
        assert_eq!(classify(110.0, 100.0, 30, &p()).direction, Direction::Increase);
        assert_eq!(classify(109.9, 100.0, 30, &p()).direction, Direction::Stable);
        assert_eq!(classify(90.0, 100.0, 30, &p()).direction, Direction::Decrease);
        assert_eq!(classify(90.1, 100.0, 30, &p()).direction, Direction::Stable);
    }

    #[test]
    fn zero_baseline() {
        assert_eq!(classify(0.0, 0.0, 10, &p()), FeatureTrend { direction: Direction::Stable, pct_change: Some(0.0) });
        assert_eq!(classify(3.0, 0.0, 10, &p()), FeatureTrend { direction: Direction::Increase, pct_change: Some(999.0) });
    }

    #[test]
    fn short_history() {
        assert_eq!(classify(5.0, 1.0, 6, &p()).direction, Direction::InsufficientData);
        assert_eq!(classify(5.0, 1.0, 7, &p()).direction, Direction::Increase);
    }

    #[test]
    fn weekly_mean_skips_missing() {
        let a: FeatureValues = [(Feature::Walking, 10.0), (Feature::Gym, 4.0)].into();
        let b: FeatureValues = [(Feature::Walking, 20.0)].into();
        let m = weekly_mean([&a, &b]);
        assert_eq!(m[&Feature::Walking], 15.0);
        assert_eq!(m[&Feature::Gym], 4.0);
    }
}
