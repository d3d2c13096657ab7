//! Clocks and local-time helpers.
//!
//! Every time read in the engine goes through a [`Clock`], so a whole study
//! can be replayed against a [`VirtualClock`].

use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::Arc;

use chrono::{DateTime, Duration, LocalResult, NaiveDate, NaiveTime, TimeZone, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// A monotone clock advanced explicitly by the caller, at millisecond
/// resolution.
#[derive(Debug, Clone)]
pub struct VirtualClock {
    millis: Arc<AtomicI64>,
}

impl VirtualClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self {
            millis: Arc::new(AtomicI64::new(start.timestamp_millis())),
        }
    }

    pub fn advance(&self, by: Duration) {
        assert!(by >= Duration::zero(), "virtual clock cannot run backwards");
        self.millis.fetch_add(by.num_milliseconds(), Ordering::AcqRel);
    }

    /// Moves the clock forward to `t`. Earlier instants are ignored.
    pub fn advance_to(&self, t: DateTime<Utc>) {
        self.millis.fetch_max(t.timestamp_millis(), Ordering::AcqRel);
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> DateTime<Utc> {
        DateTime::from_timestamp_millis(self.millis.load(Ordering::Acquire))
            .expect("virtual clock out of range")
    }
}

/// Half-open instant range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
}

impl TimeRange {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Option<Self> {
        (start < end).then_some(Self { start, end })
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.start <= t && t < self.end
    }

    pub fn duration(&self) -> Duration {
        self.end - self.start
    }

    /// Length in seconds of the overlap between `self` and `[a, b)`.
    pub fn overlap_secs(&self, a: DateTime<Utc>, b: DateTime<Utc>) -> f64 {
        let lo = a.max(self.start);
        let hi = b.min(self.end);
        if hi > lo {
            (hi - lo).num_milliseconds() as f64 / 1000.0
        } else {
            0.0
        }
    }
}

/// Maps a local wall-clock time to an instant. Ambiguous times take the
/// earlier instant; times inside a DST gap move forward to the first valid
/// minute after the gap.
pub fn resolve_local(tz: Tz, date: NaiveDate, time: NaiveTime) -> DateTime<Utc> {
    let mut naive = date.and_time(time);
    for _ in 0..180 {
        match tz.from_local_datetime(&naive) {
            LocalResult::Single(t) => return t.with_timezone(&Utc),
            LocalResult::Ambiguous(a, b) => return a.min(b).with_timezone(&Utc),
            LocalResult::None => naive += Duration::minutes(1),
        }
    }
    panic!("no valid local time near {date} {time} in {tz}");
}

pub fn local_midnight(tz: Tz, date: NaiveDate) -> DateTime<Utc> {
    resolve_local(tz, date, NaiveTime::MIN)
}

/// The instants spanned by one local calendar day.
pub fn local_day(tz: Tz, date: NaiveDate) -> TimeRange {
    let next = date.succ_opt().expect("date overflow");
    TimeRange {
        start: local_midnight(tz, date),
        end: local_midnight(tz, next),
    }
}

pub fn local_date(tz: Tz, t: DateTime<Utc>) -> NaiveDate {
    t.with_timezone(&tz).date_naive()
}

pub fn hm(h: u32, m: u32) -> NaiveTime {
    NaiveTime::from_hms_opt(h, m, 0).expect("valid wall-clock time")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn virtual_clock_is_monotone() {
        let t0 = Utc.with_ymd_and_hms(2024, 1, 8, 0, 0, 0).unwrap();
        let clock = VirtualClock::new(t0);
        clock.advance(Duration::minutes(30));
        assert_eq!(clock.now(), t0 + Duration::minutes(30));
        clock.advance_to(t0);
        assert_eq!(clock.now(), t0 + Duration::minutes(30));
    }

    #[test]
    fn spring_forward_gap_moves_later() {
        let tz: Tz = "America/New_York".parse().unwrap();
        let date = NaiveDate::from_ymd_opt(2024, 3, 10).unwrap();
        let t = resolve_local(tz, date, hm(2, 30));
        assert_eq!(t.with_timezone(&tz).time(), hm(3, 0));
    }

    #[test]
    fn local_day_lengths_follow_dst() {
        let tz: Tz = "America/New_York".parse().unwrap();
        let short = local_day(tz, NaiveDate::from_ymd_opt(2024, 3, 10).unwrap());
        assert_eq!(short.duration(), Duration::hours(23));
        let long = local_day(tz, NaiveDate::from_ymd_opt(2024, 11, 3).unwrap());
        assert_eq!(long.duration(), Duration::hours(25));
    }

    #[test]
    fn overlap_is_clipped() {
        let t0 = Utc.with_ymd_and_hms(2024, 1, 8, 10, 0, 0).unwrap();
        let r = TimeRange::new(t0, t0 + Duration::hours(1)).unwrap();
        assert_eq!(r.overlap_secs(t0 - Duration::minutes(10), t0 + Duration::minutes(5)), 300.0);
        assert_eq!(r.overlap_secs(t0 + Duration::hours(2), t0 + Duration::hours(3)), 0.0);
        assert!(TimeRange::new(t0, t0).is_none());
    }
}
