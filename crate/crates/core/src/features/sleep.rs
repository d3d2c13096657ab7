//! Sleep inference from phone usage, activity and location.
//!
//! Within the night span (20:00 to noon the next day) sleep is the longest
//! stretch with the screen off, no activity other than `still`, and no GPS
//! fix away from home. Stretches shorter than two hours are not sleep.

use chrono::{DateTime, Duration, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::geo::{haversine_m, LatLon, MapEntry};
use crate::ingest::{Activity, Payload, ScreenAction, SensorEvent};
use crate::time::TimeRange;

/// An unlock without a matching lock is assumed to end after this long.
pub const MAX_SCREEN_SESSION: Duration = Duration::hours(2);
pub const MIN_SLEEP: Duration = Duration::hours(2);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SleepEstimate {
    pub duration_s: f64,
    pub start: Option<DateTime<Utc>>,
    pub end: Option<DateTime<Utc>>,
    pub observed: bool,
}

impl SleepEstimate {
    pub fn none(observed: bool) -> Self {
        Self { duration_s: 0.0, start: None, end: None, observed }
    }

    pub fn start_local(&self, tz: Tz) -> Option<chrono::NaiveDateTime> {
        self.start.map(|t| t.with_timezone(&tz).naive_local())
    }

    pub fn end_local(&self, tz: Tz) -> Option<chrono::NaiveDateTime> {
        self.end.map(|t| t.with_timezone(&tz).naive_local())
    }
}

/// Screen-on intervals: each unlock runs until the next lock, the next
/// unlock, or [`MAX_SCREEN_SESSION`], whichever comes first. Expects
/// time-sorted events.
pub fn screen_sessions(events: &[SensorEvent]) -> Vec<(DateTime<Utc>, DateTime<Utc>)> {
    let screen: Vec<(DateTime<Utc>, ScreenAction)> = events
        .iter()
        .filter_map(|e| match &e.payload {
            Payload::ScreenState(s) => Some((e.timestamp, s.state)),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    for (i, &(t, action)) in screen.iter().enumerate() {
        if action != ScreenAction::Unlock {
            continue;
        }
        let end = screen[i + 1..]
            .iter()
            .find(|(u, _)| *u > t)
            .map(|&(u, _)| u)
            .unwrap_or(t + MAX_SCREEN_SESSION)
            .min(t + MAX_SCREEN_SESSION);
        out.push((t, end));
    }
    out
}

/// Sleep within `span` from time-sorted events covering it (events that
/// start before the span may be included and are clipped).
pub fn infer_sleep_from_events(events: &[SensorEvent], span: TimeRange, home: Option<&MapEntry>) -> SleepEstimate {
    let observed = events
        .iter()
        .any(|e| span.contains(e.timestamp) && matches!(e.payload, Payload::ScreenState(_)));
    let any_in_span = events.iter().any(|e| span.contains(e.timestamp));
    if !any_in_span {
        return SleepEstimate::none(false);
    }

    let mut busy: Vec<(DateTime<Utc>, DateTime<Utc>)> = screen_sessions(events);
    for e in events {
        match &e.payload {
            Payload::ActivityInterval(a) if a.activity != Activity::Still => busy.push((e.timestamp, e.end())),
            Payload::GpsFix(g) => {
                if let Some(home) = home {
                    if haversine_m(home.center, LatLon::new(g.lat, g.lon)) > home.radius_m {
                        busy.push((e.timestamp, e.timestamp));
                    }
                }
            }
            _ => {}
        }
    }
    let mut busy: Vec<_> = busy
        .into_iter()
        .filter(|(a, b)| *b >= span.start && *a < span.end)
        .map(|(a, b)| (a.max(span.start), b.min(span.end)))
        .collect();
    busy.sort();

    let mut best: Option<(DateTime<Utc>, DateTime<Utc>)> = None;
    let mut cursor = span.start;
    let mut consider = |from: DateTime<Utc>, to: DateTime<Utc>| {
        if to > from && best.is_none_or(|(s, e)| to - from > e - s) {
            best = Some((from, to));
        }
    };
    for (a, b) in busy {
        if a > cursor {
            consider(cursor, a);
        }
        cursor = cursor.max(b);
    }
    consider(cursor, span.end);

    match best {
        Some((s, e)) if e - s >= MIN_SLEEP => SleepEstimate {
            duration_s: (e - s).num_milliseconds() as f64 / 1000.0,
            start: Some(s),
            end: Some(e),
            observed,
        },
        _ => SleepEstimate::none(observed),
    }
}
