use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use chrono::{Datelike, Duration, NaiveDate, NaiveTime, Weekday};
use chrono_tz::Tz;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::apps::{AppCategory, AppCategoryTable};
use super::baseline::{HistoricalBaseline, BASELINE_DAYS};
use super::sleep::{infer_sleep_from_events, screen_sessions, SleepEstimate};
use super::{Feature, FeatureVector, SleepFeatures};
use crate::geo::{
    daily_distance, dbscan_cluster, label_visits, significant_places, ClusterParams, GpsPoint, LatLon, PlaceLabel,
    SemanticMap, VisitSegment,
};
use crate::ingest::{Activity, Direction, EventKind, EventStore, Payload, ScreenAction, SensorEvent, StoreError};
use crate::profile::UserId;
use crate::time::{local_date, local_day, local_midnight, resolve_local, TimeRange};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Per-user settings the pipeline needs: local timezone and semantic map
/// (campus entries plus the user's home).
#[derive(Debug, Clone)]
pub struct UserGeo {
    pub tz: Tz,
    pub map: SemanticMap,
}

/// A time-of-day window repeated on every local day. `end = None` means
/// midnight at the end of the day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DayWindow {
    pub start: NaiveTime,
    pub end: Option<NaiveTime>,
}

impl DayWindow {
    pub const FULL_DAY: DayWindow = DayWindow { start: NaiveTime::MIN, end: None };

    pub fn new(start: NaiveTime, end: Option<NaiveTime>) -> Self {
        Self { start, end }
    }

    pub fn on(&self, tz: Tz, date: NaiveDate) -> TimeRange {
        let start = resolve_local(tz, date, self.start);
        let end = match self.end {
            Some(t) => resolve_local(tz, date, t),
            None => local_midnight(tz, date.succ_opt().expect("date overflow")),
        };
        TimeRange::new(start, end).unwrap_or(TimeRange { start, end: start + Duration::seconds(1) })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeekendComposites {
    /// Seconds at Greek houses over Friday and Saturday.
    pub greek_s: f64,
    /// Mean inferred sleep over the Friday and Saturday nights that have data.
    pub sleep_proxy_s: f64,
    pub nights_observed: u32,
}

/// Store version and range fingerprint a cached value was checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Stamp {
    version: u64,
    fp: (usize, u64),
}

type WindowCache = HashMap<(UserId, TimeRange), (Stamp, FeatureVector)>;
type DayCache = HashMap<(UserId, NaiveDate), (Stamp, Arc<Vec<VisitSegment>>)>;

/// Feature extraction over an [`EventStore`]. Results are memoized per
/// window and invalidated whenever new events land in the range they read.
pub struct FeaturePipeline {
    store: Arc<dyn EventStore>,
    apps: AppCategoryTable,
    cluster: ClusterParams,
    users: RwLock<HashMap<UserId, UserGeo>>,
    windows: Mutex<WindowCache>,
    days: Mutex<DayCache>,
}

impl FeaturePipeline {
    pub fn new(store: Arc<dyn EventStore>, apps: AppCategoryTable, cluster: ClusterParams) -> Self {
        Self {
            store,
            apps,
            cluster,
            users: RwLock::new(HashMap::new()),
            windows: Mutex::new(HashMap::new()),
            days: Mutex::new(HashMap::new()),
        }
    }

    pub fn store(&self) -> &Arc<dyn EventStore> {
        &self.store
    }

    pub fn cluster_params(&self) -> &ClusterParams {
        &self.cluster
    }

    pub fn register_user(&self, user: UserId, geo: UserGeo) {
        self.windows.lock().retain(|(u, _), _| *u != user);
        self.days.lock().retain(|(u, _), _| *u != user);
        self.users.write().insert(user, geo);
    }

    pub fn user_geo(&self, user: &UserId) -> Result<UserGeo, FeatureError> {
        self.users
            .read()
            .get(user)
            .cloned()
            .ok_or_else(|| FeatureError::UnknownUser(user.clone()))
    }

    fn events(&self, user: &UserId, range: TimeRange) -> Result<Vec<SensorEvent>, FeatureError> {
        match self.store.query_events(user, range, &EventKind::ALL) {
            Ok(ev) => Ok(ev),
            Err(StoreError::UnknownUser(_)) => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }

    fn fingerprint(&self, user: &UserId, range: TimeRange) -> Result<(usize, u64), FeatureError> {
        match self.store.fingerprint(user, range) {
            Ok(fp) => Ok(fp),
            Err(StoreError::UnknownUser(_)) => Ok((0, 0)),
            Err(e) => Err(e.into()),
        }
    }

    /// Current stamp of `range`, and whether `cached` is still valid. The
    /// range is only rescanned when the store changed since `cached`.
    fn check(&self, user: &UserId, range: TimeRange, cached: Option<Stamp>) -> Result<(Stamp, bool), FeatureError> {
        let version = self.store.version(user);
        if let Some(c) = cached {
            if c.version == version {
                return Ok((c, true));
            }
        }
        let stamp = Stamp { version, fp: self.fingerprint(user, range)? };
        Ok((stamp, cached.is_some_and(|c| c.fp == stamp.fp)))
    }

    /// Labeled visits for one local day, from that day's fixes only.
    pub fn day_visits(&self, user: &UserId, date: NaiveDate) -> Result<Arc<Vec<VisitSegment>>, FeatureError> {
        let geo = self.user_geo(user)?;
        let day = local_day(geo.tz, date);
        let key = (user.clone(), date);
        let cached = self.days.lock().get(&key).map(|(st, segs)| (*st, segs.clone()));
        let (stamp, hit) = self.check(user, day, cached.as_ref().map(|c| c.0))?;
        if let (true, Some((_, segs))) = (hit, cached) {
            self.days.lock().insert(key, (stamp, segs.clone()));
            return Ok(segs);
        }
        let fixes: Vec<GpsPoint> = match self.store.query_events(user, day, &[EventKind::GpsFix]) {
            Ok(ev) => ev,
            Err(StoreError::UnknownUser(_)) => Vec::new(),
            Err(e) => return Err(e.into()),
        }
        .into_iter()
        .filter_map(|e| match e.payload {
            Payload::GpsFix(g) if g.acc_m <= self.cluster.max_accuracy_m => Some(GpsPoint {
                t: e.timestamp,
                pos: LatLon::new(g.lat, g.lon),
                acc_m: g.acc_m,
            }),
            _ => None,
        })
        .collect();
        let mut clustering = dbscan_cluster(&fixes, &self.cluster);
        let segs = Arc::new(label_visits(&mut clustering, &geo.map));
        self.days.lock().insert(key, (stamp, segs.clone()));
        Ok(segs)
    }

    /// Range of stored events a window's features depend on.
    fn dependency_range(tz: Tz, window: TimeRange) -> TimeRange {
        let first = local_date(tz, window.start);
        let before = local_day(tz, first.pred_opt().expect("date underflow")).start;
        TimeRange {
            start: before.min(window.start - Duration::hours(16)),
            end: window.end + Duration::hours(3),
        }
    }

    pub fn extract_features(&self, user: &UserId, window: TimeRange) -> Result<FeatureVector, FeatureError> {
        let geo = self.user_geo(user)?;
        let deps = Self::dependency_range(geo.tz, window);
        let key = (user.clone(), window);
        let cached = self.windows.lock().get(&key).map(|(st, fv)| (*st, fv.clone()));
        let (stamp, hit) = self.check(user, deps, cached.as_ref().map(|c| c.0))?;
        if let (true, Some((_, fv))) = (hit, cached) {
            self.windows.lock().insert(key, (stamp, fv.clone()));
            return Ok(fv);
        }
        let events = self.events(user, deps)?;
        let fv = self.compute(user, &geo, window, &events)?;
        self.windows.lock().insert(key, (stamp, fv.clone()));
        Ok(fv)
    }

    fn compute(&self, user: &UserId, geo: &UserGeo, window: TimeRange, events: &[SensorEvent]) -> Result<FeatureVector, FeatureError> {
        let mut fv = FeatureVector::empty(user.clone(), window);
        let mut sources = BTreeSet::new();

        for e in events {
            let inside = window.contains(e.timestamp);
            if inside {
                sources.insert(e.kind());
            }
            match &e.payload {
                Payload::ActivityInterval(a) => {
                    let secs = window.overlap_secs(e.timestamp, e.end());
                    let slot = match a.activity {
                        Activity::Walking => &mut fv.physical.walk_s,
                        Activity::Running => &mut fv.physical.run_s,
                        Activity::Biking => &mut fv.physical.bike_s,
                        Activity::Still => &mut fv.physical.sedentary_s,
                    };
                    *slot += secs;
                }
                Payload::ScreenState(s) if inside && s.state == ScreenAction::Unlock => fv.digital.screen_unlocks += 1,
                Payload::AppSession(a) if inside => match self.apps.category(&a.app_id) {
                    AppCategory::Social => fv.digital.app_use.social += 1,
                    AppCategory::Communication => fv.digital.app_use.communication += 1,
                    AppCategory::Entertainment => fv.digital.app_use.entertainment += 1,
                    AppCategory::Other => {}
                },
                Payload::CallLog(c) if inside => match c.direction {
                    Direction::Incoming => fv.social.calls_in += 1,
                    Direction::Outgoing => fv.social.calls_out += 1,
                },
                Payload::SmsLog(s) if inside => match s.direction {
                    Direction::Incoming => fv.social.sms_in += 1,
                    Direction::Outgoing => fv.social.sms_out += 1,
                },
                Payload::ConversationEpisode(_) => {
                    if inside {
                        fv.social.convo_count += 1;
                    }
                    fv.social.convo_duration_s += window.overlap_secs(e.timestamp, e.end());
                }
                _ => {}
            }
        }
        fv.digital.screen_time_s = screen_sessions(events)
            .into_iter()
            .map(|(a, b)| window.overlap_secs(a, b))
            .sum();

        // Place features: clustering is per local day, visits clipped to the window.
        let first = local_date(geo.tz, window.start);
        let last = local_date(geo.tz, window.end - Duration::milliseconds(1));
        let mut date = first;
        while date <= last {
            let segs = self.day_visits(user, date)?;
            let day = local_day(geo.tz, date);
            let part = TimeRange::new(day.start.max(window.start), day.end.min(window.end));
            if let Some(part) = part {
                for s in segs.iter() {
                    let secs = s.dwell_within(part);
                    let slot = match s.label.unwrap_or(PlaceLabel::Other) {
                        PlaceLabel::Gym => &mut fv.physical.gym_s,
                        PlaceLabel::GreekHouse => &mut fv.social.greek_s,
                        PlaceLabel::Leisure => &mut fv.social.leisure_s,
                        PlaceLabel::Social => &mut fv.social.social_place_s,
                        PlaceLabel::Study | PlaceLabel::Library => &mut fv.social.study_s,
                        PlaceLabel::Cafeteria => &mut fv.social.cafeteria_s,
                        PlaceLabel::Home => &mut fv.social.home_s,
                        PlaceLabel::Other => continue,
                    };
                    *slot += secs;
                }
                fv.social.significant_places += significant_places(&segs, part) as u32;
                fv.physical.distance_km += daily_distance(&segs, part);
            }
            date = date.succ_opt().expect("date overflow");
        }

        // Sleep belongs to windows that start at local midnight: the night before.
        if window.start == local_midnight(geo.tz, first) {
            let night = first.pred_opt().expect("date underflow");
            let est = self.sleep_from(geo, night, events);
            fv.sleep = SleepFeatures {
                duration_s: est.duration_s,
                start_local: est.start_local(geo.tz),
                end_local: est.end_local(geo.tz),
                observed: est.observed,
            };
        }
        fv.sources = sources;
        Ok(fv)
    }

    fn night_span(tz: Tz, night: NaiveDate) -> TimeRange {
        let start = resolve_local(tz, night, NaiveTime::from_hms_opt(20, 0, 0).unwrap());
        let end = resolve_local(tz, night.succ_opt().expect("date overflow"), NaiveTime::from_hms_opt(12, 0, 0).unwrap());
        TimeRange { start, end }
    }

    fn sleep_from(&self, geo: &UserGeo, night: NaiveDate, events: &[SensorEvent]) -> SleepEstimate {
        let span = Self::night_span(geo.tz, night);
        let lo = events.partition_point(|e| e.timestamp < span.start - Duration::hours(6));
        let hi = events.partition_point(|e| e.timestamp < span.end);
        infer_sleep_from_events(&events[lo..hi], span, geo.map.home())
    }

    /// Sleep for the night starting on `night` (20:00 that day to noon the next).
    pub fn infer_sleep(&self, user: &UserId, night: NaiveDate) -> Result<SleepEstimate, FeatureError> {
        let geo = self.user_geo(user)?;
        let span = Self::night_span(geo.tz, night);
        let events = self.events(
            user,
            TimeRange {
                start: span.start - Duration::hours(6),
                end: span.end,
            },
        )?;
        Ok(infer_sleep_from_events(&events, span, geo.map.home()))
    }

    pub fn daily_features(&self, user: &UserId, date: NaiveDate, window: DayWindow) -> Result<FeatureVector, FeatureError> {
        let geo = self.user_geo(user)?;
        self.extract_features(user, window.on(geo.tz, date))
    }

    /// Per-feature mean over the `window` of each of the 30 days before
    /// `as_of`. Days without data for a feature are left out of its mean.
    pub fn compute_baseline(&self, user: &UserId, as_of: NaiveDate, window: DayWindow) -> Result<HistoricalBaseline, FeatureError> {
        let mut sums: HashMap<Feature, (f64, u32)> = HashMap::new();
        for back in (1..=BASELINE_DAYS).rev() {
            let date = as_of - Duration::days(back);
            let fv = self.daily_features(user, date, window)?;
            for f in Feature::ALL {
                if fv.has_data(f) {
                    let e = sums.entry(f).or_insert((0.0, 0));
                    e.0 += f.value(&fv);
                    e.1 += 1;
                }
            }
        }
        let mut baseline = HistoricalBaseline::empty(user.clone(), as_of);
        for f in Feature::ALL {
            let (sum, days) = sums.get(&f).copied().unwrap_or((0.0, 0));
            baseline.means.insert(f, if days > 0 { sum / days as f64 } else { 0.0 });
            baseline.days_of_data.insert(f, days);
        }
        Ok(baseline)
    }

    /// Friday and Saturday composites for the Sunday review on `sunday`.
    pub fn weekend_composites(&self, user: &UserId, sunday: NaiveDate) -> Result<WeekendComposites, FeatureError> {
        debug_assert_eq!(sunday.weekday(), Weekday::Sun);
        let friday = sunday - Duration::days(2);
        let saturday = sunday - Duration::days(1);
        let mut greek_s = 0.0;
        for d in [friday, saturday] {
            greek_s += self.daily_features(user, d, DayWindow::FULL_DAY)?.social.greek_s;
        }
        let mut total = 0.0;
        let mut nights = 0;
        for d in [friday, saturday] {
            let est = self.infer_sleep(user, d)?;
            if est.observed {
                total += est.duration_s;
                nights += 1;
            }
        }
        Ok(WeekendComposites {
            greek_s,
            sleep_proxy_s: if nights > 0 { total / nights as f64 } else { 0.0 },
            nights_observed: nights,
        })
    }
}
