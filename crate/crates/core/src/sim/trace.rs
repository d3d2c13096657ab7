use std::collections::BTreeMap;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveTime, Utc, Weekday};
use chrono_tz::Tz;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scenario::{Scenario, SleepPlan, Visits};
use super::SimError;
use crate::features::{AppCategory, AppCategoryTable};
use crate::geo::{haversine_km, haversine_m, LatLon, PlaceLabel, SemanticMap};
use crate::ingest::{
    Activity, ActivityInterval, AppSession, CallLog, ConversationEpisode, Direction, GpsFix, Payload, ScreenAction,
    ScreenState, SensorEvent, SmsLog,
};
use crate::profile::UserId;
use crate::time::{local_day, resolve_local, TimeRange};

pub const DWELL_FIX_EVERY: Duration = Duration::minutes(10);
pub const MOVING_FIX_EVERY: Duration = Duration::minutes(5);
pub const GPS_SIGMA_M: f64 = 8.0;
/// Jitter is clipped at three standard deviations.
pub const GPS_CLIP_M: f64 = 3.0 * GPS_SIGMA_M;
pub const WALK_SPEED_MPS: f64 = 1.3;
pub const BIKE_SPEED_MPS: f64 = 4.5;
/// Generated places (home and quick stops) keep at least this from every other place.
pub const PLACE_SPACING_M: f64 = 200.0;
const EXTRA_PLACES: usize = 6;

fn hm(h: u32, m: u32) -> NaiveTime {
    NaiveTime::from_hms_opt(h, m, 0).unwrap()
}

/// A place in the scenario world.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Place {
    pub id: usize,
    pub label: PlaceLabel,
    pub center: LatLon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stay {
    pub place: Place,
    pub enter: DateTime<Utc>,
    pub exit: DateTime<Utc>,
    /// Planted as a brief stop, too short to be a place.
    pub quick: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SleepTruth {
    pub start: DateTime<Utc>,
    pub end: DateTime<Utc>,
    pub duration_s: f64,
}

/// Planted ground truth for one local day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTruth {
    pub date: NaiveDate,
    pub gym_s: f64,
    /// Sleep for the night that begins on this date.
    pub sleep: SleepTruth,
    pub significant_places: usize,
    /// Between consecutive significant places, using planted centers.
    pub distance_km: f64,
    pub walk_s: f64,
    pub calls_in: u32,
    pub calls_out: u32,
    pub sms_in: u32,
    pub sms_out: u32,
    /// Stays overlapping the day, in order.
    pub stays: Vec<Stay>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub user_id: UserId,
    pub scenario: String,
    pub seed: u64,
    pub tz: String,
    pub start: NaiveDate,
    pub home: LatLon,
    pub places: Vec<Place>,
    /// 1-based line numbers of `events.ndjson` that were corrupted.
    pub corrupted_lines: Vec<usize>,
    pub days: Vec<DayTruth>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub events: Vec<SensorEvent>,
    pub manifest: Manifest,
}

impl Trace {
    /// The events in ingest format, one per line, time-ordered.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::with_capacity(self.events.len() * 96);
        for e in &self.events {
            out.push_str(&e.to_wire());
            out.push('\n');
        }
        out
    }
}

/// RNG for a named stream of one scenario run.
pub(crate) fn stream_rng(parts: &[&str]) -> ChaCha8Rng {
    let digest = Sha256::digest(parts.join("|").as_bytes());
    ChaCha8Rng::from_seed(digest.into())
}

fn far_enough(p: LatLon, others: &[LatLon]) -> bool {
    others.iter().all(|o| haversine_m(p, *o) >= PLACE_SPACING_M)
}

/// Random position within `radius_m` of `around`, away from `taken`.
fn free_spot(rng: &mut ChaCha8Rng, around: LatLon, radius_m: f64, taken: &[LatLon]) -> LatLon {
    loop {
        let p = around.offset(rng.random_range(-radius_m..radius_m), rng.random_range(-radius_m..radius_m));
        if far_enough(p, taken) {
            return p;
        }
    }
}

struct World {
    home: Place,
    campus: Vec<Place>,
    extra: Vec<Place>,
}

impl World {
    fn build(rng: &mut ChaCha8Rng, map: &SemanticMap, home: Option<LatLon>) -> Self {
        let campus: Vec<Place> = map
            .entries()
            .iter()
            .enumerate()
            .map(|(i, e)| Place { id: i + 1, label: e.label, center: e.center })
            .collect();
        let mut taken: Vec<LatLon> = campus.iter().map(|p| p.center).collect();
        let mid = LatLon::new(
            taken.iter().map(|p| p.lat).sum::<f64>() / taken.len() as f64,
            taken.iter().map(|p| p.lon).sum::<f64>() / taken.len() as f64,
        );
        let home_pos = home.unwrap_or_else(|| free_spot(rng, mid, 1500.0, &taken));
        taken.push(home_pos);
        let home = Place { id: 0, label: PlaceLabel::Home, center: home_pos };
        let mut extra = Vec::new();
        for k in 0..EXTRA_PLACES {
            let p = free_spot(rng, mid, 1800.0, &taken);
            taken.push(p);
            extra.push(Place { id: campus.len() + 1 + k, label: PlaceLabel::Other, center: p });
        }
        Self { home, campus, extra }
    }

    fn with_label(&self, label: PlaceLabel) -> Vec<Place> {
        self.campus.iter().filter(|p| p.label == label).copied().collect()
    }

    fn all(&self) -> Vec<Place> {
        let mut v = vec![self.home];
        v.extend(&self.campus);
        v.extend(&self.extra);
        v
    }
}

fn travel_time(a: LatLon, b: LatLon) -> (Duration, Activity) {
    let m = haversine_m(a, b);
    let (speed, act) = if m > 2000.0 { (BIKE_SPEED_MPS, Activity::Biking) } else { (WALK_SPEED_MPS, Activity::Walking) };
    let mins = ((m / speed) / 60.0).ceil() as i64;
    (Duration::minutes(mins.max(5)), act)
}

fn night_interval(rng: &mut ChaCha8Rng, plan: SleepPlan, tz: Tz, night: NaiveDate) -> (DateTime<Utc>, DateTime<Utc>) {
    let next = night.succ_opt().expect("date overflow");
    match plan {
        SleepPlan::Typical => {
            let start = resolve_local(tz, night, hm(23, 0)) + Duration::minutes(rng.random_range(0..=90));
            (start, start + Duration::minutes(rng.random_range(420..=510)))
        }
        SleepPlan::Fixed { hours } => {
            let start = resolve_local(tz, night, hm(23, 0)) + Duration::minutes(rng.random_range(0..=60));
            (start, start + Duration::hours(hours as i64))
        }
        SleepPlan::Between { start, end } => (resolve_local(tz, next, start), resolve_local(tz, next, end)),
    }
}

/// Candidate significant visits for one day, in order, with dwell minutes.
fn day_visits(rng: &mut ChaCha8Rng, world: &World, visits: Visits, date: NaiveDate) -> Vec<(Place, i64)> {
    let mut pool = vec![PlaceLabel::Library, PlaceLabel::Cafeteria, PlaceLabel::Study, PlaceLabel::Social, PlaceLabel::Leisure];
    if matches!(visits, Visits::Typical) && rng.random_bool(0.35) {
        pool.push(PlaceLabel::Gym);
    }
    let n = rng.random_range(2..=4usize);
    let mut out: Vec<(Place, i64)> = Vec::new();
    if let Visits::GymHeavy { minutes } = visits {
        out.push((world.with_label(PlaceLabel::Gym)[0], minutes));
    }
    while out.len() < n {
        let label = *pool.choose(rng).unwrap();
        let place = *world.with_label(label).choose(rng).unwrap();
        if out.last().is_some_and(|(p, _)| p.id == place.id) {
            continue;
        }
        out.push((place, rng.random_range(60..=150)));
    }
    if matches!(date.weekday(), Weekday::Fri | Weekday::Sat) && rng.random_bool(0.6) {
        let greek = *world.with_label(PlaceLabel::GreekHouse).choose(rng).unwrap();
        out.push((greek, rng.random_range(60..=120)));
    }
    out
}

struct Emitter<'a> {
    user: UserId,
    rng: ChaCha8Rng,
    jitter: Normal<f64>,
    events: Vec<SensorEvent>,
    apps: Vec<(&'a str, AppCategory)>,
}

impl Emitter<'_> {
    fn push(&mut self, t: DateTime<Utc>, payload: Payload) {
        self.events.push(SensorEvent { user_id: self.user.clone(), timestamp: t, payload });
    }

    fn fix(&mut self, t: DateTime<Utc>, at: LatLon) {
        let (mut n, mut e) = (self.jitter.sample(&mut self.rng), self.jitter.sample(&mut self.rng));
        let r = (n * n + e * e).sqrt();
        if r > GPS_CLIP_M {
            n *= GPS_CLIP_M / r;
            e *= GPS_CLIP_M / r;
        }
        let p = at.offset(n, e);
        let acc_m = (self.rng.random_range(5.0..20.0f64) * 10.0).round() / 10.0;
        self.push(t, Payload::GpsFix(GpsFix { lat: p.lat, lon: p.lon, acc_m }));
    }

    fn activity(&mut self, t: DateTime<Utc>, activity: Activity, d: Duration) {
        let duration_s = d.num_seconds() as f64;
        self.push(t, Payload::ActivityInterval(ActivityInterval { activity, duration_s }));
    }

    fn screen(&mut self, from: DateTime<Utc>, to: DateTime<Utc>) {
        self.push(from, Payload::ScreenState(ScreenState { state: ScreenAction::Unlock }));
        if self.rng.random_bool(0.7) {
            let (app, _) = *self.apps.choose(&mut self.rng).unwrap();
            let duration_s = ((to - from).num_seconds() - 30).max(10) as f64;
            self.push(from + Duration::seconds(15), Payload::AppSession(AppSession { app_id: app.to_string(), duration_s }));
        }
        self.push(to, Payload::ScreenState(ScreenState { state: ScreenAction::Lock }));
    }
}

/// Generates `days` days of events for `user` under `scenario`. Output is a
/// pure function of the arguments.
pub fn generate(scenario: &Scenario, days: u32, seed: u64, user: &UserId) -> Result<Trace, SimError> {
    if days == 0 {
        return Err(SimError::InvalidScenario("days must be positive".into()));
    }
    let map = SemanticMap::bundled_campus();
    if map.entries().iter().filter(|e| e.label == PlaceLabel::Gym).count() == 0
        || map.entries().iter().filter(|e| e.label == PlaceLabel::GreekHouse).count() == 0
    {
        return Err(SimError::InvalidScenario("campus map needs a gym and a Greek house".into()));
    }
    let tz = scenario.tz;
    let seed_s = seed.to_string();
    let mut plan_rng = stream_rng(&[&scenario.name, &seed_s, user.as_str(), "plan"]);
    let world = World::build(&mut plan_rng, &map, scenario.home);
    let table = AppCategoryTable::bundled();
    let mut em = Emitter {
        user: user.clone(),
        rng: stream_rng(&[&scenario.name, &seed_s, user.as_str(), "emit"]),
        jitter: Normal::new(0.0, GPS_SIGMA_M).expect("valid sigma"),
        events: Vec::new(),
        apps: table.entries().into_iter().filter(|(_, c)| *c != AppCategory::Other).collect(),
    };

    let start = scenario.start;
    let date_of = |d: i64| start + Duration::days(d);
    let nights: Vec<(DateTime<Utc>, DateTime<Utc>)> =
        (-1..days as i64).map(|d| night_interval(&mut plan_rng, scenario.sleep, tz, date_of(d))).collect();
    let trace_start = resolve_local(tz, start, NaiveTime::MIN);
    let trace_end = resolve_local(tz, date_of(days as i64), hm(12, 0));

    // The itinerary as one continuous list of stays, with the home stays
    // between them.
    let mut stays: Vec<Stay> = Vec::new();
    let mut home_from = trace_start;
    let mut walks: Vec<(DateTime<Utc>, Duration, Activity, LatLon, LatLon)> = Vec::new();
    for d in 0..days as i64 {
        let date = date_of(d);
        let wake = nights[d as usize].1;
        let sleep_start = nights[d as usize + 1].0;
        let earliest = resolve_local(tz, date, hm(7, 0)).max(wake + Duration::minutes(30));
        let mut t = earliest + Duration::minutes(plan_rng.random_range(0..=30));
        let latest_home = resolve_local(tz, date, hm(22, 30)).min(sleep_start - Duration::minutes(30));
        let plan = day_visits(&mut plan_rng, &world, scenario.visits, date);
        let mut here = world.home;
        let mut used_quick = Vec::new();
        let mut day_stays: Vec<Stay> = Vec::new();
        let mut legs = Vec::new();
        for (place, dwell) in plan {
            // Optional quick stop on the way, at a place not otherwise visited.
            let mut hops: Vec<(Place, i64, bool)> = Vec::new();
            if plan_rng.random_bool(0.3) {
                let choices: Vec<Place> = world.extra.iter().filter(|p| !used_quick.contains(&p.id)).copied().collect();
                if let Some(q) = choices.choose(&mut plan_rng) {
                    hops.push((*q, plan_rng.random_range(5..=20), true));
                }
            }
            hops.push((place, dwell, false));
            let mut t2 = t;
            let mut from = here;
            let mut new_stays = Vec::new();
            let mut new_legs = Vec::new();
            for &(p, mins, quick) in &hops {
                let (tt, act) = travel_time(from.center, p.center);
                new_legs.push((t2, tt, act, from.center, p.center));
                let enter = t2 + tt;
                let exit = enter + Duration::minutes(mins);
                new_stays.push(Stay { place: p, enter, exit, quick });
                t2 = exit;
                from = p;
            }
            let (back, _) = travel_time(from.center, world.home.center);
            if t2 + back > latest_home {
                break;
            }
            used_quick.extend(hops.iter().filter(|h| h.2).map(|h| h.0.id));
            day_stays.extend(new_stays);
            legs.extend(new_legs);
            here = from;
            t = t2;
        }
        if day_stays.is_empty() {
            continue;
        }
        let (back, act) = travel_time(here.center, world.home.center);
        legs.push((t, back, act, here.center, world.home.center));
        let first_leave = legs[0].0;
        stays.push(Stay { place: world.home, enter: home_from, exit: first_leave, quick: false });
        stays.extend(day_stays);
        home_from = t + back;
        walks.extend(legs);
    }
    stays.push(Stay { place: world.home, enter: home_from, exit: trace_end, quick: false });

    // GPS while dwelling, and activity that goes with the place.
    for s in &stays {
        let mut t = s.enter;
        while t < s.exit {
            em.fix(t, s.place.center);
            t += DWELL_FIX_EVERY;
        }
        em.fix(s.exit, s.place.center);
        let dwell = s.exit - s.enter;
        match s.place.label {
            PlaceLabel::Gym if dwell >= Duration::minutes(50) => {
                em.activity(s.enter + Duration::minutes(10), Activity::Running, Duration::minutes(30));
            }
            PlaceLabel::Library | PlaceLabel::Study => em.activity(s.enter, Activity::Still, dwell),
            PlaceLabel::Cafeteria | PlaceLabel::Social | PlaceLabel::GreekHouse if !s.quick => {
                let n = em.rng.random_range(1..=2);
                for _ in 0..n {
                    let len = em.rng.random_range(5..=30).min(dwell.num_minutes() - 1).max(1);
                    let off = em.rng.random_range(0..=(dwell.num_minutes() - len).max(0));
                    let voices = em.rng.random_range(2..=5);
                    em.push(
                        s.enter + Duration::minutes(off),
                        Payload::ConversationEpisode(ConversationEpisode { duration_s: (len * 60) as f64, voice_count: voices }),
                    );
                }
            }
            _ => {}
        }
    }
    // GPS and activity while moving.
    for &(leave, tt, act, a, b) in &walks {
        em.activity(leave, act, tt);
        let mut k = 1;
        while MOVING_FIX_EVERY * k < tt {
            let f = (MOVING_FIX_EVERY * k).num_seconds() as f64 / tt.num_seconds() as f64;
            em.fix(leave + MOVING_FIX_EVERY * k, LatLon::new(a.lat + (b.lat - a.lat) * f, a.lon + (b.lon - a.lon) * f));
            k += 1;
        }
    }
    // Sleep is still; the phone is locked at sleep onset and unlocked at waking.
    for &(s, e) in &nights[1..] {
        em.activity(s, Activity::Still, e - s);
    }
    // Phone use while awake: sessions 15 to 75 minutes apart.
    let mut calls: BTreeMap<NaiveDate, [u32; 4]> = BTreeMap::new();
    let mut awake: Vec<(DateTime<Utc>, DateTime<Utc>)> = nights.windows(2).map(|w| (w[0].1, w[1].0)).collect();
    // The final morning, so the last night ends with an unlock too.
    awake.push((nights[days as usize].1, trace_end + Duration::hours(12)));
    for &(wake, sleep) in &awake {
        let mut t = wake;
        let mut end = wake + Duration::minutes(em.rng.random_range(2..=6));
        loop {
            em.screen(t, end);
            t = end + Duration::minutes(em.rng.random_range(15..=75));
            let next_end = t + Duration::minutes(em.rng.random_range(1..=12));
            if next_end > sleep - Duration::minutes(20) {
                break;
            }
            end = next_end;
        }
        em.screen(sleep - Duration::minutes(5), sleep);
        // Calls and texts while awake.
        let span = (sleep - wake).num_minutes() - 10;
        let n_calls = em.rng.random_range(0..=3);
        let n_sms = em.rng.random_range(0..=8);
        for i in 0..(n_calls + n_sms) {
            let at = wake + Duration::minutes(em.rng.random_range(5..span.max(6)));
            let incoming = em.rng.random_bool(0.5);
            let direction = if incoming { Direction::Incoming } else { Direction::Outgoing };
            let day = at.with_timezone(&tz).date_naive();
            let c = calls.entry(day).or_default();
            if i < n_calls {
                let duration_s = em.rng.random_range(30..=600) as f64;
                em.push(at, Payload::CallLog(CallLog { direction, duration_s }));
                c[if incoming { 0 } else { 1 }] += 1;
            } else {
                em.push(at, Payload::SmsLog(SmsLog { direction }));
                c[if incoming { 2 } else { 3 }] += 1;
            }
        }
    }
    // Drop the last morning's events past the end of the trace.
    em.events.retain(|e| e.timestamp >= trace_start && e.timestamp <= trace_end);
    em.events.sort_by_key(|e| e.timestamp);

    let days_truth = (0..days as i64)
        .map(|d| {
            let date = date_of(d);
            let day = local_day(tz, date);
            let (s, e) = nights[d as usize + 1];
            let c = calls.get(&date).copied().unwrap_or_default();
            let walk_s = walks
                .iter()
                .filter(|w| w.2 == Activity::Walking)
                .map(|w| day.overlap_secs(w.0, w.0 + w.1))
                .sum();
            DayTruth {
                date,
                gym_s: stays.iter().filter(|s| s.place.label == PlaceLabel::Gym).map(|s| day.overlap_secs(s.enter, s.exit)).sum(),
                sleep: SleepTruth { start: s, end: e, duration_s: (e - s).num_seconds() as f64 },
                significant_places: truth_significant(&stays, day).len(),
                distance_km: truth_distance(&stays, day),
                walk_s,
                calls_in: c[0],
                calls_out: c[1],
                sms_in: c[2],
                sms_out: c[3],
                stays: stays.iter().filter(|s| day.overlap_secs(s.enter, s.exit) > 0.0).cloned().collect(),
            }
        })
        .collect();

    Ok(Trace {
        events: em.events,
        manifest: Manifest {
            user_id: user.clone(),
            scenario: scenario.name.clone(),
            seed,
            tz: tz.name().to_string(),
            start,
            home: world.home.center,
            places: world.all(),
            corrupted_lines: Vec::new(),
            days: days_truth,
        },
    })
}

/// Places with at least 30 minutes of planted dwell inside `day`.
fn truth_significant(stays: &[Stay], day: TimeRange) -> Vec<usize> {
    let mut dwell: BTreeMap<usize, f64> = BTreeMap::new();
    for s in stays {
        *dwell.entry(s.place.id).or_default() += day.overlap_secs(s.enter, s.exit);
    }
    dwell.into_iter().filter(|(_, d)| *d >= 1800.0).map(|(id, _)| id).collect()
}

fn truth_distance(stays: &[Stay], day: TimeRange) -> f64 {
    let sig = truth_significant(stays, day);
    let mut seq: Vec<&Stay> = stays
        .iter()
        .filter(|s| sig.contains(&s.place.id) && day.overlap_secs(s.enter, s.exit) > 0.0)
        .collect();
    seq.dedup_by_key(|s| s.place.id);
    seq.windows(2).map(|w| haversine_km(w[0].place.center, w[1].place.center)).sum()
}

/// Replaces `k` distinct random lines of `ndjson` with lines the parser
/// must reject. Returns the new text and the 1-based corrupted line numbers,
/// ascending.
pub fn corrupt_lines(ndjson: &str, k: usize, seed: u64) -> (String, Vec<usize>) {
    let mut lines: Vec<String> = ndjson.lines().map(str::to_string).collect();
    let mut rng = stream_rng(&["corrupt", &seed.to_string()]);
    let mut picked = rand::seq::index::sample(&mut rng, lines.len(), k.min(lines.len())).into_vec();
    picked.sort_unstable();
    for &i in &picked {
        let line = &lines[i];
        lines[i] = match rng.random_range(0..3) {
            // Cut mid-object: never valid JSON.
            0 => line[..line.len() / 2].to_string(),
            1 => line.replacen("\"kind\":\"", "\"kind\":\"bogus_", 1),
            _ => {
                let v: serde_json::Value = serde_json::from_str(line).expect("generated lines are JSON");
                let mut v = v;
                v["ts"] = serde_json::Value::String("not-a-time".into());
                v.to_string()
            }
        };
    }
    let mut out = lines.join("\n");
    out.push('\n');
    (out, picked.into_iter().map(|i| i + 1).collect())
}
