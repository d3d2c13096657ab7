mod common;

use std::collections::BTreeSet;

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveTime, Timelike, Utc, Weekday};
use proptest::prelude::*;
use sensejournal::profile::{ClockTime, PriorityRanking, UserProfile};
use sensejournal::schedule::{journal_time, Job, JobKind, JobStatus, LogRecord, Runner};
use sensejournal::time::{local_midnight, Clock, VirtualClock};

fn profile(id: &str, weekday: (u32, u32), weekend: (u32, u32), tz: &str) -> UserProfile {
    UserProfile {
        user_id: common::user(id),
        priority_ranking: PriorityRanking::default(),
        bedtime_weekday: ClockTime::new(weekday.0, weekday.1).unwrap(),
        bedtime_weekend: ClockTime::new(weekend.0, weekend.1).unwrap(),
        timezone: tz.to_string().try_into().unwrap(),
    }
}

fn d(y: i32, m: u32, day: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, day).unwrap()
}

fn accept(_: &Job, _: DateTime<Utc>) -> Result<Option<String>, String> {
    Ok(None)
}

fn run(runner: &mut Runner, clock: &VirtualClock, until: DateTime<Utc>) -> Vec<LogRecord> {
    runner.run(clock, until, &mut accept).unwrap()
}

/// Expected journal time, by minute arithmetic on the bedtime.
fn journal_oracle(p: &UserProfile, date: NaiveDate) -> NaiveTime {
    let bed = if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) { p.bedtime_weekend } else { p.bedtime_weekday }.time();
    let mins = (bed.hour() * 60 + bed.minute()) as i64;
    let t = (mins - 120).rem_euclid(1440);
    if t < 6 * 60 {
        NaiveTime::from_hms_opt(20, 0, 0).unwrap()
    } else {
        NaiveTime::from_hms_opt((t / 60) as u32, (t % 60) as u32, 0).unwrap()
    }
}

fn identity(r: &LogRecord) -> (String, JobKind, Option<String>, DateTime<Utc>) {
    (r.user_id.to_string(), r.job, r.slot.map(|s| s.as_str().to_string()), r.scheduled)
}

#[test]
fn restart_from_state_file_neither_repeats_nor_drops() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("sched.json");
    let users = [profile("a", (23, 0), (0, 30), "America/New_York"), profile("b", (22, 0), (1, 0), "Europe/Berlin")];
    let start = local_midnight(users[0].tz(), d(2024, 3, 7));
    let end = start + Duration::days(6);

    let clock = VirtualClock::new(start);
    let mut whole = Runner::new();
    for p in &users {
        whole.restore_profile(d(2024, 3, 1), p.clone(), start);
    }
    let reference = run(&mut whole, &clock, end);

    // Three restarts at awkward instants, each with a fresh runner.
    let cuts = [start + Duration::minutes(12 * 60 + 31), start + Duration::hours(50), start + Duration::minutes(4000), end];
    let clock = VirtualClock::new(start);
    let mut pieces = Vec::new();
    for cut in cuts {
        let mut r = Runner::with_state_file(&state).unwrap();
        for p in &users {
            r.restore_profile(d(2024, 3, 1), p.clone(), start);
        }
        pieces.extend(run(&mut r, &clock, cut));
    }

    let ids: Vec<_> = pieces.iter().map(identity).collect();
    let unique: BTreeSet<_> = ids.iter().cloned().collect();
    let dups: Vec<_> = unique.iter().filter(|u| ids.iter().filter(|i| i == u).count() > 1).collect();
    assert!(dups.is_empty(), "fired twice: {dups:?}");
    assert_eq!(ids, reference.iter().map(identity).collect::<Vec<_>>());
    assert!(pieces.iter().all(|r| r.status == JobStatus::Ok && r.fired_at == r.scheduled));
}

#[test]
fn bedtime_change_applies_from_the_next_day() {
    let old = profile("a", (23, 0), (23, 0), "America/New_York");
    let start = local_midnight(old.tz(), d(2024, 2, 5));
    let clock = VirtualClock::new(start);
    let mut r = Runner::new();
    r.update_profile(old.clone(), start);
    let mut log = run(&mut r, &clock, start + Duration::hours(15));
    let new = profile("a", (22, 0), (22, 0), "America/New_York");
    assert_eq!(r.update_profile(new, clock.now()), d(2024, 2, 6));
    log.extend(run(&mut r, &clock, start + Duration::days(3)));

    let journals: Vec<(NaiveDate, NaiveTime)> = log
        .iter()
        .filter(|l| l.job == JobKind::JournalNotification)
        .map(|l| (l.local.date(), l.local.time()))
        .collect();
    let t = |h| NaiveTime::from_hms_opt(h, 0, 0).unwrap();
    assert_eq!(journals, [(d(2024, 2, 5), t(21)), (d(2024, 2, 6), t(20)), (d(2024, 2, 7), t(20))]);
}

#[test]
fn long_outage_skips_stale_jobs() {
    let p = profile("a", (23, 0), (23, 0), "UTC");
    let start = local_midnight(p.tz(), d(2024, 2, 5));
    let mut r = Runner::new();
    r.update_profile(p, start);
    let mut handler = accept;
    let log = r.fire_due(start + Duration::hours(20), &mut handler).unwrap();
    for l in &log {
        let late = start + Duration::hours(20) - l.scheduled;
        let expect = if late > Duration::hours(6) { JobStatus::Skipped } else { JobStatus::Ok };
        assert_eq!(l.status, expect, "{:?} late by {late}", l.job);
    }
    assert!(log.iter().any(|l| l.status == JobStatus::Skipped));
    assert!(r.fire_due(start + Duration::hours(20), &mut handler).unwrap().is_empty());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Over whole weeks in any zone, including DST changes, every day gets
    /// four check-ins and a journal at the right local time, and every
    /// Sunday an EMA.
    #[test]
    fn weekly_counts_and_journal_times(
        wd in (0u32..24, prop_oneof![Just(0u32), Just(30)]),
        we in (0u32..24, prop_oneof![Just(0u32), Just(30)]),
        tz in prop_oneof![Just("America/New_York"), Just("America/Los_Angeles"), Just("Europe/London"), Just("Asia/Kolkata"), Just("UTC")],
        offset in 0i64..300,
        weeks in 1i64..4,
    ) {
        let p = profile("p", wd, we, tz);
        let first = d(2024, 1, 1) + Duration::days(offset);
        let first = first + Duration::days((7 - first.weekday().num_days_from_monday() as i64) % 7);
        let start = local_midnight(p.tz(), first);
        let end = local_midnight(p.tz(), first + Duration::days(7 * weeks));
        let clock = VirtualClock::new(start);
        let mut r = Runner::new();
        r.restore_profile(first, p.clone(), start);
        let log = run(&mut r, &clock, end - Duration::milliseconds(1));
        let count = |k| log.iter().filter(|l| l.job == k).count() as i64;
        prop_assert_eq!(count(JobKind::Checkin), 28 * weeks);
        prop_assert_eq!(count(JobKind::JournalNotification), 7 * weeks);
        prop_assert_eq!(count(JobKind::Ema), weeks);
        prop_assert_eq!(count(JobKind::Pregenerate), 35 * weeks);
        prop_assert_eq!(count(JobKind::FeatureRecompute), (end - start).num_minutes() / 30);
        prop_assert!(log.windows(2).all(|w| w[0].scheduled <= w[1].scheduled));
        for l in log.iter().filter(|l| l.job == JobKind::JournalNotification) {
            let date = l.local.date();
            let want = journal_oracle(&p, date);
            prop_assert_eq!(journal_time(&p, date).0, want);
            // A local time skipped by DST resolves forward by the gap.
            prop_assert!(l.local.time() == want || l.local.time() == want + Duration::hours(1), "{} {}", date, l.local);
        }
    }
}
