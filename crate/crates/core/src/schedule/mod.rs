//! Time-based jobs: planning a user's day and running due jobs against a
//! clock with a persisted high-water mark.

mod runner;

pub use runner::{JobHandler, JobStatus, LogRecord, Runner, RunnerError, MAX_LATENESS};

use chrono::{DateTime, Datelike, Duration, NaiveDate, NaiveDateTime, NaiveTime, Utc, Weekday};
use serde::{Deserialize, Serialize};

use crate::features::DayWindow;
use crate::profile::{UserId, UserProfile};
use crate::prompt::Slot;
use crate::time::{local_midnight, resolve_local};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    FeatureRecompute,
    Pregenerate,
    Checkin,
    JournalNotification,
    Ema,
}

impl JobKind {
    /// Order among jobs due at the same instant.
    pub fn rank(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Job {
    pub user_id: UserId,
    pub kind: JobKind,
    pub slot: Option<Slot>,
    /// Local day the job belongs to.
    pub date: NaiveDate,
    pub at: DateTime<Utc>,
    pub local: NaiveDateTime,
}

pub type JobKey = (DateTime<Utc>, u8, u8);

impl Job {
    pub fn key(&self) -> JobKey {
        (self.at, self.kind.rank(), self.slot.map_or(0, |s| s as u8 + 1))
    }
}

/// Check-in delivery time and the local data window it reports on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckinWindow {
    pub slot: Slot,
    pub fires: NaiveTime,
    pub data: DayWindow,
}

fn hm(h: u32, m: u32) -> NaiveTime {
    NaiveTime::from_hms_opt(h, m, 0).unwrap()
}

pub fn checkin_windows() -> [CheckinWindow; 4] {
    let w = |slot, fires, start, end| CheckinWindow { slot, fires, data: DayWindow::new(start, Some(end)) };
    [
        w(Slot::CheckinMorning, hm(12, 30), hm(6, 0), hm(12, 0)),
        w(Slot::CheckinAfternoon, hm(15, 30), hm(12, 0), hm(15, 30)),
        w(Slot::CheckinEvening, hm(18, 30), hm(15, 30), hm(18, 30)),
        w(Slot::CheckinNight, hm(23, 0), hm(18, 30), hm(23, 0)),
    ]
}

pub fn checkin_window(slot: Slot) -> Option<CheckinWindow> {
    checkin_windows().into_iter().find(|w| w.slot == slot)
}

pub const EMA_TIME: (u32, u32) = (10, 0);
pub const EARLIEST_JOURNAL: (u32, u32) = (6, 0);
pub const CLAMPED_JOURNAL: (u32, u32) = (20, 0);
/// On days without a DST change.
pub const RECOMPUTES_PER_DAY: i64 = 48;

/// Journal notification time for `date`: two hours before that evening's
/// bedtime, clamped to 20:00 when that would fall before 06:00. The second
/// value is a warning when clamped.
pub fn journal_time(profile: &UserProfile, date: NaiveDate) -> (NaiveTime, Option<String>) {
    let bedtime = profile.bedtime_for(date.weekday()).time();
    let t = bedtime - Duration::hours(2);
    let early = hm(EARLIEST_JOURNAL.0, EARLIEST_JOURNAL.1);
    if t < early {
        let clamped = hm(CLAMPED_JOURNAL.0, CLAMPED_JOURNAL.1);
        let warning = format!(
            "bedtime {} puts the journal notification before 06:00; using 20:00",
            bedtime.format("%H:%M")
        );
        (clamped, Some(warning))
    } else {
        (t, None)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DayPlan {
    pub jobs: Vec<Job>,
    pub warnings: Vec<String>,
}

/// Every job for `profile` on local `date`, in firing order.
pub fn plan_day(profile: &UserProfile, date: NaiveDate) -> DayPlan {
    let tz = profile.tz();
    let job = |kind, slot, at: DateTime<Utc>| Job {
        user_id: profile.user_id.clone(),
        kind,
        slot,
        date,
        at,
        local: at.with_timezone(&tz).naive_local(),
    };
    let mut jobs = Vec::with_capacity(60);
    // Half-hourly in real time across the local day, so DST days get 46 or 50.
    let (midnight, next) = (local_midnight(tz, date), local_midnight(tz, date + Duration::days(1)));
    let mut at = midnight;
    while at < next {
        jobs.push(job(JobKind::FeatureRecompute, None, at));
        at += Duration::minutes(30);
    }
    for w in checkin_windows() {
        let at = resolve_local(tz, date, w.fires);
        jobs.push(job(JobKind::Checkin, Some(w.slot), at));
        jobs.push(job(JobKind::Pregenerate, Some(w.slot), at - Duration::hours(1)));
    }
    let (journal, warning) = journal_time(profile, date);
    let slot = Slot::journal_for(date.weekday());
    let at = resolve_local(tz, date, journal);
    jobs.push(job(JobKind::JournalNotification, Some(slot), at));
    jobs.push(job(JobKind::Pregenerate, Some(slot), at - Duration::hours(1)));
    if date.weekday() == Weekday::Sun {
        jobs.push(job(JobKind::Ema, None, resolve_local(tz, date, hm(EMA_TIME.0, EMA_TIME.1))));
    }
    jobs.sort_by_key(Job::key);
    DayPlan { jobs, warnings: warning.into_iter().collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::{ClockTime, PriorityRanking};

    fn profile(weekday: (u32, u32), weekend: (u32, u32), tz: &str) -> UserProfile {
        UserProfile {
            user_id: UserId::new("u").unwrap(),
            priority_ranking: PriorityRanking::default(),
            bedtime_weekday: ClockTime::new(weekday.0, weekday.1).unwrap(),
            bedtime_weekend: ClockTime::new(weekend.0, weekend.1).unwrap(),
            timezone: tz.to_string().try_into().unwrap(),
        }
    }

    fn count(plan: &DayPlan, kind: JobKind) -> usize {
        plan.jobs.iter().filter(|j| j.kind == kind).count()
    }

    #[test]
    fn weekday_plan() {
        let p = profile((23, 0), (1, 0), "America/New_York");
        let plan = plan_day(&p, NaiveDate::from_ymd_opt(2024, 2, 6).unwrap());
        assert_eq!(count(&plan, JobKind::Checkin), 4);
        assert_eq!(count(&plan, JobKind::FeatureRecompute), 48);
        assert_eq!(count(&plan, JobKind::Pregenerate), 5);
        assert_eq!(count(&plan, JobKind::Ema), 0);
        let journal = plan.jobs.iter().find(|j| j.kind == JobKind::JournalNotification).unwrap();
        assert_eq!(journal.local.time(), hm(21, 0));
        let times: Vec<_> = plan.jobs.iter().filter(|j| j.kind == JobKind::Checkin).map(|j| j.local.time()).collect();
        assert_eq!(times, [hm(12, 30), hm(15, 30), hm(18, 30), hm(23, 0)]);
        assert!(plan.jobs.windows(2).all(|w| w[0].key() < w[1].key()));
    }

    #[test]
    fn sunday_uses_weekend_bedtime_and_adds_ema() {
        let p = profile((23, 0), (1, 0), "America/New_York");
        let plan = plan_day(&p, NaiveDate::from_ymd_opt(2024, 2, 11).unwrap());
        assert_eq!(count(&plan, JobKind::Ema), 1);
        let journal = plan.jobs.iter().find(|j| j.kind == JobKind::JournalNotification).unwrap();
        assert_eq!((journal.local.time(), journal.slot), (hm(23, 0), Some(Slot::SundayJournal)));
    }

    #[test]
    fn early_bedtime_clamps() {
        let p = profile((7, 0), (7, 0), "UTC");
        let plan = plan_day(&p, NaiveDate::from_ymd_opt(2024, 2, 6).unwrap());
        let journal = plan.jobs.iter().find(|j| j.kind == JobKind::JournalNotification).unwrap();
        assert_eq!(journal.local.time(), hm(20, 0));
        assert_eq!(plan.warnings.len(), 1);
    }

    #[test]
    fn dst_days_keep_prompt_counts() {
        let p = profile((23, 0), (23, 0), "America/New_York");
        for (date, recomputes) in [(NaiveDate::from_ymd_opt(2024, 3, 10).unwrap(), 46), (NaiveDate::from_ymd_opt(2024, 11, 3).unwrap(), 50)] {
            let plan = plan_day(&p, date);
            assert_eq!(count(&plan, JobKind::FeatureRecompute), recomputes);
            let next = plan_day(&p, date + Duration::days(1));
            assert!(plan.jobs.last().unwrap().at < next.jobs[0].at);
            assert_eq!(count(&plan, JobKind::Checkin), 4);
            assert_eq!(count(&plan, JobKind::Ema), 1);
        }
    }
}
