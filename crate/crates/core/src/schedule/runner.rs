use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Duration, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{plan_day, Job, JobKey, JobKind};
use crate::profile::{UserId, UserProfile};
use crate::prompt::Slot;
use crate::time::{local_date, Clock, VirtualClock};

/// Jobs found more than this late are skipped instead of fired.
pub const MAX_LATENESS: Duration = Duration::hours(6);

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("scheduler state io: {0}")]
    Io(#[from] std::io::Error),
    #[error("scheduler state file is corrupt: {0}")]
    Corrupt(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Ok,
    Failed,
    Skipped,
}

/// One line of the execution log. Only clock-derived times appear, so a
/// replay against a virtual clock reproduces it exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogRecord {
    pub user_id: UserId,
    pub job: JobKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slot: Option<Slot>,
    pub scheduled: DateTime<Utc>,
    pub local: NaiveDateTime,
    pub fired_at: DateTime<Utc>,
    pub status: JobStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

pub trait JobHandler {
    /// Runs one job. `Ok` carries an optional detail for the log.
    fn handle(&mut self, job: &Job, now: DateTime<Utc>) -> Result<Option<String>, String>;
}

impl<F: FnMut(&Job, DateTime<Utc>) -> Result<Option<String>, String>> JobHandler for F {
    fn handle(&mut self, job: &Job, now: DateTime<Utc>) -> Result<Option<String>, String> {
        self(job, now)
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct State {
    v: u32,
    marks: BTreeMap<UserId, JobKey>,
}

/// Fires planned jobs in order. Each user's high-water mark is the key of
/// the last job handled, so no job runs twice, including across restarts
/// when a state file is used.
pub struct Runner {
    profiles: BTreeMap<UserId, Vec<(NaiveDate, UserProfile)>>,
    marks: BTreeMap<UserId, JobKey>,
    plans: HashMap<(UserId, NaiveDate), Arc<Vec<Job>>>,
    state_path: Option<PathBuf>,
    pub warnings: Vec<String>,
}

impl Default for Runner {
    fn default() -> Self {
        Self::new()
    }
}

impl Runner {
    pub fn new() -> Self {
        Self { profiles: BTreeMap::new(), marks: BTreeMap::new(), plans: HashMap::new(), state_path: None, warnings: Vec::new() }
    }

    /// A runner whose marks are loaded from and saved to `path`.
    pub fn with_state_file(path: impl AsRef<Path>) -> Result<Self, RunnerError> {
        let path = path.as_ref().to_path_buf();
        let mut r = Self::new();
        if path.exists() {
            let state: State = serde_json::from_slice(&fs::read(&path)?)?;
            r.marks = state.marks;
        }
        r.state_path = Some(path);
        Ok(r)
    }

    fn save(&self) -> Result<(), RunnerError> {
        if let Some(path) = &self.state_path {
            let state = State { v: 1, marks: self.marks.clone() };
            let tmp = path.with_extension("tmp");
            fs::write(&tmp, serde_json::to_vec(&state)?)?;
            fs::rename(tmp, path)?;
        }
        Ok(())
    }

    /// Installs `profile` effective from local `date`, dropping later versions.
    pub fn set_profile_version(&mut self, effective: NaiveDate, profile: UserProfile) {
        let user = profile.user_id.clone();
        let versions = self.profiles.entry(user.clone()).or_default();
        versions.retain(|(d, _)| *d < effective);
        versions.push((effective, profile));
        self.plans.retain(|(u, d), _| *u != user || *d < effective - Duration::days(1));
    }

    /// Applies a profile change made at `now`: a new user starts now, an
    /// existing user's change takes effect the next local day. Returns the
    /// effective date.
    pub fn update_profile(&mut self, profile: UserProfile, now: DateTime<Utc>) -> NaiveDate {
        let today = local_date(profile.tz(), now);
        let user = profile.user_id.clone();
        let effective = if self.profiles.contains_key(&user) { today + Duration::days(1) } else { today };
        self.marks.entry(user).or_insert((now - Duration::milliseconds(1), 0, 0));
        self.set_profile_version(effective, profile);
        effective
    }

    /// Reinstalls a persisted profile version. A user with no saved mark
    /// starts at `now`.
    pub fn restore_profile(&mut self, effective: NaiveDate, profile: UserProfile, now: DateTime<Utc>) {
        self.marks.entry(profile.user_id.clone()).or_insert((now - Duration::milliseconds(1), 0, 0));
        self.set_profile_version(effective, profile);
    }

    pub fn profile_on(&self, user: &UserId, date: NaiveDate) -> Option<&UserProfile> {
        self.profiles
            .get(user)?
            .iter()
            .rev()
            .find(|(d, _)| *d <= date)
            .map(|(_, p)| p)
    }

    pub fn latest_profile(&self, user: &UserId) -> Option<&UserProfile> {
        self.profiles.get(user)?.last().map(|(_, p)| p)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.profiles.keys()
    }

    fn plan(&mut self, user: &UserId, date: NaiveDate) -> Arc<Vec<Job>> {
        if let Some(p) = self.plans.get(&(user.clone(), date)) {
            return p.clone();
        }
        let plan = match self.profile_on(user, date) {
            Some(profile) => {
                let plan = plan_day(profile, date);
                for w in plan.warnings {
                    self.warnings.push(format!("{user} {date}: {w}"));
                }
                Arc::new(plan.jobs)
            }
            None => Arc::new(Vec::new()),
        };
        self.plans.insert((user.clone(), date), plan.clone());
        plan
    }

    fn tz_of(&self, user: &UserId) -> Option<chrono_tz::Tz> {
        self.latest_profile(user).map(UserProfile::tz)
    }

    /// Jobs for `user` with key in `(mark, until]`.
    fn pending_for(&mut self, user: &UserId, until: DateTime<Utc>) -> Vec<Job> {
        let (Some(tz), Some(mark)) = (self.tz_of(user), self.marks.get(user).copied()) else {
            return Vec::new();
        };
        if mark.0 > until {
            return Vec::new();
        }
        let mut out = Vec::new();
        let mut date = local_date(tz, mark.0) - Duration::days(1);
        let last = local_date(tz, until) + Duration::days(1);
        while date <= last {
            out.extend(
                self.plan(user, date)
                    .iter()
                    .filter(|j| j.key() > mark && j.at <= until)
                    .cloned(),
            );
            date += Duration::days(1);
        }
        out
    }

    /// Earliest job after every mark, up to `horizon`.
    pub fn next_due(&mut self, horizon: DateTime<Utc>) -> Option<DateTime<Utc>> {
        let users: Vec<UserId> = self.profiles.keys().cloned().collect();
        let mut best: Option<DateTime<Utc>> = None;
        for u in users {
            let (Some(tz), Some(mark)) = (self.tz_of(&u), self.marks.get(&u).copied()) else { continue };
            let mut date = local_date(tz, mark.0) - Duration::days(1);
            let last = local_date(tz, horizon) + Duration::days(1);
            while date <= last {
                if let Some(j) = self.plan(&u, date).iter().find(|j| j.key() > mark && j.at <= horizon) {
                    best = Some(best.map_or(j.at, |b| b.min(j.at)));
                    break;
                }
                date += Duration::days(1);
            }
        }
        best
    }

    /// Handles every job due at `now`, oldest first. Jobs more than
    /// [`MAX_LATENESS`] late are logged as skipped.
    pub fn fire_due(&mut self, now: DateTime<Utc>, handler: &mut dyn JobHandler) -> Result<Vec<LogRecord>, RunnerError> {
        let users: Vec<UserId> = self.profiles.keys().cloned().collect();
        let mut due: Vec<Job> = users.iter().flat_map(|u| self.pending_for(u, now)).collect();
        due.sort_by(|a, b| a.key().cmp(&b.key()).then_with(|| a.user_id.cmp(&b.user_id)));
        let mut log = Vec::with_capacity(due.len());
        for job in due {
            let (status, detail) = if now - job.at > MAX_LATENESS {
                (JobStatus::Skipped, Some("missed by more than 6 h".to_string()))
            } else {
                match handler.handle(&job, now) {
                    Ok(d) => (JobStatus::Ok, d),
                    Err(e) => (JobStatus::Failed, Some(e)),
                }
            };
            self.marks.insert(job.user_id.clone(), job.key());
            log.push(LogRecord {
                user_id: job.user_id,
                job: job.kind,
                slot: job.slot,
                scheduled: job.at,
                local: job.local,
                fired_at: now,
                status,
                detail,
            });
        }
        if !log.is_empty() {
            self.save()?;
        }
        Ok(log)
    }

    /// Advances `clock` job by job up to `horizon`, firing each on time.
    pub fn run(&mut self, clock: &VirtualClock, horizon: DateTime<Utc>, handler: &mut dyn JobHandler) -> Result<Vec<LogRecord>, RunnerError> {
        let mut log = self.fire_due(clock.now(), handler)?;
        while let Some(at) = self.next_due(horizon) {
            clock.advance_to(at);
            log.extend(self.fire_due(clock.now(), handler)?);
        }
        clock.advance_to(horizon);
        Ok(log)
    }
}
