use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use base64::Engine as _;
use chrono::{DateTime, Datelike, Duration, NaiveDate, Utc, Weekday};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ema::{score_ema, EmaError, EmaKey, EmaScore, EmaSubmission};
use super::store::{
    CheckInResponse, EmaRecord, JournalEntry, JournalStore, JournalStoreError, Modality, MoodReport, PendingItem,
    PendingKind, Thumbs,
};
use crate::features::{
    trend, weekly_mean, AppCategoryTable, DayWindow, FeatureError, FeaturePipeline, FeatureVector, TrendParams,
    TrendReport, UserGeo,
};
use crate::geo::{ClusterParams, LatLon, MapEntry, PlaceLabel, SemanticMap};
use crate::ingest::{
    content_batch_id, parse_batch, BatchId, EventStore, FileEventStore, IngestError, IngestReceipt,
    MemoryEventStore, Rejection, StoreError,
};
use crate::llm::{CompletionProvider, Gateway, GatewayConfig};
use crate::profile::{ClockTime, PriorityRanking, TimeZoneName, UserId, UserProfile};
use crate::prompt::{sha256_hex, GeneratedPrompt, PromptAssets, PromptContext, Slot, StressMap};
use crate::schedule::{checkin_window, journal_time, Job, JobHandler, JobKind, LogRecord, Runner, RunnerError};
use crate::time::{local_date, resolve_local, Clock, VirtualClock};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("{0} not found")]
    NotFound(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Ema(#[from] EmaError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Events(#[from] StoreError),
    #[error(transparent)]
    Journal(#[from] JournalStoreError),
    #[error(transparent)]
    Scheduler(#[from] RunnerError),
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    /// Monday of academic week 1.
    pub term_start: NaiveDate,
    pub stress: StressMap,
    pub trends: TrendParams,
    pub cluster: ClusterParams,
    pub campus: SemanticMap,
    pub apps: AppCategoryTable,
    /// Radius of the home entry added to each user's map.
    pub home_radius_m: f64,
    pub gateway: GatewayConfig,
    pub assets: Arc<PromptAssets>,
    pub ema_key: EmaKey,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            term_start: NaiveDate::from_ymd_opt(2024, 1, 8).unwrap(),
            stress: StressMap::default(),
            trends: TrendParams::default(),
            cluster: ClusterParams::default(),
            campus: SemanticMap::bundled_campus(),
            apps: AppCategoryTable::bundled(),
            home_radius_m: 50.0,
            gateway: GatewayConfig::default(),
            assets: Arc::new(PromptAssets::bundled()),
            ema_key: EmaKey::bundled(),
        }
    }
}

/// Body of a preferences update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preferences {
    pub ranking: PriorityRanking,
    pub bedtime_weekday: ClockTime,
    pub bedtime_weekend: ClockTime,
    pub timezone: TimeZoneName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub home: Option<LatLon>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    #[serde(flatten)]
    pub receipt: IngestReceipt,
    pub rejections: Vec<Rejection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewEntry {
    pub prompt_id: String,
    pub modality: Modality,
    /// Entry text, or base64 audio bytes.
    pub body: String,
}

/// The whole service behind the HTTP API: ingest, features, prompt
/// generation, scheduling and the journal store.
pub struct Engine {
    clock: Arc<dyn Clock>,
    pipeline: FeaturePipeline,
    gateway: Gateway,
    journal: JournalStore,
    runner: Mutex<Runner>,
    config: EngineConfig,
    user_locks: Mutex<HashMap<UserId, Arc<Mutex<()>>>>,
}

impl Engine {
    pub fn new(
        clock: Arc<dyn Clock>,
        events: Arc<dyn EventStore>,
        journal: JournalStore,
        mut runner: Runner,
        provider: Arc<dyn CompletionProvider>,
        config: EngineConfig,
    ) -> Self {
        let pipeline = FeaturePipeline::new(events, config.apps.clone(), config.cluster);
        let gateway = Gateway::new(provider, config.assets.clone(), config.gateway);
        let now = clock.now();
        for (effective, profile) in journal.profile_versions() {
            runner.restore_profile(effective, profile, now);
        }
        let engine = Self {
            clock,
            pipeline,
            gateway,
            journal,
            runner: Mutex::new(runner),
            config,
            user_locks: Mutex::new(HashMap::new()),
        };
        let users: Vec<UserId> = engine.runner.lock().users().cloned().collect();
        for u in users {
            engine.register_geo(&u);
        }
        engine
    }

    pub fn in_memory(clock: Arc<dyn Clock>, provider: Arc<dyn CompletionProvider>, config: EngineConfig) -> Self {
        Self::new(clock, Arc::new(MemoryEventStore::new()), JournalStore::in_memory(), Runner::new(), provider, config)
    }

    /// Engine persisted under `dir`: `events/`, `journal/` and `scheduler.json`.
    pub fn open(
        dir: impl AsRef<Path>,
        clock: Arc<dyn Clock>,
        provider: Arc<dyn CompletionProvider>,
        config: EngineConfig,
    ) -> Result<Self, EngineError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(JournalStoreError::from)?;
        let events = Arc::new(FileEventStore::open(dir.join("events"))?);
        let journal = JournalStore::open(dir.join("journal"))?;
        let runner = Runner::with_state_file(dir.join("scheduler.json"))?;
        Ok(Self::new(clock, events, journal, runner, provider, config))
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.clock
    }

    pub fn pipeline(&self) -> &FeaturePipeline {
        &self.pipeline
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn journal(&self) -> &JournalStore {
        &self.journal
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn scheduler_warnings(&self) -> Vec<String> {
        self.runner.lock().warnings.clone()
    }

    fn user_lock(&self, user: &UserId) -> Arc<Mutex<()>> {
        self.user_locks.lock().entry(user.clone()).or_default().clone()
    }

    fn register_geo(&self, user: &UserId) {
        let Some(profile) = self.journal.profile_on(user, NaiveDate::MAX) else { return };
        let mut map = self.config.campus.clone();
        if let Some(home) = self.journal.home(user) {
            let entry = MapEntry { label: PlaceLabel::Home, center: home, radius_m: self.config.home_radius_m };
            map = map.with_entry(entry).expect("home coordinates were validated");
        }
        self.pipeline.register_user(user.clone(), UserGeo { tz: profile.tz(), map });
    }

    fn profile(&self, user: &UserId, date: NaiveDate) -> Result<UserProfile, EngineError> {
        self.journal.profile_on(user, date).ok_or_else(|| EngineError::UnknownUser(user.clone()))
    }

    /// Installs preferences. New users start now; changes to an existing
    /// schedule take effect the next local day.
    pub fn set_preferences(&self, user: &UserId, prefs: Preferences) -> Result<NaiveDate, EngineError> {
        if let Some(h) = prefs.home {
            if !(-90.0..=90.0).contains(&h.lat) || !(-180.0..=180.0).contains(&h.lon) {
                return Err(EngineError::Invalid("home coordinates out of range".into()));
            }
        }
        // Lock order is scheduler, then user, as in `tick`.
        let mut runner = self.runner.lock();
        let lock = self.user_lock(user);
        let _g = lock.lock();
        let profile = UserProfile {
            user_id: user.clone(),
            priority_ranking: prefs.ranking,
            bedtime_weekday: prefs.bedtime_weekday,
            bedtime_weekend: prefs.bedtime_weekend,
            timezone: prefs.timezone,
        };
        let effective = runner.update_profile(profile.clone(), self.clock.now());
        self.journal.put_profile(effective, profile)?;
        if let Some(h) = prefs.home {
            self.journal.put_home(user.clone(), h)?;
        }
        self.register_geo(user);
        Ok(effective)
    }

    pub fn ingest(&self, user: &UserId, raw: &[u8], batch_id: Option<BatchId>) -> Result<IngestSummary, EngineError> {
        let batch_id = batch_id.unwrap_or_else(|| content_batch_id(raw));
        let batch = parse_batch(raw, user, batch_id, self.clock.now())?;
        let receipt = self.pipeline.store().store_batch(&batch)?;
        Ok(IngestSummary { receipt, rejections: batch.rejections })
    }

    pub fn academic_week(&self, date: NaiveDate) -> u8 {
        let days = (date - self.config.term_start).num_days();
        (days.div_euclid(7) + 1).clamp(1, self.config.stress.term_weeks as i64) as u8
    }

    fn window_trends(&self, user: &UserId, date: NaiveDate, window: DayWindow) -> Result<TrendReport, EngineError> {
        let today = self.pipeline.daily_features(user, date, window)?.values();
        let baseline = self.pipeline.compute_baseline(user, date, window)?;
        Ok(trend(&today, &baseline, &self.config.trends))
    }

    /// Everything the composer needs for `slot` on `date`.
    pub fn context(&self, user: &UserId, slot: Slot, date: NaiveDate, mood: Option<u8>) -> Result<PromptContext, EngineError> {
        let profile = self.profile(user, date)?;
        let week = self.academic_week(date);
        let mut weekend = None;
        let trends = match slot {
            s if s.is_checkin() => {
                let w = checkin_window(s).expect("check-in slots have windows");
                Some(self.window_trends(user, date, w.data)?)
            }
            Slot::WeekdayJournal => {
                let (until, _) = journal_time(&profile, date);
                Some(self.window_trends(user, date, DayWindow::new(chrono::NaiveTime::MIN, Some(until)))?)
            }
            Slot::SaturdayJournal => None,
            _ => {
                // Sunday: the past week's daily mean against the 30 days before it.
                let days: Vec<_> = (1..=7)
                    .map(|k| self.pipeline.daily_features(user, date - Duration::days(k), DayWindow::FULL_DAY))
                    .collect::<Result<Vec<FeatureVector>, _>>()?;
                let values: Vec<_> = days.iter().map(FeatureVector::values).collect();
                let week_mean = weekly_mean(&values);
                let baseline = self.pipeline.compute_baseline(user, date - Duration::days(7), DayWindow::FULL_DAY)?;
                if date.weekday() == Weekday::Sun {
                    weekend = Some(self.pipeline.weekend_composites(user, date)?);
                }
                Some(trend(&week_mean, &baseline, &self.config.trends))
            }
        };
        Ok(PromptContext {
            date,
            slot,
            mood_score: mood,
            stress_index: self.config.stress.index(week),
            academic_week: week,
            previous_prompts: self.journal.recent_texts(user, slot.is_checkin(), slot.history_len()),
            trends,
            priorities: profile.priority_ranking,
            weekend,
        })
    }

    /// Journal day a mood report at `now` answers: the latest of yesterday
    /// and today whose notification has fired, else today.
    fn journal_day(&self, user: &UserId, now: DateTime<Utc>) -> Result<NaiveDate, EngineError> {
        let today_profile = self.profile(user, NaiveDate::MAX)?;
        let today = local_date(today_profile.tz(), now);
        for d in [today, today - Duration::days(1)] {
            let Ok(p) = self.profile(user, d) else { continue };
            let at = resolve_local(p.tz(), d, journal_time(&p, d).0);
            if at <= now {
                return Ok(d);
            }
        }
        Ok(today)
    }

    /// Mood report followed by the journal prompt. Repeating the report for
    /// the same journal day returns the same prompt.
    pub fn report_mood(&self, user: &UserId, score: u8) -> Result<GeneratedPrompt, EngineError> {
        if !(1..=5).contains(&score) {
            return Err(EngineError::Invalid(format!("mood score {score} is outside 1..=5")));
        }
        let lock = self.user_lock(user);
        let _g = lock.lock();
        let now = self.clock.now();
        let date = self.journal_day(user, now)?;
        let slot = Slot::journal_for(date.weekday());
        if let Some(m) = self.journal.mood(user, date, slot) {
            return self.journal.prompt(&m.prompt_id).ok_or_else(|| EngineError::NotFound(format!("prompt {}", m.prompt_id)));
        }
        let ctx = self.context(user, slot, date, Some(score))?;
        let prompt = self.gateway.realtime_prompt(user, &ctx, now);
        let mood = MoodReport {
            user_id: user.clone(),
            date,
            slot,
            score,
            prompt_id: prompt.prompt_id.clone(),
            reported_at: now,
        };
        self.journal.put_mood(prompt.clone(), mood)?;
        Ok(prompt)
    }

    /// Undelivered items due now; each is returned once.
    pub fn pending(&self, user: &UserId) -> Result<Vec<PendingItem>, EngineError> {
        if !self.journal.has_user(user) {
            return Err(EngineError::UnknownUser(user.clone()));
        }
        Ok(self.journal.take_pending(user, self.clock.now())?)
    }

    fn own_prompt(&self, user: &UserId, prompt_id: &str) -> Result<GeneratedPrompt, EngineError> {
        self.journal
            .prompt(prompt_id)
            .filter(|p| p.user_id == *user)
            .ok_or_else(|| EngineError::NotFound(format!("prompt {prompt_id}")))
    }

    pub fn submit_entry(&self, user: &UserId, entry: NewEntry) -> Result<JournalEntry, EngineError> {
        let prompt = self.own_prompt(user, &entry.prompt_id)?;
        if prompt.slot.is_checkin() {
            return Err(EngineError::Invalid("entries answer journal prompts, not check-ins".into()));
        }
        let body = match entry.modality {
            Modality::Text if entry.body.trim().is_empty() => {
                return Err(EngineError::Invalid("text entries must not be empty".into()))
            }
            Modality::Text => entry.body,
            Modality::Audio => {
                let bytes = base64::engine::general_purpose::STANDARD
                    .decode(entry.body.trim())
                    .map_err(|e| EngineError::Invalid(format!("audio body is not base64: {e}")))?;
                if bytes.is_empty() {
                    return Err(EngineError::Invalid("audio entries must not be empty".into()));
                }
                self.journal.put_blob(&bytes)?
            }
        };
        let lock = self.user_lock(user);
        let _g = lock.lock();
        let now = self.clock.now();
        let n = self.journal.entries(user).len();
        let entry = JournalEntry {
            entry_id: sha256_hex(format!("{user}|{}|{}|{n}", prompt.prompt_id, now.timestamp_millis()).as_bytes())[..20]
                .to_string(),
            user_id: user.clone(),
            date: prompt.date,
            prompt_id: prompt.prompt_id.clone(),
            modality: entry.modality,
            body,
            mood_score: self.journal.mood(user, prompt.date, prompt.slot).map(|m| m.score),
            created_at: now,
        };
        self.journal.put_entry(entry.clone())?;
        Ok(entry)
    }

    pub fn respond_checkin(&self, user: &UserId, prompt_id: &str, response: Thumbs) -> Result<CheckInResponse, EngineError> {
        let prompt = self.own_prompt(user, prompt_id)?;
        if !prompt.slot.is_checkin() {
            return Err(EngineError::NotFound(format!("check-in {prompt_id}")));
        }
        let r = CheckInResponse {
            user_id: user.clone(),
            checkin_prompt_id: prompt_id.to_string(),
            response,
            responded_at: self.clock.now(),
        };
        match self.journal.put_checkin(r.clone())? {
            Ok(()) => Ok(r),
            Err(_) => Err(EngineError::Conflict(format!("check-in {prompt_id} already has a response"))),
        }
    }

    pub fn submit_ema(&self, user: &UserId, submission: EmaSubmission) -> Result<EmaScore, EngineError> {
        if !self.journal.has_user(user) {
            return Err(EngineError::UnknownUser(user.clone()));
        }
        let score = score_ema(&self.config.ema_key, &submission)?;
        self.journal.put_ema(EmaRecord {
            user_id: user.clone(),
            submission,
            score: score.clone(),
            submitted_at: self.clock.now(),
        })?;
        Ok(score)
    }

    /// Runs one scheduled job.
    pub fn handle_job(&self, job: &Job, now: DateTime<Utc>) -> Result<Option<String>, String> {
        let user = &job.user_id;
        let lock = self.user_lock(user);
        let _g = lock.lock();
        let err = |e: EngineError| e.to_string();
        let slot = || job.slot.ok_or_else(|| format!("{:?} job without a slot", job.kind));
        match job.kind {
            JobKind::FeatureRecompute => {
                let fv = self.pipeline.daily_features(user, job.date, DayWindow::FULL_DAY).map_err(|e| e.to_string())?;
                Ok((!fv.sources.is_empty()).then(|| format!("{} sources", fv.sources.len())))
            }
            JobKind::Pregenerate => {
                let ctx = self.context(user, slot()?, job.date, None).map_err(err)?;
                let entry = self.gateway.pregenerate(user, &ctx, now);
                Ok(Some(entry.prompt.source.as_str().to_string()))
            }
            JobKind::Checkin => {
                let slot = slot()?;
                let ctx = self.context(user, slot, job.date, None).map_err(err)?;
                let prompt = self.gateway.checkin_prompt(user, &ctx, now);
                let detail = format!("{} {}", prompt.source.as_str(), prompt.prompt_id);
                let item = PendingItem {
                    item_id: format!("checkin-{}", prompt.prompt_id),
                    user_id: user.clone(),
                    due_at: job.at,
                    kind: PendingKind::Checkin { prompt_id: prompt.prompt_id.clone(), text: prompt.text.clone(), slot },
                };
                self.journal.put_prompt(prompt).map_err(|e| e.to_string())?;
                self.journal.put_pending(item).map_err(|e| e.to_string())?;
                Ok(Some(detail))
            }
            JobKind::JournalNotification => {
                let slot = slot()?;
                let item = PendingItem {
                    item_id: format!("journal-{}", job.date),
                    user_id: user.clone(),
                    due_at: job.at,
                    kind: PendingKind::Journal { slot, date: job.date },
                };
                self.journal.put_pending(item).map_err(|e| e.to_string())?;
                Ok(None)
            }
            JobKind::Ema => {
                let week = self.academic_week(job.date) as u32;
                let item = PendingItem {
                    item_id: format!("ema-{}", job.date),
                    user_id: user.clone(),
                    due_at: job.at,
                    kind: PendingKind::Ema { week },
                };
                self.journal.put_pending(item).map_err(|e| e.to_string())?;
                Ok(None)
            }
        }
    }

    /// Fires every job due at the engine clock's current time.
    pub fn tick(&self) -> Result<Vec<LogRecord>, EngineError> {
        let mut handler = |job: &Job, now: DateTime<Utc>| self.handle_job(job, now);
        Ok(self.runner.lock().fire_due(self.clock.now(), &mut handler)?)
    }

    /// Advances `clock` to `horizon`, firing jobs through `handler`.
    pub fn run_with(&self, clock: &VirtualClock, horizon: DateTime<Utc>, handler: &mut dyn JobHandler) -> Result<Vec<LogRecord>, EngineError> {
        Ok(self.runner.lock().run(clock, horizon, handler)?)
    }

    /// Advances `clock` to `horizon`, firing each job with [`Engine::handle_job`].
    pub fn run(&self, clock: &VirtualClock, horizon: DateTime<Utc>) -> Result<Vec<LogRecord>, EngineError> {
        let mut handler = |job: &Job, now: DateTime<Utc>| self.handle_job(job, now);
        self.run_with(clock, horizon, &mut handler)
    }
}
