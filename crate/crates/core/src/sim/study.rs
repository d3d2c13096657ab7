use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use base64::Engine as _;
use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::trace::{generate, stream_rng, Manifest, Trace};
use super::{Scenario, SimError};
use crate::ingest::{parse_record, BatchId, SensorEvent};
use crate::llm::{AdversarialProvider, CacheEntry, CompletionProvider, MockProvider, RecordingProvider};
use crate::profile::{Category, ClockTime, PriorityRanking, UserId, UserProfile};
use crate::prompt::{sha256_hex, GeneratedPrompt, PromptRequest};
use crate::schedule::{Job, JobKind, LogRecord};
use crate::service::{
    EmaSubmission, Engine, EngineConfig, JournalEntry, Modality, NewEntry, PendingKind, Preferences, Thumbs,
};
use crate::time::{local_midnight, VirtualClock};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    /// Mock output replaced by invalid text at `bad_rate`.
    Adversarial { bad_rate: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub users: usize,
    pub days: u32,
    pub seed: u64,
    pub start: NaiveDate,
    /// Chance a participant acts on a notification.
    pub engagement: f64,
    /// Phone upload cadence, a multiple of the 30-minute recompute.
    pub upload_every_min: i64,
    pub provider: ProviderKind,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            users: 5,
            days: 56,
            seed: 7,
            start: NaiveDate::from_ymd_opt(2024, 1, 8).unwrap(),
            engagement: 0.85,
            upload_every_min: 30,
            provider: ProviderKind::Mock,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyUser {
    pub profile: UserProfile,
    pub manifest: Manifest,
}

/// Everything a study run produced.
pub struct StudyOutput {
    pub users: Vec<StudyUser>,
    pub log: Vec<LogRecord>,
    /// Prompts shown to participants, in issue order.
    pub prompts: Vec<GeneratedPrompt>,
    /// Every pre-generated prompt, shown or not.
    pub pregenerated: Vec<CacheEntry>,
    /// Every request a provider received.
    pub requests: Vec<PromptRequest>,
    pub entries: Vec<JournalEntry>,
    pub warnings: Vec<String>,
}

fn jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for i in items {
        out.push_str(&serde_json::to_string(i).expect("serializable"));
        out.push('\n');
    }
    out
}

impl StudyOutput {
    pub fn log_jsonl(&self) -> String {
        jsonl(&self.log)
    }

    pub fn prompts_jsonl(&self) -> String {
        jsonl(&self.prompts)
    }

    /// Writes `log.jsonl` and `prompts.jsonl` to `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), SimError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("log.jsonl"), self.log_jsonl())?;
        fs::write(dir.join("prompts.jsonl"), self.prompts_jsonl())?;
        Ok(())
    }
}

pub fn study_user(i: usize) -> UserId {
    UserId::new(format!("u{:02}", i + 1)).expect("valid id")
}

/// Scenario for participant `i`: the catalogue in turn.
pub fn study_scenario(i: usize, start: NaiveDate) -> Scenario {
    Scenario::named(Scenario::NAMES[i % Scenario::NAMES.len()]).expect("catalogue names are valid").starting(start)
}

/// Writes a trace as `events.ndjson` and `manifest.json` under `dir`.
pub fn write_trace(dir: &Path, events_ndjson: &str, manifest: &Manifest) -> Result<(), SimError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("events.ndjson"), events_ndjson)?;
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

/// Reads a trace written by [`write_trace`]. Corrupted lines listed in the
/// manifest are skipped.
pub fn read_trace(dir: &Path) -> Result<Trace, SimError> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    let text = fs::read_to_string(dir.join("events.ndjson"))?;
    let horizon = DateTime::<Utc>::MAX_UTC - Duration::days(2);
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || manifest.corrupted_lines.contains(&(i + 1)) {
            continue;
        }
        let e = parse_record(line, &manifest.user_id, horizon)
            .map_err(|r| SimError::InvalidScenario(format!("{}: line {}: {r}", dir.display(), i + 1)))?;
        events.push(e);
    }
    Ok(Trace { events, manifest })
}

/// Per-participant traces: read from `dir/<user>/` when present, otherwise
/// generated (and written there when `dir` is given).
pub fn study_traces(cfg: &StudyConfig, dir: Option<&Path>) -> Result<Vec<Trace>, SimError> {
    (0..cfg.users)
        .map(|i| {
            let user = study_user(i);
            if let Some(d) = dir.map(|d| d.join(user.as_str())) {
                if d.join("manifest.json").exists() {
                    let t = read_trace(&d)?;
                    if t.manifest.start != cfg.start || (t.manifest.days.len() as u32) < cfg.days {
                        return Err(SimError::InvalidScenario(format!(
                            "{} does not cover {} days from {}",
                            d.display(),
                            cfg.days,
                            cfg.start
                        )));
                    }
                    return Ok(t);
                }
                let t = generate(&study_scenario(i, cfg.start), cfg.days, cfg.seed, &user)?;
                write_trace(&d, &t.to_ndjson(), &t.manifest)?;
                return Ok(t);
            }
            generate(&study_scenario(i, cfg.start), cfg.days, cfg.seed, &user)
        })
        .collect()
}

/// Self-reported preferences drawn for a participant.
pub fn study_profile(cfg: &StudyConfig, user: &UserId) -> UserProfile {
    let mut rng = stream_rng(&["profile", &cfg.seed.to_string(), user.as_str()]);
    let mut ranking = Category::ALL;
    ranking.shuffle(&mut rng);
    let weekday = [(22, 30), (23, 0), (23, 30), (0, 0)][rng.random_range(0..4)];
    let weekend = ((weekday.0 + 1) % 24, weekday.1);
    UserProfile {
        user_id: user.clone(),
        priority_ranking: PriorityRanking::new(ranking).expect("a permutation"),
        bedtime_weekday: ClockTime::new(weekday.0, weekday.1).unwrap(),
        bedtime_weekend: ClockTime::new(weekend.0, weekend.1).unwrap(),
        timezone: chrono_tz::America::New_York.into(),
    }
}

struct Participant {
    events: Vec<SensorEvent>,
    uploaded: usize,
    batches: u32,
}

/// Text a participant writes; carries a marker unique to the day so leaks
/// are detectable.
pub fn entry_marker(seed: u64, user: &UserId, date: NaiveDate) -> String {
    format!("qz{}", &sha256_hex(format!("{seed}|{user}|{date}").as_bytes())[..14])
}

/// Runs the full pipeline over the study period against a virtual clock.
pub fn run_study(cfg: &StudyConfig, traces: Vec<Trace>) -> Result<StudyOutput, SimError> {
    let config = EngineConfig { term_start: cfg.start, ..EngineConfig::default() };
    let inner: Box<dyn CompletionProvider> = match cfg.provider {
        ProviderKind::Mock => Box::new(MockProvider::new(cfg.seed)),
        ProviderKind::Adversarial { bad_rate } => {
            Box::new(AdversarialProvider::new(cfg.seed, &config.assets.lexicon).with_bad_rate(bad_rate))
        }
    };
    let recorder = Arc::new(RecordingProvider::new(inner));
    let tz = chrono_tz::America::New_York;
    let t0 = local_midnight(tz, cfg.start);
    let horizon = local_midnight(tz, cfg.start + Duration::days(cfg.days as i64));
    let clock = VirtualClock::new(t0);
    let engine = Engine::in_memory(Arc::new(clock.clone()), recorder.clone(), config);

    let mut users = Vec::new();
    let mut participants: HashMap<UserId, Participant> = HashMap::new();
    for t in traces {
        let user = t.manifest.user_id.clone();
        let profile = study_profile(cfg, &user);
        let prefs = Preferences {
            ranking: profile.priority_ranking,
            bedtime_weekday: profile.bedtime_weekday,
            bedtime_weekend: profile.bedtime_weekend,
            timezone: profile.timezone.clone(),
            home: Some(t.manifest.home),
        };
        engine.set_preferences(&user, prefs)?;
        participants.insert(user, Participant { events: t.events, uploaded: 0, batches: 0 });
        users.push(StudyUser { profile, manifest: t.manifest });
    }

    let seed = cfg.seed.to_string();
    let mut handler = |job: &Job, now: DateTime<Utc>| -> Result<Option<String>, String> {
        let user = &job.user_id;
        if job.kind == JobKind::FeatureRecompute && (now - t0).num_minutes() % cfg.upload_every_min == 0 {
            let p = participants.get_mut(user).ok_or("no trace for user")?;
            let upto = p.events.partition_point(|e| e.timestamp < now);
            if upto > p.uploaded {
                let body: String = p.events[p.uploaded..upto].iter().map(|e| e.to_wire() + "\n").collect();
                p.batches += 1;
                let id = BatchId(format!("{user}-{:05}", p.batches));
                let summary = engine.ingest(user, body.as_bytes(), Some(id)).map_err(|e| e.to_string())?;
                if !summary.rejections.is_empty() {
                    return Err(format!("upload rejected {} lines", summary.rejections.len()));
                }
                p.uploaded = upto;
            }
        }
        let detail = engine.handle_job(job, now)?;
        let tag = format!("{:?}{}", job.kind, job.slot.map_or("", |s| s.as_str()));
        let mut rng = stream_rng(&["engage", &seed, user.as_str(), &job.date.to_string(), &tag]);
        if !matches!(job.kind, JobKind::JournalNotification | JobKind::Checkin | JobKind::Ema)
            || !rng.random_bool(cfg.engagement)
        {
            return Ok(detail);
        }
        let mut act = || -> Result<(), crate::service::EngineError> {
            let items = engine.pending(user)?;
            match job.kind {
                JobKind::JournalNotification => {
                    let prompt = engine.report_mood(user, rng.random_range(1..=5))?;
                    let marker = entry_marker(cfg.seed, user, job.date);
                    let (modality, body) = if rng.random_bool(0.1) {
                        (Modality::Audio, base64::engine::general_purpose::STANDARD.encode(marker.as_bytes()))
                    } else {
                        (Modality::Text, format!("Today I thought about {marker} and how the week went."))
                    };
                    engine.submit_entry(user, NewEntry { prompt_id: prompt.prompt_id, modality, body })?;
                }
                JobKind::Checkin => {
                    for item in items {
                        if let PendingKind::Checkin { prompt_id, .. } = item.kind {
                            let r = if rng.random_bool(0.7) { Thumbs::ThumbsUp } else { Thumbs::ThumbsDown };
                            engine.respond_checkin(user, &prompt_id, r)?;
                        }
                    }
                }
                _ => {
                    let key = &engine.config().ema_key;
                    let mut answers = |n: usize, lo: u8, hi: u8| (0..n).map(|_| rng.random_range(lo..=hi)).collect::<Vec<u8>>();
                    let week = engine.academic_week(job.date) as u32;
                    let phq4 = answers(key.phq4.scale.items, key.phq4.scale.min, key.phq4.scale.max);
                    let panas = answers(key.panas.scale.items, key.panas.scale.min, key.panas.scale.max);
                    let sris = answers(key.sris.scale.items, key.sris.scale.min, key.sris.scale.max);
                    let maas = answers(key.maas.items, key.maas.min, key.maas.max);
                    engine.submit_ema(user, EmaSubmission { week, phq4, panas, sris, maas })?;
                }
            }
            Ok(())
        };
        act().map_err(|e| format!("participant action failed: {e}"))?;
        Ok(detail)
    };
    let log = engine.run_with(&clock, horizon, &mut handler)?;

    let entries = users.iter().flat_map(|u| engine.journal().entries(&u.profile.user_id)).collect();
    Ok(StudyOutput {
        users,
        log,
        prompts: engine.journal().prompts(),
        pregenerated: engine.gateway().cache_entries(),
        requests: recorder.requests(),
        entries,
        warnings: engine.scheduler_warnings(),
    })
}

/// An engine holding all of `trace`, with the clock just past its last
/// event. Used for inspection and oracle tests.
pub fn replay(trace: &Trace) -> Result<Engine, SimError> {
    let end = trace.events.last().map_or(local_midnight(chrono_tz::America::New_York, trace.manifest.start), |e| e.timestamp);
    let clock = VirtualClock::new(end + Duration::hours(1));
    let config = EngineConfig { term_start: trace.manifest.start, ..EngineConfig::default() };
    let engine = Engine::in_memory(Arc::new(clock), Arc::new(MockProvider::new(trace.manifest.seed)), config);
    let user = &trace.manifest.user_id;
    let cfg = StudyConfig { seed: trace.manifest.seed, start: trace.manifest.start, ..StudyConfig::default() };
    let profile = study_profile(&cfg, user);
    engine.set_preferences(
        user,
        Preferences {
            ranking: profile.priority_ranking,
            bedtime_weekday: profile.bedtime_weekday,
            bedtime_weekend: profile.bedtime_weekend,
            timezone: profile.timezone,
            home: Some(trace.manifest.home),
        },
    )?;
    let summary = engine.ingest(user, trace.to_ndjson().as_bytes(), None)?;
    if !summary.rejections.is_empty() {
        return Err(SimError::InvalidScenario(format!("{} events rejected on replay", summary.rejections.len())));
    }
    Ok(engine)
}
