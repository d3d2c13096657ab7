use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ema::{EmaScore, EmaSubmission};
use crate::geo::LatLon;
use crate::profile::{UserId, UserProfile};
use crate::prompt::{GeneratedPrompt, Slot};

#[derive(Debug, Error)]
pub enum JournalStoreError {
    #[error("journal store io: {0}")]
    Io(#[from] std::io::Error),
    #[error("journal store line {line}: {reason}")]
    Corrupt { line: usize, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Text,
    Audio,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub entry_id: String,
    pub user_id: UserId,
    pub date: NaiveDate,
    pub prompt_id: String,
    pub modality: Modality,
    /// Entry text, or `blob:<sha256>` for audio.
    pub body: String,
    pub mood_score: Option<u8>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Thumbs {
    ThumbsUp,
    ThumbsDown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckInResponse {
    pub user_id: UserId,
    pub checkin_prompt_id: String,
    pub response: Thumbs,
    pub responded_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoodReport {
    pub user_id: UserId,
    pub date: NaiveDate,
    pub slot: Slot,
    pub score: u8,
    pub prompt_id: String,
    pub reported_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmaRecord {
    pub user_id: UserId,
    pub submission: EmaSubmission,
    pub score: EmaScore,
    pub submitted_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PendingKind {
    Journal { slot: Slot, date: NaiveDate },
    Checkin { prompt_id: String, text: String, slot: Slot },
    Ema { week: u32 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PendingItem {
    pub item_id: String,
    pub user_id: UserId,
    pub due_at: DateTime<Utc>,
    #[serde(flatten)]
    pub kind: PendingKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rec", rename_all = "snake_case")]
enum Record {
    Profile { effective: NaiveDate, profile: UserProfile },
    Home { user_id: UserId, home: LatLon },
    Prompt { prompt: GeneratedPrompt },
    Mood { mood: MoodReport },
    Entry { entry: JournalEntry },
    Checkin { response: CheckInResponse },
    Ema { ema: EmaRecord },
    Pending { item: PendingItem },
    Delivered { item_id: String },
}

#[derive(Serialize, Deserialize)]
struct Line {
    v: u32,
    #[serde(flatten)]
    record: Record,
}

#[derive(Debug, Default)]
struct State {
    profiles: BTreeMap<UserId, Vec<(NaiveDate, UserProfile)>>,
    homes: BTreeMap<UserId, LatLon>,
    prompts: BTreeMap<String, GeneratedPrompt>,
    /// Prompt ids per user in issue order.
    issued: BTreeMap<UserId, Vec<String>>,
    moods: BTreeMap<(UserId, NaiveDate, Slot), MoodReport>,
    entries: Vec<JournalEntry>,
    checkins: BTreeMap<String, CheckInResponse>,
    emas: Vec<EmaRecord>,
    pending: BTreeMap<String, (PendingItem, bool)>,
}

impl State {
    fn apply(&mut self, r: Record) {
        match r {
            Record::Profile { effective, profile } => {
                let v = self.profiles.entry(profile.user_id.clone()).or_default();
                v.retain(|(d, _)| *d < effective);
                v.push((effective, profile));
            }
            Record::Home { user_id, home } => {
                self.homes.insert(user_id, home);
            }
            Record::Prompt { prompt } => {
                self.issued.entry(prompt.user_id.clone()).or_default().push(prompt.prompt_id.clone());
                self.prompts.insert(prompt.prompt_id.clone(), prompt);
            }
            Record::Mood { mood } => {
                self.moods.insert((mood.user_id.clone(), mood.date, mood.slot), mood);
            }
            Record::Entry { entry } => self.entries.push(entry),
            Record::Checkin { response } => {
                self.checkins.insert(response.checkin_prompt_id.clone(), response);
            }
            Record::Ema { ema } => self.emas.push(ema),
            Record::Pending { item } => {
                self.pending.insert(item.item_id.clone(), (item, false));
            }
            Record::Delivered { item_id } => {
                if let Some(p) = self.pending.get_mut(&item_id) {
                    p.1 = true;
                }
            }
        }
    }
}

const SCHEMA_VERSION: u32 = 1;

/// Profiles, issued prompts and everything users submit. Writes are
/// serialized; with a directory, every write is appended to
/// `journal.jsonl` before it becomes visible, and audio goes to `blobs/`.
pub struct JournalStore {
    state: Mutex<State>,
    file: Option<Mutex<File>>,
    blob_dir: Option<PathBuf>,
    blobs: Mutex<BTreeMap<String, Vec<u8>>>,
}

impl Default for JournalStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl JournalStore {
    pub fn in_memory() -> Self {
        Self { state: Mutex::new(State::default()), file: None, blob_dir: None, blobs: Mutex::new(BTreeMap::new()) }
    }

    pub fn open(dir: impl AsRef<Path>) -> Result<Self, JournalStoreError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("blobs"))?;
        let path = dir.join("journal.jsonl");
        let mut state = State::default();
        if path.exists() {
            for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed: Line = serde_json::from_str(&line)
                    .map_err(|e| JournalStoreError::Corrupt { line: i + 1, reason: e.to_string() })?;
                if parsed.v != SCHEMA_VERSION {
                    return Err(JournalStoreError::Corrupt { line: i + 1, reason: format!("unknown schema version {}", parsed.v) });
                }
                state.apply(parsed.record);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            state: Mutex::new(state),
            file: Some(Mutex::new(file)),
            blob_dir: Some(dir.join("blobs")),
            blobs: Mutex::new(BTreeMap::new()),
        })
    }

    fn write(&self, state: &mut State, record: Record) -> Result<(), JournalStoreError> {
        if let Some(f) = &self.file {
            let mut line = serde_json::to_string(&Line { v: SCHEMA_VERSION, record: record.clone() }).expect("records serialize");
            line.push('\n');
            let mut f = f.lock();
            f.write_all(line.as_bytes())?;
            f.flush()?;
        }
        state.apply(record);
        Ok(())
    }

    pub fn put_blob(&self, bytes: &[u8]) -> Result<String, JournalStoreError> {
        let hash = crate::prompt::sha256_hex(bytes);
        match &self.blob_dir {
            Some(dir) => fs::write(dir.join(&hash), bytes)?,
            None => {
                self.blobs.lock().insert(hash.clone(), bytes.to_vec());
            }
        }
        Ok(format!("blob:{hash}"))
    }

    pub fn blob(&self, reference: &str) -> Option<Vec<u8>> {
        let hash = reference.strip_prefix("blob:")?;
        if hash.len() != 64 || !hash.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        match &self.blob_dir {
            Some(dir) => fs::read(dir.join(hash)).ok(),
            None => self.blobs.lock().get(hash).cloned(),
        }
    }

    pub fn put_profile(&self, effective: NaiveDate, profile: UserProfile) -> Result<(), JournalStoreError> {
        let mut s = self.state.lock();
        self.write(&mut s, Record::Profile { effective, profile })
    }

    pub fn put_home(&self, user_id: UserId, home: LatLon) -> Result<(), JournalStoreError> {
        let mut s = self.state.lock();
        self.write(&mut s, Record::Home { user_id, home })
    }

    pub fn home(&self, user: &UserId) -> Option<LatLon> {
        self.state.lock().homes.get(user).copied()
    }

    pub fn profile_versions(&self) -> Vec<(NaiveDate, UserProfile)> {
        self.state.lock().profiles.values().flatten().cloned().collect()
    }

    pub fn profile_on(&self, user: &UserId, date: NaiveDate) -> Option<UserProfile> {
        let s = self.state.lock();
        let versions = s.profiles.get(user)?;
        versions
            .iter()
            .rev()
            .find(|(d, _)| *d <= date)
            .or(versions.first())
            .map(|(_, p)| p.clone())
    }

    pub fn has_user(&self, user: &UserId) -> bool {
        self.state.lock().profiles.contains_key(user)
    }

    pub fn put_prompt(&self, prompt: GeneratedPrompt) -> Result<(), JournalStoreError> {
        let mut s = self.state.lock();
        self.write(&mut s, Record::Prompt { prompt })
    }

    pub fn prompt(&self, prompt_id: &str) -> Option<GeneratedPrompt> {
        self.state.lock().prompts.get(prompt_id).cloned()
    }

    /// Texts of the user's most recent issued prompts of the same family
    /// (check-in or journal), oldest first.
    pub fn recent_texts(&self, user: &UserId, checkin: bool, n: usize) -> Vec<String> {
        let s = self.state.lock();
        let Some(ids) = s.issued.get(user) else { return Vec::new() };
        let mut out: Vec<String> = ids
            .iter()
            .rev()
            .filter_map(|id| s.prompts.get(id))
            .filter(|p| p.slot.is_checkin() == checkin)
            .take(n)
            .map(|p| p.text.clone())
            .collect();
        out.reverse();
        out
    }

    pub fn prompts(&self) -> Vec<GeneratedPrompt> {
        let s = self.state.lock();
        s.issued.values().flatten().filter_map(|id| s.prompts.get(id)).cloned().collect()
    }

    pub fn mood(&self, user: &UserId, date: NaiveDate, slot: Slot) -> Option<MoodReport> {
        self.state.lock().moods.get(&(user.clone(), date, slot)).cloned()
    }

    /// Stores the prompt and the mood that produced it together.
    pub fn put_mood(&self, prompt: GeneratedPrompt, mood: MoodReport) -> Result<(), JournalStoreError> {
        let mut s = self.state.lock();
        self.write(&mut s, Record::Prompt { prompt })?;
        self.write(&mut s, Record::Mood { mood })
    }

    pub fn put_entry(&self, entry: JournalEntry) -> Result<(), JournalStoreError> {
        let mut s = self.state.lock();
        self.write(&mut s, Record::Entry { entry })
    }

    pub fn entries(&self, user: &UserId) -> Vec<JournalEntry> {
        self.state.lock().entries.iter().filter(|e| e.user_id == *user).cloned().collect()
    }

    /// Records a check-in response unless one exists; returns the stored one.
    pub fn put_checkin(&self, response: CheckInResponse) -> Result<Result<(), CheckInResponse>, JournalStoreError> {
        let mut s = self.state.lock();
        if let Some(existing) = s.checkins.get(&response.checkin_prompt_id) {
            return Ok(Err(existing.clone()));
        }
        self.write(&mut s, Record::Checkin { response })?;
        Ok(Ok(()))
    }

    pub fn checkin_responses(&self, user: &UserId) -> Vec<CheckInResponse> {
        self.state.lock().checkins.values().filter(|c| c.user_id == *user).cloned().collect()
    }

    pub fn put_ema(&self, ema: EmaRecord) -> Result<(), JournalStoreError> {
        let mut s = self.state.lock();
        self.write(&mut s, Record::Ema { ema })
    }

    pub fn emas(&self, user: &UserId) -> Vec<EmaRecord> {
        self.state.lock().emas.iter().filter(|e| e.user_id == *user).cloned().collect()
    }

    pub fn put_pending(&self, item: PendingItem) -> Result<(), JournalStoreError> {
        let mut s = self.state.lock();
        if s.pending.contains_key(&item.item_id) {
            return Ok(());
        }
        self.write(&mut s, Record::Pending { item })
    }

    /// Undelivered items due by `now`, marked delivered as they are returned.
    pub fn take_pending(&self, user: &UserId, now: DateTime<Utc>) -> Result<Vec<PendingItem>, JournalStoreError> {
        let mut s = self.state.lock();
        let mut due: Vec<PendingItem> = s
            .pending
            .values()
            .filter(|(p, delivered)| !delivered && p.user_id == *user && p.due_at <= now)
            .map(|(p, _)| p.clone())
            .collect();
        due.sort_by(|a, b| a.due_at.cmp(&b.due_at).then_with(|| a.item_id.cmp(&b.item_id)));
        for p in &due {
            self.write(&mut s, Record::Delivered { item_id: p.item_id.clone() })?;
        }
        Ok(due)
    }
}
