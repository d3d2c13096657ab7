use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{kind_rank, parse_record, BatchId, EventKind, IngestBatch, SensorEvent};
use crate::profile::UserId;
use crate::time::TimeRange;

/// Events older than this at upload time are stored but flagged late.
pub const LATE_AFTER: Duration = Duration::days(7);

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown user {0}")]
    UnknownUser(UserId),
    #[error("store io: {0}")]
    Io(#[from] std::io::Error),
    #[error("corrupt store file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReceipt {
    pub batch_id: BatchId,
    /// The batch id was already stored; nothing changed.
    pub duplicate: bool,
    pub stored: usize,
    /// Events identical to ones already stored.
    pub deduplicated: usize,
    pub late: usize,
    pub counts: BTreeMap<EventKind, usize>,
}

pub trait EventStore: Send + Sync {
    fn store_batch(&self, batch: &IngestBatch) -> Result<IngestReceipt, StoreError>;

    /// Stored events with timestamp in `range` and kind in `kinds`, time-sorted.
    fn query_events(&self, user: &UserId, range: TimeRange, kinds: &[EventKind]) -> Result<Vec<SensorEvent>, StoreError>;

    /// `(count, highest insertion sequence)` of the events in `range`. The
    /// store is append-only, so an unchanged fingerprint means unchanged data.
    fn fingerprint(&self, user: &UserId, range: TimeRange) -> Result<(usize, u64), StoreError>;

    fn late_events(&self, user: &UserId) -> Result<Vec<SensorEvent>, StoreError>;

    /// Insertion counter of the user's events; 0 for an unknown user. It
    /// changes whenever anything is stored, so equal versions mean equal data.
    fn version(&self, user: &UserId) -> u64;

    fn users(&self) -> Vec<UserId>;
}

type EventKey = (i64, u8, String);

#[derive(Debug, Clone)]
struct Stored {
    event: SensorEvent,
    late: bool,
    seq: u64,
}

#[derive(Default)]
struct UserLog {
    batches: HashSet<BatchId>,
    events: BTreeMap<EventKey, Stored>,
    next_seq: u64,
}

impl UserLog {
    fn apply(&mut self, batch: &IngestBatch) -> IngestReceipt {
        let mut receipt = IngestReceipt {
            batch_id: batch.batch_id.clone(),
            duplicate: false,
            stored: 0,
            deduplicated: 0,
            late: 0,
            counts: BTreeMap::new(),
        };
        if !self.batches.insert(batch.batch_id.clone()) {
            receipt.duplicate = true;
            return receipt;
        }
        for event in &batch.events {
            let key = (event.timestamp.timestamp_millis(), kind_rank(event.kind()), event.to_wire());
            if self.events.contains_key(&key) {
                receipt.deduplicated += 1;
                continue;
            }
            let late = batch.received_at - event.timestamp > LATE_AFTER;
            self.next_seq += 1;
            self.events.insert(
                key,
                Stored {
                    event: event.clone(),
                    late,
                    seq: self.next_seq,
                },
            );
            receipt.stored += 1;
            receipt.late += late as usize;
            *receipt.counts.entry(event.kind()).or_default() += 1;
        }
        receipt
    }

    fn range(&self, range: TimeRange) -> impl Iterator<Item = &Stored> {
        let lo = (range.start.timestamp_millis(), 0u8, String::new());
        let hi = (range.end.timestamp_millis(), 0u8, String::new());
        self.events.range(lo..hi).map(|(_, s)| s)
    }
}

/// In-memory store. One writer per user at a time, any number of readers;
/// a batch becomes visible atomically.
#[derive(Default)]
pub struct MemoryEventStore {
    users: RwLock<HashMap<UserId, Arc<RwLock<UserLog>>>>,
}

impl MemoryEventStore {
    pub fn new() -> Self {
        Self::default()
    }

    fn log(&self, user: &UserId) -> Option<Arc<RwLock<UserLog>>> {
        self.users.read().get(user).cloned()
    }

    fn log_or_create(&self, user: &UserId) -> Arc<RwLock<UserLog>> {
        if let Some(l) = self.log(user) {
            return l;
        }
        self.users.write().entry(user.clone()).or_default().clone()
    }

    pub fn has_batch(&self, user: &UserId, batch_id: &BatchId) -> bool {
        self.log(user).is_some_and(|l| l.read().batches.contains(batch_id))
    }
}

impl EventStore for MemoryEventStore {
    fn store_batch(&self, batch: &IngestBatch) -> Result<IngestReceipt, StoreError> {
        let log = self.log_or_create(&batch.user_id);
        let mut guard = log.write();
        Ok(guard.apply(batch))
    }

    fn query_events(&self, user: &UserId, range: TimeRange, kinds: &[EventKind]) -> Result<Vec<SensorEvent>, StoreError> {
        let log = self.log(user).ok_or_else(|| StoreError::UnknownUser(user.clone()))?;
        let guard = log.read();
        Ok(guard
            .range(range)
            .filter(|s| kinds.contains(&s.event.kind()))
            .map(|s| s.event.clone())
            .collect())
    }

    fn fingerprint(&self, user: &UserId, range: TimeRange) -> Result<(usize, u64), StoreError> {
        let log = self.log(user).ok_or_else(|| StoreError::UnknownUser(user.clone()))?;
        let guard = log.read();
        Ok(guard.range(range).fold((0, 0), |(n, m), s| (n + 1, m.max(s.seq))))
    }

    fn late_events(&self, user: &UserId) -> Result<Vec<SensorEvent>, StoreError> {
        let log = self.log(user).ok_or_else(|| StoreError::UnknownUser(user.clone()))?;
        let guard = log.read();
        Ok(guard.events.values().filter(|s| s.late).map(|s| s.event.clone()).collect())
    }

    fn version(&self, user: &UserId) -> u64 {
        self.log(user).map_or(0, |l| l.read().next_seq)
    }

    fn users(&self) -> Vec<UserId> {
        let mut v: Vec<_> = self.users.read().keys().cloned().collect();
        v.sort();
        v
    }
}

const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct BatchRecord {
    v: u32,
    batch_id: BatchId,
    received_at: DateTime<Utc>,
    events: Vec<String>,
}

/// File-backed store: one append-only JSON-lines file of batches per user,
/// replayed into memory on open.
pub struct FileEventStore {
    dir: PathBuf,
    memory: MemoryEventStore,
    writers: Mutex<HashMap<UserId, Arc<Mutex<()>>>>,
}

impl FileEventStore {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir)?;
        let memory = MemoryEventStore::new();
        let mut entries: Vec<_> = fs::read_dir(&dir)?.collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.file_name());
        for entry in entries {
            let path = entry.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
            let Some(user) = name.strip_suffix(".batches.jsonl") else { continue };
            let user = UserId::new(user).map_err(|e| StoreError::Corrupt {
                path: path.clone(),
                reason: e.to_string(),
            })?;
            for (i, line) in BufReader::new(File::open(&path)?).lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |reason: String| StoreError::Corrupt {
                    path: path.clone(),
                    reason: format!("line {}: {reason}", i + 1),
                };
                let rec: BatchRecord = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                if rec.v != SCHEMA_VERSION {
                    return Err(corrupt(format!("unsupported schema version {}", rec.v)));
                }
                let events = rec
                    .events
                    .iter()
                    .map(|l| parse_record(l, &user, rec.received_at))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(corrupt)?;
                memory.store_batch(&IngestBatch {
                    user_id: user.clone(),
                    batch_id: rec.batch_id,
                    events,
                    received_at: rec.received_at,
                    rejections: Vec::new(),
                })?;
            }
        }
        Ok(Self {
            dir,
            memory,
            writers: Mutex::new(HashMap::new()),
        })
    }

    fn writer(&self, user: &UserId) -> Arc<Mutex<()>> {
        self.writers.lock().entry(user.clone()).or_default().clone()
    }
}

impl EventStore for FileEventStore {
    fn store_batch(&self, batch: &IngestBatch) -> Result<IngestReceipt, StoreError> {
        let writer = self.writer(&batch.user_id);
        let _guard = writer.lock();
        if !self.memory.has_batch(&batch.user_id, &batch.batch_id) {
            let rec = BatchRecord {
                v: SCHEMA_VERSION,
                batch_id: batch.batch_id.clone(),
                received_at: batch.received_at,
                events: batch.events.iter().map(SensorEvent::to_wire).collect(),
            };
            let path = self.dir.join(format!("{}.batches.jsonl", batch.user_id));
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            let mut line = serde_json::to_string(&rec).expect("batch record serializes");
            line.push('\n');
            f.write_all(line.as_bytes())?;
            f.sync_data()?;
        }
        self.memory.store_batch(batch)
    }

    fn query_events(&self, user: &UserId, range: TimeRange, kinds: &[EventKind]) -> Result<Vec<SensorEvent>, StoreError> {
        self.memory.query_events(user, range, kinds)
    }

    fn fingerprint(&self, user: &UserId, range: TimeRange) -> Result<(usize, u64), StoreError> {
        self.memory.fingerprint(user, range)
    }

    fn late_events(&self, user: &UserId) -> Result<Vec<SensorEvent>, StoreError> {
        self.memory.late_events(user)
    }

    fn version(&self, user: &UserId) -> u64 {
        self.memory.version(user)
    }

    fn users(&self) -> Vec<UserId> {
        self.memory.users()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_batch, Payload, SmsLog, Direction};
    use chrono::TimeZone;

    fn uid() -> UserId {
        UserId::new("u1").unwrap()
    }

    fn sms(min: i64) -> SensorEvent {
        SensorEvent {
            user_id: uid(),
            timestamp: Utc.with_ymd_and_hms(2024, 2, 5, 0, 0, 0).unwrap() + Duration::minutes(min),
            payload: Payload::SmsLog(SmsLog { direction: Direction::Incoming }),
        }
    }

    fn batch(id: &str, events: Vec<SensorEvent>) -> IngestBatch {
        IngestBatch {
            user_id: uid(),
            batch_id: BatchId(id.into()),
            events,
            received_at: Utc.with_ymd_and_hms(2024, 2, 6, 0, 0, 0).unwrap(),
            rejections: vec![],
        }
    }

    fn day() -> TimeRange {
        let s = Utc.with_ymd_and_hms(2024, 2, 5, 0, 0, 0).unwrap();
        TimeRange::new(s, s + Duration::days(1)).unwrap()
    }

    #[test]
    fn restoring_a_batch_is_a_no_op() {
        let store = MemoryEventStore::new();
        let b = batch("b1", vec![sms(1), sms(2)]);
        let first = store.store_batch(&b).unwrap();
        assert_eq!(first.stored, 2);
        let second = store.store_batch(&b).unwrap();
        assert!(second.duplicate);
        assert_eq!(second.stored, 0);
        assert_eq!(store.query_events(&uid(), day(), &EventKind::ALL).unwrap().len(), 2);
    }

    #[test]
    fn overlapping_uploads_deduplicate_events() {
        let store = MemoryEventStore::new();
        store.store_batch(&batch("b1", vec![sms(1), sms(2)])).unwrap();
        let r = store.store_batch(&batch("b2", vec![sms(2), sms(3)])).unwrap();
        assert_eq!((r.stored, r.deduplicated), (1, 1));
        assert_eq!(store.query_events(&uid(), day(), &EventKind::ALL).unwrap().len(), 3);
    }

    #[test]
    fn disjoint_batches_union_and_sort() {
        let store = MemoryEventStore::new();
        store.store_batch(&batch("late-hours", vec![sms(600), sms(601)])).unwrap();
        store.store_batch(&batch("early-hours", vec![sms(5), sms(30)])).unwrap();
        let got: Vec<_> = store
            .query_events(&uid(), day(), &EventKind::ALL)
            .unwrap()
            .iter()
            .map(|e| e.timestamp)
            .collect();
        let mut want = vec![sms(600), sms(601), sms(5), sms(30)].into_iter().map(|e| e.timestamp).collect::<Vec<_>>();
        want.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn query_is_half_open_and_filters_kinds() {
        let store = MemoryEventStore::new();
        store.store_batch(&batch("b", vec![sms(0), sms(60)])).unwrap();
        let s = day().start;
        let r = TimeRange::new(s, s + Duration::minutes(60)).unwrap();
        assert_eq!(store.query_events(&uid(), r, &EventKind::ALL).unwrap().len(), 1);
        assert!(store.query_events(&uid(), r, &[EventKind::GpsFix]).unwrap().is_empty());
    }

    #[test]
    fn unknown_user_errors() {
        let store = MemoryEventStore::new();
        let err = store.query_events(&UserId::new("nobody").unwrap(), day(), &EventKind::ALL);
        assert!(matches!(err, Err(StoreError::UnknownUser(_))));
    }

    #[test]
    fn week_old_events_are_flagged_late() {
        let store = MemoryEventStore::new();
        let mut b = batch("b", vec![sms(0)]);
        b.received_at = sms(0).timestamp + Duration::days(8);
        let r = store.store_batch(&b).unwrap();
        assert_eq!(r.late, 1);
        assert_eq!(store.late_events(&uid()).unwrap().len(), 1);
    }

    #[test]
    fn file_store_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let raw = b"{\"ts\":\"2024-02-05T14:03:00Z\",\"kind\":\"gps_fix\",\"data\":{\"lat\":43.7044,\"lon\":-72.2887,\"acc_m\":12.0}}\n";
        let received = Utc.with_ymd_and_hms(2024, 2, 6, 0, 0, 0).unwrap();
        let b = parse_batch(raw, &uid(), BatchId("b1".into()), received).unwrap();
        {
            let store = FileEventStore::open(dir.path()).unwrap();
            store.store_batch(&b).unwrap();
            assert!(store.store_batch(&b).unwrap().duplicate);
        }
        let store = FileEventStore::open(dir.path()).unwrap();
        assert!(store.store_batch(&b).unwrap().duplicate);
        let events = store.query_events(&uid(), day(), &EventKind::ALL).unwrap();
        assert_eq!(events, b.events);
        assert_eq!(store.users(), vec![uid()]);
    }
}
