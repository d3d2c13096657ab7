//! Raw sensing events: wire format, validation and storage.
//!
//! Phones upload newline-delimited JSON, one event per line:
//!
//! ```text
//! {"ts":"2024-02-05T14:03:00Z","kind":"gps_fix","data":{"lat":43.7044,"lon":-72.2887,"acc_m":12.0}}
//! ```
//!
//! Parsing never fails on a single bad line; bad lines are collected into the
//! batch's rejection report with their 1-based line number.

mod store;

pub use store::{EventStore, FileEventStore, IngestReceipt, MemoryEventStore, StoreError};

use std::fmt;

use chrono::{DateTime, Duration, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::profile::UserId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    GpsFix,
    ActivityInterval,
    ScreenState,
    AppSession,
    CallLog,
    SmsLog,
    ConversationEpisode,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::GpsFix,
        EventKind::ActivityInterval,
        EventKind::ScreenState,
        EventKind::AppSession,
        EventKind::CallLog,
        EventKind::SmsLog,
        EventKind::ConversationEpisode,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::GpsFix => "gps_fix",
            EventKind::ActivityInterval => "activity_interval",
            EventKind::ScreenState => "screen_state",
            EventKind::AppSession => "app_session",
            EventKind::CallLog => "call_log",
            EventKind::SmsLog => "sms_log",
            EventKind::ConversationEpisode => "conversation_episode",
        }
    }

    fn from_wire(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Walking,
    Running,
    Biking,
    Still,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Incoming,
    Outgoing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScreenAction {
    Unlock,
    Lock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpsFix {
    pub lat: f64,
    pub lon: f64,
    pub acc_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActivityInterval {
    pub activity: Activity,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScreenState {
    pub state: ScreenAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppSession {
    pub app_id: String,
    pub duration_s: f64,
}

/// Call metadata only. Any extra field (a number, a contact name) is rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallLog {
    pub direction: Direction,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmsLog {
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConversationEpisode {
    pub duration_s: f64,
    pub voice_count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Payload {
    GpsFix(GpsFix),
    ActivityInterval(ActivityInterval),
    ScreenState(ScreenState),
    AppSession(AppSession),
    CallLog(CallLog),
    SmsLog(SmsLog),
    ConversationEpisode(ConversationEpisode),
}

impl Payload {
    pub fn kind(&self) -> EventKind {
        match self {
            Payload::GpsFix(_) => EventKind::GpsFix,
            Payload::ActivityInterval(_) => EventKind::ActivityInterval,
            Payload::ScreenState(_) => EventKind::ScreenState,
            Payload::AppSession(_) => EventKind::AppSession,
            Payload::CallLog(_) => EventKind::CallLog,
            Payload::SmsLog(_) => EventKind::SmsLog,
            Payload::ConversationEpisode(_) => EventKind::ConversationEpisode,
        }
    }

    /// Checks the per-kind value invariants.
    pub fn validate(&self) -> Result<(), String> {
        fn duration(d: f64) -> Result<(), String> {
            if d.is_finite() && d >= 0.0 {
                Ok(())
            } else {
                Err("duration must be a non-negative number of seconds".into())
            }
        }
        match self {
            Payload::GpsFix(g) => {
                if !(g.lat.is_finite() && (-90.0..=90.0).contains(&g.lat)) {
                    return Err("latitude out of range".into());
                }
                if !(g.lon.is_finite() && (-180.0..=180.0).contains(&g.lon)) {
                    return Err("longitude out of range".into());
                }
                if !(g.acc_m.is_finite() && g.acc_m >= 0.0) {
                    return Err("accuracy must be non-negative".into());
                }
                Ok(())
            }
            Payload::ActivityInterval(a) => duration(a.duration_s),
            Payload::ScreenState(_) => Ok(()),
            Payload::AppSession(a) => {
                if a.app_id.trim().is_empty() {
                    return Err("empty app id".into());
                }
                duration(a.duration_s)
            }
            Payload::CallLog(c) => duration(c.duration_s),
            Payload::SmsLog(_) => Ok(()),
            Payload::ConversationEpisode(c) => {
                duration(c.duration_s)?;
                if c.voice_count < 2 {
                    return Err("conversation needs at least two voices".into());
                }
                Ok(())
            }
        }
    }

    /// End of the interval this event covers; instantaneous kinds end where they start.
    pub fn duration_s(&self) -> f64 {
        match self {
            Payload::ActivityInterval(a) => a.duration_s,
            Payload::AppSession(a) => a.duration_s,
            Payload::CallLog(c) => c.duration_s,
            Payload::ConversationEpisode(c) => c.duration_s,
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorEvent {
    pub user_id: UserId,
    pub timestamp: DateTime<Utc>,
    pub payload: Payload,
}

impl SensorEvent {
    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }

    pub fn end(&self) -> DateTime<Utc> {
        self.timestamp + Duration::milliseconds((self.payload.duration_s() * 1000.0).round() as i64)
    }

    /// The event as one line of the ingest format, without trailing newline.
    pub fn to_wire(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            ts: String,
            #[serde(flatten)]
            payload: &'a Payload,
        }
        serde_json::to_string(&Out {
            ts: format_ts(self.timestamp),
            payload: &self.payload,
        })
        .expect("payload serializes")
    }
}

/// Formats an instant as ISO-8601 UTC, with milliseconds only when non-zero.
pub fn format_ts(t: DateTime<Utc>) -> String {
    if t.timestamp_subsec_millis() == 0 {
        t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
    } else {
        t.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string()
    }
}

pub fn parse_ts(s: &str) -> Result<DateTime<Utc>, String> {
    let t = DateTime::parse_from_rfc3339(s).map_err(|e| format!("bad timestamp: {e}"))?;
    DateTime::from_timestamp_millis(t.timestamp_millis()).ok_or_else(|| "timestamp out of range".into())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BatchId(pub String);

impl fmt::Display for BatchId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IngestBatch {
    pub user_id: UserId,
    pub batch_id: BatchId,
    pub events: Vec<SensorEvent>,
    pub received_at: DateTime<Utc>,
    pub rejections: Vec<Rejection>,
}

impl IngestBatch {
    /// Serializes accepted events back to the ingest format.
    pub fn to_ndjson(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_wire());
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IngestError {
    #[error("batch contains no records")]
    EmptyBatch,
    #[error("line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
}

fn earliest_valid() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2000, 1, 1, 0, 0, 0).unwrap()
}

/// Parses one line of the ingest format.
pub fn parse_record(line: &str, user_id: &UserId, received_at: DateTime<Utc>) -> Result<SensorEvent, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let Value::Object(mut obj) = value else {
        return Err("record is not a JSON object".into());
    };
    if let Some(extra) = obj.keys().find(|k| !matches!(k.as_str(), "ts" | "kind" | "data")) {
        return Err(format!("unexpected key {extra:?}"));
    }
    let ts = match obj.remove("ts") {
        Some(Value::String(s)) => parse_ts(&s)?,
        Some(_) => return Err("ts must be a string".into()),
        None => return Err("missing ts".into()),
    };
    let kind = match obj.get("kind") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err("kind must be a string".into()),
        None => return Err("missing kind".into()),
    };
    if EventKind::from_wire(&kind).is_none() {
        return Err(format!("unknown kind {kind:?}"));
    }
    if !obj.contains_key("data") {
        return Err("missing data".into());
    }
    let payload: Payload =
        serde_json::from_value(Value::Object(obj)).map_err(|e| format!("invalid {kind} data: {e}"))?;
    payload.validate()?;
    if ts < earliest_valid() || ts > received_at + Duration::days(1) {
        return Err("timestamp out of range".into());
    }
    Ok(SensorEvent {
        user_id: user_id.clone(),
        timestamp: ts,
        payload,
    })
}

/// Parses a newline-delimited upload. Accepted events are sorted by
/// timestamp (stable, so same-instant events keep upload order).
pub fn parse_batch(
    raw: &[u8],
    user_id: &UserId,
    batch_id: BatchId,
    received_at: DateTime<Utc>,
) -> Result<IngestBatch, IngestError> {
    let mut events = Vec::new();
    let mut rejections = Vec::new();
    let mut records = 0usize;
    for (idx, line) in raw.split(|b| *b == b'\n').enumerate() {
        let line_no = idx + 1;
        let line = line.strip_suffix(b"\r").unwrap_or(line);
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        records += 1;
        let parsed = std::str::from_utf8(line)
            .map_err(|_| "invalid UTF-8".to_string())
            .and_then(|s| parse_record(s, user_id, received_at));
        match parsed {
            Ok(e) => events.push(e),
            Err(reason) => rejections.push(Rejection { line: line_no, reason }),
        }
    }
    if records == 0 {
        return Err(IngestError::EmptyBatch);
    }
    events.sort_by_key(|e| e.timestamp);
    Ok(IngestBatch {
        user_id: user_id.clone(),
        batch_id,
        events,
        received_at,
        rejections,
    })
}

/// Content-derived batch id, used when the uploader does not supply one.
pub fn content_batch_id(raw: &[u8]) -> BatchId {
    use sha2::{Digest, Sha256};
    let digest = Sha256::digest(raw);
    BatchId(format!("sha256-{}", &hex::encode(digest)[..32]))
}

pub(crate) fn kind_rank(k: EventKind) -> u8 {
    EventKind::ALL.iter().position(|x| *x == k).unwrap() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uid() -> UserId {
        UserId::new("u1").unwrap()
    }

    fn now() -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2024, 2, 6, 0, 0, 0).unwrap()
    }

    #[test]
    fn single_gps_line_is_accepted() {
        let raw = br#"{"ts":"2024-02-05T14:03:00Z","kind":"gps_fix","data":{"lat":43.7044,"lon":-72.2887,"acc_m":12.0}}"#;
        let b = parse_batch(raw, &uid(), BatchId("b".into()), now()).unwrap();
        assert_eq!(b.events.len(), 1);
        assert!(b.rejections.is_empty());
        assert_eq!(b.events[0].to_wire(), std::str::from_utf8(raw).unwrap());
    }

    #[test]
    fn latitude_out_of_range_is_rejected() {
        let raw = br#"{"ts":"2024-02-05T14:03:00Z","kind":"gps_fix","data":{"lat":95.0,"lon":-72.2887,"acc_m":12.0}}"#;
        let b = parse_batch(raw, &uid(), BatchId("b".into()), now()).unwrap();
        assert!(b.events.is_empty());
        assert_eq!(b.rejections, vec![Rejection { line: 1, reason: "latitude out of range".into() }]);
    }

    #[test]
    fn phone_numbers_are_not_accepted() {
        let raw = br#"{"ts":"2024-02-05T14:03:00Z","kind":"call_log","data":{"direction":"incoming","duration_s":30,"number":"555-0100"}}"#;
        let b = parse_batch(raw, &uid(), BatchId("b".into()), now()).unwrap();
        assert_eq!(b.rejections.len(), 1);
        assert!(b.rejections[0].reason.contains("number"), "{}", b.rejections[0].reason);
    }

    #[test]
    fn conversation_needs_two_voices() {
        let raw = br#"{"ts":"2024-02-05T14:03:00Z","kind":"conversation_episode","data":{"duration_s":60,"voice_count":1}}"#;
        let b = parse_batch(raw, &uid(), BatchId("b".into()), now()).unwrap();
        assert_eq!(b.rejections[0].reason, "conversation needs at least two voices");
    }

    #[test]
    fn future_and_ancient_timestamps_are_rejected() {
        let raw = concat!(
            r#"{"ts":"2024-02-08T00:00:00Z","kind":"sms_log","data":{"direction":"incoming"}}"#,
            "\n",
            r#"{"ts":"1999-12-31T23:59:59Z","kind":"sms_log","data":{"direction":"incoming"}}"#,
            "\n",
            r#"{"ts":"2024-02-06T23:00:00Z","kind":"sms_log","data":{"direction":"incoming"}}"#,
        );
        let b = parse_batch(raw.as_bytes(), &uid(), BatchId("b".into()), now()).unwrap();
        assert_eq!(b.events.len(), 1);
        assert_eq!(b.rejections.iter().map(|r| r.line).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn offsets_normalize_to_utc_and_sort() {
        let raw = concat!(
            r#"{"ts":"2024-02-05T10:00:00-05:00","kind":"screen_state","data":{"state":"lock"}}"#,
            "\n\n",
            r#"{"ts":"2024-02-05T14:00:00Z","kind":"screen_state","data":{"state":"unlock"}}"#,
            "\n",
        );
        let b = parse_batch(raw.as_bytes(), &uid(), BatchId("b".into()), now()).unwrap();
        assert_eq!(b.events.len(), 2);
        assert_eq!(format_ts(b.events[0].timestamp), "2024-02-05T14:00:00Z");
        assert_eq!(b.events[1].kind(), EventKind::ScreenState);
        assert!(matches!(&b.events[0].payload, Payload::ScreenState(s) if s.state == ScreenAction::Unlock));
    }

    #[test]
    fn empty_upload_is_an_error() {
        assert_eq!(
            parse_batch(b"\n  \n", &uid(), BatchId("b".into()), now()),
            Err(IngestError::EmptyBatch)
        );
    }

    #[test]
    fn garbage_lines_report_line_numbers() {
        let raw = "{not json\n{\"ts\":\"2024-02-05T14:00:00Z\",\"kind\":\"teleport\",\"data\":{}}\n[1,2]\n";
        let b = parse_batch(raw.as_bytes(), &uid(), BatchId("b".into()), now()).unwrap();
        let lines: Vec<_> = b.rejections.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![1, 2, 3]);
        assert!(b.rejections[1].reason.contains("unknown kind"));
    }
}
