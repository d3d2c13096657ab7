//! The journaling service: preferences, mood reports, journal entries,
//! check-in responses and weekly surveys, plus the HTTP API over them.

mod ema;
mod engine;
pub mod http;
mod store;

pub use ema::{score_ema, EmaError, EmaKey, EmaScore, EmaSubmission, PanasKey, Phq4Key, Scale, SrisKey};
pub use engine::{Engine, EngineConfig, EngineError, IngestSummary, NewEntry, Preferences};
pub use http::{require_bearer, router};
pub use store::{
    CheckInResponse, EmaRecord, JournalEntry, JournalStore, JournalStoreError, Modality, MoodReport, PendingItem,
    PendingKind, Thumbs,
};
