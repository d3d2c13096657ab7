//! Prompt composition and output validation.
//!
//! A [`PromptRequest`] is the exact text sent to a completion provider: the
//! slot's system prompt, byte-for-byte as bundled, plus a user block
//! assembled from the [`PromptContext`]. Provider output goes through
//! [`validate_output`] before it may be shown.

mod assets;
mod canned;
mod compose;
mod render;
mod safety;
mod validate;

pub use assets::{AssetHashes, PromptAssets};
pub use canned::{CannedError, CannedPrompts};
pub use compose::{attribute_category, compose, select_strategy, ComposeError, StressMap};
pub use render::{render_composites, render_trend_line, render_user_data, NO_DATA};
pub use safety::{jaccard, tokens, SafetyLexicon};
pub use validate::{first_word, validate_output, variability_guard, Rejection, JACCARD_LIMIT};

use chrono::{DateTime, NaiveDate, Utc, Weekday};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::features::{TrendReport, WeekendComposites};
use crate::profile::{Category, PriorityRanking, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Slot {
    WeekdayJournal,
    SaturdayJournal,
    SundayJournal,
    CheckinMorning,
    CheckinAfternoon,
    CheckinEvening,
    CheckinNight,
}

impl Slot {
    pub const CHECKINS: [Slot; 4] = [Slot::CheckinMorning, Slot::CheckinAfternoon, Slot::CheckinEvening, Slot::CheckinNight];

    pub fn journal_for(weekday: Weekday) -> Slot {
        match weekday {
            Weekday::Sat => Slot::SaturdayJournal,
            Weekday::Sun => Slot::SundayJournal,
            _ => Slot::WeekdayJournal,
        }
    }

    pub fn is_checkin(self) -> bool {
        Self::CHECKINS.contains(&self)
    }

    pub fn is_weekend(self) -> bool {
        matches!(self, Slot::SaturdayJournal | Slot::SundayJournal)
    }

    /// Most previous prompts a request carries.
    pub fn history_len(self) -> usize {
        if self.is_checkin() {
            3
        } else {
            2
        }
    }

    /// Character cap; check-ins must stay strictly below it.
    pub fn max_chars(self) -> usize {
        if self.is_checkin() {
            199
        } else {
            250
        }
    }

    pub fn timing(self) -> Option<&'static str> {
        match self {
            Slot::CheckinMorning => Some("morning"),
            Slot::CheckinAfternoon => Some("afternoon"),
            Slot::CheckinEvening => Some("evening"),
            Slot::CheckinNight => Some("night"),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Slot::WeekdayJournal => "weekday_journal",
            Slot::SaturdayJournal => "saturday_journal",
            Slot::SundayJournal => "sunday_journal",
            Slot::CheckinMorning => "checkin_morning",
            Slot::CheckinAfternoon => "checkin_afternoon",
            Slot::CheckinEvening => "checkin_evening",
            Slot::CheckinNight => "checkin_night",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Regular,
    Gratitude,
    SelfCompassion,
    GenericFallback,
}

impl Strategy {
    pub fn key(self) -> &'static str {
        match self {
            Strategy::Regular => "regular",
            Strategy::Gratitude => "gratitude",
            Strategy::SelfCompassion => "self_compassion",
            Strategy::GenericFallback => "generic_fallback",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptSource {
    LlmLive,
    LlmPregenerated,
    Canned,
}

impl PromptSource {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptSource::LlmLive => "llm_live",
            PromptSource::LlmPregenerated => "llm_pregenerated",
            PromptSource::Canned => "canned",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StressIndex {
    Low,
    Medium,
    High,
}

impl StressIndex {
    pub fn as_str(self) -> &'static str {
        match self {
            StressIndex::Low => "low",
            StressIndex::Medium => "medium",
            StressIndex::High => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub date: NaiveDate,
    pub slot: Slot,
    pub mood_score: Option<u8>,
    pub stress_index: StressIndex,
    pub academic_week: u8,
    /// Most recent last.
    pub previous_prompts: Vec<String>,
    pub trends: Option<TrendReport>,
    pub priorities: PriorityRanking,
    pub weekend: Option<WeekendComposites>,
}

/// Full provider input. `system` is always one of the bundled assets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptRequest {
    pub slot: Slot,
    pub system: String,
    pub user: String,
}

impl PromptRequest {
    /// The request as one document with labeled sections.
    pub fn render(&self) -> String {
        format!("System Prompt:\n{}\n\nUser Prompt:\n{}", self.system, self.user)
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.render().as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedPrompt {
    pub prompt_id: String,
    pub user_id: UserId,
    pub date: NaiveDate,
    pub slot: Slot,
    pub text: String,
    pub strategy: Strategy,
    pub source: PromptSource,
    pub created_at: DateTime<Utc>,
    /// Hash of the composed request this text answers.
    pub request_hash: String,
    pub system_hash: String,
    pub lexicon_hash: String,
    /// Best-effort category the prompt talks about.
    pub category: Option<Category>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
