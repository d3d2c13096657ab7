use chrono::Datelike;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::assets::{PromptAssets, CHECKIN_RULES, WEEKDAY_RULES};
use super::render::{render_composites, render_user_data};
use super::safety::tokens;
use super::{PromptContext, PromptRequest, Slot, Strategy, StressIndex};
use crate::features::{Direction, Feature, TrendReport};
use crate::profile::Category;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("missing context: {0}")]
    MissingContext(&'static str),
    #[error("invalid context: {0}")]
    InvalidContext(String),
}

/// Academic-week to stress-index mapping over a ten-week term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StressMap {
    /// Last week mapped to `low`.
    pub low_until: u8,
    /// Last week mapped to `medium`; later weeks are `high`.
    pub medium_until: u8,
    pub term_weeks: u8,
}

impl Default for StressMap {
    fn default() -> Self {
        Self { low_until: 2, medium_until: 7, term_weeks: 10 }
    }
}

impl StressMap {
    pub fn index(&self, academic_week: u8) -> StressIndex {
        if academic_week <= self.low_until {
            StressIndex::Low
        } else if academic_week <= self.medium_until {
            StressIndex::Medium
        } else {
            StressIndex::High
        }
    }
}

/// Low mood alternates gratitude and self-compassion by day-of-year parity.
pub fn select_strategy(mood: Option<u8>, date: chrono::NaiveDate) -> Strategy {
    match mood {
        Some(m) if m <= 2 => {
            if date.ordinal().is_multiple_of(2) {
                Strategy::Gratitude
            } else {
                Strategy::SelfCompassion
            }
        }
        _ => Strategy::Regular,
    }
}

fn previous_block(previous: &[String], keep: usize) -> String {
    let recent = &previous[previous.len().saturating_sub(keep)..];
    if recent.is_empty() {
        "None".to_string()
    } else {
        recent.iter().map(|p| format!("\n- {p}")).collect()
    }
}

fn priorities(ctx: &PromptContext) -> String {
    ctx.priorities
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{}. {}", i + 1, c.title()))
        .collect::<Vec<_>>()
        .join(", ")
}

fn mood_line(ctx: &PromptContext) -> String {
    match ctx.mood_score {
        Some(m) => m.to_string(),
        None => "not reported".to_string(),
    }
}

/// Builds the provider request for `ctx.slot`.
pub fn compose(ctx: &PromptContext, assets: &PromptAssets) -> Result<(PromptRequest, Strategy), ComposeError> {
    if let Some(m) = ctx.mood_score {
        if !(1..=5).contains(&m) {
            return Err(ComposeError::InvalidContext(format!("mood score {m} outside 1..5")));
        }
    }
    if ctx.slot.is_checkin() && ctx.mood_score.is_some() {
        return Err(ComposeError::InvalidContext("check-ins take no mood score".into()));
    }
    let date = ctx.date.format("%Y-%m-%d");
    let strategy = if ctx.slot.is_checkin() { Strategy::Regular } else { select_strategy(ctx.mood_score, ctx.date) };
    let user = match ctx.slot {
        Slot::CheckinMorning | Slot::CheckinAfternoon | Slot::CheckinEvening | Slot::CheckinNight => {
            let trends = ctx.trends.as_ref().ok_or(ComposeError::MissingContext("trends"))?;
            format!(
                "Today's date: {date}\nTiming: {}\nPrevious Responses: {}\nUser Data:\n{}\nResponse Rules:\n{}",
                ctx.slot.timing().unwrap_or_default(),
                previous_block(&ctx.previous_prompts, 3),
                render_user_data(trends, &ctx.priorities),
                CHECKIN_RULES.trim_end(),
            )
        }
        Slot::WeekdayJournal => {
            let trends = ctx.trends.as_ref().ok_or(ComposeError::MissingContext("trends"))?;
            format!(
                "User Context:\nToday's date: {date}\nMood Score: {}\nPrevious Responses: {}\nStress Index: {} (week {} of the term)\nPriorities: {}\nUser Data:\n{}\n\nRules:\n{}\n\nStrategy:\n{}",
                mood_line(ctx),
                previous_block(&ctx.previous_prompts, 2),
                ctx.stress_index.as_str(),
                ctx.academic_week,
                priorities(ctx),
                render_user_data(trends, &ctx.priorities),
                WEEKDAY_RULES.trim_end(),
                assets.strategy_text(strategy),
            )
        }
        Slot::SaturdayJournal => format!(
            "Today's date: {date}\nMood Score: {}\nPrevious Responses: {}\nPriorities: {}\nFocus: reflect on broad themes from the past week rather than on any single day.\nStrategy: {}",
            mood_line(ctx),
            previous_block(&ctx.previous_prompts, 2),
            priorities(ctx),
            assets.strategy_text(strategy),
        ),
        Slot::SundayJournal => {
            let trends = ctx.trends.as_ref().ok_or(ComposeError::MissingContext("trends"))?;
            let weekend = ctx.weekend.as_ref().ok_or(ComposeError::MissingContext("weekend composites"))?;
            format!(
                "Today's date: {date}\nMood Score: {}\nPrevious Responses: {}\nPriorities: {}\nWeekly Trends:\n{}\nWeekend Summary:\n{}\nStrategy: {}",
                mood_line(ctx),
                previous_block(&ctx.previous_prompts, 2),
                priorities(ctx),
                render_user_data(trends, &ctx.priorities),
                render_composites(weekend),
                assets.strategy_text(strategy),
            )
        }
    };
    Ok((
        PromptRequest { slot: ctx.slot, system: PromptAssets::system_prompt(ctx.slot).to_string(), user },
        strategy,
    ))
}

fn keywords(f: Feature) -> &'static [&'static str] {
    use Feature::*;
    match f {
        Walking => &["walk", "walking", "steps", "stroll"],
        Running => &["run", "running", "jog", "jogging"],
        Biking => &["bike", "biking", "cycling", "ride"],
        Sedentary => &["sitting", "sedentary", "still"],
        Distance => &["distance", "travel", "travelled", "traveled", "moving"],
        Gym => &["gym", "workout", "exercise"],
        SleepDuration => &["sleep", "slept", "rest", "bedtime", "bed"],
        ScreenUnlocks => &["unlock", "unlocks", "phone"],
        ScreenTime => &["screen"],
        SocialApps => &["social", "scrolling", "feed"],
        CommunicationApps => &["messaging", "messages"],
        EntertainmentApps => &["entertainment", "streaming", "videos", "games"],
        CallsIn | CallsOut => &["call", "calls"],
        SmsIn | SmsOut => &["text", "texts", "texting"],
        Conversations | ConversationTime => &["conversation", "conversations", "chat", "chats", "talk", "talking"],
        SignificantPlaces => &["places", "spots", "exploring"],
        GreekHouse => &["greek"],
        Leisure => &["leisure", "hobby", "fun"],
        SocialPlaces => &["hangout", "hanging"],
        Study => &["study", "studying", "library"],
        Cafeteria => &["cafeteria", "dining", "meal", "lunch", "dinner"],
        Home => &["home", "dorm"],
    }
}

/// Category of the highest-priority cited feature the text mentions.
/// Only features with a rendered trend in `trends` count as cited.
pub fn attribute_category(text: &str, trends: Option<&TrendReport>, ranking: &crate::profile::PriorityRanking) -> Option<Category> {
    let words = tokens(text);
    let mentions = |f: Feature| keywords(f).iter().any(|k| words.iter().any(|w| w == k));
    let cited = |f: &Feature| {
        trends.is_some_and(|t| t.get(f).is_some_and(|t| t.direction != Direction::InsufficientData))
    };
    ranking
        .iter()
        .find(|c| Feature::ALL.iter().filter(|f| f.category() == *c).filter(|f| cited(f)).any(|f| mentions(*f)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    #[test]
    fn strategy_by_mood_and_parity() {
        let even = NaiveDate::from_yo_opt(2024, 36).unwrap();
        let odd = NaiveDate::from_yo_opt(2024, 37).unwrap();
        assert_eq!(select_strategy(Some(5), even), Strategy::Regular);
        assert_eq!(select_strategy(None, odd), Strategy::Regular);
        assert_eq!(select_strategy(Some(1), even), Strategy::Gratitude);
        assert_eq!(select_strategy(Some(2), odd), Strategy::SelfCompassion);
        assert_eq!(select_strategy(Some(3), odd), Strategy::Regular);
    }

    #[test]
    fn stress_mapping() {
        let m = StressMap::default();
        let got: Vec<_> = (1..=10).map(|w| m.index(w)).collect();
        use StressIndex::*;
        assert_eq!(got, [Low, Low, Medium, Medium, Medium, Medium, Medium, High, High, High]);
    }
}
