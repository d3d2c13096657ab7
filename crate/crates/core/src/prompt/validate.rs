use serde::{Deserialize, Serialize};

use super::safety::{jaccard, tokens, SafetyLexicon};
use super::Slot;

/// Journal prompts at or above this token-Jaccard similarity to a recent
/// prompt are too repetitive.
pub const JACCARD_LIMIT: f64 = 0.6;

const PREFIXES: [&str; 3] = ["prompt:", "tip:", "question:"];
const QUOTES: [char; 3] = ['"', '\u{201c}', '\u{201d}'];

/// Why provider output was refused. Each variant is a retry class.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "class", content = "detail", rename_all = "snake_case")]
pub enum Rejection {
    Empty,
    Quoted,
    Prefix,
    Length,
    Digits,
    Unsafe(String),
    RepeatedOpening,
    TooSimilar,
}

impl Rejection {
    pub fn reason(&self) -> &'static str {
        match self {
            Rejection::Empty => "empty",
            Rejection::Quoted => "quoted",
            Rejection::Prefix => "prefix",
            Rejection::Length => "length",
            Rejection::Digits => "contains digits",
            Rejection::Unsafe(_) => "unsafe",
            Rejection::RepeatedOpening => "repeated opening",
            Rejection::TooSimilar => "too similar",
        }
    }

    /// Retry-budget class; all unsafe words share one.
    pub fn class(&self) -> Rejection {
        match self {
            Rejection::Unsafe(_) => Rejection::Unsafe(String::new()),
            r => r.clone(),
        }
    }
}

/// Lowercased first word, or empty.
pub fn first_word(text: &str) -> String {
    tokens(text).into_iter().next().unwrap_or_default()
}

/// Checks provider output for `slot`. Leading and trailing whitespace is
/// removed; anything else that breaks a rule is refused, never repaired.
pub fn validate_output(slot: Slot, text: &str, previous: &[String], lexicon: &SafetyLexicon) -> Result<String, Rejection> {
    let text = text.trim();
    if text.is_empty() {
        return Err(Rejection::Empty);
    }
    if text.starts_with(QUOTES) || text.ends_with(QUOTES) {
        return Err(Rejection::Quoted);
    }
    let lower = text.to_lowercase();
    if PREFIXES.iter().any(|p| lower.starts_with(p)) {
        return Err(Rejection::Prefix);
    }
    if text.chars().count() > slot.max_chars() {
        return Err(Rejection::Length);
    }
    if slot.is_checkin() && text.chars().any(|c| c.is_ascii_digit()) {
        return Err(Rejection::Digits);
    }
    if let Some(word) = lexicon.find(text) {
        return Err(Rejection::Unsafe(word.to_string()));
    }
    let recent = &previous[previous.len().saturating_sub(slot.history_len())..];
    if slot.is_checkin() {
        let opening = first_word(text);
        if recent.iter().any(|p| first_word(p) == opening) {
            return Err(Rejection::RepeatedOpening);
        }
    } else if !variability_guard(text, recent) {
        return Err(Rejection::TooSimilar);
    }
    Ok(text.to_string())
}

/// True when `candidate` differs enough from each of the last two prompts.
pub fn variability_guard(candidate: &str, previous: &[String]) -> bool {
    previous
        .iter()
        .rev()
        .take(2)
        .all(|p| jaccard(candidate, p) < JACCARD_LIMIT)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lex() -> SafetyLexicon {
        SafetyLexicon::parse("kill\n")
    }

    fn check(slot: Slot, text: &str) -> Result<String, Rejection> {
        validate_output(slot, text, &[], &lex())
    }

    #[test]
    fn checkin_rules() {
        assert_eq!(check(Slot::CheckinMorning, &"a".repeat(250)), Err(Rejection::Length));
        assert_eq!(check(Slot::CheckinMorning, &"a".repeat(200)), Err(Rejection::Length));
        assert!(check(Slot::CheckinMorning, &"a".repeat(199)).is_ok());
        assert_eq!(check(Slot::CheckinMorning, "You walked 5 miles today!"), Err(Rejection::Digits));
        assert_eq!(Rejection::Digits.reason(), "contains digits");
    }

    #[test]
    fn journal_cap_is_inclusive() {
        let text = format!("Reflect {}", "o".repeat(232));
        assert_eq!(check(Slot::SaturdayJournal, &text).unwrap().chars().count(), 240);
        assert!(check(Slot::SundayJournal, &"w".repeat(250)).is_ok());
        assert_eq!(check(Slot::SundayJournal, &"w".repeat(251)), Err(Rejection::Length));
        assert!(check(Slot::WeekdayJournal, "You ran 3 laps?").is_ok());
    }

    #[test]
    fn format_rules() {
        assert_eq!(check(Slot::WeekdayJournal, "   "), Err(Rejection::Empty));
        assert_eq!(check(Slot::WeekdayJournal, "\"Hi there\""), Err(Rejection::Quoted));
        assert_eq!(check(Slot::WeekdayJournal, "Tip: breathe"), Err(Rejection::Prefix));
        assert_eq!(check(Slot::WeekdayJournal, "QUESTION: why"), Err(Rejection::Prefix));
        assert_eq!(check(Slot::WeekdayJournal, "Don't kill it"), Err(Rejection::Unsafe("kill".into())));
    }

    #[test]
    fn openings_and_similarity() {
        let prev = vec!["Nice walk this morning?".to_string()];
        assert_eq!(
            validate_output(Slot::CheckinAfternoon, "nice run!", &prev, &lex()),
            Err(Rejection::RepeatedOpening)
        );
        let prev = vec!["How did the extra gym time feel this week?".to_string()];
        assert_eq!(
            validate_output(Slot::WeekdayJournal, "How did the extra gym time feel today?", &prev, &lex()),
            Err(Rejection::TooSimilar)
        );
    }
}
