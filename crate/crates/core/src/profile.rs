use std::fmt;
use std::str::FromStr;

use chrono::{NaiveTime, Weekday};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("invalid user id {0:?}")]
    InvalidUserId(String),
    #[error("priority ranking must be a permutation of the four categories")]
    NotAPermutation,
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("invalid bedtime {0:?}, expected HH:MM")]
    InvalidBedtime(String),
    #[error("unknown timezone {0:?}")]
    UnknownTimezone(String),
}

/// Opaque participant identifier. Restricted to `[A-Za-z0-9_-]{1,64}` so it
/// can name files and URL segments directly.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct UserId(String);

impl UserId {
    pub fn new(raw: impl Into<String>) -> Result<Self, ProfileError> {
        let raw = raw.into();
        let ok = !raw.is_empty()
            && raw.len() <= 64
            && raw.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
        if ok {
            Ok(Self(raw))
        } else {
            Err(ProfileError::InvalidUserId(raw))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for UserId {
    type Error = ProfileError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl From<UserId> for String {
    fn from(u: UserId) -> Self {
        u.0
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The four journaling categories a participant ranks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SocialInteraction,
    Sleep,
    PhysicalFitness,
    DigitalHabits,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::SocialInteraction,
        Category::Sleep,
        Category::PhysicalFitness,
        Category::DigitalHabits,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Category::SocialInteraction => "Social Interaction",
            Category::Sleep => "Sleep",
            Category::PhysicalFitness => "Physical Fitness",
            Category::DigitalHabits => "Digital Habits",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Category::SocialInteraction => "social_interaction",
            Category::Sleep => "sleep",
            Category::PhysicalFitness => "physical_fitness",
            Category::DigitalHabits => "digital_habits",
        }
    }
}

impl FromStr for Category {
    type Err = ProfileError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.key() == s)
            .ok_or_else(|| ProfileError::UnknownCategory(s.to_string()))
    }
}

/// A strict total order over exactly the four categories, highest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Category>", into = "Vec<Category>")]
pub struct PriorityRanking([Category; 4]);

impl PriorityRanking {
    pub fn new(order: [Category; 4]) -> Result<Self, ProfileError> {
        let mut seen = order;
        seen.sort();
        if seen == Category::ALL {
            Ok(Self(order))
        } else {
            Err(ProfileError::NotAPermutation)
        }
    }

    pub fn top(&self) -> Category {
        self.0[0]
    }

    pub fn iter(&self) -> impl Iterator<Item = Category> + '_ {
        self.0.iter().copied()
    }

    pub fn as_array(&self) -> [Category; 4] {
        self.0
    }
}

impl Default for PriorityRanking {
    fn default() -> Self {
        Self(Category::ALL)
    }
}

impl TryFrom<Vec<Category>> for PriorityRanking {
    type Error = ProfileError;
    fn try_from(v: Vec<Category>) -> Result<Self, Self::Error> {
        let arr: [Category; 4] = v.try_into().map_err(|_| ProfileError::NotAPermutation)?;
        Self::new(arr)
    }
}

impl From<PriorityRanking> for Vec<Category> {
    fn from(r: PriorityRanking) -> Self {
        r.0.to_vec()
    }
}

/// Local wall-clock time serialized as `HH:MM`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ClockTime(NaiveTime);

impl ClockTime {
    pub fn new(h: u32, m: u32) -> Option<Self> {
        NaiveTime::from_hms_opt(h, m, 0).map(Self)
    }

    pub fn time(self) -> NaiveTime {
        self.0
    }
}

impl FromStr for ClockTime {
    type Err = ProfileError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NaiveTime::parse_from_str(s, "%H:%M")
            .map(Self)
            .map_err(|_| ProfileError::InvalidBedtime(s.to_string()))
    }
}

impl TryFrom<String> for ClockTime {
    type Error = ProfileError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ClockTime> for String {
    fn from(c: ClockTime) -> Self {
        c.0.format("%H:%M").to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct TimeZoneName(Tz);

impl TimeZoneName {
    pub fn tz(&self) -> Tz {
        self.0
    }
}

impl From<Tz> for TimeZoneName {
    fn from(tz: Tz) -> Self {
        Self(tz)
    }
}

impl TryFrom<String> for TimeZoneName {
    type Error = ProfileError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse::<Tz>()
            .map(Self)
            .map_err(|_| ProfileError::UnknownTimezone(s))
    }
}

impl From<TimeZoneName> for String {
    fn from(t: TimeZoneName) -> Self {
        t.0.name().to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: UserId,
    pub priority_ranking: PriorityRanking,
    pub bedtime_weekday: ClockTime,
    pub bedtime_weekend: ClockTime,
    pub timezone: TimeZoneName,
}

impl UserProfile {
    pub fn tz(&self) -> Tz {
        self.timezone.tz()
    }

    /// Saturday and Sunday evenings use the weekend bedtime.
    pub fn bedtime_for(&self, weekday: Weekday) -> ClockTime {
        match weekday {
            Weekday::Sat | Weekday::Sun => self.bedtime_weekend,
            _ => self.bedtime_weekday,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranking_rejects_duplicates() {
        use Category::*;
        assert!(PriorityRanking::new([Sleep, Sleep, PhysicalFitness, DigitalHabits]).is_err());
        let r = PriorityRanking::new([DigitalHabits, Sleep, SocialInteraction, PhysicalFitness]).unwrap();
        assert_eq!(r.top(), DigitalHabits);
    }

    #[test]
    fn ranking_json_requires_four() {
        let err = serde_json::from_str::<PriorityRanking>(r#"["sleep","digital_habits","physical_fitness"]"#);
        assert!(err.is_err());
        let ok: PriorityRanking = serde_json::from_str(
            r#"["sleep","digital_habits","physical_fitness","social_interaction"]"#,
        )
        .unwrap();
        assert_eq!(ok.top(), Category::Sleep);
    }

    #[test]
    fn user_ids_are_path_safe() {
        assert!(UserId::new("u-01_a").is_ok());
        assert!(UserId::new("../etc").is_err());
        assert!(UserId::new("").is_err());
    }

    #[test]
    fn bedtime_parses_hh_mm() {
        let t: ClockTime = "23:30".parse().unwrap();
        assert_eq!(String::from(t), "23:30");
        assert!("25:00".parse::<ClockTime>().is_err());
    }
}
