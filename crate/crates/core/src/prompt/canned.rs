use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use thiserror::Error;

use super::validate::first_word;
use super::Slot;
use crate::profile::Category;

#[derive(Debug, Error)]
pub enum CannedError {
    #[error(transparent)]
    Toml(#[from] toml::de::Error),
    #[error("canned prompt list {0:?} is missing or empty")]
    MissingList(String),
}

/// Hardcoded last-resort prompts, keyed by category, `weekend` and `checkin`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CannedPrompts {
    lists: BTreeMap<String, Vec<String>>,
}

impl CannedPrompts {
    pub fn parse(text: &str) -> Result<Self, CannedError> {
        let lists: BTreeMap<String, Vec<String>> = toml::from_str(text)?;
        let required = Category::ALL.iter().map(|c| c.key()).chain(["weekend", "checkin"]);
        for key in required {
            if lists.get(key).is_none_or(|l| l.is_empty()) {
                return Err(CannedError::MissingList(key.to_string()));
            }
        }
        Ok(Self { lists })
    }

    pub fn list(&self, key: &str) -> &[String] {
        self.lists.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all(&self) -> impl Iterator<Item = &str> {
        self.lists.values().flatten().map(String::as_str)
    }

    /// Picks deterministically by day of year, skipping texts already in
    /// `previous` and, for check-ins, texts opening with a previous first word
    /// when an alternative exists.
    pub fn pick(&self, slot: Slot, top: Category, date: NaiveDate, previous: &[String]) -> &str {
        let key = if slot.is_checkin() {
            "checkin"
        } else if slot.is_weekend() {
            "weekend"
        } else {
            top.key()
        };
        let list = self.list(key);
        let start = date.ordinal0() as usize % list.len();
        let rotated = || (0..list.len()).map(|i| &list[(start + i) % list.len()]);
        let openings: Vec<String> = previous.iter().map(|p| first_word(p)).collect();
        rotated()
            .find(|t| !previous.contains(t) && !(slot.is_checkin() && openings.contains(&first_word(t))))
            .or_else(|| rotated().find(|t| !previous.contains(t)))
            .unwrap_or(&list[start])
    }
}
