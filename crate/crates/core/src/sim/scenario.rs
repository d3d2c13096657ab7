use chrono::{NaiveDate, NaiveTime};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::geo::LatLon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SleepPlan {
    /// Onset 23:00 to 00:30, seven to eight and a half hours.
    Typical,
    /// Onset 23:00 to 00:00, exactly `hours` long.
    Fixed { hours: u32 },
    /// Fixed clock times after midnight.
    Between { start: NaiveTime, end: NaiveTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Visits {
    /// Two to four campus places a day, the gym some days, Greek houses on
    /// some Friday and Saturday evenings.
    Typical,
    /// A gym visit of `minutes` first thing every day, then as typical.
    GymHeavy { minutes: i64 },
}

/// A named behavior script. Everything else about a trace comes from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub tz: Tz,
    pub start: NaiveDate,
    pub sleep: SleepPlan,
    pub visits: Visits,
    /// Fixed home position; random when absent.
    pub home: Option<LatLon>,
}

impl Scenario {
    pub const NAMES: [&'static str; 6] = ["baseline", "gym-heavy", "short-sleep", "sleep-4h", "sleep-6h", "sleep-8h"];

    pub fn named(name: &str) -> Result<Self, SimError> {
        let (sleep, visits) = match name {
            "baseline" => (SleepPlan::Typical, Visits::Typical),
            "gym-heavy" => (SleepPlan::Typical, Visits::GymHeavy { minutes: 90 }),
            "short-sleep" => (
                SleepPlan::Between { start: NaiveTime::from_hms_opt(2, 0, 0).unwrap(), end: NaiveTime::from_hms_opt(6, 0, 0).unwrap() },
                Visits::Typical,
            ),
            "sleep-4h" => (SleepPlan::Fixed { hours: 4 }, Visits::Typical),
            "sleep-6h" => (SleepPlan::Fixed { hours: 6 }, Visits::Typical),
            "sleep-8h" => (SleepPlan::Fixed { hours: 8 }, Visits::Typical),
            other => {
                return Err(SimError::InvalidScenario(format!(
                    "unknown scenario {other:?}; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        };
        Ok(Self {
            name: name.to_string(),
            tz: chrono_tz::America::New_York,
            start: NaiveDate::from_ymd_opt(2024, 1, 8).unwrap(),
            sleep,
            visits,
            home: None,
        })
    }

    pub fn starting(mut self, start: NaiveDate) -> Self {
        self.start = start;
        self
    }
}
