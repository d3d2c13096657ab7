//! Behavioral features aggregated from raw events, plus 30-day baselines and
//! trend reports.

mod apps;
mod baseline;
mod extract;
mod sleep;

pub use apps::{AppCategory, AppCategoryTable, AppTableError};
pub use baseline::{classify, trend, BASELINE_DAYS, weekly_mean, Direction, FeatureTrend, HistoricalBaseline, TrendParams, TrendReport};
pub use extract::{DayWindow, FeatureError, FeaturePipeline, UserGeo, WeekendComposites};
pub use sleep::{infer_sleep_from_events, screen_sessions, SleepEstimate};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ingest::EventKind;
use crate::profile::{Category, UserId};
use crate::time::TimeRange;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhysicalFeatures {
    pub walk_s: f64,
    pub run_s: f64,
    pub bike_s: f64,
    pub sedentary_s: f64,
    pub distance_km: f64,
    pub gym_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SleepFeatures {
    pub duration_s: f64,
    pub start_local: Option<chrono::NaiveDateTime>,
    pub end_local: Option<chrono::NaiveDateTime>,
    /// Screen events were seen during the night, so a zero duration is a
    /// measurement rather than missing data.
    pub observed: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AppUse {
    pub social: u32,
    pub communication: u32,
    pub entertainment: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DigitalFeatures {
    pub screen_unlocks: u32,
    pub screen_time_s: f64,
    pub app_use: AppUse,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SocialFeatures {
    pub calls_in: u32,
    pub calls_out: u32,
    pub sms_in: u32,
    pub sms_out: u32,
    pub convo_count: u32,
    pub convo_duration_s: f64,
    pub significant_places: u32,
    pub greek_s: f64,
    pub leisure_s: f64,
    pub social_place_s: f64,
    pub study_s: f64,
    pub cafeteria_s: f64,
    pub home_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub user_id: UserId,
    pub window: TimeRange,
    pub physical: PhysicalFeatures,
    pub sleep: SleepFeatures,
    pub digital: DigitalFeatures,
    pub social: SocialFeatures,
    /// Event kinds with at least one event inside the window.
    pub sources: BTreeSet<EventKind>,
}

impl FeatureVector {
    pub fn empty(user_id: UserId, window: TimeRange) -> Self {
        Self {
            user_id,
            window,
            physical: Default::default(),
            sleep: Default::default(),
            digital: Default::default(),
            social: Default::default(),
            sources: BTreeSet::new(),
        }
    }

    pub fn values(&self) -> FeatureValues {
        Feature::ALL.iter().map(|f| (*f, f.value(self))).collect()
    }

    /// Whether this window carries data for `feature` at all.
    pub fn has_data(&self, feature: Feature) -> bool {
        match feature.source() {
            None => self.sleep.observed,
            Some(kind) => self.sources.contains(&kind),
        }
    }
}

pub type FeatureValues = BTreeMap<Feature, f64>;

/// Every signal that can carry a trend, in rendering order within its category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Walking,
    Running,
    Biking,
    Sedentary,
    Distance,
    Gym,
    SleepDuration,
    ScreenUnlocks,
    ScreenTime,
    SocialApps,
    CommunicationApps,
    EntertainmentApps,
    CallsIn,
    CallsOut,
    SmsIn,
    SmsOut,
    Conversations,
    ConversationTime,
    SignificantPlaces,
    GreekHouse,
    Leisure,
    SocialPlaces,
    Study,
    Cafeteria,
    Home,
}

impl Feature {
    pub const ALL: [Feature; 25] = [
        Feature::Walking,
        Feature::Running,
        Feature::Biking,
        Feature::Sedentary,
        Feature::Distance,
        Feature::Gym,
        Feature::SleepDuration,
        Feature::ScreenUnlocks,
        Feature::ScreenTime,
        Feature::SocialApps,
        Feature::CommunicationApps,
        Feature::EntertainmentApps,
        Feature::CallsIn,
        Feature::CallsOut,
        Feature::SmsIn,
        Feature::SmsOut,
        Feature::Conversations,
        Feature::ConversationTime,
        Feature::SignificantPlaces,
        Feature::GreekHouse,
        Feature::Leisure,
        Feature::SocialPlaces,
        Feature::Study,
        Feature::Cafeteria,
        Feature::Home,
    ];

    pub fn category(self) -> Category {
        use Feature::*;
        match self {
            Walking | Running | Biking | Sedentary | Distance | Gym => Category::PhysicalFitness,
            SleepDuration => Category::Sleep,
            ScreenUnlocks | ScreenTime | SocialApps | CommunicationApps | EntertainmentApps => Category::DigitalHabits,
            _ => Category::SocialInteraction,
        }
    }

    /// Human-readable name used in rendered user data.
    pub fn display_name(self) -> &'static str {
        use Feature::*;
        match self {
            Walking => "walking",
            Running => "running",
            Biking => "biking",
            Sedentary => "sedentary time",
            Distance => "distance travelled",
            Gym => "time at the gym",
            SleepDuration => "sleep duration",
            ScreenUnlocks => "phone unlocks",
            ScreenTime => "screen time",
            SocialApps => "social media app use",
            CommunicationApps => "communication app use",
            EntertainmentApps => "entertainment app use",
            CallsIn => "incoming calls",
            CallsOut => "outgoing calls",
            SmsIn => "incoming texts",
            SmsOut => "outgoing texts",
            Conversations => "in-person conversations",
            ConversationTime => "time in conversation",
            SignificantPlaces => "places visited",
            GreekHouse => "time at Greek houses",
            Leisure => "time at leisure spots",
            SocialPlaces => "time at social spots",
            Study => "time at study spots",
            Cafeteria => "time at the cafeteria",
            Home => "time at home",
        }
    }

    /// Event kind whose presence marks the feature as observed; `None` for sleep.
    pub fn source(self) -> Option<EventKind> {
        use Feature::*;
        Some(match self {
            Walking | Running | Biking | Sedentary => EventKind::ActivityInterval,
            Distance | Gym | SignificantPlaces | GreekHouse | Leisure | SocialPlaces | Study | Cafeteria | Home => {
                EventKind::GpsFix
            }
            SleepDuration => return None,
            ScreenUnlocks | ScreenTime => EventKind::ScreenState,
            SocialApps | CommunicationApps | EntertainmentApps => EventKind::AppSession,
            CallsIn | CallsOut => EventKind::CallLog,
            SmsIn | SmsOut => EventKind::SmsLog,
            Conversations | ConversationTime => EventKind::ConversationEpisode,
        })
    }

    pub fn value(self, v: &FeatureVector) -> f64 {
        use Feature::*;
        match self {
            Walking => v.physical.walk_s,
            Running => v.physical.run_s,
            Biking => v.physical.bike_s,
            Sedentary => v.physical.sedentary_s,
            Distance => v.physical.distance_km,
            Gym => v.physical.gym_s,
            SleepDuration => v.sleep.duration_s,
            ScreenUnlocks => v.digital.screen_unlocks as f64,
            ScreenTime => v.digital.screen_time_s,
            SocialApps => v.digital.app_use.social as f64,
            CommunicationApps => v.digital.app_use.communication as f64,
            EntertainmentApps => v.digital.app_use.entertainment as f64,
            CallsIn => v.social.calls_in as f64,
            CallsOut => v.social.calls_out as f64,
            SmsIn => v.social.sms_in as f64,
            SmsOut => v.social.sms_out as f64,
            Conversations => v.social.convo_count as f64,
            ConversationTime => v.social.convo_duration_s,
            SignificantPlaces => v.social.significant_places as f64,
            GreekHouse => v.social.greek_s,
            Leisure => v.social.leisure_s,
            SocialPlaces => v.social.social_place_s,
            Study => v.social.study_s,
            Cafeteria => v.social.cafeteria_s,
            Home => v.social.home_s,
        }
    }

    /// Counts and durations that add up across adjacent windows.
    pub fn is_additive(self) -> bool {
        !matches!(self, Feature::SleepDuration | Feature::SignificantPlaces | Feature::Distance)
    }
}
