use serde::{Deserialize, Serialize};

use super::canned::CannedPrompts;
use super::safety::SafetyLexicon;
use super::{sha256_hex, Slot, Strategy};

pub const CHECKIN_SYSTEM: &str = include_str!("../../assets/checkin_system.txt");
pub const CHECKIN_RULES: &str = include_str!("../../assets/checkin_rules.txt");
pub const WEEKEND_SYSTEM: &str = include_str!("../../assets/weekend_system.txt");
pub const WEEKDAY_SYSTEM: &str = include_str!("../../assets/weekday_system.txt");
pub const WEEKDAY_RULES: &str = include_str!("../../assets/weekday_rules.txt");
const STRATEGIES: &str = include_str!("../../assets/strategies.toml");
const LEXICON: &str = include_str!("../../assets/safety_lexicon.txt");
const CANNED: &str = include_str!("../../assets/canned_prompts.toml");

#[derive(Debug, Clone, Deserialize)]
struct StrategyText {
    regular: String,
    gratitude: String,
    self_compassion: String,
}

/// Content hashes of the text assets, recorded with every generated prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetHashes {
    pub checkin_system: String,
    pub weekday_system: String,
    pub weekend_system: String,
    pub lexicon: String,
}

/// Everything the composer and validator read besides the context.
#[derive(Debug, Clone)]
pub struct PromptAssets {
    pub lexicon: SafetyLexicon,
    pub canned: CannedPrompts,
    strategies: StrategyText,
    hashes: AssetHashes,
}

impl PromptAssets {
    pub fn bundled() -> Self {
        Self::with_lexicon(SafetyLexicon::parse(LEXICON))
    }

    /// Bundled assets with a replacement safety lexicon.
    pub fn with_lexicon(lexicon: SafetyLexicon) -> Self {
        let hashes = AssetHashes {
            checkin_system: sha256_hex(CHECKIN_SYSTEM.as_bytes()),
            weekday_system: sha256_hex(WEEKDAY_SYSTEM.as_bytes()),
            weekend_system: sha256_hex(WEEKEND_SYSTEM.as_bytes()),
            lexicon: lexicon.hash(),
        };
        Self {
            lexicon,
            canned: CannedPrompts::parse(CANNED).expect("bundled canned prompts are valid"),
            strategies: toml::from_str(STRATEGIES).expect("bundled strategies are valid"),
            hashes,
        }
    }

    pub fn hashes(&self) -> &AssetHashes {
        &self.hashes
    }

    pub fn system_prompt(slot: Slot) -> &'static str {
        match slot {
            Slot::WeekdayJournal => WEEKDAY_SYSTEM,
            Slot::SaturdayJournal | Slot::SundayJournal => WEEKEND_SYSTEM,
            _ => CHECKIN_SYSTEM,
        }
    }

    pub fn system_hash(&self, slot: Slot) -> &str {
        match slot {
            Slot::WeekdayJournal => &self.hashes.weekday_system,
            Slot::SaturdayJournal | Slot::SundayJournal => &self.hashes.weekend_system,
            _ => &self.hashes.checkin_system,
        }
    }

    pub fn strategy_text(&self, strategy: Strategy) -> &str {
        match strategy {
            Strategy::Gratitude => &self.strategies.gratitude,
            Strategy::SelfCompassion => &self.strategies.self_compassion,
            Strategy::Regular | Strategy::GenericFallback => &self.strategies.regular,
        }
    }
}

impl Default for PromptAssets {
    fn default() -> Self {
        Self::bundled()
    }
}
