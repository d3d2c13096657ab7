mod common;

use std::path::PathBuf;

use chrono::NaiveDate;
use proptest::prelude::*;
use sensejournal::features::{Direction, Feature, FeatureTrend, TrendReport, WeekendComposites};
use sensejournal::profile::{Category, PriorityRanking};
use sensejournal::prompt::{
    compose, jaccard, render_user_data, tokens, validate_output, PromptAssets, PromptContext, Slot, StressIndex,
};

fn assets() -> PromptAssets {
    PromptAssets::bundled()
}

fn golden(name: &str, actual: &str) {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing {}; run with UPDATE_GOLDEN=1", path.display()));
    assert_eq!(actual, expected, "{name} drifted; rerun with UPDATE_GOLDEN=1 if intended");
}

fn sample_trends() -> TrendReport {
    let t = |direction, pct: Option<f64>| FeatureTrend { direction, pct_change: pct };
    [
        (Feature::Walking, t(Direction::Increase, Some(50.0))),
        (Feature::Gym, t(Direction::Decrease, Some(-100.0))),
        (Feature::SleepDuration, t(Direction::Stable, Some(-9.5))),
        (Feature::ScreenTime, t(Direction::Increase, Some(12.5))),
        (Feature::SocialApps, t(Direction::InsufficientData, None)),
        (Feature::Study, t(Direction::Increase, Some(999.0))),
        (Feature::Home, t(Direction::Stable, Some(0.4))),
        (Feature::SmsOut, t(Direction::Decrease, Some(-10.0))),
    ]
    .into()
}

fn ranking() -> PriorityRanking {
    PriorityRanking::new([Category::Sleep, Category::DigitalHabits, Category::SocialInteraction, Category::PhysicalFitness]).unwrap()
}

#[test]
fn user_data_rendering_is_stable() {
    golden("user_data.txt", &render_user_data(&sample_trends(), &ranking()));
}

#[test]
fn composed_requests_are_stable() {
    let a = assets();
    let base = PromptContext {
        date: NaiveDate::from_ymd_opt(2024, 2, 14).unwrap(),
        slot: Slot::CheckinEvening,
        mood_score: None,
        stress_index: StressIndex::High,
        academic_week: 6,
        previous_prompts: vec!["Hey, more walking than usual this morning. Nice change, right?".into()],
        trends: Some(sample_trends()),
        priorities: ranking(),
        weekend: None,
    };
    let mut out = String::new();
    let sunday = PromptContext {
        date: NaiveDate::from_ymd_opt(2024, 2, 18).unwrap(),
        slot: Slot::SundayJournal,
        mood_score: Some(5),
        weekend: Some(WeekendComposites { greek_s: 5400.0, sleep_proxy_s: 27000.0, nights_observed: 2 }),
        ..base.clone()
    };
    let weekday = PromptContext { slot: Slot::WeekdayJournal, mood_score: Some(1), ..base.clone() };
    for ctx in [base, weekday, sunday] {
        let (req, strategy) = compose(&ctx, &a).unwrap();
        assert_eq!(req.system, PromptAssets::system_prompt(ctx.slot));
        out.push_str(&format!("=== {} {:?}\n{}\n", ctx.slot.as_str(), strategy, req.user));
    }
    golden("requests.txt", &out);
}

proptest! {
    #[test]
    fn jaccard_is_a_similarity(a in "[a-zA-Z ,.'-]{0,60}", b in "[a-zA-Z ,.'-]{0,60}") {
        let (ab, ba) = (jaccard(&a, &b), jaccard(&b, &a));
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(jaccard(&a, &a), 1.0);
        prop_assert_eq!(jaccard(&a, &a.to_uppercase()), 1.0);
    }

    /// Whatever the validator accepts obeys every output rule, checked here
    /// without the library's helpers.
    #[test]
    fn accepted_output_obeys_the_rules(
        body in "[A-Za-z ,.?!'\"0-9-]{0,260}",
        slot in prop_oneof![Just(Slot::CheckinMorning), Just(Slot::CheckinNight), Just(Slot::WeekdayJournal), Just(Slot::SundayJournal)],
    ) {
        let a = assets();
        if let Ok(text) = validate_output(slot, &body, &[], &a.lexicon) {
            prop_assert_eq!(text.as_str(), body.trim());
            prop_assert!(!text.is_empty());
            let limit = if slot.is_checkin() { 199 } else { 250 };
            prop_assert!(text.chars().count() <= limit);
            if slot.is_checkin() {
                prop_assert!(!text.chars().any(|c| c.is_ascii_digit()));
            }
            prop_assert!(!text.starts_with('"') && !text.ends_with('"'));
            let words = tokens(&text);
            for entry in a.lexicon.entries() {
                let e: Vec<String> = tokens(entry);
                prop_assert!(!words.windows(e.len()).any(|w| w == e.as_slice()), "banned {:?} in {:?}", entry, text);
            }
        }
    }

    /// Banned entries are caught wherever they sit, and only as whole words.
    #[test]
    fn lexicon_matches_whole_words(pre in "[a-z ]{0,20}", post in "[a-z ]{0,20}", pick in any::<prop::sample::Index>()) {
        let a = assets();
        let entries: Vec<&str> = a.lexicon.entries().collect();
        let entry = entries[pick.index(entries.len())];
        let text = format!("{pre} {} {post}?", entry.to_uppercase());
        prop_assert!(a.lexicon.find(&text).is_some());
        let glued = format!("{pre} zz{}zz {post}", entry.replace(' ', ""));
        if tokens(&glued).iter().all(|t| !entries.iter().any(|e| tokens(e) == [t.clone()])) {
            prop_assert!(a.lexicon.find(&glued).is_none(), "{:?}", glued);
        }
    }
}
