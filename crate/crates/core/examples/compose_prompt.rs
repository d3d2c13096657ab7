//! Compose the provider request for a low-mood weekday journal and show the
//! strategy the composer picked.

use chrono::NaiveDate;
use sensejournal::features::{Direction, Feature, FeatureTrend, TrendReport};
use sensejournal::profile::{Category, PriorityRanking};
use sensejournal::prompt::{compose, PromptAssets, PromptContext, Slot, StressIndex};

fn main() -> anyhow::Result<()> {
    let assets = PromptAssets::bundled();
    let trends: TrendReport = [
        (Feature::SleepDuration, FeatureTrend { direction: Direction::Decrease, pct_change: Some(-28.0) }),
        (Feature::Study, FeatureTrend { direction: Direction::Increase, pct_change: Some(64.0) }),
        (Feature::ScreenTime, FeatureTrend { direction: Direction::Stable, pct_change: Some(4.0) }),
    ]
    .into();
    let ctx = PromptContext {
        date: NaiveDate::from_ymd_opt(2024, 2, 21).unwrap(),
        slot: Slot::WeekdayJournal,
        mood_score: Some(2),
        stress_index: StressIndex::High,
        academic_week: 7,
        previous_prompts: vec!["What small moment made you smile today?".into()],
        trends: Some(trends),
        priorities: PriorityRanking::new([
            Category::Sleep,
            Category::SocialInteraction,
            Category::PhysicalFitness,
            Category::DigitalHabits,
        ])?,
        weekend: None,
    };
    let (request, strategy) = compose(&ctx, &assets)?;
    println!("strategy: {strategy:?}");
    println!("request hash: {}", request.hash());
    println!("--- user message ---\n{}", request.user);
    Ok(())
}
