//! The gateway never returns an invalid prompt: a misbehaving provider is
//! retried per rejection class, then the cache, then a canned prompt.

use std::sync::Arc;

use chrono::{NaiveDate, Utc};
use sensejournal::llm::{AdversarialProvider, FailingProvider, Gateway, GatewayConfig, MockProvider};
use sensejournal::profile::{PriorityRanking, UserId};
use sensejournal::prompt::{validate_output, PromptAssets, PromptContext, Slot, StressIndex};

fn main() -> anyhow::Result<()> {
    let assets = Arc::new(PromptAssets::bundled());
    let user = UserId::new("u01")?;
    let ctx = PromptContext {
        date: NaiveDate::from_ymd_opt(2024, 1, 17).unwrap(),
        slot: Slot::CheckinEvening,
        mood_score: None,
        stress_index: StressIndex::Medium,
        academic_week: 2,
        previous_prompts: vec![],
        trends: Some(Default::default()),
        priorities: PriorityRanking::default(),
        weekend: None,
    };

    let hostile = Gateway::new(
        Arc::new(AdversarialProvider::new(5, &assets.lexicon).with_bad_rate(0.9)),
        assets.clone(),
        GatewayConfig::default(),
    );
    for _ in 0..5 {
        let p = hostile.checkin_prompt(&user, &ctx, Utc::now());
        assert!(validate_output(ctx.slot, &p.text, &[], &assets.lexicon).is_ok());
        println!("{:<16} {}", p.source.as_str(), p.text);
    }

    // A cache filled while the provider was healthy covers an outage.
    let healthy = Gateway::new(Arc::new(MockProvider::new(5)), assets.clone(), GatewayConfig::default());
    let cached = healthy.pregenerate(&user, &ctx, Utc::now());
    let down = Gateway::new(Arc::new(FailingProvider), assets, GatewayConfig::default());
    let p = down.checkin_prompt(&user, &ctx, Utc::now());
    println!("outage, no cache: {} ({})", p.text, p.source.as_str());
    println!("pregenerated earlier: {} ({})", cached.prompt.text, cached.prompt.source.as_str());
    Ok(())
}
