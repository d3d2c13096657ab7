//! A day in the app: check-ins arrive, the evening notification fires, the
//! participant reports a mood, gets a prompt, writes, and taps a thumb.

use std::sync::Arc;

use chrono::{NaiveDate, NaiveTime};
use sensejournal::llm::MockProvider;
use sensejournal::profile::{ClockTime, PriorityRanking, UserId};
use sensejournal::service::{Engine, EngineConfig, Modality, NewEntry, PendingKind, Preferences, Thumbs};
use sensejournal::sim::{generate, Scenario};
use sensejournal::time::{resolve_local, VirtualClock};

fn main() -> anyhow::Result<()> {
    let tz = chrono_tz::America::New_York;
    let user = UserId::new("u01")?;
    // A week of history ending at noon on Monday 8 January.
    let history = generate(&Scenario::named("baseline")?.starting(NaiveDate::from_ymd_opt(2024, 1, 1).unwrap()), 7, 9, &user)?;
    let today = NaiveDate::from_ymd_opt(2024, 1, 8).unwrap();

    let clock = VirtualClock::new(resolve_local(tz, today, NaiveTime::from_hms_opt(12, 0, 0).unwrap()));
    let engine = Engine::in_memory(Arc::new(clock.clone()), Arc::new(MockProvider::new(9)), EngineConfig::default());
    engine.set_preferences(
        &user,
        Preferences {
            ranking: PriorityRanking::default(),
            bedtime_weekday: ClockTime::new(23, 30).unwrap(),
            bedtime_weekend: ClockTime::new(0, 30).unwrap(),
            timezone: tz.into(),
            home: Some(history.manifest.home),
        },
    )?;
    let receipt = engine.ingest(&user, history.to_ndjson().as_bytes(), None)?;
    println!("uploaded {} events", receipt.receipt.stored);

    let log = engine.run(&clock, resolve_local(tz, today, NaiveTime::from_hms_opt(21, 45, 0).unwrap()))?;
    println!("{} jobs fired by 21:45", log.len());

    for item in engine.pending(&user)? {
        match item.kind {
            PendingKind::Checkin { prompt_id, text, slot } => {
                println!("check-in ({}) {text}", slot.as_str());
                engine.respond_checkin(&user, &prompt_id, Thumbs::ThumbsUp)?;
            }
            PendingKind::Journal { .. } => {
                let prompt = engine.report_mood(&user, 2)?;
                println!("journal prompt [{:?}, {}]: {}", prompt.strategy, prompt.source.as_str(), prompt.text);
                let again = engine.report_mood(&user, 2)?;
                assert_eq!(again.prompt_id, prompt.prompt_id, "mood reports are idempotent per day");
                let entry = engine.submit_entry(
                    &user,
                    NewEntry { prompt_id: prompt.prompt_id, modality: Modality::Text, body: "Long day, but lunch with friends helped.".into() },
                )?;
                println!("saved entry {} with mood {:?}", entry.entry_id, entry.mood_score);
            }
            PendingKind::Ema { week } => println!("weekly survey due for week {week}"),
        }
    }
    Ok(())
}
