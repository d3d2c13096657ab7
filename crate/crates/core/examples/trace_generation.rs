//! Generate a synthetic trace, corrupt a few lines, and check that ingest
//! rejects exactly those lines.

use chrono::{Duration, Utc};
use sensejournal::ingest::{parse_batch, BatchId};
use sensejournal::profile::UserId;
use sensejournal::sim::{corrupt_lines, generate, Scenario};

fn main() -> anyhow::Result<()> {
    let user = UserId::new("u01")?;
    let trace = generate(&Scenario::named("short-sleep")?, 5, 2, &user)?;
    println!("{} events; planted per day:", trace.events.len());
    for d in &trace.manifest.days {
        println!(
            "  {} gym {:>5.0} s  places {}  distance {:.2} km  sleep {:.1} h",
            d.date,
            d.gym_s,
            d.significant_places,
            d.distance_km,
            d.sleep.duration_s / 3600.0
        );
    }

    let (text, corrupted) = corrupt_lines(&trace.to_ndjson(), 4, 2);
    let batch = parse_batch(text.as_bytes(), &user, BatchId("b".into()), Utc::now() + Duration::days(1))?;
    let rejected: Vec<usize> = batch.rejections.iter().map(|r| r.line).collect();
    println!("corrupted lines {corrupted:?}, rejected lines {rejected:?}");
    assert_eq!(corrupted, rejected);
    Ok(())
}
