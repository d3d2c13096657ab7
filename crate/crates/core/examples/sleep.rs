//! Infer a week of sleep from screen, activity and location gaps and compare
//! with what the generator planted.

use sensejournal::profile::UserId;
use sensejournal::sim::{generate, replay, Scenario};

fn main() -> anyhow::Result<()> {
    let user = UserId::new("u02")?;
    let trace = generate(&Scenario::named("sleep-6h")?, 7, 21, &user)?;
    let engine = replay(&trace)?;
    let tz = chrono_tz::America::New_York;
    for day in &trace.manifest.days {
        let est = engine.pipeline().infer_sleep(&user, day.date)?;
        let fmt = |t: Option<chrono::NaiveDateTime>| t.map_or("-".into(), |t| t.format("%a %H:%M").to_string());
        println!(
            "night of {}: {} to {} ({:.1} h), planted {} to {}",
            day.date,
            fmt(est.start_local(tz)),
            fmt(est.end_local(tz)),
            est.duration_s / 3600.0,
            day.sleep.start.with_timezone(&tz).format("%a %H:%M"),
            day.sleep.end.with_timezone(&tz).format("%a %H:%M"),
        );
    }
    Ok(())
}
