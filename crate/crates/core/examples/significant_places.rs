//! Cluster one synthetic day of GPS fixes and list the labeled visits.

use chrono::NaiveDate;
use sensejournal::geo::{daily_distance, significant_places};
use sensejournal::profile::UserId;
use sensejournal::sim::{generate, replay, Scenario};
use sensejournal::time::local_day;

fn main() -> anyhow::Result<()> {
    let user = UserId::new("u01")?;
    let trace = generate(&Scenario::named("baseline")?, 3, 11, &user)?;
    let engine = replay(&trace)?;
    let date = NaiveDate::from_ymd_opt(2024, 1, 9).unwrap();

    let visits = engine.pipeline().day_visits(&user, date)?;
    for v in visits.iter() {
        println!(
            "cluster {:>2} {:<12} {} -> {} ({} fixes)",
            v.cluster_id,
            v.label.map_or("unlabeled".to_string(), |l| format!("{l:?}")),
            v.enter.format("%H:%M"),
            v.exit.format("%H:%M"),
            v.fixes
        );
    }
    let day = local_day(chrono_tz::America::New_York, date);
    let truth = &trace.manifest.days[1];
    println!("significant places: {} (planted {})", significant_places(&visits, day), truth.significant_places);
    println!("distance: {:.3} km (planted {:.3} km)", daily_distance(&visits, day), truth.distance_km);
    Ok(())
}
