//! One week of jobs for a participant whose weekend bedtime is later.

use chrono::{Duration, NaiveDate};
use sensejournal::profile::{ClockTime, PriorityRanking, UserId, UserProfile};
use sensejournal::schedule::{plan_day, JobKind};

fn main() -> anyhow::Result<()> {
    let profile = UserProfile {
        user_id: UserId::new("u01")?,
        priority_ranking: PriorityRanking::default(),
        bedtime_weekday: ClockTime::new(23, 0).unwrap(),
        bedtime_weekend: ClockTime::new(0, 30).unwrap(),
        timezone: chrono_tz::America::New_York.into(),
    };
    let monday = NaiveDate::from_ymd_opt(2024, 3, 4).unwrap();
    for d in 0..7 {
        let date = monday + Duration::days(d);
        let plan = plan_day(&profile, date);
        let shown: Vec<String> = plan
            .jobs
            .iter()
            .filter(|j| !matches!(j.kind, JobKind::FeatureRecompute | JobKind::Pregenerate))
            .map(|j| format!("{:?}{} {}", j.kind, j.slot.map_or(String::new(), |s| format!("/{}", s.as_str())), j.local.format("%H:%M")))
            .collect();
        println!("{} {}", date.format("%a"), shown.join(", "));
        for w in plan.warnings {
            println!("  warning: {w}");
        }
    }
    Ok(())
}
