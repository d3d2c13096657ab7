//! Daily features for a gym-heavy participant and their trend against the
//! 30-day baseline, rendered the way a prompt would see them.

use chrono::NaiveDate;
use sensejournal::features::{trend, DayWindow, TrendParams};
use sensejournal::profile::{PriorityRanking, UserId};
use sensejournal::prompt::render_user_data;
use sensejournal::sim::{generate, replay, Scenario};

fn main() -> anyhow::Result<()> {
    let user = UserId::new("u03")?;
    let trace = generate(&Scenario::named("gym-heavy")?, 21, 4, &user)?;
    let engine = replay(&trace)?;
    let date = NaiveDate::from_ymd_opt(2024, 1, 26).unwrap();

    let today = engine.pipeline().daily_features(&user, date, DayWindow::FULL_DAY)?;
    let baseline = engine.pipeline().compute_baseline(&user, date, DayWindow::FULL_DAY)?;
    println!("gym today {:.0} s, baseline mean {:.0} s over {} days", today.physical.gym_s,
        baseline.means.get(&sensejournal::features::Feature::Gym).copied().unwrap_or(0.0),
        baseline.days_of_data.get(&sensejournal::features::Feature::Gym).copied().unwrap_or(0));

    let report = trend(&today.values(), &baseline, &TrendParams::default());
    println!("{}", render_user_data(&report, &PriorityRanking::default()));
    Ok(())
}
