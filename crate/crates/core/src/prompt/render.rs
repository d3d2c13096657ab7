use crate::features::{Direction, Feature, FeatureTrend, TrendReport, WeekendComposites};
use crate::profile::PriorityRanking;

/// User-data text when no feature has enough history.
pub const NO_DATA: &str = "No data available";

/// `walking: increase (+50%)`. Percentages round half away from zero.
pub fn render_trend_line(feature: Feature, t: &FeatureTrend) -> Option<String> {
    let pct = t.pct_change?;
    if t.direction == Direction::InsufficientData {
        return None;
    }
    let rounded = pct.round() as i64;
    let pct = if rounded > 0 { format!("+{rounded}") } else { rounded.to_string() };
    Some(format!("{}: {} ({pct}%)", feature.display_name(), t.direction.as_str()))
}

/// One section per category in priority order, each headed by the category
/// title; empty sections are dropped.
pub fn render_user_data(trends: &TrendReport, ranking: &PriorityRanking) -> String {
    let mut sections = Vec::new();
    for category in ranking.iter() {
        let lines: Vec<String> = Feature::ALL
            .iter()
            .filter(|f| f.category() == category)
            .filter_map(|f| trends.get(f).and_then(|t| render_trend_line(*f, t)))
            .collect();
        if !lines.is_empty() {
            sections.push(format!("{}:\n{}", category.title(), lines.join("\n")));
        }
    }
    if sections.is_empty() {
        NO_DATA.to_string()
    } else {
        sections.join("\n")
    }
}

fn hours(secs: f64) -> String {
    format!("{:.1} hours", secs / 3600.0)
}

pub fn render_composites(w: &WeekendComposites) -> String {
    let sleep = if w.nights_observed > 0 {
        format!("{} on average", hours(w.sleep_proxy_s))
    } else {
        "not available".to_string()
    };
    format!(
        "time at Greek houses on Friday and Saturday: {}\nsleep on Friday and Saturday nights: {sleep}",
        hours(w.greek_s)
    )
}
