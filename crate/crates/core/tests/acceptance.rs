//! One PASS/FAIL line per primary acceptance criterion. Runs without the
//! test harness so the lines always print; exits non-zero on any FAIL.

mod common;

use std::collections::BTreeMap;
use std::time::Instant;

use base64::Engine as _;
use chrono::{DateTime, Datelike, NaiveTime, Timelike, Utc, Weekday};
use rand::Rng;
use sensejournal::features::{classify, DayWindow, Direction, TrendParams};
use sensejournal::geo::dbscan;
use sensejournal::prompt::Slot;
use sensejournal::profile::UserProfile;
use sensejournal::schedule::JobKind;
use sensejournal::service::{score_ema, EmaKey, EmaSubmission};
use sensejournal::sim::{entry_marker, generate, replay, run_study, study_traces, ProviderKind, Scenario, StudyConfig, StudyOutput};
use sensejournal::time::local_day;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dbscan_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = common::rng(500);
    let mut points = 0;
    for case in 0..500 {
        let pts = common::random_point_set(&mut rng, 200);
        let eps = rng.random_range(10.0..60.0);
        let min_pts = rng.random_range(1..10);
        points += pts.len();
        let got = dbscan(&pts, eps, min_pts);
        ensure(got == common::dbscan_oracle(&pts, eps, min_pts), || format!("case {case}: n={} eps={eps:.1} min_pts={min_pts}", pts.len()))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 60.0, || format!("took {secs:.1} s"))?;
    Ok(format!("500 cases, {points} points, identical partitions, {secs:.1} s"))
}

fn significant_places_and_distance() -> Outcome {
    let mut rng = common::rng(100);
    let (mut days, mut max_err) = (0, 0.0f64);
    while days < 100 {
        let name = Scenario::NAMES[rng.random_range(0..Scenario::NAMES.len())];
        let seed: u64 = rng.random();
        let trace = generate(&Scenario::named(name).unwrap(), 5, seed, &common::user("u1")).unwrap();
        let engine = replay(&trace).map_err(|e| e.to_string())?;
        let user = &trace.manifest.user_id;
        let tz = chrono_tz::America::New_York;
        for d in trace.manifest.days.iter().take(100 - days) {
            let ctx = format!("{name} seed {seed} {}", d.date);
            let f = engine.pipeline().daily_features(user, d.date, DayWindow::FULL_DAY).map_err(|e| e.to_string())?;
            let segments = engine.pipeline().day_visits(user, d.date).map_err(|e| e.to_string())?;
            let day = local_day(tz, d.date);
            let sig = common::significant_oracle(&segments, day).len();
            ensure(f.social.significant_places as usize == d.significant_places && sig == d.significant_places, || {
                format!("{ctx}: extracted {} oracle {sig} manifest {}", f.social.significant_places, d.significant_places)
            })?;
            let want = common::distance_oracle_km(&segments, day);
            let err = (f.physical.distance_km - want).abs();
            max_err = max_err.max(err);
            ensure(err <= 1e-6, || format!("{ctx}: distance {} vs oracle {want}", f.physical.distance_km))?;
            days += 1;
        }
    }
    Ok(format!("{days} days, counts exact, max distance error {max_err:.1e} km"))
}

fn trend_arithmetic() -> Outcome {
    let p = TrendParams::default();
    let mut rng = common::rng(10);
    for _ in 0..100_000 {
        let today = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..1e5) };
        let mean = if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..1e5) };
        let t = classify(today, mean, 14, &p);
        // Evaluated in the order the definition is written: 100 x (today - mean) / mean.
        let want = if mean > 0.0 { 100.0 * (today - mean) / mean } else if today > 0.0 { 999.0 } else { 0.0 };
        ensure(t.pct_change == Some(want), || format!("{today} vs {mean}: {:?} != {want}", t.pct_change))?;
        let dir = if want.abs() < 10.0 { Direction::Stable } else if want > 0.0 { Direction::Increase } else { Direction::Decrease };
        ensure(t.direction == dir, || format!("{today} vs {mean}: {:?}", t.direction))?;
    }
    for (today, mean, dir) in [
        (110.0, 100.0, Direction::Increase),
        (90.0, 100.0, Direction::Decrease),
        (109.999, 100.0, Direction::Stable),
        (90.001, 100.0, Direction::Stable),
        (220.0, 200.0, Direction::Increase),
        (180.0, 200.0, Direction::Decrease),
    ] {
        let t = classify(today, mean, 7, &p);
        ensure(t.direction == dir, || format!("{today} vs {mean} gave {:?}", t.direction))?;
    }
    ensure(classify(110.0, 100.0, 6, &p).direction == Direction::InsufficientData, || "6 days of baseline is not enough".into())?;
    Ok("100000 random pairs exact; +-10% boundaries classify as change".into())
}

fn sleep_inference() -> Outcome {
    let mut rng = common::rng(8);
    let (mut nights, mut good) = (0, 0);
    let mut per: BTreeMap<&str, (u32, u32)> = BTreeMap::new();
    'outer: loop {
        for name in ["sleep-4h", "sleep-6h", "sleep-8h"] {
            let seed: u64 = rng.random();
            let trace = generate(&Scenario::named(name).unwrap(), 8, seed, &common::user("u1")).unwrap();
            let engine = replay(&trace).map_err(|e| e.to_string())?;
            // The last night runs past the end of the trace.
            for d in &trace.manifest.days[..trace.manifest.days.len() - 1] {
                if nights == 100 {
                    break 'outer;
                }
                let est = engine.pipeline().infer_sleep(&trace.manifest.user_id, d.date).map_err(|e| e.to_string())?;
                let within = |a: Option<DateTime<Utc>>, b: DateTime<Utc>| a.is_some_and(|a| (a - b).num_seconds().abs() <= 600);
                let ok = within(est.start, d.sleep.start) && within(est.end, d.sleep.end);
                nights += 1;
                good += ok as u32;
                let e = per.entry(name).or_default();
                e.0 += ok as u32;
                e.1 += 1;
            }
        }
    }
    let share = good as f64 / nights as f64;
    let detail = per.iter().map(|(k, (g, n))| format!("{k} {g}/{n}")).collect::<Vec<_>>().join(", ");
    ensure(share >= 0.95, || format!("{good}/{nights} nights within 10 min ({detail})"))?;
    Ok(format!("{good}/{nights} nights within 10 min ({detail})"))
}

fn asset(name: &str) -> String {
    std::fs::read_to_string(format!("{}/assets/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

/// Whole-word, case-insensitive search treating anything but letters as a
/// boundary, so it is at least as strict as the guard it checks.
fn banned_in(text: &str, entries: &[String]) -> Option<String> {
    let lower = text.to_lowercase();
    entries.iter().find_map(|e| {
        lower.match_indices(e.as_str()).find_map(|(i, _)| {
            let before = lower[..i].chars().next_back().is_none_or(|c| !c.is_alphabetic());
            let after = lower[i + e.len()..].chars().next().is_none_or(|c| !c.is_alphabetic());
            (before && after).then(|| e.clone())
        })
    })
}

fn study(provider: ProviderKind) -> Result<StudyOutput, String> {
    let cfg = StudyConfig { provider, ..StudyConfig::default() };
    run_study(&cfg, study_traces(&cfg, None).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

fn prompt_validity(runs: &[(&str, &StudyOutput)]) -> Outcome {
    let lexicon: Vec<String> = asset("safety_lexicon.txt")
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect();
    let (checkin_rules, weekday_rules) = (asset("checkin_rules.txt"), asset("weekday_rules.txt"));
    let mut summary = Vec::new();
    for (label, out) in runs {
        let shown = out.prompts.iter();
        let cached = out.pregenerated.iter().map(|c| &c.prompt);
        let (mut checkins, mut journals) = (0, 0);
        for p in shown.chain(cached) {
            let ctx = || format!("{label} {} {} {}: {:?}", p.user_id, p.date, p.slot.as_str(), p.text);
            ensure(!p.text.trim().is_empty(), || format!("empty prompt {}", ctx()))?;
            ensure(banned_in(&p.text, &lexicon).is_none(), || format!("banned word in {}", ctx()))?;
            if p.slot.is_checkin() {
                checkins += 1;
                ensure(p.text.chars().count() < 200, || format!("long check-in {}", ctx()))?;
                ensure(!p.text.chars().any(|c| c.is_ascii_digit()), || format!("digit in {}", ctx()))?;
            } else {
                journals += 1;
                ensure(p.text.chars().count() <= 250, || format!("long journal {}", ctx()))?;
            }
        }
        // Cascade totality: every check-in firing issued a prompt.
        let fired = out.log.iter().filter(|l| l.job == JobKind::Checkin).count();
        let issued = out.prompts.iter().filter(|p| p.slot.is_checkin()).count();
        ensure(fired == issued, || format!("{label}: {fired} check-ins fired but {issued} issued"))?;
        ensure(out.log.iter().all(|l| l.status == sensejournal::schedule::JobStatus::Ok), || format!("{label}: a job failed"))?;
        for r in &out.requests {
            let (system, rules) = match r.slot {
                s if s.is_checkin() => ("checkin_system.txt", Some(&checkin_rules)),
                Slot::WeekdayJournal => ("weekday_system.txt", Some(&weekday_rules)),
                _ => ("weekend_system.txt", None),
            };
            ensure(r.system == asset(system), || format!("{label}: {} system prompt differs from {system}", r.slot.as_str()))?;
            if let Some(rules) = rules {
                ensure(r.user.contains(rules.trim_end()), || format!("{label}: {} rules not verbatim", r.slot.as_str()))?;
            }
        }
        summary.push(format!("{label}: {checkins} check-ins, {journals} journals, {} requests", out.requests.len()));
    }
    Ok(summary.join("; "))
}

fn journal_oracle(p: &UserProfile, date: chrono::NaiveDate) -> NaiveTime {
    let bed = if matches!(date.weekday(), Weekday::Sat | Weekday::Sun) { p.bedtime_weekend } else { p.bedtime_weekday }.time();
    let t = ((bed.hour() * 60 + bed.minute()) as i64 - 120).rem_euclid(1440);
    if t < 360 {
        NaiveTime::from_hms_opt(20, 0, 0).unwrap()
    } else {
        NaiveTime::from_hms_opt((t / 60) as u32, (t % 60) as u32, 0).unwrap()
    }
}

fn schedule_counts(out: &StudyOutput, rerun: &StudyOutput) -> Outcome {
    for u in &out.users {
        let id = &u.profile.user_id;
        let mine: Vec<_> = out.log.iter().filter(|l| &l.user_id == id).collect();
        let count = |k| mine.iter().filter(|l| l.job == k).count();
        let counts = (count(JobKind::Checkin), count(JobKind::JournalNotification), count(JobKind::Ema));
        ensure(counts == (224, 56, 8), || format!("{id}: check-ins, journals, EMAs = {counts:?}"))?;
        for l in mine.iter().filter(|l| l.job == JobKind::JournalNotification) {
            let want = journal_oracle(&u.profile, l.local.date());
            ensure(l.local.time() == want, || format!("{id} {}: journal at {} not {want}", l.local.date(), l.local.time()))?;
        }
        ensure(mine.iter().filter(|l| l.job == JobKind::Ema).all(|l| l.local.date().weekday() == Weekday::Sun), || format!("{id}: EMA off Sunday"))?;
    }
    let (a, b) = (out.log_jsonl(), rerun.log_jsonl());
    ensure(a == b, || "rerun log differs".into())?;
    Ok(format!("{} users at 224/56/8; rerun log identical ({} bytes)", out.users.len(), a.len()))
}

fn phq4_scoring() -> Outcome {
    let key = EmaKey::bundled();
    let mut n = 0;
    for code in 0..256u32 {
        let items: Vec<u8> = (0..4).map(|i| ((code >> (2 * i)) & 3) as u8).collect();
        let s = EmaSubmission { week: 1, phq4: items.clone(), panas: vec![1; 10], sris: vec![1; 12], maas: vec![1; 5] };
        let got = score_ema(&key, &s).map_err(|e| e.to_string())?;
        let (i1, i2, i3, i4) = (items[0] as u32, items[1] as u32, items[2] as u32, items[3] as u32);
        ensure((got.anxiety, got.depression, got.phq4_total) == (i1 + i2, i3 + i4, i1 + i2 + i3 + i4), || format!("{items:?}: {got:?}"))?;
        n += 1;
    }
    Ok(format!("{n} combinations"))
}

fn privacy(runs: &[(&str, &StudyOutput)]) -> Outcome {
    let b64 = base64::engine::general_purpose::STANDARD;
    let mut checked = 0;
    for (label, out) in runs {
        let cfg = StudyConfig::default();
        let mut needles: Vec<String> = vec!["43.7".into(), "-72.".into(), "com.".into(), "direction".into(), "duration_s".into(), "voice_count".into(), "call_log".into(), "sms_log".into(), "app_id".into()];
        for u in &out.users {
            let m = &u.manifest;
            needles.push(format!("{:.4}", m.home.lat));
            for d in &m.days {
                let marker = entry_marker(cfg.seed, &m.user_id, d.date);
                needles.push(b64.encode(&marker));
                needles.push(marker);
            }
        }
        for e in &out.entries {
            if e.modality == sensejournal::service::Modality::Text {
                needles.push(e.body.clone());
            }
        }
        ensure(!out.entries.is_empty(), || format!("{label}: no entries were written"))?;
        for r in &out.requests {
            let doc = r.render();
            if let Some(n) = needles.iter().find(|n| doc.contains(n.as_str())) {
                return Err(format!("{label}: request for {} contains {n:?}", r.slot.as_str()));
            }
            checked += 1;
        }
    }
    Ok(format!("{checked} provider requests clean"))
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("dbscan oracle equivalence", dbscan_oracle_equivalence()),
        ("significant places and distance", significant_places_and_distance()),
        ("trend arithmetic", trend_arithmetic()),
        ("sleep inference", sleep_inference()),
    ];
    let sims = study(ProviderKind::Mock).and_then(|mock| {
        let rerun = study(ProviderKind::Mock)?;
        let adversarial = study(ProviderKind::Adversarial { bad_rate: 0.7 })?;
        Ok((mock, rerun, adversarial))
    });
    match &sims {
        Ok((mock, rerun, adv)) => {
            let runs = [("mock", mock), ("adversarial", adv)];
            results.push(("prompt validity sweep", prompt_validity(&runs)));
            results.push(("schedule counts", schedule_counts(mock, rerun)));
            results.push(("phq-4 scoring", phq4_scoring()));
            results.push(("privacy guard", privacy(&runs)));
        }
        Err(e) => {
            for name in ["prompt validity sweep", "schedule counts", "privacy guard"] {
                results.push((name, Err(format!("simulation failed: {e}"))));
            }
            results.push(("phq-4 scoring", phq4_scoring()));
        }
    }
    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
