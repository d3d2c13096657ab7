mod common;

use chrono::{DateTime, Duration, TimeZone, Utc};
use proptest::prelude::*;
use sensejournal::ingest::*;
use sensejournal::time::TimeRange;

fn received() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 1, 1, 0, 0, 0).unwrap()
}

fn arb_payload() -> impl Strategy<Value = Payload> {
    let dur = 0.0f64..20_000.0;
    let dir = prop_oneof![Just(Direction::Incoming), Just(Direction::Outgoing)];
    prop_oneof![
        (-90.0f64..=90.0, -180.0f64..=180.0, 0.0f64..200.0)
            .prop_map(|(lat, lon, acc_m)| Payload::GpsFix(GpsFix { lat, lon, acc_m })),
        (prop_oneof![Just(Activity::Walking), Just(Activity::Running), Just(Activity::Biking), Just(Activity::Still)], dur.clone())
            .prop_map(|(activity, duration_s)| Payload::ActivityInterval(ActivityInterval { activity, duration_s })),
        prop_oneof![Just(ScreenAction::Unlock), Just(ScreenAction::Lock)]
            .prop_map(|state| Payload::ScreenState(ScreenState { state })),
        ("[a-z]{2,8}\\.[a-z]{2,10}", dur.clone())
            .prop_map(|(app_id, duration_s)| Payload::AppSession(AppSession { app_id, duration_s })),
        (dir.clone(), dur.clone()).prop_map(|(direction, duration_s)| Payload::CallLog(CallLog { direction, duration_s })),
        dir.prop_map(|direction| Payload::SmsLog(SmsLog { direction })),
        (dur, 2u32..8).prop_map(|(duration_s, voice_count)| Payload::ConversationEpisode(ConversationEpisode { duration_s, voice_count })),
    ]
}

fn arb_event() -> impl Strategy<Value = SensorEvent> {
    // Whole milliseconds across 2023-2025: the wire format keeps millisecond precision.
    (1_672_531_200_000i64..1_767_225_600_000, arb_payload()).prop_map(|(ms, payload)| SensorEvent {
        user_id: common::user("u1"),
        timestamp: DateTime::from_timestamp_millis(ms).unwrap(),
        payload,
    })
}

fn ndjson(events: &[SensorEvent]) -> String {
    events.iter().map(|e| e.to_wire() + "\n").collect()
}

fn everything() -> TimeRange {
    TimeRange::new(Utc.with_ymd_and_hms(2000, 1, 1, 0, 0, 0).unwrap(), received() + Duration::days(2)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn wire_round_trip(e in arb_event()) {
        let back = parse_record(&e.to_wire(), &e.user_id, received()).unwrap();
        prop_assert_eq!(back, e);
    }

    /// Garbage lines are rejected by line number and never disturb the
    /// valid lines around them.
    #[test]
    fn rejections_name_exactly_the_bad_lines(
        events in prop::collection::vec(arb_event(), 1..40),
        bad_at in prop::collection::btree_set(0usize..60, 0..6),
    ) {
        let mut lines: Vec<String> = events.iter().map(SensorEvent::to_wire).collect();
        let mut expected_bad = Vec::new();
        for &pos in &bad_at {
            let at = pos.min(lines.len());
            lines.insert(at, "{\"ts\":\"2024-01-01T00:00:00Z\",\"kind\":\"gps_fix\",\"data\":{\"lat\":91,\"lon\":0,\"acc_m\":1}}".into());
            expected_bad.push(at);
        }
        // Insertion shifted earlier picks; recover final positions.
        let bad_lines: Vec<usize> = lines.iter().enumerate().filter(|(_, l)| l.contains("\"lat\":91")).map(|(i, _)| i + 1).collect();
        let raw = lines.join("\n");
        let batch = parse_batch(raw.as_bytes(), &common::user("u1"), BatchId("b".into()), received()).unwrap();
        prop_assert_eq!(batch.rejections.iter().map(|r| r.line).collect::<Vec<_>>(), bad_lines);
        prop_assert_eq!(expected_bad.len(), batch.rejections.len());
        let mut want = events.clone();
        want.sort_by_key(|e| e.timestamp);
        prop_assert_eq!(batch.events, want);
    }

    /// Uploading the same events in overlapping, reordered batches stores
    /// each distinct event once.
    #[test]
    fn overlapping_uploads_converge(events in prop::collection::vec(arb_event(), 1..50), cuts in prop::collection::vec((0usize..50, 0usize..50), 1..5)) {
        let user = common::user("u1");
        let once = MemoryEventStore::new();
        once.store_batch(&parse_batch(ndjson(&events).as_bytes(), &user, BatchId("all".into()), received()).unwrap()).unwrap();

        let pieces = MemoryEventStore::new();
        for (k, (a, b)) in cuts.iter().enumerate() {
            let (lo, hi) = ((*a).min(*b).min(events.len() - 1), (*a).max(*b).min(events.len() - 1));
            let mut part = events[lo..=hi].to_vec();
            part.reverse();
            pieces.store_batch(&parse_batch(ndjson(&part).as_bytes(), &user, BatchId(format!("p{k}")), received()).unwrap()).unwrap();
        }
        pieces.store_batch(&parse_batch(ndjson(&events).as_bytes(), &user, BatchId("rest".into()), received()).unwrap()).unwrap();

        let a = once.query_events(&user, everything(), &EventKind::ALL).unwrap();
        let b = pieces.query_events(&user, everything(), &EventKind::ALL).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn file_store_matches_memory_store_after_reopen() {
    let dir = tempfile::tempdir().unwrap();
    let trace = common::scenario_trace("baseline", 3, 5, "u1");
    let user = trace.manifest.user_id.clone();
    let text = trace.to_ndjson();
    let lines: Vec<&str> = text.lines().collect();
    let mem = MemoryEventStore::new();
    {
        let file = FileEventStore::open(dir.path()).unwrap();
        for (k, chunk) in lines.chunks(400).enumerate() {
            let raw = chunk.join("\n");
            let b = parse_batch(raw.as_bytes(), &user, BatchId(format!("c{k}")), received()).unwrap();
            file.store_batch(&b).unwrap();
            mem.store_batch(&b).unwrap();
        }
    }
    let reopened = FileEventStore::open(dir.path()).unwrap();
    assert_eq!(
        reopened.query_events(&user, everything(), &EventKind::ALL).unwrap(),
        mem.query_events(&user, everything(), &EventKind::ALL).unwrap()
    );
    assert_eq!(reopened.users(), vec![user.clone()]);
    // A batch id seen before the restart is still recognized.
    let again = parse_batch(lines[0].as_bytes(), &user, BatchId("c0".into()), received()).unwrap();
    assert!(reopened.store_batch(&again).unwrap().duplicate);
}
