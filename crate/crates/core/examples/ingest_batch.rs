//! Parse a phone upload with one malformed line, store it, then replay the
//! same batch to show it is idempotent.

use chrono::{TimeZone, Utc};
use sensejournal::ingest::{parse_batch, BatchId, EventStore, MemoryEventStore};
use sensejournal::profile::UserId;

const UPLOAD: &str = r#"{"ts":"2024-01-08T14:00:00Z","kind":"gps_fix","data":{"lat":43.7044,"lon":-72.2887,"acc_m":9.0}}
{"ts":"2024-01-08T14:05:00Z","kind":"screen_state","data":{"state":"unlock"}}
{"ts":"2024-01-08T14:20:00Z","kind":"app_session","data":{"app_id":"com.instagram.android","duration_s":600}}
{"ts":"2024-01-08T14:21:00Z","kind":"teleport","data":{}}
{"ts":"2024-01-08T15:00:00Z","kind":"call_log","data":{"direction":"incoming","duration_s":95}}
"#;

fn main() -> anyhow::Result<()> {
    let user = UserId::new("u01")?;
    let received = Utc.with_ymd_and_hms(2024, 1, 8, 16, 0, 0).unwrap();
    let batch = parse_batch(UPLOAD.as_bytes(), &user, BatchId("phone-0001".into()), received)?;
    for r in &batch.rejections {
        println!("rejected line {}: {}", r.line, r.reason);
    }

    let store = MemoryEventStore::new();
    let first = store.store_batch(&batch)?;
    let again = store.store_batch(&batch)?;
    println!("first upload stored {} events by kind {:?}", first.stored, first.counts);
    println!("replay was a duplicate: {}, stored {}", again.duplicate, again.stored);
    Ok(())
}
