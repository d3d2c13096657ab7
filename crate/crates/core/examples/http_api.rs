//! Drive the JSON API in-process: preferences, an upload, and a mood report.

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::{TimeZone, Utc};
use http_body_util::BodyExt;
use sensejournal::llm::MockProvider;
use sensejournal::service::{router, Engine, EngineConfig};
use sensejournal::time::VirtualClock;
use tower::ServiceExt;

async fn call(app: &axum::Router, method: &str, uri: &str, body: &str) -> anyhow::Result<(StatusCode, String)> {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))?;
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status();
    let bytes = resp.into_body().collect().await?.to_bytes();
    Ok((status, String::from_utf8_lossy(&bytes).into_owned()))
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let clock = VirtualClock::new(Utc.with_ymd_and_hms(2024, 1, 9, 3, 0, 0).unwrap());
    let engine = Arc::new(Engine::in_memory(Arc::new(clock), Arc::new(MockProvider::new(1)), EngineConfig::default()));
    let app = router(engine);

    let prefs = r#"{"ranking":["sleep","physical_fitness","social_interaction","digital_habits"],
        "bedtime_weekday":"23:00","bedtime_weekend":"00:30","timezone":"America/New_York"}"#;
    println!("{:?}", call(&app, "PUT", "/v1/users/u01/preferences", prefs).await?);

    let bad = r#"{"ranking":["sleep","sleep","social_interaction","digital_habits"],
        "bedtime_weekday":"23:00","bedtime_weekend":"00:30","timezone":"America/New_York"}"#;
    println!("{:?}", call(&app, "PUT", "/v1/users/u01/preferences", bad).await?);

    let upload = r#"{"ts":"2024-01-08T22:00:00Z","kind":"screen_state","data":{"state":"unlock"}}"#;
    println!("{:?}", call(&app, "POST", "/v1/ingest/u01?batch_id=b1", upload).await?);

    println!("{:?}", call(&app, "POST", "/v1/users/u01/mood", r#"{"score":4}"#).await?);
    println!("{:?}", call(&app, "POST", "/v1/users/nobody/mood", r#"{"score":4}"#).await?);
    Ok(())
}
