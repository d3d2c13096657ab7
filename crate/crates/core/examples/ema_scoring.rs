//! Score a weekly survey with the bundled item key.

use sensejournal::service::{score_ema, EmaKey, EmaSubmission};

fn main() -> anyhow::Result<()> {
    let key = EmaKey::bundled();
    let submission = EmaSubmission {
        week: 3,
        phq4: vec![3, 3, 0, 1],
        panas: vec![4, 2, 5, 1, 3, 2, 4, 1, 5, 2],
        sris: vec![4; key.sris.scale.items],
        maas: vec![3, 4, 5, 2, 4],
    };
    let score = score_ema(&key, &submission)?;
    println!("{}", serde_json::to_string_pretty(&score)?);

    let partial = EmaSubmission { phq4: vec![1, 2], ..submission };
    println!("partial submission: {}", score_ema(&key, &partial).unwrap_err());
    Ok(())
}
