//! A two-week study with three participants and a provider that misbehaves
//! half the time; every issued prompt still passes validation.

use std::collections::BTreeMap;

use sensejournal::prompt::{validate_output, PromptAssets};
use sensejournal::sim::{run_study, study_traces, ProviderKind, StudyConfig};

fn main() -> anyhow::Result<()> {
    let cfg = StudyConfig { users: 3, days: 14, provider: ProviderKind::Adversarial { bad_rate: 0.5 }, ..StudyConfig::default() };
    let out = run_study(&cfg, study_traces(&cfg, None)?)?;

    let mut jobs: BTreeMap<String, usize> = BTreeMap::new();
    for r in &out.log {
        *jobs.entry(format!("{:?}", r.job)).or_default() += 1;
    }
    println!("jobs: {jobs:?}");

    let assets = PromptAssets::bundled();
    let mut sources: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &out.prompts {
        validate_output(p.slot, &p.text, &[], &assets.lexicon).map_err(|r| anyhow::anyhow!("{r:?}: {}", p.text))?;
        *sources.entry(p.source.as_str()).or_default() += 1;
    }
    println!("{} prompts issued, all valid; by source {sources:?}", out.prompts.len());
    println!("{} journal entries written, {} provider calls", out.entries.len(), out.requests.len());
    Ok(())
}
