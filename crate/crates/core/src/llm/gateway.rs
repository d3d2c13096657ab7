//! Live generation with retries, the pre-generation cache, and the fallback
//! cascade: live call, then cached prompt, then a canned prompt. Every
//! public entry point returns a valid prompt.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{DateTime, NaiveDate, Utc};
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{CompletionProvider, GenParams};
use crate::prompt::{
    attribute_category, compose, sha256_hex, validate_output, GeneratedPrompt, PromptAssets, PromptContext,
    PromptRequest, PromptSource, Rejection, Slot, Strategy,
};
use crate::profile::UserId;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GatewayConfig {
    /// Regenerations allowed per rejection class (provider errors are a class).
    pub retries_per_class: u32,
    pub checkin: GenParams,
    pub journal: GenParams,
    #[serde(skip)]
    pub cascade_budget: Duration,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            retries_per_class: 3,
            checkin: GenParams::checkin(),
            journal: GenParams::journal(),
            cascade_budget: Duration::from_secs(15),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CacheKey {
    pub user_id: UserId,
    pub slot: Slot,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: CacheKey,
    pub request_hash: String,
    pub prompt: GeneratedPrompt,
    pub consumed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum FailureClass {
    Provider,
    Rejected(Rejection),
}

pub struct Gateway {
    provider: Arc<dyn CompletionProvider>,
    assets: Arc<PromptAssets>,
    config: GatewayConfig,
    cache: Mutex<BTreeMap<CacheKey, CacheEntry>>,
    key_locks: Mutex<HashMap<CacheKey, Arc<Mutex<()>>>>,
    seq: AtomicU64,
}

impl Gateway {
    pub fn new(provider: Arc<dyn CompletionProvider>, assets: Arc<PromptAssets>, config: GatewayConfig) -> Self {
        Self {
            provider,
            assets,
            config,
            cache: Mutex::new(BTreeMap::new()),
            key_locks: Mutex::new(HashMap::new()),
            seq: AtomicU64::new(0),
        }
    }

    pub fn assets(&self) -> &PromptAssets {
        &self.assets
    }

    pub fn provider_name(&self) -> &str {
        self.provider.name()
    }

    fn key_lock(&self, key: &CacheKey) -> Arc<Mutex<()>> {
        self.key_locks.lock().entry(key.clone()).or_default().clone()
    }

    pub fn cached(&self, key: &CacheKey) -> Option<CacheEntry> {
        self.cache.lock().get(key).cloned()
    }

    /// Every cache entry, consumed or not, in key order.
    pub fn cache_entries(&self) -> Vec<CacheEntry> {
        self.cache.lock().values().cloned().collect()
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        &self,
        user: &UserId,
        ctx: &PromptContext,
        request: &PromptRequest,
        text: String,
        strategy: Strategy,
        source: PromptSource,
        now: DateTime<Utc>,
    ) -> GeneratedPrompt {
        let n = self.seq.fetch_add(1, Ordering::Relaxed);
        let request_hash = request.hash();
        let id_src = format!("{user}|{}|{}|{request_hash}|{n}", ctx.date, ctx.slot.as_str());
        GeneratedPrompt {
            prompt_id: sha256_hex(id_src.as_bytes())[..20].to_string(),
            user_id: user.clone(),
            date: ctx.date,
            slot: ctx.slot,
            category: attribute_category(&text, ctx.trends.as_ref(), &ctx.priorities),
            text,
            strategy,
            source,
            created_at: now,
            request_hash,
            system_hash: self.assets.system_hash(ctx.slot).to_string(),
            lexicon_hash: self.assets.hashes().lexicon.clone(),
        }
    }

    fn request_for(&self, ctx: &PromptContext) -> (PromptRequest, Strategy) {
        match compose(ctx, &self.assets) {
            Ok(r) => r,
            Err(e) => {
                // Unusable context still needs a request hash for provenance.
                tracing::warn!(error = %e, slot = ctx.slot.as_str(), "composing without full context");
                let mut fallback = ctx.clone();
                fallback.mood_score = None;
                fallback.trends.get_or_insert_with(Default::default);
                fallback.weekend.get_or_insert(crate::features::WeekendComposites {
                    greek_s: 0.0,
                    sleep_proxy_s: 0.0,
                    nights_observed: 0,
                });
                compose(&fallback, &self.assets).expect("fallback context is complete")
            }
        }
    }

    /// Calls the provider until output validates, a class exhausts its
    /// retries, or the deadline passes.
    fn live(&self, ctx: &PromptContext, request: &PromptRequest, started: Instant) -> Option<String> {
        let params = if ctx.slot.is_checkin() { self.config.checkin } else { self.config.journal };
        let mut failures: BTreeMap<FailureClass, u32> = BTreeMap::new();
        loop {
            let left = self.config.cascade_budget.saturating_sub(started.elapsed());
            if left.is_zero() {
                return None;
            }
            let call = GenParams { timeout: params.timeout.min(left), ..params };
            let class = match self.provider.generate(request, &call) {
                Ok(text) => match validate_output(ctx.slot, &text, &ctx.previous_prompts, &self.assets.lexicon) {
                    Ok(valid) => return Some(valid),
                    Err(r) => FailureClass::Rejected(r.class()),
                },
                Err(e) => {
                    tracing::debug!(error = %e, "provider call failed");
                    FailureClass::Provider
                }
            };
            let n = failures.entry(class).or_insert(0);
            *n += 1;
            if *n > self.config.retries_per_class {
                return None;
            }
        }
    }

    fn canned(&self, user: &UserId, ctx: &PromptContext, request: &PromptRequest, now: DateTime<Utc>) -> GeneratedPrompt {
        let text = self
            .assets
            .canned
            .pick(ctx.slot, ctx.priorities.top(), ctx.date, &ctx.previous_prompts)
            .to_string();
        self.build(user, ctx, request, text, Strategy::GenericFallback, PromptSource::Canned, now)
    }

    /// Generates ahead of delivery and caches the result, replacing any
    /// earlier unconsumed entry. Falls back to a canned prompt.
    pub fn pregenerate(&self, user: &UserId, ctx: &PromptContext, now: DateTime<Utc>) -> CacheEntry {
        let started = Instant::now();
        let key = CacheKey { user_id: user.clone(), slot: ctx.slot, date: ctx.date };
        let lock = self.key_lock(&key);
        let _guard = lock.lock();
        let (request, strategy) = self.request_for(ctx);
        let prompt = match self.live(ctx, &request, started) {
            Some(text) => self.build(user, ctx, &request, text, strategy, PromptSource::LlmPregenerated, now),
            None => self.canned(user, ctx, &request, now),
        };
        let entry = CacheEntry { key: key.clone(), request_hash: request.hash(), prompt, consumed: false };
        self.cache.lock().insert(key, entry.clone());
        entry
    }

    fn take_cached(&self, key: &CacheKey) -> Option<GeneratedPrompt> {
        let mut cache = self.cache.lock();
        let entry = cache.get_mut(key).filter(|e| !e.consumed)?;
        entry.consumed = true;
        Some(entry.prompt.clone())
    }

    fn mark_consumed(&self, key: &CacheKey) {
        if let Some(e) = self.cache.lock().get_mut(key) {
            e.consumed = true;
        }
    }

    /// Journal flow after the mood report: live with mood, else the cached
    /// prompt, else canned.
    pub fn realtime_prompt(&self, user: &UserId, ctx: &PromptContext, now: DateTime<Utc>) -> GeneratedPrompt {
        let started = Instant::now();
        let key = CacheKey { user_id: user.clone(), slot: ctx.slot, date: ctx.date };
        let lock = self.key_lock(&key);
        let _guard = lock.lock();
        let (request, strategy) = self.request_for(ctx);
        if let Some(text) = self.live(ctx, &request, started) {
            self.mark_consumed(&key);
            return self.build(user, ctx, &request, text, strategy, PromptSource::LlmLive, now);
        }
        if let Some(p) = self.take_cached(&key) {
            return p;
        }
        self.canned(user, ctx, &request, now)
    }

    /// Check-in delivery: the cached prompt if present, else live, else canned.
    pub fn checkin_prompt(&self, user: &UserId, ctx: &PromptContext, now: DateTime<Utc>) -> GeneratedPrompt {
        let started = Instant::now();
        let key = CacheKey { user_id: user.clone(), slot: ctx.slot, date: ctx.date };
        let lock = self.key_lock(&key);
        let _guard = lock.lock();
        if let Some(p) = self.take_cached(&key) {
            return p;
        }
        let (request, strategy) = self.request_for(ctx);
        match self.live(ctx, &request, started) {
            Some(text) => self.build(user, ctx, &request, text, strategy, PromptSource::LlmLive, now),
            None => self.canned(user, ctx, &request, now),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{Direction, Feature, FeatureTrend, TrendReport};
    use crate::llm::{FailingProvider, MockProvider};
    use crate::prompt::{StressIndex, Strategy};
    use crate::profile::PriorityRanking;

    fn ctx(slot: Slot, mood: Option<u8>) -> PromptContext {
        let trends: TrendReport = [(Feature::Walking, FeatureTrend { direction: Direction::Increase, pct_change: Some(50.0) })].into();
        PromptContext {
            date: NaiveDate::from_ymd_opt(2024, 2, 6).unwrap(),
            slot,
            mood_score: mood,
            stress_index: StressIndex::Medium,
            academic_week: 5,
            previous_prompts: vec![],
            trends: Some(trends),
            priorities: PriorityRanking::default(),
            weekend: None,
        }
    }

    fn gw(p: Arc<dyn CompletionProvider>) -> Gateway {
        Gateway::new(p, Arc::new(PromptAssets::bundled()), GatewayConfig::default())
    }

    fn user() -> UserId {
        UserId::new("u1").unwrap()
    }

    #[test]
    fn live_with_low_mood() {
        let g = gw(Arc::new(MockProvider::new(1)));
        let p = g.realtime_prompt(&user(), &ctx(Slot::WeekdayJournal, Some(2)), Utc::now());
        assert_eq!(p.source, PromptSource::LlmLive);
        assert!(matches!(p.strategy, Strategy::Gratitude | Strategy::SelfCompassion));
    }

    #[test]
    fn cascade_order() {
        let down = gw(Arc::new(FailingProvider));
        let c = ctx(Slot::WeekdayJournal, Some(4));
        let p = down.realtime_prompt(&user(), &c, Utc::now());
        assert_eq!(p.source, PromptSource::Canned);
        assert!(down.assets().canned.all().any(|t| t == p.text));

        // Cache filled while the provider was up is served when it goes down.
        let up = gw(Arc::new(MockProvider::new(2)));
        let entry = up.pregenerate(&user(), &ctx(Slot::WeekdayJournal, None), Utc::now());
        down.cache.lock().insert(entry.key.clone(), entry.clone());
        let p = down.realtime_prompt(&user(), &c, Utc::now());
        assert_eq!(p.source, PromptSource::LlmPregenerated);
        assert_eq!(p.text, entry.prompt.text);
        assert!(down.cached(&entry.key).unwrap().consumed);
        assert_eq!(down.realtime_prompt(&user(), &c, Utc::now()).source, PromptSource::Canned);
    }
}
