use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use parking_lot::Mutex;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::{CompletionProvider, GenParams, ProviderError};
use crate::prompt::{first_word, PromptRequest, SafetyLexicon, Slot};

fn rng_for(seed: u64, key: &str, n: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    h.update(n.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

struct Parsed<'a> {
    trends: Vec<(&'a str, &'a str)>,
    previous: Vec<&'a str>,
    timing: &'a str,
}

fn parse(user: &str) -> Parsed<'_> {
    let mut trends = Vec::new();
    let mut previous = Vec::new();
    let mut timing = "day";
    let mut in_previous = false;
    for line in user.lines() {
        if let Some(rest) = line.strip_prefix("Timing: ") {
            timing = rest.trim();
        }
        if line.starts_with("Previous Responses:") {
            in_previous = true;
            continue;
        }
        if in_previous {
            match line.strip_prefix("- ") {
                Some(p) => {
                    previous.push(p);
                    continue;
                }
                None => in_previous = false,
            }
        }
        if let Some((name, rest)) = line.split_once(": ") {
            for dir in ["increase", "decrease", "stable"] {
                if rest.starts_with(dir) && rest.ends_with("%)") {
                    trends.push((name, dir));
                }
            }
        }
    }
    Parsed { trends, previous, timing }
}

// Lead-ins that read naturally before a lower-case clause.
const OPENERS: [&str; 10] = [
    "Hey,", "Quick one:", "Small nudge:", "Curious:", "Just checking:", "Friendly note:", "Heads up:", "Psst,",
    "Real talk:", "Hmm,",
];

/// Deterministic stand-in for a language model: fills templates from the
/// trend lines it finds in the request, with seeded variation per call.
pub struct MockProvider {
    seed: u64,
    calls: Mutex<HashMap<String, u64>>,
}

impl MockProvider {
    pub fn new(seed: u64) -> Self {
        Self { seed, calls: Mutex::new(HashMap::new()) }
    }

    fn rng(&self, request: &PromptRequest) -> ChaCha8Rng {
        let key = request.hash();
        let n = {
            let mut calls = self.calls.lock();
            let n = calls.entry(key.clone()).or_insert(0);
            *n += 1;
            *n
        };
        rng_for(self.seed, &key, n)
    }

    pub fn text_for(&self, request: &PromptRequest) -> String {
        let mut rng = self.rng(request);
        let p = parse(&request.user);
        // Signals already raised in earlier responses are skipped.
        let fresh: Vec<&(&str, &str)> = p.trends.iter().filter(|(n, _)| !p.previous.iter().any(|q| q.contains(n))).collect();
        let pick = fresh.iter().find(|(_, d)| *d != "stable").or(fresh.first()).copied();
        let change = |dir: &str| if dir == "increase" { "higher" } else { "lower" };
        if request.slot.is_checkin() {
            let used: Vec<String> = p.previous.iter().map(|s| first_word(s)).collect();
            let openers: Vec<&str> = OPENERS.iter().copied().filter(|o| !used.contains(&first_word(o))).collect();
            let opener = openers.choose(&mut rng).copied().unwrap_or("Hi");
            let closer = ["Feeling good about it?", "Does that sound right?", "Worth keeping up?", "Nice change, right?"]
                .choose(&mut rng)
                .unwrap();
            return match pick {
                Some((name, "stable")) => format!("{opener} your {name} held steady this {}. Does that sound right?", p.timing),
                Some((name, dir)) => format!("{opener} {name} came in {} than usual this {}. {closer}", change(dir), p.timing),
                None => format!("{opener} have you taken a little break this {}? A short pause can help.", p.timing),
            };
        }
        let theme = ["resilience", "a small win", "a challenge", "personal growth", "how you have been feeling"]
            .choose(&mut rng)
            .unwrap();
        let opener = ["Looking back", "Thinking about it", "Zooming out", "Taking a moment"].choose(&mut rng).unwrap();
        let strategy_tail = if request.user.contains("low mood") {
            if request.user.contains("grateful") {
                " What is one thing you feel grateful for?"
            } else {
                " How could you be a little kinder to yourself?"
            }
        } else {
            ""
        };
        match (request.slot, pick) {
            (Slot::WeekdayJournal, None) => format!(
                "{opener} on your day, what moment showed you {theme}?{strategy_tail} Thanks for sharing your journey!"
            ),
            (Slot::SaturdayJournal, _) | (_, None) => format!(
                "{opener} on this week, what moment showed you {theme}?{strategy_tail} Thanks for sharing your journey!"
            ),
            (Slot::SundayJournal, Some((name, dir))) => format!(
                "{opener} on the week, your {name} ran {} than usual. How did it connect with {theme}?{strategy_tail} Keep it up!",
                change(dir)
            ),
            (_, Some((name, dir))) => {
                let asks = ["What shaped that?", "How did it feel?", "What did you notice about it?", "What would you keep?"];
                format!("{opener}, your {name} came in {} than usual. {}{strategy_tail}", change(dir), asks.choose(&mut rng).unwrap())
            }
        }
    }
}

impl CompletionProvider for MockProvider {
    fn name(&self) -> &str {
        "mock"
    }

    fn generate(&self, request: &PromptRequest, _: &GenParams) -> Result<String, ProviderError> {
        Ok(self.text_for(request))
    }
}

/// Emits rule-breaking output most of the time: over-length, digits,
/// quote-wrapped, prefixed, empty, keyword-poisoned, or an error.
pub struct AdversarialProvider {
    inner: MockProvider,
    lexicon: Vec<String>,
    seed: u64,
    calls: AtomicU64,
    bad_rate: f64,
}

impl AdversarialProvider {
    pub fn new(seed: u64, lexicon: &SafetyLexicon) -> Self {
        Self {
            inner: MockProvider::new(seed),
            lexicon: lexicon.entries().map(str::to_string).collect(),
            seed,
            calls: AtomicU64::new(0),
            bad_rate: 0.6,
        }
    }

    pub fn with_bad_rate(mut self, rate: f64) -> Self {
        self.bad_rate = rate;
        self
    }
}

impl CompletionProvider for AdversarialProvider {
    fn name(&self) -> &str {
        "adversarial"
    }

    fn generate(&self, request: &PromptRequest, params: &GenParams) -> Result<String, ProviderError> {
        let n = self.calls.fetch_add(1, Ordering::Relaxed);
        let mut rng = rng_for(self.seed ^ 0xad5e, "adversarial", n);
        let good = self.inner.text_for(request);
        if !rng.random_bool(self.bad_rate) {
            return Ok(good);
        }
        Ok(match rng.random_range(0..7) {
            0 => format!("{good} {}", "Seriously, take a moment to think it all through. ".repeat(6)),
            1 => format!("{good} You hit {} places and {} steps!", rng.random_range(2..9), rng.random_range(1000..20000)),
            2 => format!("\"{good}\""),
            3 => {
                let word = self.lexicon.choose(&mut rng).cloned().unwrap_or_else(|| "kill".into());
                format!("{good} Don't let it {word} your mood.")
            }
            4 => format!("{} {good}", ["Prompt:", "Tip:", "Question:"].choose(&mut rng).unwrap()),
            5 => "  ".to_string(),
            _ => return Err(ProviderError::Unavailable(format!("injected failure {n} ({} tokens)", params.max_tokens))),
        })
    }
}

pub struct FailingProvider;

impl CompletionProvider for FailingProvider {
    fn name(&self) -> &str {
        "failing"
    }

    fn generate(&self, _: &PromptRequest, _: &GenParams) -> Result<String, ProviderError> {
        Err(ProviderError::Unavailable("provider is down".into()))
    }
}

/// Keeps a copy of every request passed to the wrapped provider.
pub struct RecordingProvider<P> {
    inner: P,
    seen: Mutex<Vec<PromptRequest>>,
}

impl<P: CompletionProvider> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self { inner, seen: Mutex::new(Vec::new()) }
    }

    pub fn requests(&self) -> Vec<PromptRequest> {
        self.seen.lock().clone()
    }
}

impl<P: CompletionProvider> CompletionProvider for RecordingProvider<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn generate(&self, request: &PromptRequest, params: &GenParams) -> Result<String, ProviderError> {
        self.seen.lock().push(request.clone());
        self.inner.generate(request, params)
    }
}
