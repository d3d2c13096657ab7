use std::collections::BTreeSet;

use super::sha256_hex;

/// Lowercased words of `text`. Hyphens and apostrophes inside a word keep
/// it whole, so `self-harm` is one token and `kill-joy` never matches `kill`.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '-' || ch == '\'' || ch == '\u{2019}' {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out.into_iter()
        .map(|t| t.trim_matches(|c| c == '-' || c == '\'' || c == '\u{2019}').to_string())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Token-set Jaccard similarity. Two empty texts are identical.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let a: BTreeSet<String> = tokens(a).into_iter().collect();
    let b: BTreeSet<String> = tokens(b).into_iter().collect();
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / a.union(&b).count() as f64
}

/// Banned words and phrases, matched on whole tokens, case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SafetyLexicon {
    entries: Vec<(String, Vec<String>)>,
    hash: String,
}

impl SafetyLexicon {
    /// One entry per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .filter_map(|l| {
                let toks = tokens(l);
                (!toks.is_empty()).then(|| (l.to_lowercase(), toks))
            })
            .collect();
        Self { entries, hash: sha256_hex(text.as_bytes()) }
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(e, _)| e.as_str())
    }

    pub fn hash(&self) -> String {
        self.hash.clone()
    }

    /// First entry found in `text`, if any.
    pub fn find(&self, text: &str) -> Option<&str> {
        let toks = tokens(text);
        self.entries
            .iter()
            .find(|(_, phrase)| toks.windows(phrase.len()).any(|w| w == phrase.as_slice()))
            .map(|(e, _)| e.as_str())
    }
}
