use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED_KEY: &str = include_str!("../../assets/ema_key.toml");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EmaError {
    #[error("{instrument}: expected {expected} items, got {got}")]
    WrongItemCount { instrument: &'static str, expected: usize, got: usize },
    #[error("{instrument} item {item}: {value} is outside {min}..={max}")]
    OutOfRangeItem { instrument: &'static str, item: usize, value: u8, min: u8, max: u8 },
    #[error("invalid item key: {0}")]
    BadKey(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scale {
    pub items: usize,
    pub min: u8,
    pub max: u8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phq4Key {
    #[serde(flatten)]
    pub scale: Scale,
    pub anxiety: Vec<usize>,
    pub depression: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PanasKey {
    #[serde(flatten)]
    pub scale: Scale,
    pub positive: Vec<usize>,
    pub negative: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SrisKey {
    #[serde(flatten)]
    pub scale: Scale,
    pub self_reflection: Vec<usize>,
    pub insight: Vec<usize>,
    #[serde(default)]
    pub reverse: Vec<usize>,
}

/// Item layout and subscale membership of the weekly instruments. Item
/// numbers are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmaKey {
    pub phq4: Phq4Key,
    pub panas: PanasKey,
    pub maas: Scale,
    pub sris: SrisKey,
}

impl EmaKey {
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_KEY).expect("bundled EMA key is valid")
    }

    pub fn parse(text: &str) -> Result<Self, EmaError> {
        let key: EmaKey = toml::from_str(text).map_err(|e| EmaError::BadKey(e.to_string()))?;
        let check = |name: &str, items: usize, list: &[usize]| {
            if list.iter().all(|&i| (1..=items).contains(&i)) {
                Ok(())
            } else {
                Err(EmaError::BadKey(format!("{name} refers to an item outside 1..={items}")))
            }
        };
        check("phq4", key.phq4.scale.items, &[key.phq4.anxiety.as_slice(), &key.phq4.depression].concat())?;
        check("panas", key.panas.scale.items, &[key.panas.positive.as_slice(), &key.panas.negative].concat())?;
        check(
            "sris",
            key.sris.scale.items,
            &[key.sris.self_reflection.as_slice(), &key.sris.insight, &key.sris.reverse].concat(),
        )?;
        Ok(key)
    }
}

impl Default for EmaKey {
    fn default() -> Self {
        Self::bundled()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmaSubmission {
    pub week: u32,
    pub phq4: Vec<u8>,
    pub panas: Vec<u8>,
    pub sris: Vec<u8>,
    pub maas: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmaScore {
    pub phq4_total: u32,
    pub anxiety: u32,
    pub depression: u32,
    pub panas_positive: u32,
    pub panas_negative: u32,
    pub maas_mean: f64,
    pub sris_self_reflection: u32,
    pub sris_insight: u32,
}

fn check(instrument: &'static str, scale: &Scale, answers: &[u8]) -> Result<(), EmaError> {
    if answers.len() != scale.items {
        return Err(EmaError::WrongItemCount { instrument, expected: scale.items, got: answers.len() });
    }
    for (i, &v) in answers.iter().enumerate() {
        if !(scale.min..=scale.max).contains(&v) {
            return Err(EmaError::OutOfRangeItem { instrument, item: i + 1, value: v, min: scale.min, max: scale.max });
        }
    }
    Ok(())
}

fn sum(answers: &[u8], items: &[usize]) -> u32 {
    items.iter().map(|&i| answers[i - 1] as u32).sum()
}

/// Scores a complete submission. Partial or out-of-range answers are errors.
pub fn score_ema(key: &EmaKey, s: &EmaSubmission) -> Result<EmaScore, EmaError> {
    check("phq4", &key.phq4.scale, &s.phq4)?;
    check("panas", &key.panas.scale, &s.panas)?;
    check("sris", &key.sris.scale, &s.sris)?;
    check("maas", &key.maas, &s.maas)?;
    let sris: Vec<u8> = s
        .sris
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if key.sris.reverse.contains(&(i + 1)) {
                key.sris.scale.min + key.sris.scale.max - v
            } else {
                v
            }
        })
        .collect();
    Ok(EmaScore {
        phq4_total: s.phq4.iter().map(|&v| v as u32).sum(),
        anxiety: sum(&s.phq4, &key.phq4.anxiety),
        depression: sum(&s.phq4, &key.phq4.depression),
        panas_positive: sum(&s.panas, &key.panas.positive),
        panas_negative: sum(&s.panas, &key.panas.negative),
        maas_mean: s.maas.iter().map(|&v| v as f64).sum::<f64>() / s.maas.len() as f64,
        sris_self_reflection: sum(&sris, &key.sris.self_reflection),
        sris_insight: sum(&sris, &key.sris.insight),
    })
}
