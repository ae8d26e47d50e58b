//! Daily health screening: temperature bands, the single-breath counting
//! test, the escalation rule and the per-day record.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ErrorKind;
use crate::lang::Language;
use crate::nlu::{count_reached, IntentFrame};
use crate::store::{collections, DocumentStore, DocumentStoreExt, Order, Query, StoreError};

/// Lowest normal reading, inclusive.
pub const NORMAL_MIN: f64 = 32.0;
/// Fever onset: `[NORMAL_MIN, HIGH_MIN)` is normal, `[HIGH_MIN, HIGH_MAX]` high.
pub const HIGH_MIN: f64 = 38.0;
pub const HIGH_MAX: f64 = 43.0;

#[derive(Debug, Error)]
pub enum ScreeningError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("day {day} is outside the {program_days}-day program")]
    DayOutOfRange { day: u32, program_days: u32 },
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ScreeningError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ScreeningError::InvalidInput(_) | ScreeningError::DayOutOfRange { .. } => {
                ErrorKind::InvalidInput
            }
            ScreeningError::Store(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureClass {
    Normal,
    High,
    Invalid,
}

pub fn classify_temperature(celsius: f64) -> Result<TemperatureClass, ScreeningError> {
    if !celsius.is_finite() {
        return Err(ScreeningError::InvalidInput(format!("temperature {celsius} is not finite")));
    }
    Ok(if (NORMAL_MIN..HIGH_MIN).contains(&celsius) {
        TemperatureClass::Normal
    } else if (HIGH_MIN..=HIGH_MAX).contains(&celsius) {
        TemperatureClass::High
    } else {
        TemperatureClass::Invalid
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BreathTestResult {
    /// Highest number reached in one breath.
    pub max_count: u32,
    pub self_report_short: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BreathEvaluation {
    pub result: BreathTestResult,
    /// The follow-up answer was neither yes nor no and should be asked again.
    pub reask: bool,
}

/// Combines the counting turn with the "do you feel out of breath?" answer.
/// Anything other than affirm counts as not short of breath; a fallback
/// answer also sets `reask`.
pub fn evaluate_breath(count_text: &str, lang: Language, follow_up: &IntentFrame) -> BreathEvaluation {
    let max_count = count_reached(count_text, lang).unwrap_or(0);
    let short = follow_up.is("affirm");
    BreathEvaluation {
        result: BreathTestResult {
            max_count,
            self_report_short: short,
        },
        reask: !short && !follow_up.is("deny"),
    }
}

/// Noteworthy events while collecting a day's record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HealthFlag {
    /// No valid temperature after the retry limit.
    TemperatureUnreadable,
    /// The user declined the breath test.
    BreathDeclined,
    /// The out-of-breath answer was unclear and asked again.
    BreathReasked,
}

/// One day's screening outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRecord")]
pub struct HealthRecord {
    pub day: u32,
    pub temperature: Option<f64>,
    pub temp_class: TemperatureClass,
    pub breath: Option<BreathTestResult>,
    pub escalated: bool,
    #[serde(default)]
    pub flags: Vec<HealthFlag>,
}

#[derive(Deserialize)]
struct RawRecord {
    day: u32,
    temperature: Option<f64>,
    temp_class: TemperatureClass,
    breath: Option<BreathTestResult>,
    escalated: bool,
    #[serde(default)]
    flags: Vec<HealthFlag>,
}

impl TryFrom<RawRecord> for HealthRecord {
    type Error = ScreeningError;

    fn try_from(r: RawRecord) -> Result<Self, Self::Error> {
        let rec = HealthRecord::new(r.day, r.temperature, r.breath, r.flags)?;
        if rec.temp_class != r.temp_class || rec.escalated != r.escalated {
            return Err(ScreeningError::InvalidInput(
                "temp_class/escalated disagree with the readings".into(),
            ));
        }
        Ok(rec)
    }
}

impl HealthRecord {
    /// Builds a record, deriving the class and the escalation bit. A
    /// missing temperature is classed Invalid.
    pub fn new(
        day: u32,
        temperature: Option<f64>,
        breath: Option<BreathTestResult>,
        flags: Vec<HealthFlag>,
    ) -> Result<Self, ScreeningError> {
        if day == 0 {
            return Err(ScreeningError::InvalidInput("day must be at least 1".into()));
        }
        let temp_class = match temperature {
            Some(t) => classify_temperature(t)?,
            None => TemperatureClass::Invalid,
        };
        let mut rec = Self {
            day,
            temperature,
            temp_class,
            breath,
            escalated: false,
            flags,
        };
        rec.escalated = needs_escalation(&rec).unwrap_or(false);
        Ok(rec)
    }
}

/// Fever or self-reported shortness of breath. The count itself does not
/// escalate.
pub fn needs_escalation(record: &HealthRecord) -> Result<bool, ScreeningError> {
    if record.temperature.is_none() && record.breath.is_none() {
        return Err(ScreeningError::InvalidInput("record has neither temperature nor breath".into()));
    }
    Ok(record.temp_class == TemperatureClass::High
        || record.breath.is_some_and(|b| b.self_report_short))
}

#[derive(Serialize, Deserialize)]
struct StoredRecord {
    user: String,
    day: u32,
    record: HealthRecord,
}

pub fn record_key(user: &str, day: u32) -> String {
    format!("{user}/{day}")
}

/// Upserts the record for `(user, record.day)`.
pub fn record_day<S: DocumentStore + ?Sized>(
    store: &S,
    user: &str,
    record: HealthRecord,
    program_days: u32,
) -> Result<HealthRecord, ScreeningError> {
    if record.day == 0 || record.day > program_days {
        return Err(ScreeningError::DayOutOfRange {
            day: record.day,
            program_days,
        });
    }
    let stored = StoredRecord {
        user: user.to_string(),
        day: record.day,
        record,
    };
    store.put_as(collections::HEALTH, &record_key(user, stored.day), &stored)?;
    Ok(stored.record)
}

/// All of a user's records, by day.
pub fn history<S: DocumentStore + ?Sized>(store: &S, user: &str) -> Result<Vec<HealthRecord>, ScreeningError> {
    let q = Query::new().eq("user", user).order_by("day", Order::Asc);
    let rows: Vec<StoredRecord> = store.query_as(collections::HEALTH, &q)?;
    Ok(rows.into_iter().map(|r| r.record).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::MemoryStore;
    use proptest::prelude::*;

    fn class(t: f64) -> TemperatureClass {
        classify_temperature(t).unwrap()
    }

    #[test]
    fn temperature_examples() {
        assert_eq!(class(36.6), TemperatureClass::Normal);
        assert_eq!(class(39.5), TemperatureClass::High);
        assert_eq!(class(45.0), TemperatureClass::Invalid);
        assert_eq!(class(38.0), TemperatureClass::High);
        assert_eq!(class(32.0), TemperatureClass::Normal);
        assert_eq!(class(43.0), TemperatureClass::High);
        assert_eq!(class(31.99), TemperatureClass::Invalid);
        assert_eq!(class(43.01), TemperatureClass::Invalid);
        assert!(classify_temperature(f64::NAN).is_err());
        assert!(classify_temperature(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn breath_examples() {
        let deny = IntentFrame::synthetic("deny");
        let affirm = IntentFrame::synthetic("affirm");
        let e = evaluate_breath("one two three four five", Language::En, &deny);
        assert_eq!(e.result, BreathTestResult { max_count: 5, self_report_short: false });
        assert!(!e.reask);
        assert!(evaluate_breath("1 2 3", Language::En, &affirm).result.self_report_short);
        let e = evaluate_breath("hmm", Language::En, &affirm);
        assert_eq!(e.result, BreathTestResult { max_count: 0, self_report_short: true });
        let e = evaluate_breath("一二三四五六", Language::Zh, &IntentFrame::fallback());
        assert_eq!(e.result.max_count, 6);
        assert!(e.reask && !e.result.self_report_short);
    }

    fn rec(class_high: bool, short: Option<bool>) -> HealthRecord {
        let t = if class_high { 39.0 } else { 36.5 };
        let breath = short.map(|s| BreathTestResult { max_count: 10, self_report_short: s });
        HealthRecord::new(1, Some(t), breath, vec![]).unwrap()
    }

    #[test]
    fn escalation_examples() {
        assert!(needs_escalation(&rec(true, None)).unwrap());
        assert!(needs_escalation(&rec(false, Some(true))).unwrap());
        assert!(!needs_escalation(&rec(false, Some(false))).unwrap());
        let empty = HealthRecord::new(1, None, None, vec![HealthFlag::TemperatureUnreadable]).unwrap();
        assert!(needs_escalation(&empty).is_err());
        assert!(!empty.escalated);
    }

    #[test]
    fn escalation_is_monotone() {
        for high in [false, true] {
            for short in [None, Some(false), Some(true)] {
                let base = needs_escalation(&rec(high, short)).unwrap();
                if !high {
                    assert!(!base || needs_escalation(&rec(true, short)).unwrap());
                }
                if short == Some(false) {
                    assert!(!base || needs_escalation(&rec(high, Some(true))).unwrap());
                }
            }
        }
    }

    #[test]
    fn record_roundtrip_rejects_inconsistent_escalation() {
        let r = rec(true, Some(false));
        let mut v = serde_json::to_value(&r).unwrap();
        assert_eq!(serde_json::from_value::<HealthRecord>(v.clone()).unwrap(), r);
        v["escalated"] = false.into();
        assert!(serde_json::from_value::<HealthRecord>(v).is_err());
    }

    #[test]
    fn history_is_sorted_and_upserted() {
        let s = MemoryStore::platform();
        assert!(history(&s, "u").unwrap().is_empty());
        let mut r3 = rec(false, Some(false));
        r3.day = 3;
        record_day(&s, "u", r3, 14).unwrap();
        record_day(&s, "u", rec(false, None), 14).unwrap();
        record_day(&s, "other", rec(true, None), 14).unwrap();
        let h = history(&s, "u").unwrap();
        assert_eq!(h.iter().map(|r| r.day).collect::<Vec<_>>(), [1, 3]);

        record_day(&s, "u", rec(true, None), 14).unwrap();
        let h = history(&s, "u").unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(h[0].temp_class, TemperatureClass::High);
    }

    #[test]
    fn day_must_be_in_program() {
        let s = MemoryStore::platform();
        let mut r = rec(false, None);
        r.day = 15;
        assert!(matches!(
            record_day(&s, "u", r, 14),
            Err(ScreeningError::DayOutOfRange { day: 15, program_days: 14 })
        ));
        assert!(HealthRecord::new(0, Some(36.0), None, vec![]).is_err());
    }

    #[test]
    fn trichotomy_sweep() {
        for i in -500..=1000 {
            let t = i as f64 / 10.0;
            let c = class(t);
            let normal = (32.0..38.0).contains(&t);
            let high = (38.0..=43.0).contains(&t);
            let want = match (normal, high) {
                (true, false) => TemperatureClass::Normal,
                (false, true) => TemperatureClass::High,
                (false, false) => TemperatureClass::Invalid,
                (true, true) => unreachable!(),
            };
            assert_eq!(c, want, "{t}");
        }
    }

    proptest! {
        #[test]
        fn classify_is_total_on_finite(t in proptest::num::f64::NORMAL | proptest::num::f64::ZERO | proptest::num::f64::SUBNORMAL) {
            prop_assert!(classify_temperature(t).is_ok());
        }

        #[test]
        fn flipping_toward_danger_never_clears_escalation(
            t in 30.0f64..45.0,
            breath in proptest::option::of((0u32..60, any::<bool>())),
        ) {
            let b = breath.map(|(n, s)| BreathTestResult { max_count: n, self_report_short: s });
            let r = HealthRecord::new(2, Some(t), b, vec![]).unwrap();
            if r.escalated {
                let hotter = HealthRecord::new(2, Some(39.0), b, vec![]).unwrap();
                prop_assert!(hotter.escalated);
                let shorter = HealthRecord::new(2, Some(t), Some(BreathTestResult {
                    max_count: b.map_or(0, |b| b.max_count),
                    self_report_short: true,
                }), vec![]).unwrap();
                prop_assert!(shorter.escalated);
            }
        }
    }
}
