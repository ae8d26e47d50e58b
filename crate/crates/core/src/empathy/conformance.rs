//! Contract checks any scorer implementation must pass.
//!
//! Each function runs one scorer over the given inputs and reports the
//! first violation of the score type invariants.

use crate::lang::Language;

use super::{
    AudioEmotionScorer, AudioFeatures, EmotionDistribution, EmpathyError, SentimentScorer,
    StressScorer, TextEmotionScorer, DISTRIBUTION_TOLERANCE,
};

fn check_distribution(d: &EmotionDistribution, expected_classes: &[String]) -> Result<(), String> {
    if d.class_set().as_slice() != expected_classes {
        return Err(format!("class set {:?} != {:?}", d.class_set(), expected_classes));
    }
    if d.scores().iter().any(|s| !(0.0..=1.0).contains(s)) {
        return Err(format!("score outside [0,1]: {:?}", d.scores()));
    }
    if (d.total() - 1.0).abs() > DISTRIBUTION_TOLERANCE {
        return Err(format!("scores sum to {}", d.total()));
    }
    Ok(())
}

pub fn check_sentiment<S: SentimentScorer + ?Sized>(
    scorer: &S,
    inputs: &[(&str, Language)],
) -> Result<(), String> {
    for (text, lang) in inputs {
        match scorer.score_sentiment(text, *lang) {
            Ok(s) => {
                if !(0.5..=1.0).contains(&s.confidence) {
                    return Err(format!("{text:?}: confidence {}", s.confidence));
                }
                if text.trim().is_empty() {
                    return Err("empty text was accepted".into());
                }
                let again = scorer.score_sentiment(text, *lang).map_err(|e| e.to_string())?;
                if again != s {
                    return Err(format!("{text:?}: not deterministic"));
                }
            }
            Err(EmpathyError::InvalidInput(_)) if text.trim().is_empty() => {}
            Err(e) => return Err(format!("{text:?}: {e}")),
        }
    }
    Ok(())
}

pub fn check_text_emotion<S: TextEmotionScorer + ?Sized>(
    scorer: &S,
    inputs: &[(&str, Language)],
) -> Result<(), String> {
    let classes = scorer.class_set().as_slice().to_vec();
    for (text, lang) in inputs {
        let d = scorer
            .score_emotion_text(text, *lang)
            .map_err(|e| format!("{text:?}: {e}"))?;
        check_distribution(&d, &classes).map_err(|e| format!("{text:?}: {e}"))?;
    }
    Ok(())
}

pub fn check_audio_emotion<S: AudioEmotionScorer + ?Sized>(
    scorer: &S,
    inputs: &[AudioFeatures],
) -> Result<(), String> {
    let classes = scorer.class_set().as_slice().to_vec();
    for f in inputs {
        match scorer.score_emotion_audio(f) {
            Ok(d) => {
                if f.validate().is_err() {
                    return Err(format!("{f:?}: invalid features accepted"));
                }
                check_distribution(&d, &classes).map_err(|e| format!("{f:?}: {e}"))?
            }
            Err(EmpathyError::InvalidInput(_)) if f.validate().is_err() => {}
            Err(e) => return Err(format!("{f:?}: {e}")),
        }
    }
    Ok(())
}

pub fn check_stress<S: StressScorer + ?Sized>(scorer: &S, inputs: &[(&str, Language)]) -> Result<(), String> {
    for (text, lang) in inputs {
        let v = scorer.score_stress(text, *lang).value();
        if !(0.0..=1.0).contains(&v) {
            return Err(format!("{text:?}: stress {v}"));
        }
        if text.trim().is_empty() && v != 0.0 {
            return Err(format!("empty text scored {v}"));
        }
    }
    Ok(())
}
