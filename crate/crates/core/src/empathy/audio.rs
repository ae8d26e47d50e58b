use super::types::{AudioFeatures, ClassSet, EmotionDistribution};
use super::{AudioEmotionScorer, EmpathyError};

/// Pitch spread (Hz) treated as fully expressive.
const PITCH_STD_REF: f64 = 60.0;

/// Arousal/expressiveness heuristic over the acoustic summary.
///
/// Loud, varied speech leans happy; loud, flat speech leans angry; quiet,
/// flat speech leans sad; mid-level energy leans neutral. Classes outside
/// {happy, sad, angry, neutral} get a zero logit. A silent recording
/// (all energy statistics zero) yields the uniform distribution.
#[derive(Debug, Clone)]
pub struct ProsodyScorer {
    class_set: ClassSet,
}

impl ProsodyScorer {
    pub fn new(class_set: ClassSet) -> Self {
        Self { class_set }
    }
}

impl AudioEmotionScorer for ProsodyScorer {
    fn class_set(&self) -> &ClassSet {
        &self.class_set
    }

    fn score_emotion_audio(&self, f: &AudioFeatures) -> Result<EmotionDistribution, EmpathyError> {
        f.validate()?;
        if f.energy().iter().all(|e| *e == 0.0) {
            return Ok(EmotionDistribution::uniform(self.class_set.clone()));
        }
        let arousal = (0.7 * f.stats[AudioFeatures::ENERGY_MEAN]
            + 0.3 * f.stats[AudioFeatures::ENERGY_MAX])
            .clamp(0.0, 1.0);
        let spread = (f.stats[AudioFeatures::PITCH_STD].abs() / PITCH_STD_REF).clamp(0.0, 1.0);
        let logits: Vec<f64> = self
            .class_set
            .iter()
            .map(|c| match c {
                "happy" => 3.0 * arousal * spread,
                "angry" => 3.0 * arousal * (1.0 - spread),
                "sad" => 3.0 * (1.0 - arousal) * (1.0 - spread),
                "neutral" => 3.0 * (1.0 - 2.0 * (arousal - 0.5).abs()),
                _ => 0.0,
            })
            .collect();
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        EmotionDistribution::from_weights(self.class_set.clone(), &weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn features(energy: f64, pitch_std: f64) -> AudioFeatures {
        AudioFeatures {
            stats: [energy, energy / 4.0, energy, 180.0, pitch_std, 4.0],
            duration_secs: 2.0,
        }
    }

    #[test]
    fn silence_is_uniform() {
        let s = ProsodyScorer::new(ClassSet::default_set());
        let mut f = features(0.0, 30.0);
        f.stats[AudioFeatures::ENERGY_STD] = 0.0;
        let d = s.score_emotion_audio(&f).unwrap();
        assert_eq!(d, EmotionDistribution::uniform(ClassSet::default_set()));
    }

    #[test]
    fn prosody_leans_as_documented() {
        let s = ProsodyScorer::new(ClassSet::default_set());
        assert_eq!(s.score_emotion_audio(&features(0.95, 60.0)).unwrap().argmax(), "happy");
        assert_eq!(s.score_emotion_audio(&features(0.95, 0.0)).unwrap().argmax(), "angry");
        assert_eq!(s.score_emotion_audio(&features(0.02, 0.0)).unwrap().argmax(), "sad");
        assert_eq!(s.score_emotion_audio(&features(0.5, 20.0)).unwrap().argmax(), "neutral");
    }

    #[test]
    fn rejects_bad_features() {
        let s = ProsodyScorer::new(ClassSet::default_set());
        let mut f = features(0.5, 10.0);
        f.stats[3] = f64::NAN;
        assert!(matches!(s.score_emotion_audio(&f), Err(EmpathyError::InvalidInput(_))));
        let mut g = features(0.5, 10.0);
        g.duration_secs = 0.0;
        assert!(s.score_emotion_audio(&g).is_err());
    }
}
