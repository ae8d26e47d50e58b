use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivityKind {
    Exercise,
    Yoga,
    Meditation,
}

impl ActivityKind {
    pub const ALL: [ActivityKind; 3] = [ActivityKind::Exercise, ActivityKind::Yoga, ActivityKind::Meditation];

    pub fn as_str(self) -> &'static str {
        match self {
            ActivityKind::Exercise => "exercise",
            ActivityKind::Yoga => "yoga",
            ActivityKind::Meditation => "meditation",
        }
    }
}

impl fmt::Display for ActivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityChoice {
    pub kind: ActivityKind,
    pub video: String,
}

/// A user's activity settings from the dashboard.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityPreferences {
    /// Kinds to rotate through; empty means all of them.
    #[serde(default)]
    pub kinds: Vec<ActivityKind>,
    /// Videos pinned to specific program days.
    #[serde(default)]
    pub by_day: BTreeMap<u32, ActivityChoice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityRecommendation {
    pub kind: ActivityKind,
    pub video: String,
    pub day: u32,
}

/// Built-in video for a kind on a day when the user pinned none.
pub fn default_video(kind: ActivityKind, day: u32) -> String {
    format!("library/{kind}/session-{}", (day - 1) % 7 + 1)
}

/// The pinned video for `day` if there is one, otherwise the preferred
/// kinds round-robin by day (day 1 gets the first kind).
pub fn recommend_activity(prefs: &ActivityPreferences, day: u32) -> ActivityRecommendation {
    let day = day.max(1);
    if let Some(choice) = prefs.by_day.get(&day) {
        return ActivityRecommendation {
            kind: choice.kind,
            video: choice.video.clone(),
            day,
        };
    }
    let kinds: &[ActivityKind] = if prefs.kinds.is_empty() {
        &ActivityKind::ALL
    } else {
        &prefs.kinds
    };
    let kind = kinds[(day as usize - 1) % kinds.len()];
    ActivityRecommendation {
        kind,
        video: default_video(kind, day),
        day,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinned_video_wins() {
        let mut prefs = ActivityPreferences::default();
        prefs.by_day.insert(3, ActivityChoice { kind: ActivityKind::Yoga, video: "video-Y".into() });
        let r = recommend_activity(&prefs, 3);
        assert_eq!((r.kind, r.video.as_str(), r.day), (ActivityKind::Yoga, "video-Y", 3));
    }

    #[test]
    fn empty_preferences_rotate() {
        let prefs = ActivityPreferences::default();
        let kinds: Vec<_> = (1..=4).map(|d| recommend_activity(&prefs, d).kind).collect();
        assert_eq!(
            kinds,
            [ActivityKind::Exercise, ActivityKind::Yoga, ActivityKind::Meditation, ActivityKind::Exercise]
        );
    }

    #[test]
    fn singleton_list_is_constant() {
        let prefs = ActivityPreferences { kinds: vec![ActivityKind::Meditation], ..Default::default() };
        assert!((1..30).all(|d| recommend_activity(&prefs, d).kind == ActivityKind::Meditation));
    }

    #[test]
    fn preferences_roundtrip_json() {
        let mut prefs = ActivityPreferences { kinds: vec![ActivityKind::Yoga], ..Default::default() };
        prefs.by_day.insert(2, ActivityChoice { kind: ActivityKind::Exercise, video: "v".into() });
        let json = serde_json::to_string(&prefs).unwrap();
        assert_eq!(serde_json::from_str::<ActivityPreferences>(&json).unwrap(), prefs);
    }
}
