use std::collections::HashMap;

use serde::Deserialize;

use crate::lang::Language;

use super::activity::ActivityKind;
use super::DialogueError;

pub const EN_TEMPLATES: &str = include_str!("../../templates/en.toml");
pub const ZH_TEMPLATES: &str = include_str!("../../templates/zh.toml");

/// Every key a template file must define.
pub const KEYS: &[&str] = &[
    "intro",
    "future_plans",
    "ask_mood",
    "ask_temperature",
    "reask_temperature",
    "skip_temperature",
    "ask_breath_count",
    "ask_breath_short",
    "reask_breath_short",
    "escalate",
    "ask_gratitude",
    "offer_activity_object",
    "offer_activity",
    "reoffer_activity",
    "start_activity",
    "activity_waiting",
    "ask_feedback",
    "farewell",
];

pub const PLACEHOLDERS: &[&str] = &["kind", "hotline", "object"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Neutral,
    Empathetic,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Neutral => "neutral",
            Variant::Empathetic => "empathetic",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct Entry {
    neutral: Vec<String>,
    empathetic: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawTemplates {
    kinds: HashMap<ActivityKind, String>,
    #[serde(flatten)]
    entries: HashMap<String, Entry>,
}

/// Response templates for one language.
#[derive(Debug, Clone)]
pub struct Templates {
    entries: HashMap<String, Entry>,
    kinds: HashMap<ActivityKind, String>,
}

/// Rendered text plus the `<key>/<variant>/<index>` it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rendered {
    pub text: String,
    pub id: String,
}

fn placeholders(s: &str) -> impl Iterator<Item = &str> {
    s.match_indices('{').filter_map(move |(i, _)| {
        let rest = &s[i + 1..];
        rest.find('}').map(|j| &rest[..j])
    })
}

impl Templates {
    pub fn parse(doc: &str) -> Result<Self, DialogueError> {
        let raw: RawTemplates =
            toml::from_str(doc).map_err(|e| DialogueError::Template(e.to_string()))?;
        for key in raw.entries.keys() {
            if !KEYS.contains(&key.as_str()) {
                return Err(DialogueError::Template(format!("unknown template key `{key}`")));
            }
        }
        for key in KEYS {
            let e = raw
                .entries
                .get(*key)
                .ok_or_else(|| DialogueError::Template(format!("missing template `{key}`")))?;
            if e.neutral.is_empty() || e.empathetic.is_empty() {
                return Err(DialogueError::Template(format!("`{key}` needs both variants")));
            }
            for s in e.neutral.iter().chain(&e.empathetic) {
                if let Some(p) = placeholders(s).find(|p| !PLACEHOLDERS.contains(p)) {
                    return Err(DialogueError::Template(format!("`{key}`: unknown placeholder {{{p}}}")));
                }
            }
        }
        for k in ActivityKind::ALL {
            if !raw.kinds.contains_key(&k) {
                return Err(DialogueError::Template(format!("missing kind name for {k}")));
            }
        }
        Ok(Self {
            entries: raw.entries,
            kinds: raw.kinds,
        })
    }

    pub fn shipped(lang: Language) -> Self {
        Self::parse(match lang {
            Language::En => EN_TEMPLATES,
            Language::Zh => ZH_TEMPLATES,
        })
        .expect("shipped templates are valid")
    }

    pub fn kind_name(&self, kind: ActivityKind) -> &str {
        &self.kinds[&kind]
    }

    pub fn len(&self, key: &str, variant: Variant) -> usize {
        self.entries.get(key).map_or(0, |e| match variant {
            Variant::Neutral => e.neutral.len(),
            Variant::Empathetic => e.empathetic.len(),
        })
    }

    /// Picks entry `day mod len` of the variant list and fills placeholders.
    pub fn render(&self, key: &str, variant: Variant, day: u32, vars: &[(&str, &str)]) -> Rendered {
        let entry = &self.entries[key];
        let list = match variant {
            Variant::Neutral => &entry.neutral,
            Variant::Empathetic => &entry.empathetic,
        };
        let index = day as usize % list.len();
        let mut text = list[index].clone();
        for (name, value) in vars {
            text = text.replace(&format!("{{{name}}}"), value);
        }
        Rendered {
            text,
            id: format!("{key}/{}/{index}", variant.as_str()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_templates_load() {
        for lang in Language::ALL {
            let t = Templates::shipped(lang);
            assert!(t.len("future_plans", Variant::Neutral) >= 2);
        }
    }

    #[test]
    fn rejects_missing_and_unknown() {
        assert!(Templates::parse("[kinds]\nexercise='e'\nyoga='y'\nmeditation='m'\n").is_err());
        let bad = EN_TEMPLATES.replace("[farewell]", "[farewel]");
        assert!(Templates::parse(&bad).is_err());
        let bad = EN_TEMPLATES.replace("{hotline}", "{phone}");
        assert!(matches!(Templates::parse(&bad), Err(DialogueError::Template(m)) if m.contains("phone")));
    }

    #[test]
    fn render_rotates_and_fills() {
        let t = Templates::shipped(Language::En);
        let a = t.render("future_plans", Variant::Neutral, 2, &[]);
        let b = t.render("future_plans", Variant::Neutral, 3, &[]);
        assert_ne!(a.text, b.text);
        assert_eq!(a.id, "future_plans/neutral/2");
        let r = t.render("start_activity", Variant::Neutral, 1, &[("kind", "yoga")]);
        assert!(r.text.contains("yoga video"));
    }
}
