//! Platform configuration, one TOML document.
//!
//! ```toml
//! port = 8080
//! data_dir = "data"
//! hotline = "1833 019"
//! stress_threshold = 0.5
//!
//! [program]
//! name = "quarantine"
//! days = 14
//!
//! [empathy]
//! class_set = ["happy", "sad", "angry", "neutral"]
//! fusion = { text = 0.5, audio = 0.5 }
//!
//! [[topics]]
//! id = "movies"
//! name = "Movies"
//!
//! [assets]            # all optional; shipped assets are used otherwise
//! rules_dir = "rules"          # en.rules, zh.rules
//! lexicon_dir = "lexicons"     # sentiment.en, emotion.zh, ...
//! templates_dir = "templates"  # en.toml, zh.toml
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chat::{ChatConfig, TopicDef};
use crate::dialogue::{DialogueEngine, Templates, DEFAULT_STRESS_THRESHOLD};
use crate::empathy::{EmpathyConfig, LanguageLexicons, LexiconScorer};
use crate::error::ErrorKind;
use crate::lang::Language;
use crate::nlu::Ruleset;
use crate::profile::Program;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Invalid(String),
    #[error("config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub fn kind(&self) -> ErrorKind {
        ErrorKind::InvalidInput
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssetPaths {
    pub rules_dir: Option<PathBuf>,
    pub lexicon_dir: Option<PathBuf>,
    pub templates_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlatformConfig {
    pub port: u16,
    pub data_dir: PathBuf,
    pub hotline: String,
    pub stress_threshold: f64,
    pub program: Program,
    pub empathy: EmpathyConfig,
    pub topics: Vec<TopicDef>,
    pub pseudonym_salt: String,
    /// Lifetime of login tokens.
    pub token_ttl_secs: u64,
    pub assets: AssetPaths,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        let chat = ChatConfig::default();
        Self {
            port: 8080,
            data_dir: PathBuf::from("data"),
            hotline: "your local health hotline".into(),
            stress_threshold: DEFAULT_STRESS_THRESHOLD,
            program: Program::default(),
            empathy: EmpathyConfig::default(),
            topics: chat.topics,
            pseudonym_salt: chat.pseudonym_salt,
            token_ttl_secs: 24 * 3600,
            assets: AssetPaths::default(),
        }
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })
}

impl PlatformConfig {
    pub fn parse(doc: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(doc).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut cfg = Self::parse(&read(path)?)?;
        // Relative asset paths are resolved against the config file.
        if let Some(base) = path.parent() {
            for p in [
                &mut cfg.assets.rules_dir,
                &mut cfg.assets.lexicon_dir,
                &mut cfg.assets.templates_dir,
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !(0.0..=1.0).contains(&self.stress_threshold) {
            return bad("stress_threshold must be in [0, 1]");
        }
        if self.program.days == 0 {
            return bad("program.days must be at least 1");
        }
        if self.hotline.trim().is_empty() {
            return bad("hotline is empty");
        }
        if self.token_ttl_secs == 0 {
            return bad("token_ttl_secs must be positive");
        }
        for (i, t) in self.topics.iter().enumerate() {
            if t.id.is_empty() || !t.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return bad(&format!("topic id `{}` must be ASCII letters, digits, '_' or '-'", t.id));
            }
            if self.topics[..i].iter().any(|o| o.id == t.id) {
                return bad(&format!("duplicate topic `{}`", t.id));
            }
        }
        Ok(())
    }

    pub fn chat(&self) -> ChatConfig {
        ChatConfig {
            topics: self.topics.clone(),
            pseudonym_salt: self.pseudonym_salt.clone(),
        }
    }

    pub fn ruleset(&self, lang: Language) -> Result<Ruleset, ConfigError> {
        match &self.assets.rules_dir {
            None => Ok(Ruleset::shipped(lang)),
            Some(dir) => Ruleset::parse(&read(&dir.join(format!("{}.rules", lang.code())))?)
                .map_err(|e| ConfigError::Invalid(format!("{lang} rules: {e}"))),
        }
    }

    pub fn lexicons(&self) -> Result<LexiconScorer, ConfigError> {
        let Some(dir) = &self.assets.lexicon_dir else {
            return Ok(LexiconScorer::shipped(self.empathy.class_set.clone()));
        };
        let load = |lang: Language| -> Result<LanguageLexicons, ConfigError> {
            let f = |name: &str| read(&dir.join(format!("{name}.{}", lang.code())));
            LanguageLexicons::parse(&f("sentiment")?, &f("emotion")?, &f("stress")?)
                .map_err(|e| ConfigError::Invalid(format!("{lang} lexicons: {e}")))
        };
        Ok(LexiconScorer::new(
            load(Language::En)?,
            load(Language::Zh)?,
            self.empathy.class_set.clone(),
        ))
    }

    pub fn dialogue_engine(&self) -> Result<DialogueEngine, ConfigError> {
        let templates = |lang: Language| -> Result<Templates, ConfigError> {
            match &self.assets.templates_dir {
                None => Ok(Templates::shipped(lang)),
                Some(dir) => Templates::parse(&read(&dir.join(format!("{}.toml", lang.code())))?)
                    .map_err(|e| ConfigError::Invalid(format!("{lang} templates: {e}"))),
            }
        };
        Ok(DialogueEngine::new(
            templates(Language::En)?,
            templates(Language::Zh)?,
            self.stress_threshold,
            self.hotline.clone(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empathy::FusionWeights;

    #[test]
    fn empty_document_is_defaults() {
        assert_eq!(PlatformConfig::parse("").unwrap(), PlatformConfig::default());
    }

    #[test]
    fn documented_example_parses() {
        let doc = r#"
            port = 9000
            hotline = "1833 019"
            [program]
            name = "home"
            days = 7
            [empathy]
            class_set = ["calm", "tense"]
            fusion = { text = 0.7, audio = 0.3 }
            [[topics]]
            id = "books"
            name = "Books"
        "#;
        let c = PlatformConfig::parse(doc).unwrap();
        assert_eq!(c.port, 9000);
        assert_eq!(c.program.days, 7);
        assert_eq!(c.empathy.fusion, FusionWeights::new(0.7, 0.3).unwrap());
        assert_eq!(c.chat().topics.len(), 1);
        assert_eq!(c.lexicons().unwrap().lexicons(Language::En).sentiment.class_of("love"), Some("positive"));
    }

    #[test]
    fn rejects_bad_values() {
        for doc in [
            "stress_threshold = 1.5",
            "[program]\nname='x'\ndays=0",
            "hotlin = 'typo'",
            "[empathy]\nfusion = { text = 0.7, audio = 0.7 }",
            "[empathy]\nclass_set = []",
            "[[topics]]\nid='a b'\nname='x'",
            "[[topics]]\nid='a'\nname='x'\n[[topics]]\nid='a'\nname='y'",
        ] {
            assert!(PlatformConfig::parse(doc).is_err(), "{doc}");
        }
    }

    #[test]
    fn assets_load_from_directories() {
        let dir = tempfile::tempdir().unwrap();
        let root = Path::new(env!("CARGO_MANIFEST_DIR"));
        let cfg_path = dir.path().join("nora.toml");
        std::fs::write(
            &cfg_path,
            format!(
                "[assets]\nrules_dir = {:?}\nlexicon_dir = {:?}\ntemplates_dir = \"tpl\"\n",
                root.join("rules"),
                root.join("lexicons")
            ),
        )
        .unwrap();
        std::fs::create_dir(dir.path().join("tpl")).unwrap();
        for f in ["en.toml", "zh.toml"] {
            std::fs::copy(root.join("templates").join(f), dir.path().join("tpl").join(f)).unwrap();
        }
        let c = PlatformConfig::load(&cfg_path).unwrap();
        assert_eq!(c.ruleset(Language::Zh).unwrap(), Ruleset::shipped(Language::Zh));
        assert!(c.lexicons().is_ok());
        assert!(c.dialogue_engine().is_ok());
        std::fs::remove_file(dir.path().join("tpl/zh.toml")).unwrap();
        assert!(matches!(c.dialogue_engine(), Err(ConfigError::Io { .. })));
    }
}
