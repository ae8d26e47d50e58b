//! User accounts and settings.
//!
//! Aliases are unique platform-wide, case-insensitively. The alias claim is
//! a create-only write in the aliases collection, made before the profile
//! itself is stored.

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::dialogue::ActivityPreferences;
use crate::error::ErrorKind;
use crate::lang::Language;
use crate::store::{collections, modify, DocumentStore, DocumentStoreExt, StoreError};

pub const DEFAULT_PROGRAM_DAYS: u32 = 14;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("alias `{0}` is taken")]
    AliasTaken(String),
    #[error("unknown user `{0}`")]
    NotFound(String),
    #[error(transparent)]
    Store(#[from] StoreError),
}

impl ProfileError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            ProfileError::InvalidInput(_) => ErrorKind::InvalidInput,
            ProfileError::AliasTaken(_) => ErrorKind::Conflict,
            ProfileError::NotFound(_) => ErrorKind::NotFound,
            ProfileError::Store(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Program {
    pub name: String,
    pub days: u32,
}

impl Default for Program {
    fn default() -> Self {
        Self {
            name: "quarantine".into(),
            days: DEFAULT_PROGRAM_DAYS,
        }
    }
}

/// Stored account. Topic interests are kept with the topic subscriptions
/// (see `chat::interests`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    pub id: String,
    pub alias: String,
    pub language: Language,
    pub program: Program,
    #[serde(default)]
    pub activity: ActivityPreferences,
    /// Opaque credential hash.
    pub credential: String,
}

impl UserProfile {
    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.id.trim().is_empty() {
            return Err(ProfileError::InvalidInput("user id is empty".into()));
        }
        validate_alias(&self.alias)?;
        if self.program.days == 0 {
            return Err(ProfileError::InvalidInput("program length must be at least 1 day".into()));
        }
        if let Some(day) = self.activity.by_day.keys().find(|d| **d == 0 || **d > self.program.days) {
            return Err(ProfileError::InvalidInput(format!(
                "activity preference for day {day} is outside the program"
            )));
        }
        Ok(())
    }
}

pub fn validate_alias(alias: &str) -> Result<(), ProfileError> {
    let ok = !alias.is_empty()
        && alias.chars().count() <= 32
        && alias.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-' || c == '.');
    if ok {
        Ok(())
    } else {
        Err(ProfileError::InvalidInput(
            "alias must be 1-32 letters, digits, '_', '-' or '.'".into(),
        ))
    }
}

fn alias_key(alias: &str) -> String {
    alias.to_lowercase()
}

/// Stores a new profile after claiming its alias.
pub fn create<S: DocumentStore + ?Sized>(store: &S, profile: &UserProfile) -> Result<(), ProfileError> {
    profile.validate()?;
    match store.compare_and_put(
        collections::ALIASES,
        &alias_key(&profile.alias),
        0,
        json!({ "user": profile.id }),
    ) {
        Ok(_) => {}
        Err(StoreError::Conflict { .. }) => return Err(ProfileError::AliasTaken(profile.alias.clone())),
        Err(e) => return Err(e.into()),
    }
    store.put_as(collections::USERS, &profile.id, profile)?;
    Ok(())
}

pub fn get<S: DocumentStore + ?Sized>(store: &S, user: &str) -> Result<Option<UserProfile>, ProfileError> {
    Ok(store.get_as(collections::USERS, user)?.map(|(p, _)| p))
}

pub fn require<S: DocumentStore + ?Sized>(store: &S, user: &str) -> Result<UserProfile, ProfileError> {
    get(store, user)?.ok_or_else(|| ProfileError::NotFound(user.to_string()))
}

pub fn by_alias<S: DocumentStore + ?Sized>(store: &S, alias: &str) -> Result<Option<UserProfile>, ProfileError> {
    let Some(doc) = store.get(collections::ALIASES, &alias_key(alias))? else {
        return Ok(None);
    };
    match doc.body.get("user").and_then(|u| u.as_str()) {
        Some(user) => get(store, user),
        None => Ok(None),
    }
}

/// Applies `f` to the stored profile. The id, alias and credential cannot
/// be changed this way.
pub fn update<S, F>(store: &S, user: &str, mut f: F) -> Result<UserProfile, ProfileError>
where
    S: DocumentStore + ?Sized,
    F: FnMut(&mut UserProfile),
{
    let (body, _) = modify(store, collections::USERS, user, |cur| {
        let cur = cur.ok_or_else(|| ProfileError::NotFound(user.to_string()))?;
        let before: UserProfile = serde_json::from_value(cur.clone()).map_err(StoreError::from)?;
        let mut next = before.clone();
        f(&mut next);
        if next.id != before.id || next.alias != before.alias || next.credential != before.credential {
            return Err(ProfileError::InvalidInput("id, alias and credential are fixed".into()));
        }
        next.validate()?;
        Ok(serde_json::to_value(&next).map_err(StoreError::from)?)
    })?;
    Ok(serde_json::from_value(body).map_err(StoreError::from)?)
}
