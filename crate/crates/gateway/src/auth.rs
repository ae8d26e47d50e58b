//! Local accounts and bearer tokens.
//!
//! Credentials are stored as `sha256$<salt hex>$<digest hex>` where the
//! digest covers the salt followed by the password. Tokens are random,
//! held in memory and expire after a fixed lifetime.

use std::collections::HashMap;
use std::fmt::Write;

use nora_core::clock::Clock;
use parking_lot::Mutex;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::GatewayError;

pub const MIN_PASSWORD_CHARS: usize = 8;
const SALT_BYTES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthToken {
    pub token: String,
    pub user: String,
    /// Milliseconds since the Unix epoch.
    pub expires_at: u64,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn unhex(s: &str) -> Option<Vec<u8>> {
    if s.len() % 2 != 0 {
        return None;
    }
    (0..s.len())
        .step_by(2)
        .map(|i| u8::from_str_radix(s.get(i..i + 2)?, 16).ok())
        .collect()
}

fn digest(salt: &[u8], password: &str) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(password.as_bytes());
    h.finalize().to_vec()
}

pub fn validate_password(password: &str) -> Result<(), GatewayError> {
    if password.chars().count() < MIN_PASSWORD_CHARS {
        return Err(GatewayError::invalid(format!(
            "password must have at least {MIN_PASSWORD_CHARS} characters"
        )));
    }
    Ok(())
}

pub fn hash_password(password: &str) -> String {
    let mut salt = [0u8; SALT_BYTES];
    rand::thread_rng().fill_bytes(&mut salt);
    format!("sha256${}${}", hex(&salt), hex(&digest(&salt, password)))
}

pub fn verify_password(password: &str, stored: &str) -> bool {
    let mut parts = stored.split('$');
    let (Some("sha256"), Some(salt), Some(expected), None) = (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return false;
    };
    let (Some(salt), Some(expected)) = (unhex(salt), unhex(expected)) else {
        return false;
    };
    let actual = digest(&salt, password);
    actual.len() == expected.len() && actual.iter().zip(&expected).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}

/// Issued tokens and their owners.
pub struct TokenStore {
    tokens: Mutex<HashMap<String, (String, u64)>>,
    ttl_ms: u64,
    clock: Clock,
}

impl std::fmt::Debug for TokenStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TokenStore").field("ttl_ms", &self.ttl_ms).finish_non_exhaustive()
    }
}

impl TokenStore {
    pub fn new(ttl_ms: u64, clock: Clock) -> Self {
        Self {
            tokens: Mutex::new(HashMap::new()),
            ttl_ms,
            clock,
        }
    }

    pub fn issue(&self, user: &str) -> AuthToken {
        let token = uuid::Uuid::new_v4().simple().to_string();
        let expires_at = (self.clock)().saturating_add(self.ttl_ms);
        self.tokens.lock().insert(token.clone(), (user.to_string(), expires_at));
        AuthToken {
            token,
            user: user.to_string(),
            expires_at,
        }
    }

    /// The token's user. Unknown and expired tokens are rejected; expired
    /// ones are forgotten.
    pub fn verify(&self, token: &str) -> Result<String, GatewayError> {
        let mut tokens = self.tokens.lock();
        let Some((user, expires_at)) = tokens.get(token).cloned() else {
            return Err(GatewayError::unauthorized("unknown token"));
        };
        if (self.clock)() >= expires_at {
            tokens.remove(token);
            return Err(GatewayError::unauthorized("token expired"));
        }
        Ok(user)
    }

    pub fn revoke(&self, token: &str) {
        self.tokens.lock().remove(token);
    }
}
