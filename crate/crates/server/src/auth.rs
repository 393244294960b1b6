//! Password check against the configured user table and HMAC-signed
//! session cookies.

use chrono::Duration;
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cra_core::model::Timestamp;

pub const COOKIE: &str = "cra_session";
pub const SESSION_HOURS: i64 = 12;

type HmacSha256 = Hmac<Sha256>;

/// One entry of the configured user table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    /// Developer id used as rater id.
    pub id: String,
    /// Hex SHA-256 of the password.
    pub password_sha256: String,
    #[serde(default)]
    pub admin: bool,
}

pub fn hash_password(password: &str) -> String {
    hex::encode(Sha256::digest(password.as_bytes()))
}

/// Compares digests without short-circuiting on the first differing byte.
fn same(a: &[u8], b: &[u8]) -> bool {
    a.len() == b.len() && a.iter().zip(b).fold(0u8, |acc, (x, y)| acc | (x ^ y)) == 0
}

pub fn verify_password<'a>(users: &'a [User], id: &str, password: &str) -> Option<&'a User> {
    let given = hash_password(password);
    users
        .iter()
        .find(|u| u.id == id)
        .filter(|u| same(u.password_sha256.to_ascii_lowercase().as_bytes(), given.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub user_id: String,
    pub expires: i64,
    /// Whole signed token, used to seed the labeling order.
    pub token: String,
}

impl Session {
    pub fn seed(&self) -> u64 {
        let d = Sha256::digest(self.token.as_bytes());
        u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
    }
}

fn sign(key: &[u8], payload: &str) -> String {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    mac.update(payload.as_bytes());
    hex::encode(mac.finalize().into_bytes())
}

/// `<hex user id>.<expiry unix secs>.<hex hmac>`
pub fn issue(key: &[u8], user_id: &str, now: Timestamp) -> String {
    let payload = format!("{}.{}", hex::encode(user_id), (now + Duration::hours(SESSION_HOURS)).timestamp());
    let mac = sign(key, &payload);
    format!("{payload}.{mac}")
}

pub fn verify(key: &[u8], token: &str, now: Timestamp) -> Option<Session> {
    let (payload, mac) = token.rsplit_once('.')?;
    if !same(sign(key, payload).as_bytes(), mac.as_bytes()) {
        return None;
    }
    let (user, expires) = payload.split_once('.')?;
    let expires: i64 = expires.parse().ok()?;
    if now.timestamp() >= expires {
        return None;
    }
    let user_id = String::from_utf8(hex::decode(user).ok()?).ok()?;
    Some(Session {
        user_id,
        expires,
        token: token.to_string(),
    })
}

/// Value of the session cookie in a `Cookie` header.
pub fn cookie_value(header: &str) -> Option<&str> {
    header
        .split(';')
        .map(str::trim)
        .find_map(|kv| kv.strip_prefix(COOKIE).and_then(|r| r.strip_prefix('=')))
}
