//! Bearer tokens for the three subject kinds (users, devices, consumers).
//!
//! Tokens are JWTs in compact serialization, signed with HMAC-SHA256 under a
//! single platform secret.

mod password;
mod token;

pub use password::{hash_password, verify_password};
pub use token::{BearerToken, TokenAuthority};

use serde::{Deserialize, Serialize};

use crate::clock::Micros;
use crate::error::{Error, Result};
use crate::model::{ConsumerId, DeviceId, Role, Store, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectKind {
    User,
    Device,
    Consumer,
}

/// Verified identity carried by a bearer token.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claims {
    #[serde(rename = "kind")]
    pub subject_kind: SubjectKind,
    #[serde(rename = "sub")]
    pub subject_id: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<Role>,
    #[serde(rename = "iat")]
    pub issued_at: u64,
    #[serde(rename = "exp", default, skip_serializing_if = "Option::is_none")]
    pub expires_at: Option<u64>,
}

impl Claims {
    pub fn user(id: UserId, role: Role, issued_at: u64) -> Self {
        Self {
            subject_kind: SubjectKind::User,
            subject_id: id.0,
            role: Some(role),
            issued_at,
            expires_at: None,
        }
    }

    pub fn device(id: DeviceId, issued_at: u64) -> Self {
        Self { subject_kind: SubjectKind::Device, subject_id: id.0, role: None, issued_at, expires_at: None }
    }

    pub fn consumer(id: ConsumerId, issued_at: u64) -> Self {
        Self {
            subject_kind: SubjectKind::Consumer,
            subject_id: id.0,
            role: None,
            issued_at,
            expires_at: None,
        }
    }

    pub fn is_well_formed(&self) -> bool {
        self.subject_id > 0 && (self.role.is_some() == (self.subject_kind == SubjectKind::User))
    }

    pub fn is_admin(&self) -> bool {
        self.subject_kind == SubjectKind::User && self.role == Some(Role::Admin)
    }

    /// The acting user, or `Unauthorized` for device and consumer tokens.
    pub fn user_id(&self) -> Result<UserId> {
        match self.subject_kind {
            SubjectKind::User => Ok(UserId(self.subject_id)),
            _ => Err(Error::Unauthorized),
        }
    }
}

/// Exchanges a username and password for a user token. Unknown users and
/// wrong passwords fail the same way.
pub fn signin(
    store: &Store,
    authority: &TokenAuthority,
    username: &str,
    password: &str,
    now: Micros,
) -> Result<BearerToken> {
    let user = store
        .find_user_by_username(username)
        .filter(|u| verify_password(password, &u.password_hash))
        .ok_or(Error::Unauthorized)?;
    Ok(authority.issue(Claims::user(user.id, user.role, now.as_secs())))
}

pub fn device_key(
    store: &Store,
    authority: &TokenAuthority,
    actor: &Claims,
    device: DeviceId,
    now: Micros,
) -> Result<BearerToken> {
    let owner = actor.user_id()?;
    let d = store.device(device)?;
    if d.owner_user_id != owner {
        return Err(Error::Forbidden);
    }
    Ok(authority.issue(Claims::device(device, now.as_secs())))
}

pub fn consumer_key(
    store: &Store,
    authority: &TokenAuthority,
    actor: &Claims,
    consumer: ConsumerId,
    now: Micros,
) -> Result<BearerToken> {
    let owner = actor.user_id()?;
    let c = store.consumer(consumer)?;
    if c.owner_user_id != owner {
        return Err(Error::Forbidden);
    }
    Ok(authority.issue(Claims::consumer(consumer, now.as_secs())))
}
