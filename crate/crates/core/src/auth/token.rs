use std::fmt;

use base64::engine::general_purpose::URL_SAFE_NO_PAD;
use base64::Engine;
use hmac::{Hmac, Mac};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::{Claims, SubjectKind};
use crate::clock::Micros;
use crate::error::{Error, Result};

type HmacSha256 = Hmac<Sha256>;

const HEADER_JSON: &str = r#"{"alg":"HS256","typ":"JWT"}"#;

/// JWT compact form: `base64url(header).base64url(payload).base64url(signature)`.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BearerToken(String);

impl BearerToken {
    pub fn new(raw: impl Into<String>) -> Self {
        Self(raw.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl fmt::Debug for BearerToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: String = self.0.chars().take(12).collect();
        write!(f, "BearerToken({head}…)")
    }
}

impl fmt::Display for BearerToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Deserialize)]
struct Header {
    alg: String,
    typ: String,
}

/// Issues and verifies tokens under one shared HMAC secret.
#[derive(Clone)]
pub struct TokenAuthority {
    secret: Vec<u8>,
    ttl_seconds: Option<u64>,
}

impl fmt::Debug for TokenAuthority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TokenAuthority").field("ttl_seconds", &self.ttl_seconds).finish_non_exhaustive()
    }
}

impl TokenAuthority {
    pub fn new(secret: Vec<u8>, ttl_seconds: Option<u64>) -> Self {
        Self { secret, ttl_seconds }
    }

    fn mac(&self) -> HmacSha256 {
        HmacSha256::new_from_slice(&self.secret).expect("hmac accepts keys of any length")
    }

    /// Signs `claims`. When a ttl is configured and the claims carry no expiry,
    /// one is stamped relative to `issued_at`.
    pub fn issue(&self, mut claims: Claims) -> BearerToken {
        if claims.expires_at.is_none() {
            claims.expires_at = self.ttl_seconds.map(|ttl| claims.issued_at + ttl);
        }
        let payload = serde_json::to_vec(&claims).expect("claims serialize");
        let signing_input =
            format!("{}.{}", URL_SAFE_NO_PAD.encode(HEADER_JSON), URL_SAFE_NO_PAD.encode(payload));
        let mut mac = self.mac();
        mac.update(signing_input.as_bytes());
        let sig = mac.finalize().into_bytes();
        BearerToken(format!("{signing_input}.{}", URL_SAFE_NO_PAD.encode(sig)))
    }

    pub fn verify(&self, token: &BearerToken, expected: SubjectKind, now: Micros) -> Result<Claims> {
        self.verify_str(token.as_str(), expected, now)
    }

    pub fn verify_str(&self, token: &str, expected: SubjectKind, now: Micros) -> Result<Claims> {
        let claims = self.decode(token).ok_or(Error::Unauthorized)?;
        if claims.subject_kind != expected {
            return Err(Error::Unauthorized);
        }
        if matches!(claims.expires_at, Some(exp) if now.as_secs() >= exp) {
            return Err(Error::Unauthorized);
        }
        Ok(claims)
    }

    fn decode(&self, token: &str) -> Option<Claims> {
        let mut parts = token.split('.');
        let (Some(h), Some(p), Some(s), None) = (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return None;
        };
        let sig = URL_SAFE_NO_PAD.decode(s).ok()?;
        let mut mac = self.mac();
        mac.update(h.as_bytes());
        mac.update(b".");
        mac.update(p.as_bytes());
        mac.verify_slice(&sig).ok()?;

        let header: Header = serde_json::from_slice(&URL_SAFE_NO_PAD.decode(h).ok()?).ok()?;
        if header.alg != "HS256" || header.typ != "JWT" {
            return None;
        }
        let claims: Claims = serde_json::from_slice(&URL_SAFE_NO_PAD.decode(p).ok()?).ok()?;
        claims.is_well_formed().then_some(claims)
    }
}
