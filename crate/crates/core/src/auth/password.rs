use rand::RngCore;
use sha2::{Digest, Sha256};

const SCHEME: &str = "sha256";
const ROUNDS: u32 = 1_000;

fn digest(salt: &[u8], password: &str) -> [u8; 32] {
    let mut out: [u8; 32] =
        Sha256::new().chain_update(salt).chain_update(password.as_bytes()).finalize().into();
    for _ in 1..ROUNDS {
        out = Sha256::new().chain_update(salt).chain_update(out).finalize().into();
    }
    out
}

/// Salted, iterated SHA-256, encoded as `sha256$<salt>$<digest>` in hex.
pub fn hash_password(password: &str) -> String {
    let mut salt = [0u8; 16];
    rand::rng().fill_bytes(&mut salt);
    format!("{SCHEME}${}${}", hex::encode(salt), hex::encode(digest(&salt, password)))
}

pub fn verify_password(password: &str, encoded: &str) -> bool {
    let mut parts = encoded.split('$');
    let (Some(SCHEME), Some(salt), Some(expected), None) =
        (parts.next(), parts.next(), parts.next(), parts.next())
    else {
        return false;
    };
    let (Ok(salt), Ok(expected)) = (hex::decode(salt), hex::decode(expected)) else {
        return false;
    };
    let actual = digest(&salt, password);
    // constant-time comparison
    expected.len() == actual.len()
        && expected.iter().zip(actual.iter()).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}
