//! Signing keys, verification keys, and signature algorithm dispatch.
//!
//! The default scheme is ed25519. The historical name `RSA-MD5` is
//! recognized for format compatibility but rejected unless legacy names
//! are explicitly enabled; with legacy names enabled it is treated as an
//! alias for the key's native scheme (the mini-PKI only carries ed25519
//! keys, so no legacy cryptography is ever performed).

use std::fmt;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use ed25519_dalek::{Signer, Verifier};
use rand::rngs::OsRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::principal::Principal;

/// Algorithm name written into certificate headers for newly signed
/// certificates.
pub const DEFAULT_SIGNATURE_ALG: &str = "ed25519";
/// Historical algorithm name, accepted only with legacy names enabled.
pub const LEGACY_SIGNATURE_ALG: &str = "RSA-MD5";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("unsupported signature algorithm {0:?}")]
    UnsupportedAlgorithm(String),
    #[error("bad key encoding: {0}")]
    BadEncoding(String),
    #[error("key file {path}: {detail}")]
    BadKeyFile { path: String, detail: String },
    #[error("io error on {path}: {detail}")]
    Io { path: String, detail: String },
}

/// Knobs for signature verification. `allow_legacy_names` admits the
/// historical `RSA-MD5` label as an alias for the default scheme.
#[derive(Debug, Clone, Copy, Default)]
pub struct CryptoPolicy {
    pub allow_legacy_names: bool,
}

impl CryptoPolicy {
    pub fn check_algorithm(&self, name: &str) -> Result<(), KeyError> {
        match name {
            DEFAULT_SIGNATURE_ALG => Ok(()),
            LEGACY_SIGNATURE_ALG if self.allow_legacy_names => Ok(()),
            other => Err(KeyError::UnsupportedAlgorithm(other.to_string())),
        }
    }
}

/// Public half of a signing key, base64-encoded in certificate text.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VerifyingKey(ed25519_dalek::VerifyingKey);

impl VerifyingKey {
    pub fn from_base64(text: &str) -> Result<Self, KeyError> {
        let bytes = BASE64
            .decode(text.trim())
            .map_err(|e| KeyError::BadEncoding(e.to_string()))?;
        let arr: [u8; 32] = bytes
            .as_slice()
            .try_into()
            .map_err(|_| KeyError::BadEncoding(format!("expected 32 key bytes, got {}", bytes.len())))?;
        let key = ed25519_dalek::VerifyingKey::from_bytes(&arr)
            .map_err(|e| KeyError::BadEncoding(e.to_string()))?;
        Ok(VerifyingKey(key))
    }

    pub fn to_base64(&self) -> String {
        BASE64.encode(self.0.as_bytes())
    }

    /// Verifies `signature` over `message` under `algorithm`.
    pub fn verify(
        &self,
        algorithm: &str,
        message: &[u8],
        signature: &SignatureValue,
        policy: &CryptoPolicy,
    ) -> Result<bool, KeyError> {
        policy.check_algorithm(algorithm)?;
        let Ok(bytes) = <[u8; 64]>::try_from(signature.0.as_slice()) else {
            return Ok(false);
        };
        let sig = ed25519_dalek::Signature::from_bytes(&bytes);
        Ok(self.0.verify(message, &sig).is_ok())
    }
}

impl fmt::Debug for VerifyingKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VerifyingKey({})", self.to_base64())
    }
}

impl TryFrom<String> for VerifyingKey {
    type Error = KeyError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        VerifyingKey::from_base64(&value)
    }
}

impl From<VerifyingKey> for String {
    fn from(key: VerifyingKey) -> String {
        key.to_base64()
    }
}

/// Raw signature bytes, base64-encoded in certificate text.
#[derive(Clone, PartialEq, Eq)]
pub struct SignatureValue(pub Vec<u8>);

impl SignatureValue {
    pub fn from_base64(text: &str) -> Result<Self, KeyError> {
        // Whitespace inside the element is tolerated (certificates wrap).
        let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        BASE64
            .decode(compact)
            .map(SignatureValue)
            .map_err(|e| KeyError::BadEncoding(e.to_string()))
    }

    pub fn to_base64(&self) -> String {
        BASE64.encode(&self.0)
    }
}

impl fmt::Debug for SignatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SignatureValue({})", self.to_base64())
    }
}

/// A principal together with its key pair; what a stakeholder, CA, or the
/// decision engine loads from disk in order to sign.
pub struct Credential {
    pub principal: Principal,
    signing: ed25519_dalek::SigningKey,
}

impl Credential {
    pub fn generate(principal: Principal) -> Self {
        Credential {
            principal,
            signing: ed25519_dalek::SigningKey::generate(&mut OsRng),
        }
    }

    pub fn from_secret_base64(principal: Principal, secret: &str) -> Result<Self, KeyError> {
        let bytes = BASE64
            .decode(secret.trim())
            .map_err(|e| KeyError::BadEncoding(e.to_string()))?;
        let arr: [u8; 32] = bytes
            .as_slice()
            .try_into()
            .map_err(|_| KeyError::BadEncoding(format!("expected 32 secret bytes, got {}", bytes.len())))?;
        Ok(Credential {
            principal,
            signing: ed25519_dalek::SigningKey::from_bytes(&arr),
        })
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        VerifyingKey(self.signing.verifying_key())
    }

    pub fn sign(&self, message: &[u8]) -> SignatureValue {
        SignatureValue(self.signing.sign(message).to_bytes().to_vec())
    }

    /// Key-file layout: one `name=value` per line, no passphrase.
    pub fn save(&self, path: &Path) -> Result<(), KeyError> {
        let text = format!(
            "user_dn={}\nca_dn={}\nalgorithm={}\nsecret={}\npublic={}\n",
            self.principal.user_dn,
            self.principal.ca_dn,
            DEFAULT_SIGNATURE_ALG,
            BASE64.encode(self.signing.to_bytes()),
            self.verifying_key().to_base64(),
        );
        std::fs::write(path, text).map_err(|e| KeyError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, KeyError> {
        let text = std::fs::read_to_string(path).map_err(|e| KeyError::Io {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        let bad = |detail: &str| KeyError::BadKeyFile {
            path: path.display().to_string(),
            detail: detail.to_string(),
        };
        let mut user_dn = None;
        let mut ca_dn = None;
        let mut secret = None;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| bad("expected name=value"))?;
            match k {
                "user_dn" => user_dn = Some(v.to_string()),
                "ca_dn" => ca_dn = Some(v.to_string()),
                "secret" => secret = Some(v.to_string()),
                "algorithm" | "public" => {}
                other => return Err(bad(&format!("unknown field {other:?}"))),
            }
        }
        let user_dn = user_dn.ok_or_else(|| bad("missing user_dn"))?;
        let ca_dn = ca_dn.ok_or_else(|| bad("missing ca_dn"))?;
        let secret = secret.ok_or_else(|| bad("missing secret"))?;
        let principal = Principal::parse(&user_dn, &ca_dn)
            .map_err(|e| bad(&e.to_string()))?;
        Credential::from_secret_base64(principal, &secret)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::principal::Dn;

    fn principal() -> Principal {
        Principal::new(
            Dn::parse("/O=example.org/CN=Test User").unwrap(),
            Dn::parse("/O=example.org/CN=ca").unwrap(),
        )
    }

    #[test]
    fn sign_verify_round_trip() {
        let cred = Credential::generate(principal());
        let sig = cred.sign(b"hello");
        let ok = cred
            .verifying_key()
            .verify(DEFAULT_SIGNATURE_ALG, b"hello", &sig, &CryptoPolicy::default())
            .unwrap();
        assert!(ok);
        let tampered = cred
            .verifying_key()
            .verify(DEFAULT_SIGNATURE_ALG, b"hellp", &sig, &CryptoPolicy::default())
            .unwrap();
        assert!(!tampered);
    }

    #[test]
    fn wrong_key_fails() {
        let a = Credential::generate(principal());
        let b = Credential::generate(principal());
        let sig = a.sign(b"msg");
        assert!(!b
            .verifying_key()
            .verify(DEFAULT_SIGNATURE_ALG, b"msg", &sig, &CryptoPolicy::default())
            .unwrap());
    }

    #[test]
    fn legacy_name_gated() {
        let cred = Credential::generate(principal());
        let sig = cred.sign(b"msg");
        let key = cred.verifying_key();
        let err = key
            .verify(LEGACY_SIGNATURE_ALG, b"msg", &sig, &CryptoPolicy::default())
            .unwrap_err();
        assert!(matches!(err, KeyError::UnsupportedAlgorithm(_)));
        let ok = key
            .verify(
                LEGACY_SIGNATURE_ALG,
                b"msg",
                &sig,
                &CryptoPolicy { allow_legacy_names: true },
            )
            .unwrap();
        assert!(ok);
    }

    #[test]
    fn key_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.key");
        let cred = Credential::generate(principal());
        cred.save(&path).unwrap();
        let loaded = Credential::load(&path).unwrap();
        assert_eq!(loaded.principal, cred.principal);
        assert_eq!(loaded.verifying_key(), cred.verifying_key());
    }
}
