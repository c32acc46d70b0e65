//! Verifier signing key and the compact-JWS envelope for result objects.

use alloc::string::String;
use alloc::vec::Vec;

use ed25519_dalek::SigningKey;
use serde_json::json;

use crate::canonical::{self, b64url_decode};
use crate::jws::{self, CompactJws};
use crate::model::VerificationResultObject;

pub const VRO_TYP: &str = "vro+jwt";

pub struct VerifierKey {
    key_id: String,
    signing: SigningKey,
}

impl core::fmt::Debug for VerifierKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("VerifierKey").field("key_id", &self.key_id).finish_non_exhaustive()
    }
}

impl VerifierKey {
    pub fn from_seed(key_id: impl Into<String>, seed: [u8; 32]) -> Self {
        Self { key_id: key_id.into(), signing: SigningKey::from_bytes(&seed) }
    }

    pub fn key_id(&self) -> &str {
        &self.key_id
    }

    pub fn public_key(&self) -> [u8; 32] {
        self.signing.verifying_key().to_bytes()
    }

    pub fn signing_key(&self) -> &SigningKey {
        &self.signing
    }
}

/// A signed result object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedVro {
    pub compact: String,
    /// Canonical payload bytes (what the payload segment encodes).
    pub payload_bytes: Vec<u8>,
    /// Lowercase hex SHA-256 of `payload_bytes`.
    pub payload_hash: String,
}

pub fn sign_vro(vro: &VerificationResultObject, key: &VerifierKey) -> SignedVro {
    let payload_bytes = canonical::to_canonical_bytes(vro).expect("result object has no floats");
    let header = json!({"alg": jws::ALG_EDDSA, "kid": key.key_id, "typ": VRO_TYP});
    let compact = jws::sign_compact(&header, &payload_bytes, &key.signing);
    let payload_hash = canonical::sha256_hex(&payload_bytes);
    SignedVro { compact, payload_bytes, payload_hash }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VroError {
    #[error("malformed result token: {0}")]
    Malformed(String),
    #[error("result signature does not verify")]
    BadSignature,
}

/// Checks a signed result token and returns its payload.
pub fn verify_vro(compact: &str, public_key: &[u8; 32]) -> Result<VerificationResultObject, VroError> {
    let token = CompactJws::parse(compact).map_err(|e| VroError::Malformed(alloc::format!("{e}")))?;
    token.ed25519_kid().map_err(|e| VroError::Malformed(alloc::format!("{e}")))?;
    if !jws::verify_ed25519(public_key, token.signing_input.as_bytes(), &token.signature) {
        return Err(VroError::BadSignature);
    }
    let payload_seg = compact.split('.').nth(1).unwrap_or_default();
    let bytes = b64url_decode(payload_seg).map_err(|_| VroError::Malformed("payload".into()))?;
    serde_json::from_slice(&bytes).map_err(|e| VroError::Malformed(alloc::format!("{e}")))
}
