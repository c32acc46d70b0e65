//! Compact JWS handling with Ed25519 (`EdDSA`) signatures.

use alloc::string::String;
use alloc::vec::Vec;

use ed25519_dalek::{Signature, Signer, SigningKey, VerifyingKey};
use serde_json::{Map, Value};

use crate::canonical::{b64url_decode, b64url_encode, value_to_canonical_bytes};

pub const ALG_EDDSA: &str = "EdDSA";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum JwsError {
    #[error("expected 3 dot-separated segments, found {0}")]
    Segments(usize),
    #[error("segment {0} is not valid base64url")]
    Base64(&'static str),
    #[error("segment {0} is not a JSON object")]
    Json(&'static str),
    #[error("unsupported algorithm {0:?}")]
    Algorithm(String),
    #[error("header has no kid")]
    MissingKid,
}

/// A parsed, unverified compact JWS.
#[derive(Debug, Clone)]
pub struct CompactJws<'a> {
    pub header: Map<String, Value>,
    pub payload: Map<String, Value>,
    pub signature: Vec<u8>,
    /// `header '.' payload` exactly as received.
    pub signing_input: &'a str,
}

impl<'a> CompactJws<'a> {
    pub fn parse(token: &'a str) -> Result<Self, JwsError> {
        let parts: Vec<&str> = token.split('.').collect();
        if parts.len() != 3 {
            return Err(JwsError::Segments(parts.len()));
        }
        let header = decode_object(parts[0], "header")?;
        let payload = decode_object(parts[1], "payload")?;
        let signature = b64url_decode(parts[2]).map_err(|_| JwsError::Base64("signature"))?;
        let signing_input = &token[..parts[0].len() + 1 + parts[1].len()];
        Ok(Self { header, payload, signature, signing_input })
    }

    /// Requires `alg = EdDSA` and returns the `kid`.
    pub fn ed25519_kid(&self) -> Result<&str, JwsError> {
        match self.header.get("alg").and_then(Value::as_str) {
            Some(ALG_EDDSA) => {}
            Some(other) => return Err(JwsError::Algorithm(other.into())),
            None => return Err(JwsError::Algorithm(String::new())),
        }
        match self.header.get("kid").and_then(Value::as_str) {
            Some(kid) if !kid.is_empty() => Ok(kid),
            _ => Err(JwsError::MissingKid),
        }
    }
}

fn decode_object(segment: &str, which: &'static str) -> Result<Map<String, Value>, JwsError> {
    let bytes = b64url_decode(segment).map_err(|_| JwsError::Base64(which))?;
    match serde_json::from_slice::<Value>(&bytes) {
        Ok(Value::Object(m)) => Ok(m),
        _ => Err(JwsError::Json(which)),
    }
}

/// Looks like `xxx.yyy.zzz` with nonempty base64url-alphabet segments.
pub fn is_compact_shape(token: &str) -> bool {
    let mut n = 0;
    for seg in token.split('.') {
        n += 1;
        if seg.is_empty()
            || !seg.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
        {
            return false;
        }
    }
    n == 3
}

/// Signs `payload` under a canonical header and returns the compact form.
pub fn sign_compact(header: &Value, payload: &[u8], key: &SigningKey) -> String {
    let header_bytes = value_to_canonical_bytes(header).expect("header has no floats");
    let mut out = b64url_encode(&header_bytes);
    out.push('.');
    out.push_str(&b64url_encode(payload));
    let sig = key.sign(out.as_bytes());
    out.push('.');
    out.push_str(&b64url_encode(&sig.to_bytes()));
    out
}

/// Ed25519 (strict) verification. Any malformed input is a failure.
pub fn verify_ed25519(public_key: &[u8; 32], message: &[u8], signature: &[u8]) -> bool {
    let Ok(vk) = VerifyingKey::from_bytes(public_key) else {
        return false;
    };
    let Ok(sig) = Signature::from_slice(signature) else {
        return false;
    };
    vk.verify_strict(message, &sig).is_ok()
}

pub fn sign_ed25519(key: &SigningKey, message: &[u8]) -> [u8; 64] {
    key.sign(message).to_bytes()
}
