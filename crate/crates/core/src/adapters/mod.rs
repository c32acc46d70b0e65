//! Protocol adapters: profile detection and parsing of native artifacts
//! into canonical types.
//!
//! Adapters only parse and map. They never check signatures and never
//! rewrite signed bytes; `proof.signed_payload` is always a verbatim slice
//! of the input token.

mod dg;
mod vc;

pub use dg::{parse_dg, parse_dg_ld, parse_dg_sd_jwt, sd_jwt_disclosure, sd_jwt_digest};
pub use vc::{parse_credential, parse_vc_jwt, parse_vc_ld};

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::jws::is_compact_shape;
use crate::model::{ProfileTag, StatusRef, UnixTime};

/// Structural failure while reading an artifact. Always maps to `E100`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{0}")]
pub struct FormatError(pub String);

impl FormatError {
    pub(crate) fn new(detail: impl Into<String>) -> Self {
        Self(detail.into())
    }
}

/// Request body accepted by the gateway.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationRequest {
    pub request_id: String,
    /// Compact VC-JWT string or VC-LD JSON document.
    pub presentation: Value,
    /// SD-JWT strings or LD grant documents, root first.
    #[serde(default)]
    pub chain_tokens: Vec<Value>,
    pub policy_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presenter_key_id: Option<String>,
    /// base64url Ed25519 signature over the UTF-8 request id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub presenter_signature: Option<String>,
}

/// Shape of a single artifact.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactShape {
    /// Compact JWS (VC-JWT).
    Jws,
    /// Issuer-signed JWS with optional `~` disclosures.
    SdJwt,
    /// JSON-LD credential document.
    LdCredential,
    /// JSON-LD delegation grant document.
    LdGrant,
}

fn is_sd_jwt_shape(token: &str) -> bool {
    let mut parts = token.split('~');
    let jws = parts.next().unwrap_or_default();
    is_compact_shape(jws) && token.contains('~')
}

pub fn presentation_shape(p: &Value) -> Option<ArtifactShape> {
    match p {
        Value::String(s) if is_compact_shape(s) => Some(ArtifactShape::Jws),
        Value::Object(m) if m.contains_key("@context") && m.contains_key("credentialSubject") => {
            Some(ArtifactShape::LdCredential)
        }
        _ => None,
    }
}

/// A grant token is an SD-JWT (compact, with or without disclosures) or an
/// LD document carrying `@context` and `proof`.
pub fn grant_shape(t: &Value) -> Option<ArtifactShape> {
    match t {
        Value::String(s) if is_compact_shape(s) || is_sd_jwt_shape(s) => Some(ArtifactShape::SdJwt),
        Value::Object(m) if m.contains_key("@context") && m.contains_key("proof") => {
            Some(ArtifactShape::LdGrant)
        }
        _ => None,
    }
}

/// Picks the profile from artifact shapes alone.
pub fn detect_profile(request: &VerificationRequest) -> Result<ProfileTag, FormatError> {
    let pres = presentation_shape(&request.presentation)
        .ok_or_else(|| FormatError::new("presentation.unknown_shape"))?;
    let mut all_sd = true;
    let mut all_ld = true;
    for t in &request.chain_tokens {
        match grant_shape(t).ok_or_else(|| FormatError::new("chain_token.unknown_shape"))? {
            ArtifactShape::SdJwt => all_ld = false,
            _ => all_sd = false,
        }
    }
    Ok(match pres {
        ArtifactShape::Jws if all_sd => ProfileTag::Federated,
        ArtifactShape::LdCredential if all_ld => ProfileTag::Ssi,
        _ => ProfileTag::Hybrid,
    })
}

/// Returns the `vp_token` member of an OIDC4VP response.
pub fn extract_vp_token(envelope: &Value) -> Result<Value, FormatError> {
    envelope
        .as_object()
        .and_then(|m| m.get("vp_token"))
        .filter(|v| !v.is_null())
        .cloned()
        .ok_or_else(|| FormatError::new("envelope.vp_token"))
}

// Claim readers shared by the credential and grant adapters.

pub(crate) fn req_str<'a>(m: &'a Map<String, Value>, key: &str, ctx: &str) -> Result<&'a str, FormatError> {
    match m.get(key) {
        Some(Value::String(s)) if !s.is_empty() => Ok(s),
        _ => Err(FormatError(alloc::format!("{ctx}.{key}"))),
    }
}

pub(crate) fn req_int(m: &Map<String, Value>, key: &str, ctx: &str) -> Result<UnixTime, FormatError> {
    m.get(key)
        .and_then(Value::as_i64)
        .ok_or_else(|| FormatError(alloc::format!("{ctx}.{key}")))
}

/// `{"list": .., "idx": ..}`; the index may be an integer or a decimal string.
pub(crate) fn opt_status(
    m: &Map<String, Value>,
    key: &str,
    list_key: &str,
    idx_key: &str,
    ctx: &str,
) -> Result<Option<StatusRef>, FormatError> {
    let Some(v) = m.get(key) else { return Ok(None) };
    let err = || FormatError(alloc::format!("{ctx}.{key}"));
    let obj = v.as_object().ok_or_else(err)?;
    let list_id = obj.get(list_key).and_then(Value::as_str).filter(|s| !s.is_empty()).ok_or_else(err)?;
    let index = match obj.get(idx_key) {
        Some(Value::Number(n)) => n.as_u64().ok_or_else(err)?,
        Some(Value::String(s)) => s.parse::<u64>().map_err(|_| err())?,
        _ => return Err(err()),
    };
    Ok(Some(StatusRef { list_id: list_id.into(), index }))
}

pub(crate) fn cnf_kid(m: &Map<String, Value>, ctx: &str) -> Result<Option<String>, FormatError> {
    match m.get("cnf") {
        None => Ok(None),
        Some(Value::Object(c)) => match c.get("kid") {
            Some(Value::String(k)) if !k.is_empty() => Ok(Some(k.clone())),
            _ => Err(FormatError(alloc::format!("{ctx}.cnf"))),
        },
        Some(_) => Err(FormatError(alloc::format!("{ctx}.cnf"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use serde_json::json;

    fn req(presentation: Value, chain: Vec<Value>) -> VerificationRequest {
        VerificationRequest {
            request_id: "r".into(),
            presentation,
            chain_tokens: chain,
            policy_id: "p".into(),
            presenter_key_id: None,
            presenter_signature: None,
        }
    }

    fn ld_vc() -> Value {
        json!({"@context": ["https://www.w3.org/2018/credentials/v1"], "credentialSubject": {"id": "x"}})
    }

    fn ld_dg() -> Value {
        json!({"@context": ["x"], "proof": {}})
    }

    #[test]
    fn federated_shapes() {
        assert_eq!(detect_profile(&req(json!("aa.bb.cc"), vec![])), Ok(ProfileTag::Federated));
        assert_eq!(
            detect_profile(&req(json!("aa.bb.cc"), vec![json!("aa.bb.cc~"), json!("aa.bb.cc~dd~")])),
            Ok(ProfileTag::Federated)
        );
    }

    #[test]
    fn ssi_and_hybrid_shapes() {
        assert_eq!(detect_profile(&req(ld_vc(), vec![ld_dg()])), Ok(ProfileTag::Ssi));
        assert_eq!(detect_profile(&req(ld_vc(), vec![])), Ok(ProfileTag::Ssi));
        assert_eq!(detect_profile(&req(ld_vc(), vec![json!("aa.bb.cc~")])), Ok(ProfileTag::Hybrid));
        assert_eq!(detect_profile(&req(json!("aa.bb.cc"), vec![ld_dg()])), Ok(ProfileTag::Hybrid));
        assert_eq!(
            detect_profile(&req(ld_vc(), vec![ld_dg(), json!("aa.bb.cc")])),
            Ok(ProfileTag::Hybrid)
        );
    }

    #[test]
    fn unknown_shapes() {
        assert!(detect_profile(&req(json!("aa.bb"), vec![])).is_err());
        assert!(detect_profile(&req(json!(42), vec![])).is_err());
        assert!(detect_profile(&req(json!({"credentialSubject": {}}), vec![])).is_err());
        assert!(detect_profile(&req(json!("aa.bb.cc"), vec![json!(1)])).is_err());
    }

    #[test]
    fn vp_token_extraction() {
        assert_eq!(extract_vp_token(&json!({"vp_token": "a.b.c"})), Ok(json!("a.b.c")));
        assert_eq!(extract_vp_token(&json!({})), Err(FormatError::new("envelope.vp_token")));
        assert!(extract_vp_token(&json!("x")).is_err());
    }
}
