//! Delegation-grant adapters for the SD-JWT and JSON-LD encodings. Both
//! produce the same [`DelegationGrant`] model; only the proof differs.
//!
//! SD-JWT support is the minimal subset: an issuer-signed JWS, followed by
//! zero or more `~`-separated disclosures of top-level claims hashed with
//! SHA-256. There is no key-binding JWT segment.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde_json::{Map, Value};

use super::{grant_shape, opt_status, req_int, req_str, ArtifactShape, FormatError};
use crate::canonical::{b64url_decode, b64url_encode, sha256};
use crate::jws::CompactJws;
use crate::model::{DelegationGrant, ProofKind, ProofObject};
use crate::scope::Scope;

/// Members with a dedicated meaning; everything else is preserved as a
/// constraint.
const GRANT_MEMBERS: [&str; 9] = ["jti", "iss", "sub", "scope", "nbf", "exp", "kb", "status", "cst"];
const ENVELOPE_MEMBERS: [&str; 6] = ["_sd", "_sd_alg", "@context", "type", "proof", "id"];

/// Digest of one disclosure string as it appears in the `_sd` array.
pub fn sd_jwt_digest(disclosure: &str) -> String {
    b64url_encode(&sha256(disclosure.as_bytes()))
}

/// Encodes `[salt, name, value]` as a disclosure string.
pub fn sd_jwt_disclosure(salt: &str, name: &str, value: &Value) -> String {
    let arr = Value::Array(alloc::vec![Value::from(salt), Value::from(name), value.clone()]);
    b64url_encode(&serde_json::to_vec(&arr).expect("json"))
}

fn map_claims(
    m: &Map<String, Value>,
    ctx: &str,
    proof: ProofObject,
) -> Result<DelegationGrant, FormatError> {
    let grant_id = req_str(m, "jti", ctx)?;
    let issuer = req_str(m, "iss", ctx)?;
    let subject = req_str(m, "sub", ctx)?;
    let scope_err = || FormatError(format!("{ctx}.scope"));
    let perms = m.get("scope").and_then(Value::as_array).ok_or_else(scope_err)?;
    let perms: Vec<&str> = perms.iter().map(Value::as_str).collect::<Option<_>>().ok_or_else(scope_err)?;
    let scope = Scope::new(perms).map_err(|_| scope_err())?;
    let not_before = req_int(m, "nbf", ctx)?;
    let not_after = req_int(m, "exp", ctx)?;
    let key_binding = req_str(m, "kb", ctx)?;
    let status_ref = opt_status(m, "status", "list", "idx", ctx)?;

    let mut constraints = BTreeMap::new();
    match m.get("cst") {
        None => {}
        Some(Value::Object(c)) => {
            for (k, v) in c {
                constraints.insert(k.clone(), constraint_string(v));
            }
        }
        Some(_) => return Err(FormatError(format!("{ctx}.cst"))),
    }
    for (k, v) in m {
        if GRANT_MEMBERS.contains(&k.as_str()) || ENVELOPE_MEMBERS.contains(&k.as_str()) {
            continue;
        }
        constraints.entry(k.clone()).or_insert_with(|| constraint_string(v));
    }

    let grant = DelegationGrant {
        grant_id: grant_id.into(),
        issuer: issuer.into(),
        subject: subject.into(),
        scope,
        not_before,
        not_after,
        key_binding: key_binding.into(),
        status_ref,
        proof,
        constraints,
    };
    if let Some(field) = grant.invariant_violation() {
        return Err(FormatError(format!("{ctx}: {field}")));
    }
    Ok(grant)
}

fn constraint_string(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => String::from_utf8(crate::canonical::value_to_canonical_bytes(other).unwrap_or_default())
            .unwrap_or_default(),
    }
}

/// Parses an SD-JWT encoded grant, checking every disclosure against the
/// digests the issuer signed.
pub fn parse_dg_sd_jwt(token: &str) -> Result<DelegationGrant, FormatError> {
    let ctx = "dg_sd_jwt";
    let mut segments = token.split('~');
    let jws_part = segments.next().unwrap_or_default();
    let disclosures: Vec<&str> = segments.collect();
    let jws = CompactJws::parse(jws_part).map_err(|e| FormatError(format!("{ctx}: {e}")))?;
    let key_id = jws.ed25519_kid().map_err(|e| FormatError(format!("{ctx}: {e}")))?;

    let mut claims = jws.payload.clone();
    if let Some(alg) = claims.get("_sd_alg") {
        if alg.as_str() != Some("sha-256") {
            return Err(FormatError(format!("{ctx}._sd_alg")));
        }
    }
    let digests: BTreeSet<&str> = match jws.payload.get("_sd") {
        None => BTreeSet::new(),
        Some(Value::Array(a)) => a
            .iter()
            .map(Value::as_str)
            .collect::<Option<_>>()
            .ok_or_else(|| FormatError(format!("{ctx}._sd")))?,
        Some(_) => return Err(FormatError(format!("{ctx}._sd"))),
    };

    let mut seen = BTreeSet::new();
    let last = disclosures.len().saturating_sub(1);
    for (i, d) in disclosures.iter().enumerate() {
        if d.is_empty() {
            // only the trailing separator may be empty
            if i == last {
                continue;
            }
            return Err(FormatError(format!("{ctx}.disclosure")));
        }
        let digest = sd_jwt_digest(d);
        if !digests.contains(digest.as_str()) {
            return Err(FormatError(format!("{ctx}.disclosure_digest")));
        }
        if !seen.insert(digest) {
            return Err(FormatError(format!("{ctx}.disclosure_duplicate")));
        }
        let raw = b64url_decode(d).map_err(|_| FormatError(format!("{ctx}.disclosure")))?;
        let (name, value) = match serde_json::from_slice::<Value>(&raw) {
            Ok(Value::Array(mut a)) if a.len() == 3 && a[0].is_string() && a[1].is_string() => {
                let value = a.pop().unwrap_or_default();
                let name = a.pop().and_then(|n| n.as_str().map(String::from)).unwrap_or_default();
                (name, value)
            }
            _ => return Err(FormatError(format!("{ctx}.disclosure"))),
        };
        if name.starts_with('_') || claims.contains_key(&name) {
            return Err(FormatError(format!("{ctx}.disclosure_name")));
        }
        claims.insert(name, value);
    }

    let proof = ProofObject {
        kind: ProofKind::SdJwt,
        key_id: key_id.into(),
        signature: jws.signature.clone(),
        signed_payload: jws.signing_input.as_bytes().to_vec(),
    };
    map_claims(&claims, ctx, proof)
}

/// Parses a JSON-LD grant document. The proof is kept as `LD_STUB`.
pub fn parse_dg_ld(doc: &Value) -> Result<DelegationGrant, FormatError> {
    let ctx = "dg_ld";
    let m = doc.as_object().ok_or_else(|| FormatError::new("dg_ld.document"))?;
    let proof = m
        .get("proof")
        .and_then(Value::as_object)
        .ok_or_else(|| FormatError::new("dg_ld.proof"))?;
    let key_id = req_str(proof, "verificationMethod", "dg_ld.proof")?;
    let signature = b64url_decode(req_str(proof, "proofValue", "dg_ld.proof")?)
        .map_err(|_| FormatError::new("dg_ld.proof.proofValue"))?;
    let proof = ProofObject {
        kind: ProofKind::LdStub,
        key_id: key_id.into(),
        signature,
        signed_payload: Vec::new(),
    };
    map_claims(m, ctx, proof)
}

/// Dispatches on token shape.
pub fn parse_dg(token: &Value) -> Result<DelegationGrant, FormatError> {
    match (grant_shape(token), token) {
        (Some(ArtifactShape::SdJwt), Value::String(s)) => parse_dg_sd_jwt(s),
        (Some(ArtifactShape::LdGrant), doc) => parse_dg_ld(doc),
        _ => Err(FormatError::new("chain_token.unknown_shape")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jws::sign_compact;
    use ed25519_dalek::SigningKey;
    use serde_json::json;

    fn key() -> SigningKey {
        SigningKey::from_bytes(&[6u8; 32])
    }

    fn claims() -> Value {
        json!({
            "jti": "dg-1", "iss": "did:example:alice", "sub": "did:example:agent-1",
            "scope": ["doc:read"], "nbf": 100, "exp": 200, "kb": "agent-key-1",
            "status": {"list": "status:grants", "idx": 1},
            "cst": {"max_depth_hint": "2"}
        })
    }

    fn sd_jwt(payload: &Value, disclosures: &[String]) -> String {
        let mut t = sign_compact(
            &json!({"alg": "EdDSA", "kid": "alice-key-1", "typ": "dg+sd-jwt"}),
            &serde_json::to_vec(payload).unwrap(),
            &key(),
        );
        for d in disclosures {
            t.push('~');
            t.push_str(d);
        }
        t.push('~');
        t
    }

    #[test]
    fn plain_grant_maps_fields() {
        let g = parse_dg_sd_jwt(&sd_jwt(&claims(), &[])).unwrap();
        assert_eq!(g.scope, Scope::new(["doc:read"]).unwrap());
        assert_eq!(g.key_binding, "agent-key-1");
        assert_eq!(g.constraints.get("max_depth_hint").map(String::as_str), Some("2"));
        assert_eq!(g.proof.kind, ProofKind::SdJwt);
        assert_eq!(g.proof.key_id, "alice-key-1");
    }

    #[test]
    fn disclosed_claims_are_merged() {
        let d = sd_jwt_disclosure("salt-1", "purpose", &json!("quarterly-report"));
        let mut p = claims();
        p["_sd"] = json!([sd_jwt_digest(&d)]);
        p["_sd_alg"] = json!("sha-256");
        let tok = sd_jwt(&p, &[d]);
        let g = parse_dg_sd_jwt(&tok).unwrap();
        assert_eq!(g.constraints.get("purpose").map(String::as_str), Some("quarterly-report"));
        assert!(tok.as_bytes().starts_with(&g.proof.signed_payload));
    }

    #[test]
    fn tampered_disclosure_rejected() {
        let d = sd_jwt_disclosure("salt-1", "purpose", &json!("quarterly-report"));
        let mut p = claims();
        p["_sd"] = json!([sd_jwt_digest(&d)]);
        let forged = sd_jwt_disclosure("salt-1", "purpose", &json!("anything"));
        let err = parse_dg_sd_jwt(&sd_jwt(&p, &[forged])).unwrap_err();
        assert_eq!(err.0, "dg_sd_jwt.disclosure_digest");
    }

    #[test]
    fn missing_required_members() {
        for member in ["kb", "scope", "jti", "iss", "sub", "nbf", "exp"] {
            let mut p = claims();
            p.as_object_mut().unwrap().remove(member);
            assert_eq!(parse_dg_sd_jwt(&sd_jwt(&p, &[])).unwrap_err().0, format!("dg_sd_jwt.{member}"));
        }
    }

    fn ld_grant() -> Value {
        let mut doc = claims();
        let m = doc.as_object_mut().unwrap();
        m.insert("@context".into(), json!(["https://example.org/delegation/v1"]));
        m.insert("type".into(), json!(["DelegationGrant"]));
        m.insert("proof".into(), json!({
            "type": "Ed25519Signature2020", "verificationMethod": "alice-key-1",
            "proofValue": b64url_encode(&[1u8; 64])
        }));
        doc
    }

    #[test]
    fn ld_twin_matches_sd_jwt() {
        let a = parse_dg_sd_jwt(&sd_jwt(&claims(), &[])).unwrap();
        let mut b = parse_dg_ld(&ld_grant()).unwrap();
        assert_eq!(b.proof.kind, ProofKind::LdStub);
        b.proof = a.proof.clone();
        assert_eq!(a, b);
    }

    #[test]
    fn ld_invariants() {
        let mut d = ld_grant();
        d["sub"] = d["iss"].clone();
        assert_eq!(parse_dg_ld(&d).unwrap_err().0, "dg_ld: grant.subject");
        let mut d = ld_grant();
        d.as_object_mut().unwrap().remove("scope");
        assert_eq!(parse_dg_ld(&d).unwrap_err().0, "dg_ld.scope");
        let mut d = ld_grant();
        d["nbf"] = json!(300);
        assert_eq!(parse_dg_ld(&d).unwrap_err().0, "dg_ld: grant.validity");
    }
}
