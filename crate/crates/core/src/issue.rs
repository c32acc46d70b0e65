//! Issuer-side encoders for the artifact formats the adapters read. Used to
//! produce fixtures and test corpora.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use ed25519_dalek::SigningKey;
use serde_json::{json, Map, Value};
use time::OffsetDateTime;

use crate::adapters::{sd_jwt_digest, sd_jwt_disclosure};
use crate::canonical::{b64url_encode, sha256, value_to_canonical_bytes};
use crate::jws::{sign_compact, sign_ed25519, ALG_EDDSA};
use crate::model::{Scalar, StatusRef, UnixTime};
use crate::scope::Scope;

pub const CREDENTIALS_V1_CONTEXT: &str = "https://www.w3.org/2018/credentials/v1";
pub const DELEGATION_CONTEXT: &str = "https://w3id.org/delegation-grant/v1";
pub const LD_PROOF_TYPE: &str = "Ed25519Signature2020";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialTemplate {
    pub id: String,
    pub issuer: String,
    pub subject: String,
    pub holder_key_id: Option<String>,
    pub claims: BTreeMap<String, Scalar>,
    pub issued_at: UnixTime,
    pub expires_at: UnixTime,
    pub status_ref: Option<StatusRef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrantTemplate {
    pub grant_id: String,
    pub issuer: String,
    pub subject: String,
    pub scope: Scope,
    pub not_before: UnixTime,
    pub not_after: UnixTime,
    pub key_binding: String,
    pub status_ref: Option<StatusRef>,
    pub constraints: BTreeMap<String, String>,
}

fn scalar_json(s: &Scalar) -> Value {
    match s {
        Scalar::Int(i) => json!(i),
        Scalar::Str(v) => json!(v),
    }
}

fn rfc3339(t: UnixTime) -> String {
    OffsetDateTime::from_unix_timestamp(t)
        .map(|d| {
            format!(
                "{:04}-{:02}-{:02}T{:02}:{:02}:{:02}Z",
                d.year(),
                u8::from(d.month()),
                d.day(),
                d.hour(),
                d.minute(),
                d.second()
            )
        })
        .unwrap_or_default()
}

pub fn jws_header(key_id: &str, typ: &str) -> Value {
    json!({"alg": ALG_EDDSA, "kid": key_id, "typ": typ})
}

/// Payload claims of a VC-JWT.
pub fn vc_jwt_claims(t: &CredentialTemplate) -> Value {
    let mut p = Map::new();
    p.insert("iss".into(), json!(t.issuer));
    p.insert("sub".into(), json!(t.subject));
    p.insert("iat".into(), json!(t.issued_at));
    p.insert("exp".into(), json!(t.expires_at));
    p.insert("jti".into(), json!(t.id));
    if let Some(k) = &t.holder_key_id {
        p.insert("cnf".into(), json!({"kid": k}));
    }
    if let Some(r) = &t.status_ref {
        p.insert("status".into(), json!({"list": r.list_id, "idx": r.index}));
    }
    let vc: Map<String, Value> = t.claims.iter().map(|(k, v)| (k.clone(), scalar_json(v))).collect();
    p.insert("vc".into(), Value::Object(vc));
    Value::Object(p)
}

pub fn issue_vc_jwt(t: &CredentialTemplate, key_id: &str, key: &SigningKey) -> String {
    let payload = value_to_canonical_bytes(&vc_jwt_claims(t)).expect("integers only");
    sign_compact(&jws_header(key_id, "vc+jwt"), &payload, key)
}

fn ld_proof(doc: &Value, key_id: &str, key: &SigningKey, created: UnixTime) -> Value {
    let bytes = value_to_canonical_bytes(doc).expect("integers only");
    let sig = sign_ed25519(key, &bytes);
    json!({
        "type": LD_PROOF_TYPE,
        "created": rfc3339(created),
        "proofPurpose": "assertionMethod",
        "verificationMethod": key_id,
        "proofValue": b64url_encode(&sig),
    })
}

/// A JSON-LD credential carrying the same claims as [`issue_vc_jwt`].
pub fn issue_vc_ld(t: &CredentialTemplate, key_id: &str, key: &SigningKey) -> Value {
    let mut subject = Map::new();
    subject.insert("id".into(), json!(t.subject));
    for (k, v) in &t.claims {
        subject.insert(k.clone(), scalar_json(v));
    }
    let mut doc = Map::new();
    doc.insert("@context".into(), json!([CREDENTIALS_V1_CONTEXT]));
    doc.insert("id".into(), json!(t.id));
    doc.insert("type".into(), json!(["VerifiableCredential"]));
    doc.insert("issuer".into(), json!({"id": t.issuer}));
    doc.insert("issuanceDate".into(), json!(rfc3339(t.issued_at)));
    doc.insert("expirationDate".into(), json!(rfc3339(t.expires_at)));
    doc.insert("credentialSubject".into(), Value::Object(subject));
    if let Some(k) = &t.holder_key_id {
        doc.insert("cnf".into(), json!({"kid": k}));
    }
    if let Some(r) = &t.status_ref {
        doc.insert(
            "credentialStatus".into(),
            json!({
                "type": "StatusList2021Entry",
                "statusPurpose": "revocation",
                "statusListCredential": r.list_id,
                "statusListIndex": alloc::format!("{}", r.index),
            }),
        );
    }
    let mut doc = Value::Object(doc);
    let proof = ld_proof(&doc, key_id, key, t.issued_at);
    doc["proof"] = proof;
    doc
}

fn grant_claims(t: &GrantTemplate, inline: &BTreeMap<String, String>) -> Map<String, Value> {
    let mut p = Map::new();
    p.insert("jti".into(), json!(t.grant_id));
    p.insert("iss".into(), json!(t.issuer));
    p.insert("sub".into(), json!(t.subject));
    let perms: Vec<String> = t.scope.clone().into();
    p.insert("scope".into(), json!(perms));
    p.insert("nbf".into(), json!(t.not_before));
    p.insert("exp".into(), json!(t.not_after));
    p.insert("kb".into(), json!(t.key_binding));
    if let Some(r) = &t.status_ref {
        p.insert("status".into(), json!({"list": r.list_id, "idx": r.index}));
    }
    p.insert("cst".into(), json!(inline));
    p
}

/// SD-JWT grant. Constraints named in `disclose` are moved out of `cst`
/// into selectively disclosable top-level claims.
pub fn issue_dg_sd_jwt(t: &GrantTemplate, disclose: &[&str], key_id: &str, key: &SigningKey) -> String {
    let mut inline = t.constraints.clone();
    let mut disclosures = Vec::new();
    for name in disclose {
        if let Some(value) = inline.remove(*name) {
            let salt = b64url_encode(&sha256(alloc::format!("{}/{}", t.grant_id, name).as_bytes())[..16]);
            disclosures.push(sd_jwt_disclosure(&salt, name, &json!(value)));
        }
    }
    let mut claims = grant_claims(t, &inline);
    if !disclosures.is_empty() {
        let mut digests: Vec<String> = disclosures.iter().map(|d| sd_jwt_digest(d)).collect();
        digests.sort();
        claims.insert("_sd".into(), json!(digests));
        claims.insert("_sd_alg".into(), json!("sha-256"));
    }
    let payload = value_to_canonical_bytes(&Value::Object(claims)).expect("integers only");
    let mut token = sign_compact(&jws_header(key_id, "dg+sd-jwt"), &payload, key);
    for d in &disclosures {
        token.push('~');
        token.push_str(d);
    }
    token.push('~');
    token
}

/// JSON-LD grant with the same claim names as the SD-JWT encoding.
pub fn issue_dg_ld(t: &GrantTemplate, key_id: &str, key: &SigningKey) -> Value {
    let mut m = grant_claims(t, &t.constraints);
    m.insert("@context".into(), json!([DELEGATION_CONTEXT]));
    m.insert("type".into(), json!(["DelegationGrant"]));
    let mut doc = Value::Object(m);
    let proof = ld_proof(&doc, key_id, key, t.not_before);
    doc["proof"] = proof;
    doc
}
