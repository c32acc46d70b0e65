use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde_json::{Map, Value};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use super::{cnf_kid, opt_status, presentation_shape, req_int, req_str, ArtifactShape, FormatError};
use crate::canonical::b64url_decode;
use crate::jws::CompactJws;
use crate::model::{NormalizedCredential, ProofKind, ProofObject, Scalar, SourceFormat, UnixTime};

/// Registered VC-JWT claims that are mapped to dedicated fields.
const JWT_REGISTERED: [&str; 9] = ["iss", "sub", "iat", "exp", "nbf", "jti", "status", "vc", "cnf"];

fn scalar_claims(m: &Map<String, Value>, ctx: &str) -> Result<BTreeMap<String, Scalar>, FormatError> {
    let mut out = BTreeMap::new();
    for (k, v) in m {
        let s = match v {
            Value::String(s) => Scalar::Str(s.clone()),
            Value::Number(n) => Scalar::Int(n.as_i64().ok_or_else(|| FormatError(format!("{ctx}.{k}")))?),
            _ => return Err(FormatError(format!("{ctx}.{k}"))),
        };
        out.insert(k.clone(), s);
    }
    Ok(out)
}

/// Maps a compact VC-JWT onto a [`NormalizedCredential`]. The signature is
/// carried through untouched; checking it is the engine's job.
pub fn parse_vc_jwt(token: &str) -> Result<NormalizedCredential, FormatError> {
    let jws = CompactJws::parse(token).map_err(|e| FormatError(format!("vc_jwt: {e}")))?;
    let key_id = jws.ed25519_kid().map_err(|e| FormatError(format!("vc_jwt: {e}")))?;
    let p = &jws.payload;
    let ctx = "vc_jwt";
    let issuer = req_str(p, "iss", ctx)?;
    let subject = req_str(p, "sub", ctx)?;
    let issued_at = req_int(p, "iat", ctx)?;
    let expires_at = req_int(p, "exp", ctx)?;
    let status_ref = opt_status(p, "status", "list", "idx", ctx)?;
    let holder_key_id = cnf_kid(p, ctx)?;

    let mut claims = match p.get("vc") {
        None => BTreeMap::new(),
        Some(Value::Object(vc)) => scalar_claims(vc, "vc_jwt.vc")?,
        Some(_) => return Err(FormatError::new("vc_jwt.vc")),
    };
    // Unregistered top-level scalars are kept; nested extras are dropped.
    for (k, v) in p {
        if JWT_REGISTERED.contains(&k.as_str()) || claims.contains_key(k) {
            continue;
        }
        match v {
            Value::String(s) => {
                claims.insert(k.clone(), Scalar::Str(s.clone()));
            }
            Value::Number(n) if n.is_i64() => {
                claims.insert(k.clone(), Scalar::Int(n.as_i64().unwrap_or_default()));
            }
            _ => {}
        }
    }

    Ok(NormalizedCredential {
        source_format: SourceFormat::VcJwt,
        issuer: issuer.into(),
        subject: subject.into(),
        holder_key_id,
        claims,
        issued_at,
        expires_at,
        status_ref,
        proof: ProofObject {
            kind: ProofKind::JwsEd25519,
            key_id: key_id.into(),
            signature: jws.signature.clone(),
            signed_payload: jws.signing_input.as_bytes().to_vec(),
        },
        raw_size_bytes: token.len() as u64,
    })
}

fn ld_time(m: &Map<String, Value>, keys: &[&str], ctx: &str) -> Result<UnixTime, FormatError> {
    let err = || FormatError(format!("{ctx}.{}", keys[0]));
    let v = keys.iter().find_map(|k| m.get(*k)).ok_or_else(err)?;
    match v {
        Value::Number(n) => n.as_i64().ok_or_else(err),
        Value::String(s) => OffsetDateTime::parse(s, &Rfc3339)
            .map(|t| t.unix_timestamp())
            .map_err(|_| err()),
        _ => Err(err()),
    }
}

/// Maps a VC-LD document. The LD proof is retained as an opaque
/// `LD_STUB` object and never cryptographically checked here.
pub fn parse_vc_ld(doc: &Value) -> Result<NormalizedCredential, FormatError> {
    let ctx = "vc_ld";
    let m = doc.as_object().ok_or_else(|| FormatError::new("vc_ld.document"))?;
    let issuer = match m.get("issuer") {
        Some(Value::String(s)) if !s.is_empty() => s.clone(),
        Some(Value::Object(o)) => req_str(o, "id", "vc_ld.issuer")?.into(),
        _ => return Err(FormatError::new("vc_ld.issuer")),
    };
    let subject_obj = m
        .get("credentialSubject")
        .and_then(Value::as_object)
        .ok_or_else(|| FormatError::new("vc_ld.credentialSubject"))?;
    let subject = req_str(subject_obj, "id", "vc_ld.credentialSubject")?;
    let issued_at = ld_time(m, &["issuanceDate", "validFrom"], ctx)?;
    let expires_at = ld_time(m, &["expirationDate", "validUntil"], ctx)?;
    let status_ref =
        opt_status(m, "credentialStatus", "statusListCredential", "statusListIndex", ctx)?;
    let holder_key_id = cnf_kid(m, ctx)?;

    let claim_members: Map<String, Value> =
        subject_obj.iter().filter(|(k, _)| k.as_str() != "id").map(|(k, v)| (k.clone(), v.clone())).collect();
    let claims = scalar_claims(&claim_members, "vc_ld.credentialSubject")?;

    let proof = m
        .get("proof")
        .and_then(Value::as_object)
        .ok_or_else(|| FormatError::new("vc_ld.proof"))?;
    let key_id = req_str(proof, "verificationMethod", "vc_ld.proof")?;
    let signature = b64url_decode(req_str(proof, "proofValue", "vc_ld.proof")?)
        .map_err(|_| FormatError::new("vc_ld.proof.proofValue"))?;

    let raw_size_bytes = serde_json::to_vec(doc).map(|v| v.len() as u64).unwrap_or_default();

    Ok(NormalizedCredential {
        source_format: SourceFormat::VcLd,
        issuer,
        subject: subject.into(),
        holder_key_id,
        claims,
        issued_at,
        expires_at,
        status_ref,
        proof: ProofObject {
            kind: ProofKind::LdStub,
            key_id: key_id.into(),
            signature,
            signed_payload: Vec::new(),
        },
        raw_size_bytes,
    })
}

/// Dispatches on artifact shape.
pub fn parse_credential(presentation: &Value) -> Result<NormalizedCredential, FormatError> {
    match (presentation_shape(presentation), presentation) {
        (Some(ArtifactShape::Jws), Value::String(s)) => parse_vc_jwt(s),
        (Some(ArtifactShape::LdCredential), doc) => parse_vc_ld(doc),
        _ => Err(FormatError::new("presentation.unknown_shape")),
    }
}
