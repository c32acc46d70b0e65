//! Builds a [`CanonicalVerificationContext`] from a gateway request.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde_json::Value;

use crate::adapters::{detect_profile, parse_credential, parse_dg, FormatError, VerificationRequest};
use crate::canonical::b64url_decode;
use crate::engine::Clock;
use crate::model::{
    CanonicalVerificationContext, ProfileTag, ProofKind, ProofObject, Scalar, StatusContext,
    StatusRef, StatusResolution, VerificationPolicy,
};
use crate::registry::TrustRegistry;

/// Why a request could not be normalized. Maps to `E100`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizeError {
    pub profile: Option<ProfileTag>,
    pub error: FormatError,
}

/// Serialized size of a raw artifact.
pub fn artifact_size(v: &Value) -> u64 {
    match v {
        Value::String(s) => s.len() as u64,
        other => serde_json::to_vec(other).map(|b| b.len() as u64).unwrap_or_default(),
    }
}

/// Detects the profile, runs the adapters and assembles the context. Status
/// references are resolved against `registry`; references that do not
/// resolve are left out so that the engine fails closed on them.
pub fn build_cvc(
    request: &VerificationRequest,
    policy: &VerificationPolicy,
    registry: &TrustRegistry,
    clock: Clock,
) -> Result<CanonicalVerificationContext, NormalizeError> {
    let profile = detect_profile(request).map_err(|error| NormalizeError { profile: None, error })?;
    let fail = |error| NormalizeError { profile: Some(profile), error };

    let credential = parse_credential(&request.presentation).map_err(fail)?;
    let chain = request.chain_tokens.iter().map(parse_dg).collect::<Result<Vec<_>, _>>().map_err(fail)?;

    let presenter_proof = match &request.presenter_signature {
        None => None,
        Some(sig) => {
            let key_id = request
                .presenter_key_id
                .clone()
                .ok_or_else(|| fail(FormatError("request.presenter_key_id".into())))?;
            let signature =
                b64url_decode(sig).map_err(|_| fail(FormatError("request.presenter_signature".into())))?;
            Some(ProofObject {
                kind: ProofKind::JwsEd25519,
                key_id,
                signature,
                signed_payload: request.request_id.as_bytes().to_vec(),
            })
        }
    };

    let refs: Vec<&StatusRef> = core::iter::once(&credential.status_ref)
        .chain(chain.iter().map(|g| &g.status_ref))
        .flatten()
        .collect();
    let mut resolutions: Vec<StatusResolution> = Vec::new();
    for r in refs {
        if resolutions.iter().any(|s| s.list_id == r.list_id && s.index == r.index) {
            continue;
        }
        let Ok(revoked) = registry.resolve_status(&r.list_id, r.index) else { continue };
        let Some(doc) = registry.status_document(&r.list_id) else { continue };
        resolutions.push(StatusResolution {
            list_id: r.list_id.clone(),
            index: r.index,
            revoked,
            document_issued_at: doc.issued_at,
        });
    }

    let subject_id = chain.last().map_or_else(|| credential.subject.clone(), |g| g.subject.clone());
    let chain_bytes: u64 = request.chain_tokens.iter().map(artifact_size).sum();

    let mut metadata = BTreeMap::new();
    metadata.insert(String::from("profile"), Scalar::from(profile.as_str()));
    metadata.insert(String::from("submitted_at"), Scalar::Int(clock.now));
    metadata.insert(String::from("presentation_bytes"), Scalar::Int(artifact_size(&request.presentation) as i64));
    metadata.insert(String::from("chain_bytes"), Scalar::Int(chain_bytes as i64));
    metadata.insert(String::from("chain_depth"), Scalar::Int(chain.len() as i64));

    let issuer_ids: BTreeSet<String> = core::iter::once(credential.issuer.clone()).collect();

    Ok(CanonicalVerificationContext {
        request_id: request.request_id.clone(),
        issuer_ids,
        subject_id,
        credentials: alloc::vec![credential],
        presenter_key_id: request.presenter_key_id.clone(),
        presenter_proof,
        chain,
        policy: policy.clone(),
        status: StatusContext { checked_at: clock.now, resolutions },
        metadata,
    })
}
