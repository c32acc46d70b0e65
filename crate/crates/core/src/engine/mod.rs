//! The deterministic verification pipeline.
//!
//! [`verify`] runs seven steps in a fixed order over a
//! [`CanonicalVerificationContext`]:
//!
//! 1. structural validation (`E100`)
//! 2. credential proofs, validity windows and revocation (`E200`)
//! 3. presenter key binding (`E400`)
//! 4. delegation-chain evaluation (`E300` structural, `E400` semantic)
//! 5. status freshness (`E200` for credentials, `E400` for grants)
//! 6. policy enforcement (`E500`)
//! 7. signing of the result object
//!
//! The first failing check decides the result code. Nothing is aggregated
//! and nothing unverifiable is ever accepted.

mod signer;

pub use signer::{sign_vro, verify_vro, SignedVro, VerifierKey, VroError, VRO_TYP};

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;

use crate::jws::verify_ed25519;
use crate::ledger::{AnchorLookup, AnchorState};
use crate::model::{
    chain_fingerprint, CanonicalVerificationContext, InvariantFlags, NormalizedCredential,
    ProfileTag, ProofKind, ProofObject, ResultCode, Scalar, StatusContext, UnixTime,
    VerificationResultObject,
};
use crate::registry::{KeyRecord, ResolveError, TrustRegistry};
use crate::scope::scope_contains;

/// Injected time source. Constant for one verification call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Clock {
    pub now: UnixTime,
}

impl Clock {
    pub fn at(now: UnixTime) -> Self {
        Self { now }
    }
}

/// Every individual check, in pipeline order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    Structure,
    CredentialProof,
    CredentialTemporal,
    CredentialStatus,
    PresenterBinding,
    ChainContinuity,
    ChainAcyclic,
    ChainDepth,
    GrantProof,
    LinkBinding,
    GrantTemporal,
    GrantStatus,
    ScopeReduction,
    Anchor,
    StatusFreshness,
    PolicyIssuers,
    PolicyFormats,
    RequiredScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Invariant {
    Scope,
    Temporal,
    Signature,
    Chain,
    Structural,
}

impl Check {
    fn invariant(self) -> Option<Invariant> {
        use Check::*;
        match self {
            Structure => Some(Invariant::Structural),
            CredentialProof | PresenterBinding | GrantProof | LinkBinding => Some(Invariant::Signature),
            CredentialTemporal | CredentialStatus | GrantTemporal | GrantStatus | StatusFreshness => {
                Some(Invariant::Temporal)
            }
            ChainContinuity | ChainAcyclic | ChainDepth | Anchor => Some(Invariant::Chain),
            ScopeReduction | RequiredScope => Some(Invariant::Scope),
            PolicyIssuers | PolicyFormats => None,
        }
    }

    const ALL: [Check; 18] = [
        Check::Structure,
        Check::CredentialProof,
        Check::CredentialTemporal,
        Check::CredentialStatus,
        Check::PresenterBinding,
        Check::ChainContinuity,
        Check::ChainAcyclic,
        Check::ChainDepth,
        Check::GrantProof,
        Check::LinkBinding,
        Check::GrantTemporal,
        Check::GrantStatus,
        Check::ScopeReduction,
        Check::Anchor,
        Check::StatusFreshness,
        Check::PolicyIssuers,
        Check::PolicyFormats,
        Check::RequiredScope,
    ];
}

/// Flags after a run that stopped at `failed` (or completed, if `None`).
/// An invariant holds only if every check feeding it ran and passed.
pub fn invariant_flags(failed: Option<Check>) -> InvariantFlags {
    let Some(failed) = failed else {
        return InvariantFlags::ALL_TRUE;
    };
    let holds = |inv: Invariant| {
        Check::ALL
            .iter()
            .filter(|c| c.invariant() == Some(inv))
            .all(|c| *c < failed)
    };
    InvariantFlags {
        scope_containment: holds(Invariant::Scope),
        temporal_validity: holds(Invariant::Temporal),
        signature_verification: holds(Invariant::Signature),
        chain_integrity: holds(Invariant::Chain),
        structural_validity: holds(Invariant::Structural),
    }
}

/// A failed check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Failure {
    pub code: ResultCode,
    pub check: Check,
    pub detail: String,
}

impl Failure {
    fn new(code: ResultCode, check: Check, detail: impl Into<String>) -> Self {
        Self { code, check, detail: detail.into() }
    }
}

/// Work counters for one call. Observational only.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VerifyStats {
    pub signature_checks: u32,
    pub ledger_lookups: u32,
}

/// Seam for linked-data proof suites.
pub trait LdProofVerifier {
    /// Accepts or rejects an `LD_STUB` proof made by `key`.
    fn check(&self, proof: &ProofObject, key: &KeyRecord) -> bool;
}

/// Structural acceptance only: the proof names a resolvable key (checked
/// by the caller) and carries non-empty proof bytes.
#[derive(Debug, Clone, Copy, Default)]
pub struct StructuralLdProof;

impl LdProofVerifier for StructuralLdProof {
    fn check(&self, proof: &ProofObject, _key: &KeyRecord) -> bool {
        proof.kind == ProofKind::LdStub && !proof.signature.is_empty()
    }
}

/// Output of [`verify`].
#[derive(Debug, Clone)]
pub struct Verification {
    pub vro: VerificationResultObject,
    pub signed: SignedVro,
    pub stats: VerifyStats,
}

/// Inputs shared by every step.
pub struct Env<'a> {
    pub registry: &'a TrustRegistry,
    pub ledger: &'a dyn AnchorLookup,
    pub clock: Clock,
    pub ld: &'a dyn LdProofVerifier,
}

/// Runs the full pipeline with the structural LD stub.
pub fn verify(
    cvc: &CanonicalVerificationContext,
    registry: &TrustRegistry,
    ledger: &dyn AnchorLookup,
    clock: Clock,
    signer: &VerifierKey,
) -> Verification {
    let env = Env { registry, ledger, clock, ld: &StructuralLdProof };
    verify_with(cvc, &env, signer)
}

pub fn verify_with(cvc: &CanonicalVerificationContext, env: &Env<'_>, signer: &VerifierKey) -> Verification {
    let mut stats = VerifyStats::default();
    let outcome = run_pipeline(cvc, env, &mut stats);
    let fingerprint = if cvc.chain.is_empty() { None } else { chain_fingerprint(&cvc.chain).ok() };
    let (result, detail, failed) = match &outcome {
        Ok(()) => (ResultCode::Ok, String::from("ok"), None),
        Err(f) => (f.code, f.detail.clone(), Some(f.check)),
    };
    let vro = VerificationResultObject {
        request_id: cvc.request_id.clone(),
        result,
        detail,
        profile: profile_of(cvc),
        cvc_hash: cvc.hash(),
        chain_fingerprint: fingerprint,
        effective_scope: if outcome.is_ok() { cvc.effective_scope().cloned() } else { None },
        invariant_flags: invariant_flags(failed),
        checked_at: env.clock.now,
        policy_id: cvc.policy.policy_id.clone(),
    };
    let signed = sign_vro(&vro, signer);
    Verification { vro, signed, stats }
}

fn profile_of(cvc: &CanonicalVerificationContext) -> Option<ProfileTag> {
    match cvc.metadata.get("profile") {
        Some(Scalar::Str(s)) => ProfileTag::ALL.into_iter().find(|p| p.as_str() == s),
        _ => None,
    }
}

/// Result object for a request that never became a context (unparseable
/// artifacts). `input_hash` stands in for the context hash.
pub fn reject_unnormalized(
    request_id: &str,
    profile: Option<ProfileTag>,
    policy_id: &str,
    input_hash: String,
    detail: &str,
    clock: Clock,
    signer: &VerifierKey,
) -> Verification {
    let vro = VerificationResultObject {
        request_id: request_id.into(),
        result: ResultCode::E100,
        detail: detail.into(),
        profile,
        cvc_hash: input_hash,
        chain_fingerprint: None,
        effective_scope: None,
        invariant_flags: invariant_flags(Some(Check::Structure)),
        checked_at: clock.now,
        policy_id: policy_id.into(),
    };
    let signed = sign_vro(&vro, signer);
    Verification { vro, signed, stats: VerifyStats::default() }
}

fn run_pipeline(
    cvc: &CanonicalVerificationContext,
    env: &Env<'_>,
    stats: &mut VerifyStats,
) -> Result<(), Failure> {
    validate_structure(cvc)?;
    for cred in &cvc.credentials {
        verify_credential(cred, env, &cvc.status, stats)?;
    }
    verify_presenter_binding(cvc, env.registry, stats)?;
    evaluate_chain(cvc, env, stats)?;
    check_status_freshness(cvc, env.clock)?;
    enforce_policy(cvc)
}

/// Step 1: every type invariant of the context and its members.
pub fn validate_structure(cvc: &CanonicalVerificationContext) -> Result<(), Failure> {
    let fail = |field: &str| Err(Failure::new(ResultCode::E100, Check::Structure, format!("structure:{field}")));
    if cvc.request_id.is_empty() {
        return fail("request_id");
    }
    if cvc.subject_id.is_empty() {
        return fail("subject_id");
    }
    if cvc.credentials.is_empty() {
        return fail("credentials");
    }
    for c in &cvc.credentials {
        if let Some(field) = c.invariant_violation() {
            return fail(field);
        }
    }
    let issuers: BTreeSet<&str> = cvc.credentials.iter().map(|c| c.issuer.as_str()).collect();
    if !issuers.iter().copied().eq(cvc.issuer_ids.iter().map(String::as_str)) {
        return fail("issuer_ids");
    }
    for g in &cvc.chain {
        if let Some(field) = g.invariant_violation() {
            return fail(field);
        }
    }
    if let Some(field) = cvc.policy.invariant_violation() {
        return fail(field);
    }
    if let Some(p) = &cvc.presenter_proof {
        let bad = p.kind != ProofKind::JwsEd25519
            || p.signature.len() != 64
            || p.signed_payload != cvc.request_id.as_bytes()
            || cvc.presenter_key_id.as_deref() != Some(p.key_id.as_str());
        if bad {
            return fail("presenter_proof");
        }
    }
    if cvc.status.resolutions.iter().any(|r| r.document_issued_at > cvc.status.checked_at) {
        return fail("status.document_issued_at");
    }
    Ok(())
}

fn resolve_for_proof<'r>(
    registry: &'r TrustRegistry,
    proof: &ProofObject,
    controller: &str,
) -> Result<&'r KeyRecord, &'static str> {
    let key = registry.resolve_key(&proof.key_id).map_err(|e| match e {
        ResolveError::NotFound => "key_unknown",
        ResolveError::Revoked => "key_revoked",
    })?;
    if key.controller != controller {
        return Err("key_controller_mismatch");
    }
    Ok(key)
}

fn proof_holds(proof: &ProofObject, key: &KeyRecord, ld: &dyn LdProofVerifier) -> bool {
    match proof.kind {
        ProofKind::JwsEd25519 | ProofKind::SdJwt => {
            verify_ed25519(&key.public_key, &proof.signed_payload, &proof.signature)
        }
        ProofKind::LdStub => ld.check(proof, key),
    }
}

/// Step 2 for one credential: issuer key, proof, validity window, revocation.
pub fn verify_credential(
    cred: &NormalizedCredential,
    env: &Env<'_>,
    status: &StatusContext,
    stats: &mut VerifyStats,
) -> Result<(), Failure> {
    let e200 = |check, detail: &str| Failure::new(ResultCode::E200, check, format!("credential:{detail}"));
    let key = resolve_for_proof(env.registry, &cred.proof, &cred.issuer)
        .map_err(|d| e200(Check::CredentialProof, d))?;
    stats.signature_checks += 1;
    if !proof_holds(&cred.proof, key, env.ld) {
        return Err(e200(Check::CredentialProof, "signature_invalid"));
    }
    let now = env.clock.now;
    if now < cred.issued_at {
        return Err(e200(Check::CredentialTemporal, "not_yet_valid"));
    }
    if now > cred.expires_at {
        return Err(e200(Check::CredentialTemporal, "expired"));
    }
    if let Some(r) = &cred.status_ref {
        match status.find(r) {
            None => return Err(e200(Check::CredentialStatus, "status_unresolved")),
            Some(s) if s.revoked => return Err(e200(Check::CredentialStatus, "revoked")),
            Some(_) => {}
        }
    }
    Ok(())
}

/// Step 3: the acting subject controls the bound key.
///
/// The expected key is the last grant's `key_binding`, or the credential's
/// holder key when there is no chain. A declared presenter key must match
/// it, and a possession signature over the request id, when supplied, must
/// verify under it.
pub fn verify_presenter_binding(
    cvc: &CanonicalVerificationContext,
    registry: &TrustRegistry,
    stats: &mut VerifyStats,
) -> Result<(), Failure> {
    let e400 = |detail: &str| Failure::new(ResultCode::E400, Check::PresenterBinding, format!("binding:{detail}"));
    let expected = match cvc.chain.last() {
        Some(g) => Some(g.key_binding.as_str()),
        None => cvc.credentials.first().and_then(|c| c.holder_key_id.as_deref()),
    };
    let Some(expected) = expected else {
        return Err(e400("no_bound_key"));
    };
    if let Some(declared) = &cvc.presenter_key_id {
        if declared != expected {
            return Err(e400("presenter_key_mismatch"));
        }
    }
    let key = registry.resolve_key(expected).map_err(|e| match e {
        ResolveError::NotFound => e400("key_unknown"),
        ResolveError::Revoked => e400("key_revoked"),
    })?;
    if key.controller != cvc.subject_id {
        return Err(e400("key_controller_mismatch"));
    }
    if let Some(p) = &cvc.presenter_proof {
        stats.signature_checks += 1;
        if !verify_ed25519(&key.public_key, cvc.request_id.as_bytes(), &p.signature) {
            return Err(e400("possession_signature_invalid"));
        }
    }
    Ok(())
}

/// Step 4: continuity, acyclicity, depth,
/// grant proofs, re-delegation key binding, validity windows, grant status,
/// scope reduction and (when required) anchoring, each rule applied to the
/// whole chain before the next.
pub fn evaluate_chain(
    cvc: &CanonicalVerificationContext,
    env: &Env<'_>,
    stats: &mut VerifyStats,
) -> Result<(), Failure> {
    let chain = &cvc.chain;
    if chain.is_empty() {
        return Ok(());
    }
    let policy = &cvc.policy;
    let now = env.clock.now;
    let e300 = |check, detail: &str| Failure::new(ResultCode::E300, check, format!("chain:{detail}"));
    let e400 = |check, detail: &str| Failure::new(ResultCode::E400, check, format!("delegation:{detail}"));

    // continuity
    let root = &chain[0].issuer;
    let rooted = env.registry.is_trust_root(root) || cvc.credentials.iter().any(|c| &c.subject == root);
    if !rooted {
        return Err(e300(Check::ChainContinuity, "untrusted_root"));
    }
    if chain.windows(2).any(|w| w[1].issuer != w[0].subject) {
        return Err(e300(Check::ChainContinuity, "broken_link"));
    }
    if chain.last().is_some_and(|g| g.subject != cvc.subject_id) {
        return Err(e300(Check::ChainContinuity, "subject_mismatch"));
    }

    // acyclicity: no principal is reached twice
    let mut seen = BTreeSet::new();
    seen.insert(root.as_str());
    for g in chain {
        if !seen.insert(g.subject.as_str()) {
            return Err(e300(Check::ChainAcyclic, "cycle"));
        }
    }

    if chain.len() > policy.max_chain_depth as usize {
        return Err(e300(Check::ChainDepth, "depth_exceeded"));
    }

    for g in chain {
        let key = resolve_for_proof(env.registry, &g.proof, &g.issuer)
            .map_err(|d| e300(Check::GrantProof, &format!("grant_{d}")))?;
        stats.signature_checks += 1;
        if !proof_holds(&g.proof, key, env.ld) {
            return Err(e300(Check::GrantProof, "grant_signature_invalid"));
        }
    }

    // a delegate re-delegates with the key its own grant binds
    if chain.windows(2).any(|w| w[1].proof.key_id != w[0].key_binding) {
        return Err(e400(Check::LinkBinding, "key_binding_mismatch"));
    }

    for g in chain {
        if now < g.not_before {
            return Err(e400(Check::GrantTemporal, "grant_not_yet_valid"));
        }
        if now > g.not_after {
            return Err(e400(Check::GrantTemporal, "grant_expired"));
        }
    }

    for g in chain {
        if let Some(r) = &g.status_ref {
            match cvc.status.find(r) {
                None => return Err(e400(Check::GrantStatus, "grant_status_unresolved")),
                Some(s) if s.revoked => return Err(e400(Check::GrantStatus, "grant_revoked")),
                Some(s) if stale(now, s.document_issued_at, policy.max_status_age_seconds) => {
                    return Err(e400(Check::GrantStatus, "grant_status_stale"));
                }
                Some(_) => {}
            }
        }
    }

    if chain.windows(2).any(|w| !scope_contains(&w[0].scope, &w[1].scope)) {
        return Err(e400(Check::ScopeReduction, "scope_escalation"));
    }


    if policy.require_anchor {
        let fp = chain_fingerprint(chain).map_err(|_| e300(Check::Anchor, "fingerprint"))?;
        stats.ledger_lookups += 1;
        match env.ledger.lookup(&fp, now) {
            AnchorState::Active => {}
            AnchorState::Absent => return Err(e300(Check::Anchor, "anchor_absent")),
            AnchorState::Revoked => return Err(e300(Check::Anchor, "anchor_revoked")),
            AnchorState::Expired => return Err(e300(Check::Anchor, "anchor_expired")),
        }
    }
    Ok(())
}

fn stale(now: UnixTime, issued_at: UnixTime, max_age: u64) -> bool {
    now.saturating_sub(issued_at) > i64::try_from(max_age).unwrap_or(i64::MAX)
}

/// Step 5: every status document used is within the freshness window.
pub fn check_status_freshness(cvc: &CanonicalVerificationContext, clock: Clock) -> Result<(), Failure> {
    let max_age = cvc.policy.max_status_age_seconds;
    for c in &cvc.credentials {
        if let Some(r) = &c.status_ref {
            match cvc.status.find(r) {
                Some(s) if !stale(clock.now, s.document_issued_at, max_age) => {}
                Some(_) => {
                    return Err(Failure::new(ResultCode::E200, Check::StatusFreshness, "credential:status_stale"))
                }
                None => {
                    return Err(Failure::new(ResultCode::E200, Check::StatusFreshness, "credential:status_unresolved"))
                }
            }
        }
    }
    for g in &cvc.chain {
        if let Some(r) = &g.status_ref {
            match cvc.status.find(r) {
                Some(s) if !stale(clock.now, s.document_issued_at, max_age) => {}
                _ => {
                    return Err(Failure::new(ResultCode::E400, Check::StatusFreshness, "delegation:grant_status_stale"))
                }
            }
        }
    }
    Ok(())
}

/// Step 6: issuer allow-list, credential formats, required scope.
pub fn enforce_policy(cvc: &CanonicalVerificationContext) -> Result<(), Failure> {
    let p = &cvc.policy;
    if cvc.credentials.iter().any(|c| !p.trusted_issuers.contains(&c.issuer)) {
        return Err(Failure::new(ResultCode::E500, Check::PolicyIssuers, "policy:untrusted_issuer"));
    }
    if cvc.credentials.iter().any(|c| !p.allowed_credential_types.contains(&c.source_format)) {
        return Err(Failure::new(ResultCode::E500, Check::PolicyFormats, "policy:credential_type_not_allowed"));
    }
    if let Some(required) = &p.required_scope {
        let granted = cvc.effective_scope().is_some_and(|s| scope_contains(s, required));
        if !granted {
            return Err(Failure::new(ResultCode::E500, Check::RequiredScope, "policy:required_scope_not_granted"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
