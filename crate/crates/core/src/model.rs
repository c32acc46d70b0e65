//! Canonical data model: normalized credentials, delegation grants,
//! policies, status context, the verification context itself and the
//! result object the engine emits.
//!
//! Every type here is an immutable value with no floating-point fields, so
//! [`crate::canonical::to_canonical_bytes`] gives each one a unique byte
//! representation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::canonical::{self, b64, CanonicalError};
use crate::scope::Scope;

/// Unix seconds.
pub type UnixTime = i64;

/// Hard engine limit on delegation-chain length.
pub const MAX_CHAIN_DEPTH_CAP: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SourceFormat {
    #[serde(rename = "VC_JWT")]
    VcJwt,
    #[serde(rename = "VC_LD")]
    VcLd,
}

impl SourceFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceFormat::VcJwt => "VC_JWT",
            SourceFormat::VcLd => "VC_LD",
        }
    }

    /// The only proof kind a credential of this format may carry.
    pub fn admissible_proof(self) -> ProofKind {
        match self {
            SourceFormat::VcJwt => ProofKind::JwsEd25519,
            SourceFormat::VcLd => ProofKind::LdStub,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProofKind {
    #[serde(rename = "JWS_ED25519")]
    JwsEd25519,
    #[serde(rename = "SD_JWT")]
    SdJwt,
    #[serde(rename = "LD_STUB")]
    LdStub,
}

impl ProofKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProofKind::JwsEd25519 => "JWS_ED25519",
            ProofKind::SdJwt => "SD_JWT",
            ProofKind::LdStub => "LD_STUB",
        }
    }

    /// Kinds whose signature is a raw 64-byte Ed25519 signature.
    pub fn is_ed25519(self) -> bool {
        matches!(self, ProofKind::JwsEd25519 | ProofKind::SdJwt)
    }
}

/// Inbound profile family, decided from artifact shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ProfileTag {
    Federated,
    Ssi,
    Hybrid,
}

impl ProfileTag {
    pub const ALL: [ProfileTag; 3] = [ProfileTag::Federated, ProfileTag::Ssi, ProfileTag::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            ProfileTag::Federated => "FEDERATED",
            ProfileTag::Ssi => "SSI",
            ProfileTag::Hybrid => "HYBRID",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProofObject {
    pub kind: ProofKind,
    pub key_id: String,
    #[serde(with = "b64")]
    pub signature: Vec<u8>,
    /// Exact bytes covered by the signature; empty for `LD_STUB`.
    #[serde(with = "b64")]
    pub signed_payload: Vec<u8>,
}

/// Pointer into a status list.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StatusRef {
    pub list_id: String,
    pub index: u64,
}

/// Claim or metadata value. Only strings and integers are canonical.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Int(i64),
    Str(String),
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Str(s.into())
    }
}

impl From<String> for Scalar {
    fn from(s: String) -> Self {
        Scalar::Str(s)
    }
}

impl From<i64> for Scalar {
    fn from(i: i64) -> Self {
        Scalar::Int(i)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedCredential {
    pub source_format: SourceFormat,
    pub issuer: String,
    pub subject: String,
    /// Key the subject is bound to (`cnf.kid`), if the credential names one.
    pub holder_key_id: Option<String>,
    pub claims: BTreeMap<String, Scalar>,
    pub issued_at: UnixTime,
    pub expires_at: UnixTime,
    pub status_ref: Option<StatusRef>,
    pub proof: ProofObject,
    pub raw_size_bytes: u64,
}

impl NormalizedCredential {
    /// Returns the name of the first violated field invariant, if any.
    pub fn invariant_violation(&self) -> Option<&'static str> {
        if self.issuer.is_empty() {
            return Some("credential.issuer");
        }
        if self.subject.is_empty() {
            return Some("credential.subject");
        }
        if self.issued_at > self.expires_at {
            return Some("credential.validity");
        }
        if self.proof.kind != self.source_format.admissible_proof() {
            return Some("credential.proof.kind");
        }
        proof_violation(&self.proof).map(|_| "credential.proof")
    }
}

fn proof_violation(proof: &ProofObject) -> Option<()> {
    if proof.key_id.is_empty() {
        return Some(());
    }
    if proof.kind.is_ed25519() && proof.signature.len() != 64 {
        return Some(());
    }
    if proof.kind == ProofKind::LdStub && !proof.signed_payload.is_empty() {
        return Some(());
    }
    None
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelegationGrant {
    pub grant_id: String,
    pub issuer: String,
    pub subject: String,
    pub scope: Scope,
    pub not_before: UnixTime,
    pub not_after: UnixTime,
    pub key_binding: String,
    pub status_ref: Option<StatusRef>,
    pub proof: ProofObject,
    pub constraints: BTreeMap<String, String>,
}

impl DelegationGrant {
    pub fn invariant_violation(&self) -> Option<&'static str> {
        if self.grant_id.is_empty() {
            return Some("grant.grant_id");
        }
        if self.issuer.is_empty() {
            return Some("grant.issuer");
        }
        if self.subject.is_empty() {
            return Some("grant.subject");
        }
        if self.issuer == self.subject {
            return Some("grant.subject");
        }
        if self.scope.is_empty() {
            return Some("grant.scope");
        }
        if self.not_before > self.not_after {
            return Some("grant.validity");
        }
        if self.key_binding.is_empty() {
            return Some("grant.key_binding");
        }
        if self.proof.kind == ProofKind::JwsEd25519 {
            return Some("grant.proof.kind");
        }
        proof_violation(&self.proof).map(|_| "grant.proof")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationPolicy {
    pub policy_id: String,
    pub trusted_issuers: BTreeSet<String>,
    pub allowed_credential_types: BTreeSet<SourceFormat>,
    pub max_chain_depth: u32,
    pub max_status_age_seconds: u64,
    pub require_anchor: bool,
    #[serde(default)]
    pub required_scope: Option<Scope>,
}

impl VerificationPolicy {
    pub fn invariant_violation(&self) -> Option<&'static str> {
        if self.policy_id.is_empty() {
            return Some("policy.policy_id");
        }
        if self.max_chain_depth > MAX_CHAIN_DEPTH_CAP {
            return Some("policy.max_chain_depth");
        }
        if self.max_status_age_seconds == 0 {
            return Some("policy.max_status_age_seconds");
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusResolution {
    pub list_id: String,
    pub index: u64,
    pub revoked: bool,
    pub document_issued_at: UnixTime,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusContext {
    pub checked_at: UnixTime,
    pub resolutions: Vec<StatusResolution>,
}

impl StatusContext {
    pub fn find(&self, r: &StatusRef) -> Option<&StatusResolution> {
        self.resolutions
            .iter()
            .find(|s| s.list_id == r.list_id && s.index == r.index)
    }
}

/// The normalized, protocol-independent verification request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CanonicalVerificationContext {
    pub request_id: String,
    pub issuer_ids: BTreeSet<String>,
    pub subject_id: String,
    pub credentials: Vec<NormalizedCredential>,
    /// Key the presenter claims to act with.
    pub presenter_key_id: Option<String>,
    /// Possession proof: Ed25519 signature over the request id.
    pub presenter_proof: Option<ProofObject>,
    /// Root-first.
    pub chain: Vec<DelegationGrant>,
    pub policy: VerificationPolicy,
    pub status: StatusContext,
    pub metadata: BTreeMap<String, Scalar>,
}

impl CanonicalVerificationContext {
    pub fn canonical_bytes(&self) -> Vec<u8> {
        canonical::to_canonical_bytes(self).expect("context has no floats")
    }

    pub fn hash(&self) -> String {
        canonical::sha256_hex(&self.canonical_bytes())
    }

    pub fn effective_scope(&self) -> Option<&Scope> {
        self.chain.last().map(|g| &g.scope)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ResultCode {
    #[serde(rename = "OK")]
    Ok,
    E100,
    E200,
    E300,
    E400,
    E500,
}

impl ResultCode {
    pub const ALL: [ResultCode; 6] = [
        ResultCode::Ok,
        ResultCode::E100,
        ResultCode::E200,
        ResultCode::E300,
        ResultCode::E400,
        ResultCode::E500,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ResultCode::Ok => "OK",
            ResultCode::E100 => "E100",
            ResultCode::E200 => "E200",
            ResultCode::E300 => "E300",
            ResultCode::E400 => "E400",
            ResultCode::E500 => "E500",
        }
    }

    pub fn is_ok(self) -> bool {
        self == ResultCode::Ok
    }
}

impl core::fmt::Display for ResultCode {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantFlags {
    pub scope_containment: bool,
    pub temporal_validity: bool,
    pub signature_verification: bool,
    pub chain_integrity: bool,
    pub structural_validity: bool,
}

impl InvariantFlags {
    pub const ALL_TRUE: InvariantFlags = InvariantFlags {
        scope_containment: true,
        temporal_validity: true,
        signature_verification: true,
        chain_integrity: true,
        structural_validity: true,
    };

    pub fn all(&self) -> bool {
        *self == Self::ALL_TRUE
    }

    pub fn as_array(&self) -> [(&'static str, bool); 5] {
        [
            ("scope_containment", self.scope_containment),
            ("temporal_validity", self.temporal_validity),
            ("signature_verification", self.signature_verification),
            ("chain_integrity", self.chain_integrity),
            ("structural_validity", self.structural_validity),
        ]
    }
}

/// Verification Result Object payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationResultObject {
    pub request_id: String,
    pub result: ResultCode,
    pub detail: String,
    /// Absent only when the request failed before a profile was detected.
    pub profile: Option<ProfileTag>,
    pub cvc_hash: String,
    pub chain_fingerprint: Option<String>,
    pub effective_scope: Option<Scope>,
    pub invariant_flags: InvariantFlags,
    pub checked_at: UnixTime,
    pub policy_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FingerprintError {
    #[error("cannot fingerprint an empty chain")]
    EmptyChain,
    #[error(transparent)]
    Canonical(#[from] CanonicalError),
}

/// Lowercase hex SHA-256 over the canonical encoding of the whole chain,
/// proofs included.
pub fn chain_fingerprint(chain: &[DelegationGrant]) -> Result<String, FingerprintError> {
    if chain.is_empty() {
        return Err(FingerprintError::EmptyChain);
    }
    Ok(canonical::canonical_hash(chain)?)
}
