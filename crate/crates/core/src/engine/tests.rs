use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use ed25519_dalek::SigningKey;
use proptest::prelude::*;
use serde_json::Value;

use super::*;
use crate::adapters::VerificationRequest;
use crate::canonical::b64url_encode;
use crate::issue::{issue_dg_ld, issue_dg_sd_jwt, issue_vc_jwt, issue_vc_ld, CredentialTemplate, GrantTemplate};
use crate::jws::sign_ed25519;
use crate::ledger::AnchorLog;
use crate::model::{SourceFormat, StatusRef, VerificationPolicy};
use crate::normalize::build_cvc;
use crate::registry::{KeyRecordFile, RegistryFile, StatusDocumentFile};
use crate::scope::Scope;

const NOW: i64 = 1_700_000_000;

const PRINCIPALS: [(&str, &str, u8); 8] = [
    ("issuer-key-1", "did:example:issuer-1", 1),
    ("issuer-key-2", "did:example:issuer-2", 2),
    ("alice-key-1", "did:example:alice", 3),
    ("agent-key-1", "did:example:agent-1", 4),
    ("agent-key-2", "did:example:agent-2", 5),
    ("agent-key-3", "did:example:agent-3", 6),
    ("org-key-1", "did:example:org", 7),
    ("verifier-key-1", "did:example:verifier", 8),
];

fn signing(key_id: &str) -> SigningKey {
    let seed = PRINCIPALS.iter().find(|p| p.0 == key_id).map(|p| p.2).unwrap();
    SigningKey::from_bytes(&[seed; 32])
}

struct World {
    registry: TrustRegistry,
    ledger: AnchorLog,
    verifier: VerifierKey,
}

fn world() -> World {
    let keys = PRINCIPALS
        .iter()
        .map(|(kid, ctl, _)| KeyRecordFile {
            key_id: (*kid).into(),
            controller: (*ctl).into(),
            algorithm: "Ed25519".into(),
            public_key: b64url_encode(&signing(kid).verifying_key().to_bytes()),
            revoked: false,
        })
        .collect();
    let list = |id: &str, byte: u8, issued_at: i64| StatusDocumentFile {
        id: id.into(),
        purpose: "revocation".into(),
        encoded_list: b64url_encode(&[byte, 0]),
        issued_at,
    };
    let registry = TrustRegistry::from_file(RegistryFile {
        keys,
        status_docs: vec![
            list("status:creds", 0b0100_0000, NOW - 10),
            list("status:grants", 0b0010_0000, NOW - 10),
            list("status:old", 0, NOW - 600),
        ],
        trust_roots: vec!["did:example:org".into()],
    })
    .unwrap();
    World { registry, ledger: AnchorLog::new(), verifier: VerifierKey::from_seed("verifier-key-1", [8; 32]) }
}

fn policy() -> VerificationPolicy {
    VerificationPolicy {
        policy_id: "permissive".into(),
        trusted_issuers: ["did:example:issuer-1".to_string()].into(),
        allowed_credential_types: [SourceFormat::VcJwt, SourceFormat::VcLd].into(),
        max_chain_depth: 4,
        max_status_age_seconds: 300,
        require_anchor: false,
        required_scope: None,
    }
}

fn cred(subject: &str, holder_key: &str) -> CredentialTemplate {
    CredentialTemplate {
        id: "urn:cred:1".into(),
        issuer: "did:example:issuer-1".into(),
        subject: subject.into(),
        holder_key_id: Some(holder_key.into()),
        claims: [("role".to_string(), "analyst".into())].into(),
        issued_at: NOW - 1000,
        expires_at: NOW + 1000,
        status_ref: Some(StatusRef { list_id: "status:creds".into(), index: 0 }),
    }
}

fn alice() -> CredentialTemplate {
    cred("did:example:alice", "alice-key-1")
}

fn grant(id: &str, from: &str, to: &str, scope: &[&str], kb: &str) -> GrantTemplate {
    GrantTemplate {
        grant_id: id.into(),
        issuer: format!("did:example:{from}"),
        subject: format!("did:example:{to}"),
        scope: Scope::new(scope.iter().copied()).unwrap(),
        not_before: NOW - 100,
        not_after: NOW + 100,
        key_binding: kb.into(),
        status_ref: None,
        constraints: BTreeMap::new(),
    }
}

fn issuer_of(g: &GrantTemplate) -> &'static str {
    PRINCIPALS.iter().find(|p| p.1 == g.issuer).map(|p| p.0).unwrap()
}

fn sd(g: &GrantTemplate) -> Value {
    let kid = issuer_of(g);
    Value::String(issue_dg_sd_jwt(g, &[], kid, &signing(kid)))
}

fn ld(g: &GrantTemplate) -> Value {
    let kid = issuer_of(g);
    issue_dg_ld(g, kid, &signing(kid))
}

fn jwt(c: &CredentialTemplate) -> Value {
    let kid = PRINCIPALS.iter().find(|p| p.1 == c.issuer).map(|p| p.0).unwrap();
    Value::String(issue_vc_jwt(c, kid, &signing(kid)))
}

fn request(id: &str, presentation: Value, chain: Vec<Value>) -> VerificationRequest {
    VerificationRequest {
        request_id: id.into(),
        presentation,
        chain_tokens: chain,
        policy_id: "permissive".into(),
        presenter_key_id: None,
        presenter_signature: None,
    }
}

fn cvc_for(w: &World, req: &VerificationRequest, p: &VerificationPolicy) -> CanonicalVerificationContext {
    build_cvc(req, p, &w.registry, Clock::at(NOW)).unwrap()
}

fn run_cvc(w: &World, cvc: &CanonicalVerificationContext) -> Verification {
    verify(cvc, &w.registry, &w.ledger, Clock::at(NOW), &w.verifier)
}

fn run(w: &World, req: &VerificationRequest, p: &VerificationPolicy) -> Verification {
    run_cvc(w, &cvc_for(w, req, p))
}

fn code(v: &Verification) -> ResultCode {
    v.vro.result
}

fn two_hop() -> Vec<Value> {
    vec![
        sd(&grant("dg-1", "alice", "agent-1", &["a:read", "a:write"], "agent-key-1")),
        sd(&grant("dg-2", "agent-1", "agent-2", &["a:read"], "agent-key-2")),
    ]
}

#[test]
fn plain_credential_is_ok_with_all_flags() {
    let w = world();
    let v = run(&w, &request("r1", jwt(&alice()), vec![]), &policy());
    assert_eq!(code(&v), ResultCode::Ok, "{}", v.vro.detail);
    assert!(v.vro.invariant_flags.all());
    assert_eq!(v.vro.effective_scope, None);
    assert_eq!(v.vro.chain_fingerprint, None);
    assert_eq!(v.stats.signature_checks, 1);
}

#[test]
fn flipped_payload_byte_is_e200() {
    let w = world();
    let Value::String(tok) = jwt(&alice()) else { unreachable!() };
    let parts: Vec<&str> = tok.split('.').collect();
    let mut payload = crate::canonical::b64url_decode(parts[1]).unwrap();
    let pos = payload.windows(7).position(|w| w == b"analyst").unwrap();
    payload[pos] ^= 0x20; // 'a' -> 'A', JSON stays valid
    let forged = format!("{}.{}.{}", parts[0], b64url_encode(&payload), parts[2]);
    let v = run(&w, &request("r1", Value::String(forged), vec![]), &policy());
    assert_eq!(code(&v), ResultCode::E200);
    assert!(!v.vro.invariant_flags.signature_verification);
    assert!(v.vro.invariant_flags.structural_validity);
}

#[test]
fn structure_checks() {
    let w = world();
    let good = cvc_for(&w, &request("r1", jwt(&alice()), two_hop()), &policy());
    assert_eq!(validate_structure(&good), Ok(()));

    let mut empty = good.clone();
    empty.credentials.clear();
    empty.issuer_ids.clear();
    assert_eq!(validate_structure(&empty).unwrap_err().code, ResultCode::E100);

    let mut inverted = good.clone();
    inverted.chain[1].not_before = inverted.chain[1].not_after + 1;
    let f = validate_structure(&inverted).unwrap_err();
    assert_eq!((f.code, f.detail.as_str()), (ResultCode::E100, "structure:grant.validity"));
    let v = run_cvc(&w, &inverted);
    assert_eq!(v.vro.invariant_flags, InvariantFlags::default());
}

#[test]
fn credential_status_and_expiry() {
    let w = world();
    let mut revoked = alice();
    revoked.status_ref = Some(StatusRef { list_id: "status:creds".into(), index: 1 });
    let v = run(&w, &request("r1", jwt(&revoked), vec![]), &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E200, "credential:revoked"));

    let mut expired = alice();
    expired.expires_at = NOW - 1;
    let v = run(&w, &request("r1", jwt(&expired), vec![]), &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E200, "credential:expired"));

    let mut unknown_list = alice();
    unknown_list.status_ref = Some(StatusRef { list_id: "status:nope".into(), index: 0 });
    let v = run(&w, &request("r1", jwt(&unknown_list), vec![]), &policy());
    assert_eq!(code(&v), ResultCode::E200);
}

#[test]
fn unknown_issuer_key_is_e200() {
    let w = world();
    let c = alice();
    let tok = issue_vc_jwt(&c, "issuer-key-9", &SigningKey::from_bytes(&[99; 32]));
    let v = run(&w, &request("r1", Value::String(tok), vec![]), &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E200, "credential:key_unknown"));
    // a key controlled by someone else than the claimed issuer
    let tok = issue_vc_jwt(&c, "issuer-key-2", &signing("issuer-key-2"));
    let v = run(&w, &request("r1", Value::String(tok), vec![]), &policy());
    assert_eq!(v.vro.detail, "credential:key_controller_mismatch");
}

#[test]
fn presenter_binding() {
    let w = world();
    let mut req = request("r-bind", jwt(&alice()), two_hop());
    req.presenter_key_id = Some("agent-key-2".into());
    assert_eq!(code(&run(&w, &req, &policy())), ResultCode::Ok);

    req.presenter_key_id = Some("agent-key-1".into());
    let v = run(&w, &req, &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E400, "binding:presenter_key_mismatch"));

    req.presenter_key_id = Some("agent-key-2".into());
    let good_sig = sign_ed25519(&signing("agent-key-2"), b"r-bind");
    req.presenter_signature = Some(b64url_encode(&good_sig));
    let v = run(&w, &req, &policy());
    assert_eq!(code(&v), ResultCode::Ok);
    assert_eq!(v.stats.signature_checks, 1 + 2 + 1);

    let wrong = sign_ed25519(&signing("agent-key-3"), b"r-bind");
    req.presenter_signature = Some(b64url_encode(&wrong));
    let v = run(&w, &req, &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E400, "binding:possession_signature_invalid"));
}

#[test]
fn binding_key_must_belong_to_subject() {
    let w = world();
    // last grant binds a key controlled by agent-3, not by the subject agent-2
    let chain = vec![
        sd(&grant("dg-1", "alice", "agent-1", &["a:read"], "agent-key-1")),
        sd(&grant("dg-2", "agent-1", "agent-2", &["a:read"], "agent-key-3")),
    ];
    let v = run(&w, &request("r1", jwt(&alice()), chain), &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E400, "binding:key_controller_mismatch"));
}

#[test]
fn redelegation_must_use_the_bound_key() {
    let w = world();
    // dg-1 binds agent-key-3 (controlled by agent-3), but agent-1 signs dg-2
    let chain = vec![
        sd(&grant("dg-1", "alice", "agent-1", &["a:read"], "agent-key-3")),
        sd(&grant("dg-2", "agent-1", "agent-2", &["a:read"], "agent-key-2")),
    ];
    let v = run(&w, &request("r1", jwt(&alice()), chain), &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E400, "delegation:key_binding_mismatch"));
    assert!(!v.vro.invariant_flags.signature_verification);
    assert!(v.vro.invariant_flags.structural_validity);
}

#[test]
fn scope_reduction_chain_ok() {
    let w = world();
    let v = run(&w, &request("r1", jwt(&alice()), two_hop()), &policy());
    assert_eq!(code(&v), ResultCode::Ok, "{}", v.vro.detail);
    assert_eq!(v.vro.effective_scope, Some(Scope::new(["a:read"]).unwrap()));
    assert!(v.vro.chain_fingerprint.is_some());
    assert_eq!(v.stats.signature_checks, 3);
}

#[test]
fn scope_escalation_is_e400() {
    let w = world();
    let chain = vec![
        sd(&grant("dg-1", "alice", "agent-1", &["a:read"], "agent-key-1")),
        sd(&grant("dg-2", "agent-1", "agent-2", &["a:read", "a:write"], "agent-key-2")),
    ];
    let v = run(&w, &request("r1", jwt(&alice()), chain), &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E400, "delegation:scope_escalation"));
    assert!(!v.vro.invariant_flags.scope_containment);
    assert!(v.vro.invariant_flags.signature_verification);
}

#[test]
fn swapped_chain_is_e300() {
    let w = world();
    let mut chain = two_hop();
    chain.swap(0, 1);
    let v = run(&w, &request("r1", jwt(&alice()), chain), &policy());
    assert_eq!(code(&v), ResultCode::E300);
    assert!(!v.vro.invariant_flags.chain_integrity);
}

#[test]
fn cycles_and_depth() {
    let w = world();
    let chain = vec![
        sd(&grant("dg-1", "alice", "agent-1", &["a:read"], "agent-key-1")),
        sd(&grant("dg-2", "agent-1", "alice", &["a:read"], "alice-key-1")),
        sd(&grant("dg-3", "alice", "agent-1", &["a:read"], "agent-key-1")),
    ];
    let v = run(&w, &request("r1", jwt(&alice()), chain), &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E300, "chain:cycle"));

    let mut shallow = policy();
    shallow.max_chain_depth = 1;
    let v = run(&w, &request("r1", jwt(&alice()), two_hop()), &shallow);
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E300, "chain:depth_exceeded"));
}

#[test]
fn trusted_root_may_start_a_chain() {
    let w = world();
    // org is a registry trust root and no credential subject
    let chain = vec![sd(&grant("dg-1", "org", "agent-1", &["a:read"], "agent-key-1"))];
    assert_eq!(code(&run(&w, &request("r1", jwt(&alice()), chain), &policy())), ResultCode::Ok);
    let chain = vec![sd(&grant("dg-1", "agent-3", "agent-1", &["a:read"], "agent-key-1"))];
    let v = run(&w, &request("r1", jwt(&alice()), chain), &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E300, "chain:untrusted_root"));
}

#[test]
fn grant_signature_failure_is_e300() {
    let w = world();
    let g = grant("dg-1", "alice", "agent-1", &["a:read"], "agent-key-1");
    // signed by the wrong key but claiming alice's key id
    let tok = issue_dg_sd_jwt(&g, &[], "alice-key-1", &signing("agent-key-3"));
    let v = run(&w, &request("r1", jwt(&alice()), vec![Value::String(tok)]), &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E300, "chain:grant_signature_invalid"));
}

#[test]
fn grant_expiry_and_revocation_are_e400() {
    let w = world();
    let mut g = grant("dg-1", "alice", "agent-1", &["a:read"], "agent-key-1");
    g.not_after = NOW - 1;
    let v = run(&w, &request("r1", jwt(&alice()), vec![sd(&g)]), &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E400, "delegation:grant_expired"));

    let mut g = grant("dg-1", "alice", "agent-1", &["a:read"], "agent-key-1");
    g.status_ref = Some(StatusRef { list_id: "status:grants".into(), index: 2 });
    let v = run(&w, &request("r1", jwt(&alice()), vec![sd(&g)]), &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E400, "delegation:grant_revoked"));
    assert!(!v.vro.invariant_flags.temporal_validity);
}

#[test]
fn status_freshness_split() {
    let w = world();
    let mut p = policy();
    // status:creds is 10 s old
    assert_eq!(code(&run(&w, &request("r1", jwt(&alice()), vec![]), &p)), ResultCode::Ok);

    // status:old is 600 s old, window 300 s
    let mut c = alice();
    c.status_ref = Some(StatusRef { list_id: "status:old".into(), index: 0 });
    let v = run(&w, &request("r1", jwt(&c), vec![]), &p);
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E200, "credential:status_stale"));

    let mut g = grant("dg-1", "alice", "agent-1", &["a:read"], "agent-key-1");
    g.status_ref = Some(StatusRef { list_id: "status:old".into(), index: 0 });
    let v = run(&w, &request("r1", jwt(&alice()), vec![sd(&g)]), &p);
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E400, "delegation:grant_status_stale"));

    p.max_status_age_seconds = 1000;
    let v = run(&w, &request("r1", jwt(&c), vec![]), &p);
    assert_eq!(code(&v), ResultCode::Ok);

    let cvc = cvc_for(&w, &request("r1", jwt(&c), vec![]), &policy());
    assert_eq!(check_status_freshness(&cvc, Clock::at(NOW)).unwrap_err().code, ResultCode::E200);
}

#[test]
fn policy_enforcement() {
    let w = world();
    let mut c = alice();
    c.issuer = "did:example:issuer-2".into();
    let v = run(&w, &request("r1", jwt(&c), vec![]), &policy());
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E500, "policy:untrusted_issuer"));
    // policy failures leave the five invariants intact except scope (not reached)
    assert!(v.vro.invariant_flags.signature_verification && v.vro.invariant_flags.chain_integrity);

    let mut jwt_only = policy();
    jwt_only.allowed_credential_types = [SourceFormat::VcJwt].into();
    let ld_vc = issue_vc_ld(&alice(), "issuer-key-1", &signing("issuer-key-1"));
    let v = run(&w, &request("r1", ld_vc.clone(), vec![]), &jwt_only);
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E500, "policy:credential_type_not_allowed"));
    assert_eq!(code(&run(&w, &request("r1", ld_vc, vec![]), &policy())), ResultCode::Ok);

    let mut scoped = policy();
    scoped.required_scope = Some(Scope::new(["a:write"]).unwrap());
    let v = run(&w, &request("r1", jwt(&alice()), two_hop()), &scoped);
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E500, "policy:required_scope_not_granted"));
    assert!(!v.vro.invariant_flags.scope_containment);
    scoped.required_scope = Some(Scope::new(["a:read"]).unwrap());
    assert_eq!(code(&run(&w, &request("r1", jwt(&alice()), two_hop()), &scoped)), ResultCode::Ok);
}

#[test]
fn first_failing_step_wins() {
    let w = world();
    // untrusted issuer (E500) and escalation (E400) together: E400 comes first
    let mut c = alice();
    c.issuer = "did:example:issuer-2".into();
    let chain = vec![
        sd(&grant("dg-1", "alice", "agent-1", &["a:read"], "agent-key-1")),
        sd(&grant("dg-2", "agent-1", "agent-2", &["a:read", "b:read"], "agent-key-2")),
    ];
    let tok = issue_vc_jwt(&c, "issuer-key-2", &signing("issuer-key-2"));
    let v = run(&w, &request("r1", Value::String(tok), chain), &policy());
    assert_eq!(code(&v), ResultCode::E400);
}

#[test]
fn anchoring() {
    let mut w = world();
    let mut p = policy();
    p.require_anchor = true;
    let req = request("r1", jwt(&alice()), two_hop());
    let v = run(&w, &req, &p);
    assert_eq!((code(&v), v.vro.detail.as_str()), (ResultCode::E300, "chain:anchor_absent"));
    assert_eq!(v.stats.ledger_lookups, 1);

    let fp = v.vro.chain_fingerprint.clone().unwrap();
    w.ledger.anchor(&fp, NOW - 5, None).unwrap();
    let v = run(&w, &req, &p);
    assert_eq!(code(&v), ResultCode::Ok);
    assert_eq!(v.stats.ledger_lookups, 1);

    w.ledger.revoke(&fp, NOW - 1).unwrap();
    let v = run(&w, &req, &p);
    assert_eq!(v.vro.detail, "chain:anchor_revoked");

    w.ledger.anchor(&fp, NOW - 1, Some(NOW - 1)).unwrap();
    let v = run(&w, &req, &p);
    assert_eq!(v.vro.detail, "chain:anchor_expired");

    // no chain, anchoring required: vacuously fine, no lookup
    let v = run(&w, &request("r1", jwt(&alice()), vec![]), &p);
    assert_eq!((code(&v), v.stats.ledger_lookups), (ResultCode::Ok, 0));

    // not required: no lookup even with a chain
    let v = run(&w, &req, &policy());
    assert_eq!((code(&v), v.stats.ledger_lookups), (ResultCode::Ok, 0));
}

#[test]
fn mixed_encodings_verify_alike() {
    let w = world();
    let g1 = grant("dg-1", "alice", "agent-1", &["a:read", "a:write"], "agent-key-1");
    let g2 = grant("dg-2", "agent-1", "agent-2", &["a:read"], "agent-key-2");
    let ld_vc = issue_vc_ld(&alice(), "issuer-key-1", &signing("issuer-key-1"));
    for (pres, chain) in [
        (jwt(&alice()), vec![ld(&g1), ld(&g2)]),
        (ld_vc.clone(), vec![sd(&g1), ld(&g2)]),
        (ld_vc, vec![ld(&g1), ld(&g2)]),
    ] {
        let v = run(&w, &request("r1", pres, chain), &policy());
        assert_eq!(code(&v), ResultCode::Ok, "{}", v.vro.detail);
        assert_eq!(v.stats.signature_checks, 3);
    }
}

#[test]
fn result_object_is_signed_and_deterministic() {
    let w = world();
    let req = request("r1", jwt(&alice()), two_hop());
    let a = run(&w, &req, &policy());
    let b = run(&w, &req, &policy());
    assert_eq!(a.signed.payload_bytes, b.signed.payload_bytes);
    assert_eq!(a.signed.compact, b.signed.compact);
    let back = verify_vro(&a.signed.compact, &w.verifier.public_key()).unwrap();
    assert_eq!(back, a.vro);
    assert!(verify_vro(&a.signed.compact, &signing("agent-key-1").verifying_key().to_bytes()).is_err());

    let other = run(&w, &request("r2", jwt(&alice()), two_hop()), &policy());
    assert_ne!(a.signed.payload_hash, other.signed.payload_hash);
    assert!(a.signed.payload_bytes.len() < 2048);
}

#[test]
fn flags_invariant_over_every_check() {
    for c in Check::ALL {
        let f = invariant_flags(Some(c));
        assert!(!f.all() || matches!(c, Check::PolicyIssuers | Check::PolicyFormats));
    }
    assert_eq!(invariant_flags(Some(Check::Structure)), InvariantFlags::default());
}

#[test]
fn unnormalized_rejection() {
    let w = world();
    let v = reject_unnormalized("r1", None, "permissive", "00".repeat(32), "presentation.unknown_shape", Clock::at(NOW), &w.verifier);
    assert_eq!(v.vro.result, ResultCode::E100);
    assert!(!v.vro.invariant_flags.structural_validity);
}

fn random_chain(perms: Vec<Vec<bool>>) -> (Vec<Value>, Vec<Scope>) {
    const ALL: [&str; 5] = ["a:read", "a:write", "b:read", "b:write", "c:exec"];
    const HOPS: [(&str, &str, &str); 3] = [
        ("alice", "agent-1", "agent-key-1"),
        ("agent-1", "agent-2", "agent-key-2"),
        ("agent-2", "agent-3", "agent-key-3"),
    ];
    let mut tokens = Vec::new();
    let mut scopes = Vec::new();
    for (i, mask) in perms.iter().enumerate() {
        let picked: Vec<&str> = ALL.iter().zip(mask).filter(|(_, m)| **m).map(|(p, _)| *p).collect();
        let picked = if picked.is_empty() { vec!["a:read"] } else { picked };
        let (from, to, kb) = HOPS[i];
        let g = grant(&format!("dg-{i}"), from, to, &picked, kb);
        scopes.push(g.scope.clone());
        tokens.push(sd(&g));
    }
    (tokens, scopes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ok_chains_only_narrow_scope(perms in prop::collection::vec(prop::collection::vec(any::<bool>(), 5), 1..=3)) {
        let w = world();
        let (tokens, scopes) = random_chain(perms);
        let depth = tokens.len() as u32;
        let v = run(&w, &request("r1", jwt(&alice()), tokens), &policy());
        let monotone = scopes.windows(2).all(|s| scope_contains(&s[0], &s[1]));
        prop_assert_eq!(v.vro.result.is_ok(), monotone);
        if v.vro.result.is_ok() {
            prop_assert!(scope_contains(&scopes[0], v.vro.effective_scope.as_ref().unwrap()));
            prop_assert_eq!(v.stats.signature_checks, 1 + depth);
            prop_assert!(v.vro.invariant_flags.all());
        } else {
            prop_assert_eq!(v.vro.result, ResultCode::E400);
        }
    }
}

#[test]
fn empty_chain_matches_plain_credential_checks() {
    let w = world();
    let req = request("r1", jwt(&alice()), vec![]);
    let cvc = cvc_for(&w, &req, &policy());
    let env = Env { registry: &w.registry, ledger: &w.ledger, clock: Clock::at(NOW), ld: &StructuralLdProof };
    let mut stats = VerifyStats::default();
    let direct = verify_credential(&cvc.credentials[0], &env, &cvc.status, &mut stats);
    assert_eq!(direct, Ok(()));
    assert_eq!(evaluate_chain(&cvc, &env, &mut stats), Ok(()));
    assert_eq!(code(&run_cvc(&w, &cvc)), ResultCode::Ok);
    let _ = String::new();
}
