//! Seeded fixture corpus: keys, registry, policies, anchor ledger and the
//! scenario request files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context};
use serde::Serialize;
use serde_json::{json, Value};
use trustgate_core::adapters::VerificationRequest;
use trustgate_core::canonical::{b64url_decode, b64url_encode};
use trustgate_core::{Clock, ResultCode, Scope, SourceFormat, VerificationPolicy};

use super::world::{
    fingerprint_of, request, World, GRANT_LIST, REVOKED_CREDENTIAL_INDEX, REVOKED_GRANT_INDEX, STALE_LIST,
};
use super::{CaseFile, Endpoint, Layout, Scenario, FIXTURE_EPOCH};
use crate::anchor_store::FileAnchorStore;
use crate::files::write_json;
use crate::gateway::{Gateway, VerifyResponse};

pub const PERMISSIVE: &str = "permissive";
pub const STRICT_ISSUER: &str = "strict-issuer";
pub const ANCHOR_REQUIRED: &str = "anchor-required";
pub const SHALLOW_DEPTH: &str = "shallow-depth";

#[derive(Debug, Clone, Serialize)]
pub struct FixtureSummary {
    pub seed: u64,
    pub cases: BTreeMap<Scenario, usize>,
    pub expected_codes: BTreeMap<ResultCode, usize>,
    pub ledger_records: usize,
}

pub fn policies(world: &World) -> Vec<VerificationPolicy> {
    let base = VerificationPolicy {
        policy_id: PERMISSIVE.into(),
        trusted_issuers: [world.did("issuer-1")].into(),
        allowed_credential_types: [SourceFormat::VcJwt, SourceFormat::VcLd].into(),
        max_chain_depth: 4,
        max_status_age_seconds: 3600,
        require_anchor: false,
        required_scope: None,
    };
    vec![
        base.clone(),
        VerificationPolicy {
            policy_id: STRICT_ISSUER.into(),
            allowed_credential_types: [SourceFormat::VcJwt].into(),
            ..base.clone()
        },
        VerificationPolicy { policy_id: ANCHOR_REQUIRED.into(), require_anchor: true, ..base.clone() },
        VerificationPolicy { policy_id: SHALLOW_DEPTH.into(), max_chain_depth: 1, ..base },
    ]
}

fn split_sd(token: &str) -> (&str, &str) {
    token.find('~').map_or((token, ""), |i| token.split_at(i))
}

/// Applies `f` to the decoded bytes of one segment of a compact JWS (or the
/// JWS part of an SD-JWT) and re-encodes it.
pub fn mutate_segment(token: &Value, segment: usize, f: impl FnOnce(&mut Vec<u8>)) -> Value {
    let token = token.as_str().expect("compact token");
    let (jws, rest) = split_sd(token);
    let mut parts: Vec<String> = jws.split('.').map(str::to_string).collect();
    let mut bytes = b64url_decode(&parts[segment]).expect("fixture segment decodes");
    f(&mut bytes);
    parts[segment] = b64url_encode(&bytes);
    Value::String(format!("{}{rest}", parts.join(".")))
}

fn replace_once(bytes: &mut Vec<u8>, from: &[u8], to: &[u8]) {
    let at = bytes.windows(from.len()).position(|w| w == from).expect("pattern present");
    bytes.splice(at..at + from.len(), to.iter().copied());
}

fn envelope(req: &VerificationRequest) -> Value {
    let mut body = serde_json::to_value(req).expect("serializable");
    let obj = body.as_object_mut().expect("object");
    let token = obj.remove("presentation").expect("presentation");
    obj.insert("vp_token".into(), token);
    obj.insert(
        "presentation_submission".into(),
        json!({"id": "submission-1", "definition_id": "trustgate-request",
               "descriptor_map": [{"id": "credential-0", "format": "jwt_vc", "path": "$"}]}),
    );
    body
}

struct Cases(Vec<CaseFile>);

impl Cases {
    fn add(&mut self, scenario: Scenario, name: &str, expected: ResultCode, req: &VerificationRequest) -> &mut CaseFile {
        self.raw(scenario, name, Endpoint::Verify, expected, serde_json::to_value(req).expect("serializable"))
    }

    fn raw(&mut self, scenario: Scenario, name: &str, endpoint: Endpoint, expected: ResultCode, body: Value) -> &mut CaseFile {
        self.0.push(CaseFile {
            name: name.into(),
            scenario,
            endpoint,
            expected,
            equivalent_to: None,
            expect_scope: None,
            expect_fingerprint: None,
            body,
        });
        self.0.last_mut().unwrap()
    }
}

fn named(name: &str, policy: &str, presentation: Value, chain: Vec<Value>) -> VerificationRequest {
    request(name, policy, presentation, chain)
}

fn scope_list(s: &[&str]) -> Option<Vec<String>> {
    Some(s.iter().map(|p| p.to_string()).collect())
}

struct Anchors {
    active: Vec<Value>,
    revoked: Vec<Value>,
    expired: Vec<Value>,
}

fn build_cases(w: &World) -> (Vec<CaseFile>, Anchors) {
    use ResultCode::*;
    use Scenario::*;
    let mut c = Cases(Vec::new());

    let alice = w.credential("urn:cred:alice-1", "alice", 0);
    let vc_jwt = w.vc_jwt(&alice);
    let vc_ld = w.vc_ld(&alice);
    let top = ["records:read", "records:write", "calendar:read"];
    let mid = ["records:read", "calendar:read"];
    let g1 = w.grant("dg-1", "alice", "agent-1", &top);
    let g2 = w.grant("dg-2", "agent-1", "agent-2", &mid);
    let g3 = w.grant("dg-3", "agent-2", "agent-3", &["records:read"]);

    // S1: federated web flow
    let r = named("s1-vcjwt-ok", PERMISSIVE, vc_jwt.clone(), vec![]);
    c.add(S1, "s1-vcjwt-ok", Ok, &r);
    c.raw(S1, "s1-oidc4vp-ok", Endpoint::Oidc4vp, Ok, envelope(&r)).equivalent_to = Some("s1-vcjwt-ok".into());
    let r = named("s1-vcjwt-chain-ok", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1)]);
    c.add(S1, "s1-vcjwt-chain-ok", Ok, &r).expect_scope = scope_list(&top);
    c.raw(S1, "s1-oidc4vp-chain-ok", Endpoint::Oidc4vp, Ok, envelope(&r)).equivalent_to =
        Some("s1-vcjwt-chain-ok".into());
    let tampered = mutate_segment(&vc_jwt, 1, |p| replace_once(p, b"\"analyst\"", b"\"analysT\""));
    let r = named("s1-payload-tampered", PERMISSIVE, tampered, vec![]);
    c.add(S1, "s1-payload-tampered", E200, &r);
    c.raw(S1, "s1-oidc4vp-payload-tampered", Endpoint::Oidc4vp, E200, envelope(&r));
    let r = named(
        "s1-header-tampered",
        PERMISSIVE,
        mutate_segment(&vc_jwt, 0, |h| replace_once(h, b"vc+jwt", b"vc+jwT")),
        vec![],
    );
    c.add(S1, "s1-header-tampered", E200, &r);
    let mut env = envelope(&named("s1-oidc4vp-no-token", PERMISSIVE, vc_jwt.clone(), vec![]));
    env.as_object_mut().unwrap().remove("vp_token");
    c.raw(S1, "s1-oidc4vp-missing-vp-token", Endpoint::Oidc4vp, E100, env);

    // S2: SSI native flow
    let r = named("s2-vcld-ok", PERMISSIVE, vc_ld.clone(), vec![]);
    c.add(S2, "s2-vcld-ok", Ok, &r);
    c.raw(S2, "s2-oidc4vp-vcld-ok", Endpoint::Oidc4vp, Ok, envelope(&r)).equivalent_to = Some("s2-vcld-ok".into());
    let r = named("s2-vcld-ld-grant-ok", PERMISSIVE, vc_ld.clone(), vec![w.ld(&g1), w.ld(&g2)]);
    c.add(S2, "s2-vcld-ld-grant-ok", Ok, &r).expect_scope = scope_list(&mid);
    let r = named("s2-vcld-sd-grant-bridge-ok", PERMISSIVE, vc_ld.clone(), vec![w.sd(&g1)]);
    c.add(S2, "s2-vcld-sd-grant-bridge-ok", Ok, &r).expect_scope = scope_list(&top);
    let revoked = w.credential("urn:cred:alice-revoked", "alice", REVOKED_CREDENTIAL_INDEX);
    let r = named("s2-vcld-revoked", PERMISSIVE, w.vc_ld(&revoked), vec![]);
    c.add(S2, "s2-vcld-revoked", E200, &r);
    let r = named("s2-vcjwt-revoked", PERMISSIVE, w.vc_jwt(&revoked), vec![]);
    c.add(S2, "s2-vcjwt-revoked", E200, &r);
    let r = named("s2-vcld-revoked-with-chain", PERMISSIVE, w.vc_ld(&revoked), vec![w.ld(&g1)]);
    c.add(S2, "s2-vcld-revoked-with-chain", E200, &r);

    // S3: human to agent delegation
    let r = named("s3-depth1-ok", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1)]);
    c.add(S3, "s3-depth1-ok", Ok, &r).expect_scope = scope_list(&top);
    let r = named("s3-depth2-ok", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), w.sd(&g2)]);
    c.add(S3, "s3-depth2-ok", Ok, &r).expect_scope = scope_list(&mid);
    let r = named("s3-depth3-mixed-ok", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), w.ld(&g2), w.sd(&g3)]);
    c.add(S3, "s3-depth3-mixed-ok", Ok, &r).expect_scope = scope_list(&["records:read"]);
    let r = named("s3-vcld-depth3-ok", PERMISSIVE, vc_ld.clone(), vec![w.ld(&g1), w.sd(&g2), w.ld(&g3)]);
    c.add(S3, "s3-vcld-depth3-ok", Ok, &r).expect_scope = scope_list(&["records:read"]);
    let same = w.grant("dg-3-same", "agent-2", "agent-3", &mid);
    let r = named("s3-scope-preserved-ok", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), w.sd(&g2), w.sd(&same)]);
    c.add(S3, "s3-scope-preserved-ok", Ok, &r).expect_scope = scope_list(&mid);
    let mut r = named("s3-agent-presents-ok", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), w.sd(&g2)]);
    let (kid, sig) = w.presenter_proof("agent-2", "s3-agent-presents-ok");
    r.presenter_key_id = Some(kid);
    r.presenter_signature = Some(sig);
    c.add(S3, "s3-agent-presents-ok", Ok, &r).expect_scope = scope_list(&mid);
    let wide = w.grant("dg-2-wide", "agent-1", "agent-2", &["records:read", "mail:send"]);
    let r = named("s3-escalation", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), w.sd(&wide)]);
    c.add(S3, "s3-escalation", E400, &r);
    let back = w.grant("dg-2-back", "agent-1", "alice", &mid);
    let again = w.grant("dg-3-again", "alice", "agent-1", &["records:read"]);
    let r = named("s3-cycle", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), w.sd(&back), w.sd(&again)]);
    c.add(S3, "s3-cycle", E300, &r);
    let mut r = named("s3-wrong-presenter", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), w.sd(&g2)]);
    let (kid, sig) = w.presenter_proof("agent-1", "s3-wrong-presenter");
    r.presenter_key_id = Some(kid);
    r.presenter_signature = Some(sig);
    c.add(S3, "s3-wrong-presenter", E400, &r);

    // S4: one minimal mutation of a valid base per case
    let base_chain = vec![w.sd(&g1), w.sd(&g2)];
    let mut no_presentation = serde_json::to_value(named("s4-e100-missing-presentation", PERMISSIVE, vc_jwt.clone(), vec![])).unwrap();
    no_presentation.as_object_mut().unwrap().remove("presentation");
    c.raw(S4, "s4-e100-missing-presentation", Endpoint::Verify, E100, no_presentation);
    let Value::String(t) = &vc_jwt else { unreachable!() };
    let two_segments = Value::String(t.rsplit_once('.').unwrap().0.to_string());
    c.add(S4, "s4-e100-truncated-jwt", E100, &named("s4-e100-truncated-jwt", PERMISSIVE, two_segments, vec![]));
    let mut no_scope = w.ld(&g1);
    no_scope.as_object_mut().unwrap().remove("scope");
    c.add(S4, "s4-e100-grant-missing-scope", E100, &named("s4-e100-grant-missing-scope", PERMISSIVE, vc_jwt.clone(), vec![no_scope]));
    let mut inverted = g1.clone();
    inverted.not_before = inverted.not_after + 1;
    c.add(S4, "s4-e100-grant-inverted-window", E100, &named("s4-e100-grant-inverted-window", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&inverted)]));

    let flipped = mutate_segment(&vc_jwt, 2, |s| s[0] ^= 0x01);
    c.add(S4, "s4-e200-signature-bitflip", E200, &named("s4-e200-signature-bitflip", PERMISSIVE, flipped, base_chain.clone()));
    let tampered = mutate_segment(&vc_jwt, 1, |p| replace_once(p, b"\"analyst\"", b"\"analysT\""));
    c.add(S4, "s4-e200-payload-tamper", E200, &named("s4-e200-payload-tamper", PERMISSIVE, tampered, base_chain.clone()));
    let mut rogue = alice.clone();
    rogue.issuer = w.did("mallory");
    c.add(S4, "s4-e200-unknown-issuer", E200, &named("s4-e200-unknown-issuer", PERMISSIVE, w.vc_jwt_by(&rogue, "mallory"), base_chain.clone()));
    c.add(S4, "s4-e200-revoked-issuer-key", E200, &named("s4-e200-revoked-issuer-key", PERMISSIVE, w.vc_jwt_by(&alice, "issuer-1-old"), base_chain.clone()));
    let mut expired = alice.clone();
    expired.expires_at = FIXTURE_EPOCH - 1;
    c.add(S4, "s4-e200-expired-credential", E200, &named("s4-e200-expired-credential", PERMISSIVE, w.vc_jwt(&expired), base_chain.clone()));
    let revoked_jwt = w.vc_jwt(&revoked);
    c.add(S4, "s4-e200-revoked-credential", E200, &named("s4-e200-revoked-credential", PERMISSIVE, revoked_jwt, base_chain.clone()));
    let mut stale = alice.clone();
    stale.status_ref.as_mut().unwrap().list_id = STALE_LIST.into();
    c.add(S4, "s4-e200-stale-status", E200, &named("s4-e200-stale-status", PERMISSIVE, w.vc_jwt(&stale), base_chain.clone()));

    let swapped = vec![w.sd(&g2), w.sd(&g1)];
    c.add(S4, "s4-e300-chain-order", E300, &named("s4-e300-chain-order", PERMISSIVE, vc_jwt.clone(), swapped));
    let gap = vec![w.sd(&g1), w.sd(&g3)];
    c.add(S4, "s4-e300-broken-chain", E300, &named("s4-e300-broken-chain", PERMISSIVE, vc_jwt.clone(), gap));
    let bad_grant = mutate_segment(&w.sd(&g2), 2, |s| s[10] ^= 0x80);
    c.add(S4, "s4-e300-grant-signature-bitflip", E300, &named("s4-e300-grant-signature-bitflip", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), bad_grant]));
    c.add(S4, "s4-e300-depth-exceeded", E300, &named("s4-e300-depth-exceeded", SHALLOW_DEPTH, vc_jwt.clone(), base_chain.clone()));
    c.add(S4, "s4-e300-cycle", E300, &named("s4-e300-cycle", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), w.sd(&back), w.sd(&again)]));

    let mut escalated = g2.clone();
    escalated.scope = Scope::new(["records:read", "calendar:write"]).unwrap();
    c.add(S4, "s4-e400-scope-escalation", E400, &named("s4-e400-scope-escalation", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), w.sd(&escalated)]));
    let mut lapsed = g2.clone();
    lapsed.not_after = FIXTURE_EPOCH - 1;
    c.add(S4, "s4-e400-grant-expired", E400, &named("s4-e400-grant-expired", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), w.sd(&lapsed)]));
    let mut pulled = g2.clone();
    pulled.status_ref = Some(trustgate_core::model::StatusRef { list_id: GRANT_LIST.into(), index: REVOKED_GRANT_INDEX });
    c.add(S4, "s4-e400-grant-revoked", E400, &named("s4-e400-grant-revoked", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), w.sd(&pulled)]));
    let mut rebound = g2.clone();
    rebound.key_binding = w.key_id("agent-3");
    c.add(S4, "s4-e400-key-binding-mismatch", E400, &named("s4-e400-key-binding-mismatch", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&g1), w.sd(&rebound)]));
    let mut misbound = g1.clone();
    misbound.key_binding = w.key_id("agent-3");
    c.add(S4, "s4-e400-redelegation-wrong-key", E400, &named("s4-e400-redelegation-wrong-key", PERMISSIVE, vc_jwt.clone(), vec![w.sd(&misbound), w.sd(&g2)]));
    let mut r = named("s4-e400-presenter-mismatch", PERMISSIVE, vc_jwt.clone(), base_chain.clone());
    r.presenter_key_id = Some(w.key_id("agent-1"));
    c.add(S4, "s4-e400-presenter-mismatch", E400, &r);

    let mut foreign = alice.clone();
    foreign.issuer = w.did("issuer-2");
    c.add(S4, "s4-e500-untrusted-issuer", E500, &named("s4-e500-untrusted-issuer", PERMISSIVE, w.vc_jwt(&foreign), base_chain.clone()));
    c.add(S4, "s4-e500-type-not-allowed", E500, &named("s4-e500-type-not-allowed", STRICT_ISSUER, vc_ld.clone(), base_chain.clone()));

    // S5: anchoring matrix
    let a = vec![w.sd(&w.grant("dg-a1", "alice", "agent-1", &top)), w.sd(&w.grant("dg-a2", "agent-1", "agent-2", &mid))];
    let rv = vec![w.sd(&w.grant("dg-r1", "alice", "agent-1", &top)), w.sd(&w.grant("dg-r2", "agent-1", "agent-2", &mid))];
    let ex = vec![w.ld(&w.grant("dg-x1", "alice", "agent-1", &top))];
    let un = vec![w.sd(&w.grant("dg-u1", "alice", "agent-1", &top)), w.ld(&w.grant("dg-u2", "agent-1", "agent-2", &mid))];
    let mut a2_changed = w.grant("dg-a2", "agent-1", "agent-2", &mid);
    a2_changed.constraints.insert("purpose".into(), "other-task".into());
    let mismatched = vec![a[0].clone(), w.sd(&a2_changed)];

    let fp = fingerprint_of(&a);
    c.add(S5, "s5-required-anchored-ok", Ok, &named("s5-required-anchored-ok", ANCHOR_REQUIRED, vc_jwt.clone(), a.clone()))
        .expect_fingerprint = Some(fp);
    c.add(S5, "s5-required-unanchored", E300, &named("s5-required-unanchored", ANCHOR_REQUIRED, vc_jwt.clone(), un.clone()));
    c.add(S5, "s5-required-revoked", E300, &named("s5-required-revoked", ANCHOR_REQUIRED, vc_jwt.clone(), rv.clone()));
    c.add(S5, "s5-required-expired", E300, &named("s5-required-expired", ANCHOR_REQUIRED, vc_ld.clone(), ex.clone()));
    c.add(S5, "s5-required-mismatched", E300, &named("s5-required-mismatched", ANCHOR_REQUIRED, vc_jwt.clone(), mismatched));
    c.add(S5, "s5-optional-unanchored-ok", Ok, &named("s5-optional-unanchored-ok", PERMISSIVE, vc_jwt.clone(), un));
    c.add(S5, "s5-optional-anchored-ok", Ok, &named("s5-optional-anchored-ok", PERMISSIVE, vc_jwt.clone(), a.clone()));
    c.add(S5, "s5-optional-revoked-ok", Ok, &named("s5-optional-revoked-ok", PERMISSIVE, vc_jwt.clone(), rv.clone()));
    c.add(S5, "s5-optional-expired-ok", Ok, &named("s5-optional-expired-ok", PERMISSIVE, vc_ld, ex.clone()));

    (c.0, Anchors { active: a, revoked: rv, expired: ex })
}

fn seed_ledger(path: &Path, anchors: &Anchors) -> anyhow::Result<usize> {
    if path.exists() {
        fs::remove_file(path).with_context(|| format!("removing {}", path.display()))?;
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let store = FileAnchorStore::open(path)?;
    store.anchor(&fingerprint_of(&anchors.active), FIXTURE_EPOCH - 3600, None)?;
    let revoked = fingerprint_of(&anchors.revoked);
    store.anchor(&revoked, FIXTURE_EPOCH - 3600, None)?;
    store.revoke(&revoked, FIXTURE_EPOCH - 1800)?;
    store.anchor(&fingerprint_of(&anchors.expired), FIXTURE_EPOCH - 7200, Some(FIXTURE_EPOCH - 60))?;
    Ok(store.len())
}

/// Submits a case in-process.
pub fn run_case_local(gw: &Gateway, case: &CaseFile, now: i64) -> anyhow::Result<VerifyResponse> {
    let body = serde_json::to_vec(&case.body)?;
    let out = match case.endpoint {
        Endpoint::Verify => gw.verify_body(&body, Clock::at(now)),
        Endpoint::Oidc4vp => gw.verify_envelope(&body, Clock::at(now)),
    };
    out.map_err(|e| anyhow::anyhow!("{}: {e}", case.name))
}

/// Writes the corpus under `out` and checks every case against the engine
/// before returning.
pub fn generate_fixtures(seed: u64, out: &Path) -> anyhow::Result<FixtureSummary> {
    let layout = Layout::new(out);
    let world = World::generate(seed);

    write_json(&layout.private_keys(), &world.seed_files())?;
    write_json(&layout.verifier_key(), &world.verifier_seed())?;
    write_json(&layout.jwks(), &world.jwks())?;
    write_json(&layout.registry(), &world.registry_file())?;
    let policies_dir = layout.policies();
    if policies_dir.exists() {
        fs::remove_dir_all(&policies_dir)?;
    }
    for p in policies(&world) {
        write_json(&policies_dir.join(format!("{}.json", p.policy_id)), &p)?;
    }

    let alice = world.credential("urn:cred:alice-1", "alice", 0);
    fs::create_dir_all(layout.credentials())?;
    fs::write(
        layout.credentials().join("alice.vc.jwt"),
        format!("{}\n", world.vc_jwt(&alice).as_str().unwrap()),
    )?;
    write_json(&layout.credentials().join("alice.vc-ld.json"), &world.vc_ld(&alice))?;
    let mut chains = Vec::new();
    let hops = [("alice", "agent-1"), ("agent-1", "agent-2"), ("agent-2", "agent-3")];
    let scopes: [&[&str]; 3] =
        [&["records:read", "records:write", "calendar:read"], &["records:read", "calendar:read"], &["records:read"]];
    for depth in 1..=3 {
        let grants: Vec<_> = (0..depth)
            .map(|i| world.grant(&format!("dg-chain{depth}-{i}"), hops[i].0, hops[i].1, scopes[i]))
            .collect();
        let sd: Vec<Value> = grants.iter().map(|g| world.sd(g)).collect();
        let ld: Vec<Value> = grants.iter().map(|g| world.ld(g)).collect();
        write_json(&layout.grants().join(format!("chain-depth{depth}.sd-jwt.json")), &sd)?;
        write_json(&layout.grants().join(format!("chain-depth{depth}.ld.json")), &ld)?;
        chains.push(sd);
        chains.push(ld);
    }

    let (cases, anchors) = build_cases(&world);
    let ledger_records = seed_ledger(&layout.ledger(), &anchors)?;

    let requests = out.join("requests");
    if requests.exists() {
        fs::remove_dir_all(&requests)?;
    }
    let mut summary =
        FixtureSummary { seed, cases: BTreeMap::new(), expected_codes: BTreeMap::new(), ledger_records };
    for case in &cases {
        write_json(&layout.cases(case.scenario).join(format!("{}.json", case.name)), case)?;
        *summary.cases.entry(case.scenario).or_default() += 1;
        *summary.expected_codes.entry(case.expected).or_default() += 1;
    }

    let alice_jwt = world.vc_jwt(&alice);
    let chain_cases: Vec<CaseFile> = chains
        .into_iter()
        .enumerate()
        .map(|(i, chain)| CaseFile {
            name: format!("grant-file-{i}"),
            scenario: Scenario::S3,
            endpoint: Endpoint::Verify,
            expected: ResultCode::Ok,
            equivalent_to: None,
            expect_scope: None,
            expect_fingerprint: None,
            body: serde_json::to_value(request(&format!("grant-file-{i}"), PERMISSIVE, alice_jwt.clone(), chain))
                .expect("serializable"),
        })
        .collect();
    precheck(&layout, &cases)?;
    precheck(&layout, &chain_cases)?;
    Ok(summary)
}

/// Runs every case through the gateway in-process and compares the result
/// code with the expectation recorded in the case file.
fn precheck(layout: &Layout, cases: &[CaseFile]) -> anyhow::Result<()> {
    let gw = Gateway::load(&layout.gateway_config(true, None))?;
    for case in cases {
        let got = run_case_local(&gw, case, FIXTURE_EPOCH)?;
        if got.payload.result != case.expected {
            bail!(
                "fixture {} expected {} but the engine returned {} ({})",
                case.name,
                case.expected,
                got.payload.result,
                got.payload.detail
            );
        }
    }
    ensure!(
        cases.iter().all(|c| c.scenario != Scenario::S4)
            || ResultCode::ALL[1..].iter().all(|code| cases.iter().any(|c| c.scenario == Scenario::S4 && c.expected == *code)),
        "negative corpus must cover every error class"
    );
    Ok(())
}
