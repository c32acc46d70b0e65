//! Scenario suites S1 to S5 driven against a running gateway.

use std::collections::BTreeMap;
use std::fs;

use anyhow::Context;
use serde::Serialize;
use trustgate_core::adapters::parse_credential;
use trustgate_core::canonical::b64url_decode;
use trustgate_core::engine::verify_vro;
use trustgate_core::model::ProofKind;
use trustgate_core::{ResultCode, Scope, SourceFormat};

use super::client::GatewayClient;
use super::world::{CREDENTIAL_LIST, GRANT_LIST, REVOKED_CREDENTIAL_INDEX, REVOKED_GRANT_INDEX, STATUS_LIST_BITS};
use super::{CaseFile, Layout, Scenario};
use crate::files::{load_registry, read_json};
use crate::gateway::VerifyResponse;

#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub cases: usize,
    pub assertions: Vec<Assertion>,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed)
    }

    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.assertions.push(Assertion { name: name.into(), passed, detail: detail.into() });
    }
}

pub fn load_cases(layout: &Layout, tag: Scenario) -> anyhow::Result<Vec<CaseFile>> {
    let dir = layout.cases(tag);
    let mut paths: Vec<_> = fs::read_dir(&dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| Ok(read_json(p)?)).collect()
}

fn check_case(report: &mut ScenarioReport, case: &CaseFile, got: &VerifyResponse, public_key: &[u8; 32]) {
    let vro = &got.payload;
    report.check(
        format!("{}: result {}", case.name, case.expected),
        vro.result == case.expected,
        format!("got {} ({})", vro.result, vro.detail),
    );
    let signed = verify_vro(&got.vro_jws, public_key);
    report.check(
        format!("{}: signed result object", case.name),
        signed.as_ref().is_ok_and(|v| v == vro),
        format!("{:?}", signed.err()),
    );
    let flags_ok = if vro.result.is_ok() {
        vro.invariant_flags.all()
    } else {
        !vro.invariant_flags.all() || vro.detail.starts_with("policy:")
    };
    report.check(format!("{}: invariant flags", case.name), flags_ok, format!("{:?}", vro.invariant_flags));
    if let Some(expected) = &case.expect_scope {
        let want = Scope::new(expected.iter().map(String::as_str)).ok();
        report.check(
            format!("{}: effective scope", case.name),
            vro.effective_scope == want,
            format!("{:?}", vro.effective_scope),
        );
    }
    if let Some(fp) = &case.expect_fingerprint {
        report.check(
            format!("{}: chain fingerprint", case.name),
            vro.chain_fingerprint.as_ref() == Some(fp),
            format!("{:?}", vro.chain_fingerprint),
        );
    }
}

/// Runs one scenario's cases plus its scenario-specific assertions.
pub async fn run_scenario(tag: Scenario, layout: &Layout, client: &GatewayClient) -> anyhow::Result<ScenarioReport> {
    let caps = client.capabilities().await?;
    let public_key: [u8; 32] = b64url_decode(&caps.verifier_public_key)?
        .try_into()
        .map_err(|_| anyhow::anyhow!("verifier key is not 32 bytes"))?;
    let cases = load_cases(layout, tag)?;
    let mut report = ScenarioReport { scenario: tag, cases: cases.len(), assertions: Vec::new() };
    report.check("cases present", !cases.is_empty(), layout.cases(tag).display().to_string());

    let mut results: BTreeMap<String, VerifyResponse> = BTreeMap::new();
    for case in &cases {
        match client.verify(case.endpoint, &case.body).await {
            Ok((got, _)) => {
                check_case(&mut report, case, &got, &public_key);
                results.insert(case.name.clone(), got);
            }
            Err(e) => report.check(format!("{}: transport", case.name), false, e.to_string()),
        }
    }
    for case in &cases {
        if let Some(other) = &case.equivalent_to {
            let same = match (results.get(&case.name), results.get(other)) {
                (Some(a), Some(b)) => a.payload == b.payload && a.payload.cvc_hash == b.payload.cvc_hash,
                _ => false,
            };
            report.check(format!("{}: same result object as {other}", case.name), same, "");
        }
    }
    let false_accepts: Vec<&str> = cases
        .iter()
        .filter(|c| c.expected != ResultCode::Ok)
        .filter(|c| results.get(&c.name).is_some_and(|r| r.payload.result.is_ok()))
        .map(|c| c.name.as_str())
        .collect();
    report.check("no false accepts", false_accepts.is_empty(), false_accepts.join(", "));

    match tag {
        Scenario::S2 => check_ssi_normalization(&mut report, layout)?,
        Scenario::S4 => {
            for code in &ResultCode::ALL[1..] {
                let n = cases.iter().filter(|c| c.expected == *code).count();
                report.check(format!("negative class {code} covered"), n > 0, format!("{n} cases"));
            }
        }
        Scenario::S1 => {
            report.check(
                "capabilities list all profiles and formats",
                caps.supported_profiles.len() == 3 && caps.supported_formats.len() == 2,
                format!("{:?} {:?}", caps.supported_profiles, caps.supported_formats),
            );
        }
        _ => {}
    }
    Ok(report)
}

/// VC-LD and VC-JWT encodings of one credential normalize to the same
/// content, and the status documents decode to the intended bits.
fn check_ssi_normalization(report: &mut ScenarioReport, layout: &Layout) -> anyhow::Result<()> {
    let jwt = fs::read_to_string(layout.credentials().join("alice.vc.jwt"))?;
    let ld: serde_json::Value = read_json(&layout.credentials().join("alice.vc-ld.json"))?;
    let a = parse_credential(&serde_json::Value::String(jwt.trim().into()));
    let b = parse_credential(&ld);
    match (a, b) {
        (Ok(a), Ok(b)) => {
            let same = a.issuer == b.issuer
                && a.subject == b.subject
                && a.holder_key_id == b.holder_key_id
                && a.claims == b.claims
                && a.issued_at == b.issued_at
                && a.expires_at == b.expires_at
                && a.status_ref == b.status_ref;
            report.check("VC-LD and VC-JWT normalize to equivalent credentials", same, format!("{a:?} / {b:?}"));
            report.check(
                "source format and proof type preserved",
                a.source_format == SourceFormat::VcJwt
                    && b.source_format == SourceFormat::VcLd
                    && a.proof.kind == ProofKind::JwsEd25519
                    && b.proof.kind == ProofKind::LdStub,
                format!("{:?}/{:?}", a.proof.kind, b.proof.kind),
            );
        }
        (a, b) => report.check("fixture credentials parse", false, format!("{:?} / {:?}", a.err(), b.err())),
    }

    let registry = load_registry(&layout.registry())?;
    for (list, revoked) in [(CREDENTIAL_LIST, REVOKED_CREDENTIAL_INDEX), (GRANT_LIST, REVOKED_GRANT_INDEX)] {
        let bits: Result<Vec<bool>, _> = (0..STATUS_LIST_BITS).map(|i| registry.resolve_status(list, i)).collect();
        let ok = bits.as_ref().is_ok_and(|b| b.iter().enumerate().all(|(i, &bit)| bit == (i as u64 == revoked)));
        report.check(format!("status list {list} decodes"), ok, format!("revoked index {revoked}"));
        report.check(
            format!("status list {list} is bounded"),
            registry.resolve_status(list, STATUS_LIST_BITS).is_err(),
            "",
        );
    }
    Ok(())
}
