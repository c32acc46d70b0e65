//! Seeded batch corpus of positive requests and its replay.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use trustgate_core::canonical::{b64url_decode, sha256_hex};
use trustgate_core::engine::verify_vro;
use trustgate_core::ledger::{AnchorLookup, AnchorState};
use trustgate_core::model::Scalar;
use trustgate_core::{Clock, ResultCode, SourceFormat};

use super::client::GatewayClient;
use super::fixtures::{ANCHOR_REQUIRED, PERMISSIVE};
use super::report::BatchReport;
use super::world::{fingerprint_of, request, World, PERMISSIONS, REVOKED_CREDENTIAL_INDEX, STATUS_LIST_BITS};
use super::{Endpoint, Layout, Scenario, FIXTURE_EPOCH};
use crate::anchor_store::FileAnchorStore;
use crate::files::{read_json, write_json};
use crate::gateway::{Gateway, MetricsRecord};

pub const DEFAULT_BATCH_SIZE: usize = 1200;
pub const MAX_DEPTH: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchCase {
    pub request_id: String,
    /// Which scenario pattern the request follows (S1, S2 or S3).
    pub pattern: Scenario,
    pub depth: u32,
    pub anchored: bool,
    pub presenter_proof: bool,
    pub body: Value,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchManifest {
    pub seed: u64,
    pub epoch: i64,
    pub request_ids: Vec<String>,
}

fn random_subset<'a>(rng: &mut ChaCha8Rng, from: &[&'a str]) -> Vec<&'a str> {
    let picked: Vec<&str> = from.iter().copied().filter(|_| rng.random_bool(0.5)).collect();
    if picked.is_empty() {
        vec![*from.choose(rng).expect("nonempty")]
    } else {
        picked
    }
}

fn build_case(world: &World, rng: &mut ChaCha8Rng, request_id: &str) -> (BatchCase, Vec<Value>) {
    let pattern = *[Scenario::S1, Scenario::S2, Scenario::S3].choose(rng).expect("nonempty");
    let depth = rng.random_range(0..=MAX_DEPTH);
    let anchored = depth > 0 && rng.random_bool(0.5);
    let presenter_proof = rng.random_bool(0.5);
    let holder = *["alice", "bob"].choose(rng).expect("nonempty");

    let mut index = rng.random_range(0..STATUS_LIST_BITS);
    while index == REVOKED_CREDENTIAL_INDEX {
        index = rng.random_range(0..STATUS_LIST_BITS);
    }
    let mut cred = world.credential(&format!("urn:cred:{request_id}"), holder, index);
    cred.claims.insert("employee_number".into(), Scalar::Int(rng.random_range(1000..100_000)));
    let ld_credential = match pattern {
        Scenario::S1 => false,
        Scenario::S2 => true,
        _ => rng.random_bool(0.5),
    };
    let presentation = if ld_credential { world.vc_ld(&cred) } else { world.vc_jwt(&cred) };

    let principals = [holder, "agent-1", "agent-2", "agent-3"];
    let mut scope = random_subset(rng, &PERMISSIONS);
    let mut chain = Vec::new();
    for k in 0..depth as usize {
        if k > 0 {
            scope = random_subset(rng, &scope);
        }
        let g = world.grant(&format!("dg-{request_id}-{k}"), principals[k], principals[k + 1], &scope);
        let ld = match pattern {
            Scenario::S1 => false,
            Scenario::S2 => true,
            _ => rng.random_bool(0.5),
        };
        chain.push(if ld { world.ld(&g) } else { world.sd(&g) });
    }

    let policy = if anchored { ANCHOR_REQUIRED } else { PERMISSIVE };
    let mut req = request(request_id, policy, presentation, chain.clone());
    if presenter_proof {
        let (kid, sig) = world.presenter_proof(principals[depth as usize], request_id);
        req.presenter_key_id = Some(kid);
        req.presenter_signature = Some(sig);
    }
    let body = serde_json::to_value(&req).expect("serializable");
    (BatchCase { request_id: request_id.into(), pattern, depth, anchored, presenter_proof, body }, chain)
}

/// Draws `n` positive requests, anchors the chains of the anchored ones in
/// the fixture ledger, and checks every request verifies `OK` in-process
/// before writing the corpus.
pub fn generate_batch(fixtures: &Path, seed: u64, n: usize, out: &Path) -> anyhow::Result<BatchManifest> {
    let layout = Layout::new(fixtures);
    let world = World::load(&layout.private_keys())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cases = Vec::with_capacity(n);
    {
        let store = FileAnchorStore::open(layout.ledger())?;
        for i in 0..n {
            let (case, chain) = build_case(&world, &mut rng, &format!("batch-{seed}-{i:05}"));
            if case.anchored {
                let fp = fingerprint_of(&chain);
                if store.lookup(&fp, FIXTURE_EPOCH) != AnchorState::Active {
                    store.anchor(&fp, FIXTURE_EPOCH - 600, None)?;
                }
            }
            cases.push(case);
        }
    }

    let gw = Gateway::load(&layout.gateway_config(true, None))?;
    let mut failures = Vec::new();
    for case in &cases {
        let body = serde_json::to_vec(&case.body)?;
        let got = gw.verify_body(&body, Clock::at(FIXTURE_EPOCH)).map_err(|e| anyhow::anyhow!("{e}"))?;
        if got.payload.result != ResultCode::Ok {
            failures.push(format!("{}: {} {}", case.request_id, got.payload.result, got.payload.detail));
        }
    }
    if !failures.is_empty() {
        bail!("{} generated requests do not verify: {}", failures.len(), failures.join("; "));
    }

    let requests = out.join("requests");
    if requests.exists() {
        fs::remove_dir_all(&requests)?;
    }
    for case in &cases {
        write_json(&requests.join(format!("{}.json", case.request_id)), case)?;
    }
    let manifest = BatchManifest {
        seed,
        epoch: FIXTURE_EPOCH,
        request_ids: cases.iter().map(|c| c.request_id.clone()).collect(),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

pub fn load_batch(corpus: &Path) -> anyhow::Result<(BatchManifest, Vec<BatchCase>)> {
    let manifest: BatchManifest = read_json(&corpus.join("manifest.json"))?;
    let cases = manifest
        .request_ids
        .iter()
        .map(|id| read_json(&corpus.join("requests").join(format!("{id}.json"))).map_err(anyhow::Error::from))
        .collect::<anyhow::Result<Vec<BatchCase>>>()?;
    Ok((manifest, cases))
}

/// Per-request outcome of a replay. Timings are the minimum over passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    #[serde(flatten)]
    pub metrics: MetricsRecord,
    pub pattern: Scenario,
    pub presenter_proof: bool,
    pub input_format: SourceFormat,
    pub t_e2e_ms: f64,
    pub size_vro_payload_bytes: u64,
    pub payload_hash: String,
    pub signature_valid: bool,
    pub rerun_identical: bool,
}

struct Pass {
    metrics: MetricsRecord,
    e2e_ms: f64,
    payload: Vec<u8>,
    signature_valid: bool,
}

fn payload_bytes(compact: &str) -> Vec<u8> {
    compact.split('.').nth(1).and_then(|p| b64url_decode(p).ok()).unwrap_or_default()
}

/// Replays the corpus sequentially `passes` times (at least 2) with the
/// clock pinned to the corpus epoch.
pub async fn run_batch(corpus: &Path, client: &GatewayClient, passes: usize) -> anyhow::Result<(Vec<BatchRecord>, BatchReport)> {
    let passes = passes.max(2);
    let (_, cases) = load_batch(corpus)?;
    let caps = client.capabilities().await?;
    let public_key: [u8; 32] = b64url_decode(&caps.verifier_public_key)?
        .try_into()
        .map_err(|_| anyhow::anyhow!("verifier key is not 32 bytes"))?;

    let mut runs: BTreeMap<String, Vec<Pass>> = BTreeMap::new();
    for pass in 0..passes {
        for case in &cases {
            let (resp, e2e_ms) = client
                .verify(Endpoint::Verify, &case.body)
                .await
                .with_context(|| format!("pass {pass}, request {}", case.request_id))?;
            let signature_valid = verify_vro(&resp.vro_jws, &public_key).is_ok_and(|v| v == resp.payload);
            runs.entry(case.request_id.clone()).or_default().push(Pass {
                metrics: resp.metrics,
                e2e_ms,
                payload: payload_bytes(&resp.vro_jws),
                signature_valid,
            });
        }
    }

    let mut records = Vec::with_capacity(cases.len());
    for case in &cases {
        let passes = &runs[&case.request_id];
        let first = &passes[0];
        let min = |f: fn(&Pass) -> f64| passes.iter().map(f).fold(f64::INFINITY, f64::min);
        let mut metrics = first.metrics.clone();
        metrics.t_total_ms = min(|p| p.metrics.t_total_ms);
        metrics.t_normalize_ms = min(|p| p.metrics.t_normalize_ms);
        metrics.t_verify_ms = min(|p| p.metrics.t_verify_ms);
        let input_format = if case.body["presentation"].is_string() { SourceFormat::VcJwt } else { SourceFormat::VcLd };
        records.push(BatchRecord {
            metrics,
            pattern: case.pattern,
            presenter_proof: case.presenter_proof,
            input_format,
            t_e2e_ms: min(|p| p.e2e_ms),
            size_vro_payload_bytes: first.payload.len() as u64,
            payload_hash: sha256_hex(&first.payload),
            signature_valid: passes.iter().all(|p| p.signature_valid),
            rerun_identical: passes.iter().all(|p| p.payload == first.payload && !p.payload.is_empty()),
        });
    }
    let report = BatchReport::from_records(&records, passes);
    Ok((records, report))
}

/// Writes `metrics.jsonl`, `batch_report.json` and `batch_report.md`.
pub fn write_outputs(out: &Path, records: &[BatchRecord], report: &BatchReport) -> anyhow::Result<()> {
    fs::create_dir_all(out)?;
    let mut lines = String::new();
    for r in records {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    fs::write(out.join("metrics.jsonl"), lines)?;
    write_json(&out.join("batch_report.json"), report)?;
    fs::write(out.join("batch_report.md"), report.to_markdown())?;
    Ok(())
}
