//! HTTP trust gateway.
//!
//! Request bodies are parsed, normalized into a verification context and
//! handed to the engine. Verification failures travel inside the signed
//! result object with HTTP 200; transport status codes are reserved for
//! bodies that are not JSON (400) and unknown policy ids (404).

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use trustgate_core::adapters::{extract_vp_token, VerificationRequest};
use trustgate_core::canonical::{b64url_encode, sha256_hex, value_to_canonical_bytes};
use trustgate_core::engine::{reject_unnormalized, verify_with, Env, StructuralLdProof, VerifyStats};
use trustgate_core::model::{InvariantFlags, ProofKind};
use trustgate_core::normalize::{artifact_size, build_cvc};
use trustgate_core::{
    Clock, ProfileTag, ResultCode, SourceFormat, TrustRegistry, VerificationPolicy, VerificationResultObject,
    VerifierKey,
};

use crate::anchor_store::FileAnchorStore;
use crate::files::{load_policies, load_registry, load_verifier_key};

/// Test-only request header carrying the verification time in Unix seconds.
pub const CLOCK_HEADER: &str = "x-verify-clock";
pub const CAPABILITIES_PATH: &str = "/.well-known/verifier-capabilities";

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub registry: PathBuf,
    pub policies_dir: PathBuf,
    pub ledger: PathBuf,
    pub verifier_key: PathBuf,
    pub metrics_out: Option<PathBuf>,
    pub allow_clock_override: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapabilityDescriptor {
    pub supported_profiles: Vec<ProfileTag>,
    pub supported_formats: Vec<SourceFormat>,
    pub supported_proof_kinds: Vec<ProofKind>,
    pub policy_ids: Vec<String>,
    pub verifier_key_id: String,
    /// base64url Ed25519 key that verifies result objects.
    pub verifier_public_key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub request_id: String,
    pub profile: Option<ProfileTag>,
    pub depth: u32,
    pub anchored: bool,
    pub result: ResultCode,
    pub t_total_ms: f64,
    pub t_normalize_ms: f64,
    pub t_verify_ms: f64,
    pub size_input_bytes: u64,
    pub size_cvc_bytes: u64,
    pub size_vro_bytes: u64,
    pub size_chain_bytes: u64,
    pub invariant_flags: InvariantFlags,
    pub signature_checks: u32,
    pub ledger_lookups: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyResponse {
    pub vro_jws: String,
    pub payload: VerificationResultObject,
    pub metrics: MetricsRecord,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("body is not JSON: {0}")]
    NotJson(String),
    #[error("envelope must be a JSON object")]
    MalformedEnvelope,
    #[error("unknown policy_id {0:?}")]
    UnknownPolicy(String),
    #[error("invalid {CLOCK_HEADER} header")]
    BadClock,
}

impl IntoResponse for GatewayError {
    fn into_response(self) -> Response {
        let status = match self {
            GatewayError::UnknownPolicy(_) => StatusCode::NOT_FOUND,
            _ => StatusCode::BAD_REQUEST,
        };
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

pub struct Gateway {
    registry: TrustRegistry,
    policies: BTreeMap<String, VerificationPolicy>,
    ledger: Arc<FileAnchorStore>,
    verifier: VerifierKey,
    metrics: Option<Mutex<File>>,
    allow_clock_override: bool,
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

fn system_now() -> i64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs() as i64)
}

fn input_hash(body: &[u8], value: &Value) -> String {
    match value_to_canonical_bytes(value) {
        Ok(bytes) => sha256_hex(&bytes),
        Err(_) => sha256_hex(body),
    }
}

impl Gateway {
    pub fn new(
        registry: TrustRegistry,
        policies: BTreeMap<String, VerificationPolicy>,
        ledger: Arc<FileAnchorStore>,
        verifier: VerifierKey,
    ) -> Self {
        Gateway { registry, policies, ledger, verifier, metrics: None, allow_clock_override: false }
    }

    /// Loads every configured file. Any failure refuses startup.
    pub fn load(cfg: &GatewayConfig) -> anyhow::Result<Self> {
        let registry = load_registry(&cfg.registry)?;
        let policies = load_policies(&cfg.policies_dir)?;
        let ledger = Arc::new(FileAnchorStore::open(&cfg.ledger)?);
        let verifier = load_verifier_key(&cfg.verifier_key)?;
        let mut gw = Gateway::new(registry, policies, ledger, verifier);
        if let Some(path) = &cfg.metrics_out {
            gw = gw.with_metrics_file(path)?;
        }
        Ok(gw.with_clock_override(cfg.allow_clock_override))
    }

    pub fn with_metrics_file(mut self, path: &std::path::Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.metrics = Some(Mutex::new(file));
        Ok(self)
    }

    pub fn with_clock_override(mut self, allow: bool) -> Self {
        self.allow_clock_override = allow;
        self
    }

    pub fn ledger(&self) -> &Arc<FileAnchorStore> {
        &self.ledger
    }

    pub fn policies(&self) -> &BTreeMap<String, VerificationPolicy> {
        &self.policies
    }

    pub fn capabilities(&self) -> CapabilityDescriptor {
        CapabilityDescriptor {
            supported_profiles: ProfileTag::ALL.to_vec(),
            supported_formats: vec![SourceFormat::VcJwt, SourceFormat::VcLd],
            supported_proof_kinds: vec![ProofKind::JwsEd25519, ProofKind::SdJwt, ProofKind::LdStub],
            policy_ids: self.policies.keys().cloned().collect(),
            verifier_key_id: self.verifier.key_id().into(),
            verifier_public_key: b64url_encode(&self.verifier.public_key()),
        }
    }

    fn clock(&self, headers: &HeaderMap) -> Result<Clock, GatewayError> {
        match headers.get(CLOCK_HEADER) {
            Some(v) if self.allow_clock_override => {
                let now = v.to_str().ok().and_then(|s| s.trim().parse().ok()).ok_or(GatewayError::BadClock)?;
                Ok(Clock::at(now))
            }
            Some(_) => {
                tracing::warn!("{CLOCK_HEADER} ignored; clock override is disabled");
                Ok(Clock::at(system_now()))
            }
            None => Ok(Clock::at(system_now())),
        }
    }

    /// Direct submission of a `VerificationRequest` body.
    pub fn verify_body(&self, body: &[u8], clock: Clock) -> Result<VerifyResponse, GatewayError> {
        let start = Instant::now();
        let value: Value = serde_json::from_slice(body).map_err(|e| GatewayError::NotJson(e.to_string()))?;
        self.verify_value(start, body, value, clock)
    }

    /// OIDC4VP response envelope carrying the presentation as `vp_token`.
    pub fn verify_envelope(&self, body: &[u8], clock: Clock) -> Result<VerifyResponse, GatewayError> {
        let start = Instant::now();
        let value: Value = serde_json::from_slice(body).map_err(|e| GatewayError::NotJson(e.to_string()))?;
        let Value::Object(mut envelope) = value else {
            return Err(GatewayError::MalformedEnvelope);
        };
        let token = match extract_vp_token(&Value::Object(envelope.clone())) {
            Ok(t) => t,
            Err(e) => {
                let policy = self.policy_for(&Value::Object(envelope.clone()))?;
                let value = Value::Object(envelope);
                return Ok(self.reject(start, body, &value, policy, None, &e.0, clock));
            }
        };
        envelope.remove("vp_token");
        envelope.remove("presentation_submission");
        envelope.insert("presentation".into(), token);
        self.verify_value(start, body, Value::Object(envelope), clock)
    }

    fn policy_for(&self, value: &Value) -> Result<Option<&VerificationPolicy>, GatewayError> {
        match value.get("policy_id").and_then(Value::as_str) {
            Some(id) => self.policies.get(id).map(Some).ok_or_else(|| GatewayError::UnknownPolicy(id.into())),
            None => Ok(None),
        }
    }

    fn verify_value(
        &self,
        start: Instant,
        body: &[u8],
        value: Value,
        clock: Clock,
    ) -> Result<VerifyResponse, GatewayError> {
        let policy = self.policy_for(&value)?;
        let request: VerificationRequest = match serde_json::from_value(value.clone()) {
            Ok(r) => r,
            Err(e) => {
                tracing::debug!(error = %e, "request schema");
                return Ok(self.reject(start, body, &value, policy, None, "request.schema", clock));
            }
        };
        let Some(policy) = policy else {
            return Ok(self.reject(start, body, &value, None, None, "request.policy_id", clock));
        };

        let t_norm = Instant::now();
        let cvc = build_cvc(&request, policy, &self.registry, clock);
        let t_normalize = t_norm.elapsed();
        let cvc = match cvc {
            Ok(c) => c,
            Err(e) => {
                return Ok(self.reject(start, body, &value, Some(policy), e.profile, &e.error.0, clock));
            }
        };

        let env = Env { registry: &self.registry, ledger: &*self.ledger, clock, ld: &StructuralLdProof };
        let t_ver = Instant::now();
        let out = verify_with(&cvc, &env, &self.verifier);
        let t_verify = t_ver.elapsed();

        let chain_bytes: u64 = request.chain_tokens.iter().map(artifact_size).sum();
        let metrics = MetricsRecord {
            request_id: out.vro.request_id.clone(),
            profile: out.vro.profile,
            depth: cvc.chain.len() as u32,
            anchored: policy.require_anchor && !cvc.chain.is_empty(),
            result: out.vro.result,
            t_total_ms: 0.0,
            t_normalize_ms: ms(t_normalize),
            t_verify_ms: ms(t_verify),
            size_input_bytes: artifact_size(&request.presentation),
            size_cvc_bytes: cvc.canonical_bytes().len() as u64,
            size_vro_bytes: out.signed.compact.len() as u64,
            size_chain_bytes: chain_bytes,
            invariant_flags: out.vro.invariant_flags,
            signature_checks: out.stats.signature_checks,
            ledger_lookups: out.stats.ledger_lookups,
        };
        Ok(self.finish(start, out.signed.compact, out.vro, metrics))
    }

    #[allow(clippy::too_many_arguments)]
    fn reject(
        &self,
        start: Instant,
        body: &[u8],
        value: &Value,
        policy: Option<&VerificationPolicy>,
        profile: Option<ProfileTag>,
        detail: &str,
        clock: Clock,
    ) -> VerifyResponse {
        let request_id = value.get("request_id").and_then(Value::as_str).unwrap_or_default();
        let policy_id = policy.map_or("", |p| p.policy_id.as_str());
        let out = reject_unnormalized(
            request_id,
            profile,
            policy_id,
            input_hash(body, value),
            detail,
            clock,
            &self.verifier,
        );
        let stats = VerifyStats::default();
        let metrics = MetricsRecord {
            request_id: request_id.into(),
            profile,
            depth: 0,
            anchored: false,
            result: out.vro.result,
            t_total_ms: 0.0,
            t_normalize_ms: 0.0,
            t_verify_ms: 0.0,
            size_input_bytes: value.get("presentation").map_or(0, artifact_size),
            size_cvc_bytes: 0,
            size_vro_bytes: out.signed.compact.len() as u64,
            size_chain_bytes: 0,
            invariant_flags: out.vro.invariant_flags,
            signature_checks: stats.signature_checks,
            ledger_lookups: stats.ledger_lookups,
        };
        self.finish(start, out.signed.compact, out.vro, metrics)
    }

    fn finish(
        &self,
        start: Instant,
        vro_jws: String,
        payload: VerificationResultObject,
        mut metrics: MetricsRecord,
    ) -> VerifyResponse {
        metrics.t_total_ms = ms(start.elapsed());
        if let Some(sink) = &self.metrics {
            let mut line = serde_json::to_vec(&metrics).expect("serializable");
            line.push(b'\n');
            if let Err(e) = sink.lock().unwrap().write_all(&line) {
                tracing::warn!(error = %e, "metrics sink write failed");
            }
        }
        VerifyResponse { vro_jws, payload, metrics }
    }
}

async fn handle_verify(State(gw): State<Arc<Gateway>>, headers: HeaderMap, body: Bytes) -> Response {
    match gw.clock(&headers).and_then(|clock| gw.verify_body(&body, clock)) {
        Ok(r) => Json(r).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn handle_verify_oidc4vp(State(gw): State<Arc<Gateway>>, headers: HeaderMap, body: Bytes) -> Response {
    match gw.clock(&headers).and_then(|clock| gw.verify_envelope(&body, clock)) {
        Ok(r) => Json(r).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn handle_health() -> Json<Value> {
    // startup fails when registry or ledger cannot be loaded
    Json(json!({ "status": "ok", "registry_loaded": true, "ledger_loaded": true }))
}

async fn handle_capabilities(State(gw): State<Arc<Gateway>>) -> Json<CapabilityDescriptor> {
    Json(gw.capabilities())
}

pub fn router(gw: Arc<Gateway>) -> Router {
    Router::new()
        .route("/verify", post(handle_verify))
        .route("/verify/oidc4vp", post(handle_verify_oidc4vp))
        .route("/health", get(handle_health))
        .route(CAPABILITIES_PATH, get(handle_capabilities))
        .with_state(gw)
}

/// Binds `addr` and serves in a background task. Returns the bound address.
pub async fn spawn(gw: Arc<Gateway>, addr: SocketAddr) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let app = router(gw);
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!(error = %e, "gateway stopped");
        }
    });
    Ok((local, handle))
}

/// Serves until Ctrl-C.
pub async fn serve(gw: Arc<Gateway>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "gateway listening");
    axum::serve(listener, router(gw))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
