//! Minimal HTTP client for the gateway.

use std::time::Instant;

use anyhow::{bail, Context};
use reqwest::StatusCode;
use serde_json::Value;

use super::Endpoint;
use crate::gateway::{CapabilityDescriptor, VerifyResponse, CAPABILITIES_PATH, CLOCK_HEADER};

#[derive(Debug, Clone)]
pub struct GatewayClient {
    http: reqwest::Client,
    base: String,
    clock: Option<i64>,
}

#[derive(Debug)]
pub struct Reply {
    pub status: StatusCode,
    pub body: Value,
    pub roundtrip_ms: f64,
}

impl GatewayClient {
    /// `base` is e.g. `http://127.0.0.1:8080`. With `clock` set, every
    /// request pins the verification time.
    pub fn new(base: &str, clock: Option<i64>) -> Self {
        GatewayClient { http: reqwest::Client::new(), base: base.trim_end_matches('/').into(), clock }
    }

    pub async fn post_raw(&self, path: &str, body: Vec<u8>) -> anyhow::Result<Reply> {
        let mut req = self
            .http
            .post(format!("{}{path}", self.base))
            .header("content-type", "application/json")
            .body(body);
        if let Some(now) = self.clock {
            req = req.header(CLOCK_HEADER, now.to_string());
        }
        let start = Instant::now();
        let resp = req.send().await.with_context(|| format!("POST {path}"))?;
        let status = resp.status();
        let bytes = resp.bytes().await?;
        let roundtrip_ms = start.elapsed().as_secs_f64() * 1000.0;
        let body = serde_json::from_slice(&bytes).unwrap_or(Value::Null);
        Ok(Reply { status, body, roundtrip_ms })
    }

    /// Posts a body and decodes a 200 response.
    pub async fn verify(&self, endpoint: Endpoint, body: &Value) -> anyhow::Result<(VerifyResponse, f64)> {
        let reply = self.post_raw(endpoint.path(), serde_json::to_vec(body)?).await?;
        if reply.status != StatusCode::OK {
            bail!("{} returned {}: {}", endpoint.path(), reply.status, reply.body);
        }
        Ok((serde_json::from_value(reply.body)?, reply.roundtrip_ms))
    }

    pub async fn get(&self, path: &str) -> anyhow::Result<(StatusCode, Value)> {
        let resp = self.http.get(format!("{}{path}", self.base)).send().await?;
        let status = resp.status();
        Ok((status, resp.json().await.unwrap_or(Value::Null)))
    }

    pub async fn capabilities(&self) -> anyhow::Result<CapabilityDescriptor> {
        let (status, body) = self.get(CAPABILITIES_PATH).await?;
        if status != StatusCode::OK {
            bail!("capabilities returned {status}");
        }
        Ok(serde_json::from_value(body)?)
    }
}
