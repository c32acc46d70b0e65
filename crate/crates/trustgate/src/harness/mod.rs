//! Fixture corpus, scenario suites S1 to S5 and the batch experiment.

pub mod batch;
pub mod client;
pub mod fixtures;
pub mod report;
pub mod scenarios;
pub mod world;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use trustgate_core::ResultCode;

use crate::gateway::GatewayConfig;

pub use world::World;

/// Reference time of the fixture corpus. Scenario and batch runs pin the
/// gateway clock to it.
pub const FIXTURE_EPOCH: i64 = 1_750_000_000;

/// Directory layout of a generated corpus.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn registry(&self) -> PathBuf {
        self.root.join("registry.json")
    }

    pub fn policies(&self) -> PathBuf {
        self.root.join("policies")
    }

    pub fn ledger(&self) -> PathBuf {
        self.root.join("anchors").join("ledger.jsonl")
    }

    pub fn verifier_key(&self) -> PathBuf {
        self.root.join("keys").join("verifier.json")
    }

    pub fn private_keys(&self) -> PathBuf {
        self.root.join("keys").join("private.json")
    }

    pub fn jwks(&self) -> PathBuf {
        self.root.join("keys").join("jwks.json")
    }

    pub fn credentials(&self) -> PathBuf {
        self.root.join("credentials")
    }

    pub fn grants(&self) -> PathBuf {
        self.root.join("grants")
    }

    pub fn cases(&self, tag: Scenario) -> PathBuf {
        self.root.join("requests").join(tag.as_str())
    }

    pub fn gateway_config(&self, allow_clock_override: bool, metrics_out: Option<&Path>) -> GatewayConfig {
        GatewayConfig {
            registry: self.registry(),
            policies_dir: self.policies(),
            ledger: self.ledger(),
            verifier_key: self.verifier_key(),
            metrics_out: metrics_out.map(Path::to_path_buf),
            allow_clock_override,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scenario {
    S1,
    S2,
    S3,
    S4,
    S5,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [Scenario::S1, Scenario::S2, Scenario::S3, Scenario::S4, Scenario::S5];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::S1 => "S1",
            Scenario::S2 => "S2",
            Scenario::S3 => "S3",
            Scenario::S4 => "S4",
            Scenario::S5 => "S5",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Verify,
    Oidc4vp,
}

impl Endpoint {
    pub fn path(self) -> &'static str {
        match self {
            Endpoint::Verify => "/verify",
            Endpoint::Oidc4vp => "/verify/oidc4vp",
        }
    }
}

/// One scenario request with its expected outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    pub name: String,
    pub scenario: Scenario,
    pub endpoint: Endpoint,
    pub expected: ResultCode,
    /// Another case whose result object must be identical to this one's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalent_to: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_scope: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_fingerprint: Option<String>,
    pub body: Value,
}
