//! Loading and writing the on-disk configuration: registry, policies and
//! the verifier signing key.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use trustgate_core::canonical::{b64url_decode, b64url_encode};
use trustgate_core::registry::RegistryError;
use trustgate_core::{TrustRegistry, VerificationPolicy, VerifierKey};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {source}")]
    Registry { path: PathBuf, source: RegistryError },
    #[error("{path}: invalid {field}")]
    Policy { path: PathBuf, field: &'static str },
    #[error("policy id {0:?} is defined twice")]
    DuplicatePolicy(String),
    #[error("{0}: seed must decode to 32 bytes")]
    BadSeed(PathBuf),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> LoadError + '_ {
    move |source| LoadError::Io { path: path.to_path_buf(), source }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, LoadError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| LoadError::Json { path: path.to_path_buf(), source })
}

/// Pretty JSON with a trailing newline, creating parent directories.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), LoadError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value).expect("serializable");
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io_err(path))
}

/// Loads and validates a registry file. Any invalid entry rejects the
/// whole file.
pub fn load_registry(path: &Path) -> Result<TrustRegistry, LoadError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    TrustRegistry::from_json(&bytes).map_err(|source| LoadError::Registry { path: path.to_path_buf(), source })
}

/// Loads every `*.json` file in `dir` as a policy, keyed by `policy_id`.
pub fn load_policies(dir: &Path) -> Result<BTreeMap<String, VerificationPolicy>, LoadError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = BTreeMap::new();
    for path in paths {
        let policy: VerificationPolicy = read_json(&path)?;
        if let Some(field) = policy.invariant_violation() {
            return Err(LoadError::Policy { path, field });
        }
        if out.contains_key(&policy.policy_id) {
            return Err(LoadError::DuplicatePolicy(policy.policy_id));
        }
        out.insert(policy.policy_id.clone(), policy);
    }
    Ok(out)
}

/// Secret key material for an Ed25519 signer, stored as a base64url seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedFile {
    pub key_id: String,
    pub controller: String,
    pub seed: String,
}

impl SeedFile {
    pub fn new(key_id: &str, controller: &str, seed: [u8; 32]) -> Self {
        SeedFile { key_id: key_id.into(), controller: controller.into(), seed: b64url_encode(&seed) }
    }

    pub fn seed_bytes(&self) -> Option<[u8; 32]> {
        b64url_decode(&self.seed).ok()?.try_into().ok()
    }
}

pub fn load_verifier_key(path: &Path) -> Result<VerifierKey, LoadError> {
    let file: SeedFile = read_json(path)?;
    let seed = file.seed_bytes().ok_or_else(|| LoadError::BadSeed(path.to_path_buf()))?;
    Ok(VerifierKey::from_seed(file.key_id, seed))
}
