//! Trust anchors: the offline registry of verification keys, revocation
//! status lists and accepted delegation roots.
//!
//! A registry is validated as a whole when it is built. Any bad entry
//! rejects the entire registry; there is no partially loaded state.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::canonical::{b64url_decode, b64url_encode};
use crate::model::UnixTime;

pub const ALG_ED25519: &str = "Ed25519";
pub const STATUS_PURPOSE_REVOCATION: &str = "revocation";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("registry is not valid JSON: {0}")]
    Json(String),
    #[error("duplicate key_id {0:?}")]
    DuplicateKeyId(String),
    #[error("duplicate status list {0:?}")]
    DuplicateStatusList(String),
    #[error("key {0:?}: public key must decode to 32 bytes")]
    BadPublicKey(String),
    #[error("key {key_id:?}: unsupported algorithm {algorithm:?}")]
    UnsupportedAlgorithm { key_id: String, algorithm: String },
    #[error("status list {0:?}: encoded_list must decode to at least one byte")]
    BadStatusList(String),
    #[error("status list {0:?}: purpose must be \"revocation\"")]
    BadStatusPurpose(String),
    #[error("trust root {0:?} controls no active key")]
    RootWithoutActiveKey(String),
    #[error("empty identifier in {0}")]
    EmptyIdentifier(&'static str),
}

/// On-disk shape of a key entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyRecordFile {
    pub key_id: String,
    pub controller: String,
    pub algorithm: String,
    pub public_key: String,
    #[serde(default)]
    pub revoked: bool,
}

/// On-disk shape of a status list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusDocumentFile {
    pub id: String,
    pub purpose: String,
    pub encoded_list: String,
    pub issued_at: UnixTime,
}

/// On-disk registry document.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistryFile {
    pub keys: Vec<KeyRecordFile>,
    pub status_docs: Vec<StatusDocumentFile>,
    pub trust_roots: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyRecord {
    pub key_id: String,
    pub controller: String,
    pub algorithm: String,
    pub public_key: [u8; 32],
    pub revoked: bool,
}

impl KeyRecord {
    pub fn to_file(&self) -> KeyRecordFile {
        KeyRecordFile {
            key_id: self.key_id.clone(),
            controller: self.controller.clone(),
            algorithm: self.algorithm.clone(),
            public_key: b64url_encode(&self.public_key),
            revoked: self.revoked,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatusDocument {
    pub id: String,
    pub purpose: String,
    pub bits: Vec<u8>,
    pub issued_at: UnixTime,
}

impl StatusDocument {
    /// Bit `index`, most-significant bit first within each byte.
    pub fn bit(&self, index: u64) -> Option<bool> {
        let byte = *self.bits.get(usize::try_from(index / 8).ok()?)?;
        Some((byte >> (7 - (index % 8))) & 1 == 1)
    }

    pub fn len_bits(&self) -> u64 {
        self.bits.len() as u64 * 8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error("key not found")]
    NotFound,
    #[error("key revoked")]
    Revoked,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum StatusError {
    #[error("unknown status list")]
    UnknownList,
    #[error("status index out of range")]
    IndexOutOfRange,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrustRegistry {
    keys: BTreeMap<String, KeyRecord>,
    status_docs: BTreeMap<String, StatusDocument>,
    trust_roots: BTreeSet<String>,
}

impl TrustRegistry {
    pub fn from_json(bytes: &[u8]) -> Result<Self, RegistryError> {
        let file: RegistryFile =
            serde_json::from_slice(bytes).map_err(|e| RegistryError::Json(e.to_string()))?;
        Self::from_file(file)
    }

    pub fn from_file(file: RegistryFile) -> Result<Self, RegistryError> {
        let mut keys = BTreeMap::new();
        for k in file.keys {
            if k.key_id.is_empty() {
                return Err(RegistryError::EmptyIdentifier("key_id"));
            }
            if k.controller.is_empty() {
                return Err(RegistryError::EmptyIdentifier("controller"));
            }
            if k.algorithm != ALG_ED25519 {
                return Err(RegistryError::UnsupportedAlgorithm {
                    key_id: k.key_id,
                    algorithm: k.algorithm,
                });
            }
            let public_key: [u8; 32] = b64url_decode(&k.public_key)
                .ok()
                .and_then(|v| v.try_into().ok())
                .ok_or_else(|| RegistryError::BadPublicKey(k.key_id.clone()))?;
            if keys.contains_key(&k.key_id) {
                return Err(RegistryError::DuplicateKeyId(k.key_id));
            }
            keys.insert(
                k.key_id.clone(),
                KeyRecord {
                    key_id: k.key_id,
                    controller: k.controller,
                    algorithm: k.algorithm,
                    public_key,
                    revoked: k.revoked,
                },
            );
        }

        let mut status_docs = BTreeMap::new();
        for d in file.status_docs {
            if d.id.is_empty() {
                return Err(RegistryError::EmptyIdentifier("status_docs.id"));
            }
            if d.purpose != STATUS_PURPOSE_REVOCATION {
                return Err(RegistryError::BadStatusPurpose(d.id));
            }
            let bits = match b64url_decode(&d.encoded_list) {
                Ok(b) if !b.is_empty() => b,
                _ => return Err(RegistryError::BadStatusList(d.id)),
            };
            if status_docs.contains_key(&d.id) {
                return Err(RegistryError::DuplicateStatusList(d.id));
            }
            status_docs.insert(
                d.id.clone(),
                StatusDocument { id: d.id, purpose: d.purpose, bits, issued_at: d.issued_at },
            );
        }

        let trust_roots: BTreeSet<String> = file.trust_roots.into_iter().collect();
        for root in &trust_roots {
            let has_active = keys.values().any(|k| &k.controller == root && !k.revoked);
            if !has_active {
                return Err(RegistryError::RootWithoutActiveKey(root.clone()));
            }
        }

        Ok(Self { keys, status_docs, trust_roots })
    }

    pub fn to_file(&self) -> RegistryFile {
        RegistryFile {
            keys: self.keys.values().map(KeyRecord::to_file).collect(),
            status_docs: self
                .status_docs
                .values()
                .map(|d| StatusDocumentFile {
                    id: d.id.clone(),
                    purpose: d.purpose.clone(),
                    encoded_list: b64url_encode(&d.bits),
                    issued_at: d.issued_at,
                })
                .collect(),
            trust_roots: self.trust_roots.iter().cloned().collect(),
        }
    }

    /// Active key by id. Revoked keys are reported as such, not hidden.
    pub fn resolve_key(&self, key_id: &str) -> Result<&KeyRecord, ResolveError> {
        match self.keys.get(key_id) {
            None => Err(ResolveError::NotFound),
            Some(k) if k.revoked => Err(ResolveError::Revoked),
            Some(k) => Ok(k),
        }
    }

    /// Revocation bit at `index` of list `list_id`; `true` means revoked.
    pub fn resolve_status(&self, list_id: &str, index: u64) -> Result<bool, StatusError> {
        self.status_docs
            .get(list_id)
            .ok_or(StatusError::UnknownList)?
            .bit(index)
            .ok_or(StatusError::IndexOutOfRange)
    }

    pub fn status_document(&self, list_id: &str) -> Option<&StatusDocument> {
        self.status_docs.get(list_id)
    }

    pub fn is_trust_root(&self, controller: &str) -> bool {
        self.trust_roots.contains(controller)
    }

    pub fn trust_roots(&self) -> &BTreeSet<String> {
        &self.trust_roots
    }

    pub fn keys(&self) -> impl Iterator<Item = &KeyRecord> {
        self.keys.values()
    }

    pub fn key_count(&self) -> usize {
        self.keys.len()
    }
}
