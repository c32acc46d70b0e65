//! Append-only anchor log for delegation-chain fingerprints.
//!
//! The log is a sequence of [`AnchorRecord`]s with strictly increasing
//! block ids. Nothing is ever rewritten: revoking an anchor appends a
//! superseding `REVOKED` record, and the state of a fingerprint is decided
//! by its last record.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::canonical::is_sha256_hex;
use crate::model::UnixTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AnchorStatus {
    Active,
    Revoked,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorRecord {
    pub fingerprint: String,
    pub block_id: u64,
    pub anchored_at: UnixTime,
    pub expires_at: Option<UnixTime>,
    pub status: AnchorStatus,
}

impl AnchorRecord {
    /// State this record implies when it is the last one for its fingerprint.
    pub fn state_at(&self, now: UnixTime) -> AnchorState {
        match self.status {
            AnchorStatus::Revoked => AnchorState::Revoked,
            AnchorStatus::Active if self.expires_at.is_some_and(|e| now > e) => AnchorState::Expired,
            AnchorStatus::Active => AnchorState::Active,
        }
    }
}

/// Resolved state of a fingerprint at a given time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AnchorState {
    Active,
    Revoked,
    Expired,
    Absent,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LedgerError {
    #[error("fingerprint must be 64 lowercase hex characters")]
    InvalidFingerprint,
    #[error("fingerprint is already anchored and active")]
    DuplicateActive,
    #[error("fingerprint has no active anchor to revoke")]
    NotActive,
    #[error("block id {found} does not follow {previous}")]
    BlockOrder { previous: u64, found: u64 },
}

/// Read access used by the verification engine.
pub trait AnchorLookup {
    fn lookup(&self, fingerprint: &str, now: UnixTime) -> AnchorState;
}

/// In-memory log plus a last-record index.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnchorLog {
    records: Vec<AnchorRecord>,
    latest: BTreeMap<String, usize>,
}

impl AnchorLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a log from records in file order, checking block ordering.
    pub fn from_records(records: Vec<AnchorRecord>) -> Result<Self, LedgerError> {
        let mut log = Self::new();
        for r in records {
            log.push(r)?;
        }
        Ok(log)
    }

    pub fn records(&self) -> &[AnchorRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn next_block_id(&self) -> u64 {
        self.records.last().map_or(1, |r| r.block_id + 1)
    }

    /// The record that `anchor` would append. Does not modify the log.
    pub fn prepare_anchor(
        &self,
        fingerprint: &str,
        now: UnixTime,
        expires_at: Option<UnixTime>,
    ) -> Result<AnchorRecord, LedgerError> {
        if !is_sha256_hex(fingerprint) {
            return Err(LedgerError::InvalidFingerprint);
        }
        if self.lookup_at(fingerprint, now) == AnchorState::Active {
            return Err(LedgerError::DuplicateActive);
        }
        Ok(AnchorRecord {
            fingerprint: fingerprint.into(),
            block_id: self.next_block_id(),
            anchored_at: now,
            expires_at,
            status: AnchorStatus::Active,
        })
    }

    /// The superseding `REVOKED` record for an active anchor.
    pub fn prepare_revocation(
        &self,
        fingerprint: &str,
        now: UnixTime,
    ) -> Result<AnchorRecord, LedgerError> {
        if !is_sha256_hex(fingerprint) {
            return Err(LedgerError::InvalidFingerprint);
        }
        let last = self.last_record(fingerprint).ok_or(LedgerError::NotActive)?;
        if last.status != AnchorStatus::Active {
            return Err(LedgerError::NotActive);
        }
        Ok(AnchorRecord {
            fingerprint: fingerprint.into(),
            block_id: self.next_block_id(),
            anchored_at: now,
            expires_at: last.expires_at,
            status: AnchorStatus::Revoked,
        })
    }

    /// Appends a record, enforcing block order and fingerprint shape.
    pub fn push(&mut self, record: AnchorRecord) -> Result<(), LedgerError> {
        if !is_sha256_hex(&record.fingerprint) {
            return Err(LedgerError::InvalidFingerprint);
        }
        if let Some(prev) = self.records.last() {
            if record.block_id <= prev.block_id {
                return Err(LedgerError::BlockOrder { previous: prev.block_id, found: record.block_id });
            }
        }
        self.latest.insert(record.fingerprint.clone(), self.records.len());
        self.records.push(record);
        Ok(())
    }

    pub fn anchor(
        &mut self,
        fingerprint: &str,
        now: UnixTime,
        expires_at: Option<UnixTime>,
    ) -> Result<AnchorRecord, LedgerError> {
        let record = self.prepare_anchor(fingerprint, now, expires_at)?;
        self.push(record.clone())?;
        Ok(record)
    }

    pub fn revoke(&mut self, fingerprint: &str, now: UnixTime) -> Result<AnchorRecord, LedgerError> {
        let record = self.prepare_revocation(fingerprint, now)?;
        self.push(record.clone())?;
        Ok(record)
    }

    pub fn last_record(&self, fingerprint: &str) -> Option<&AnchorRecord> {
        self.latest.get(fingerprint).map(|&i| &self.records[i])
    }

    pub fn lookup_at(&self, fingerprint: &str, now: UnixTime) -> AnchorState {
        self.last_record(fingerprint).map_or(AnchorState::Absent, |r| r.state_at(now))
    }
}

impl AnchorLookup for AnchorLog {
    fn lookup(&self, fingerprint: &str, now: UnixTime) -> AnchorState {
        self.lookup_at(fingerprint, now)
    }
}
