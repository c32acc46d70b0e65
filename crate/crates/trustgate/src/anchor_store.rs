//! JSON-lines file backing for the anchor log.
//!
//! Every record is one canonical-JSON line. Appends go through a single
//! writer; lookups run concurrently against an in-memory index of byte
//! spans and read the last record for a fingerprint back from the file, so
//! the file stays the source of truth for what is anchored. Lines appended
//! by another process (one writer at a time) are picked up on the next
//! lookup or append.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use trustgate_core::canonical::to_canonical_bytes;
use trustgate_core::ledger::{AnchorLog, AnchorLookup, AnchorRecord, AnchorState, LedgerError};
use trustgate_core::model::UnixTime;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: {reason}")]
    Corrupt { path: PathBuf, line: usize, reason: String },
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Default)]
struct Index {
    log: AnchorLog,
    spans: HashMap<String, (u64, usize)>,
    end: u64,
}

#[derive(Debug)]
pub struct FileAnchorStore {
    path: PathBuf,
    index: RwLock<Index>,
    writer: Mutex<File>,
    reader: File,
}

fn record_line(r: &AnchorRecord) -> Vec<u8> {
    let mut line = to_canonical_bytes(r).expect("records hold integers only");
    line.push(b'\n');
    line
}

impl FileAnchorStore {
    /// Opens `path`, creating an empty log if it does not exist. Every
    /// existing line must parse and block ids must strictly increase.
    pub fn open(path: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let path = path.into();
        let io_err = |source| StoreError::Io { path: path.clone(), source };
        let writer = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err)?;
        let reader = File::open(&path).map_err(io_err)?;
        let bytes = std::fs::read(&path).map_err(io_err)?;
        let corrupt = |line: usize, reason: String| StoreError::Corrupt { path: path.clone(), line, reason };
        if !bytes.is_empty() && !bytes.ends_with(b"\n") {
            return Err(corrupt(bytes.split(|b| *b == b'\n').count(), "truncated record".into()));
        }

        let mut index = Index::default();
        let mut offset = 0u64;
        for (i, raw) in bytes.split_inclusive(|b| *b == b'\n').enumerate() {
            let record: AnchorRecord =
                serde_json::from_slice(raw).map_err(|e| corrupt(i + 1, e.to_string()))?;
            index.log.push(record.clone()).map_err(|e| corrupt(i + 1, e.to_string()))?;
            index.spans.insert(record.fingerprint, (offset, raw.len()));
            offset += raw.len() as u64;
        }
        index.end = offset;
        Ok(FileAnchorStore { path, index: RwLock::new(index), writer: Mutex::new(writer), reader })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn records(&self) -> Vec<AnchorRecord> {
        self.index.read().unwrap().log.records().to_vec()
    }

    pub fn len(&self) -> usize {
        self.index.read().unwrap().log.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn anchor(
        &self,
        fingerprint: &str,
        now: UnixTime,
        expires_at: Option<UnixTime>,
    ) -> Result<AnchorRecord, StoreError> {
        self.append(|log| log.prepare_anchor(fingerprint, now, expires_at))
    }

    pub fn revoke(&self, fingerprint: &str, now: UnixTime) -> Result<AnchorRecord, StoreError> {
        self.append(|log| log.prepare_revocation(fingerprint, now))
    }

    fn append(
        &self,
        prepare: impl FnOnce(&AnchorLog) -> Result<AnchorRecord, LedgerError>,
    ) -> Result<AnchorRecord, StoreError> {
        let mut writer = self.writer.lock().unwrap();
        let mut index = self.index.write().unwrap();
        self.catch_up(&mut index);
        let record = prepare(&index.log)?;
        let line = record_line(&record);
        let io_err = |source| StoreError::Io { path: self.path.clone(), source };
        writer.write_all(&line).map_err(io_err)?;
        writer.sync_data().map_err(io_err)?;
        let offset = index.end;
        index.log.push(record.clone())?;
        index.spans.insert(record.fingerprint.clone(), (offset, line.len()));
        index.end += line.len() as u64;
        Ok(record)
    }

    /// Indexes complete lines written past the indexed end. Stops at the
    /// first line that does not parse or does not extend the log.
    fn catch_up(&self, index: &mut Index) {
        let len = match self.reader.metadata() {
            Ok(m) => m.len(),
            Err(_) => return,
        };
        if len <= index.end {
            return;
        }
        let Ok(tail) = self.read_span(index.end, (len - index.end) as usize) else { return };
        for raw in tail.split_inclusive(|b| *b == b'\n') {
            if !raw.ends_with(b"\n") {
                break;
            }
            let pushed = serde_json::from_slice::<AnchorRecord>(raw)
                .map_err(|e| e.to_string())
                .and_then(|r| index.log.push(r.clone()).map(|_| r).map_err(|e| e.to_string()));
            match pushed {
                Ok(r) => {
                    index.spans.insert(r.fingerprint, (index.end, raw.len()));
                    index.end += raw.len() as u64;
                }
                Err(reason) => {
                    tracing::warn!(path = %self.path.display(), offset = index.end, %reason, "ignoring appended anchor record");
                    break;
                }
            }
        }
    }

    fn refresh(&self) {
        let grown = match self.reader.metadata() {
            Ok(m) => m.len() > self.index.read().unwrap().end,
            Err(_) => false,
        };
        if grown {
            self.catch_up(&mut self.index.write().unwrap());
        }
    }

    fn read_span(&self, offset: u64, len: usize) -> io::Result<Vec<u8>> {
        let mut buf = vec![0u8; len];
        #[cfg(unix)]
        {
            use std::os::unix::fs::FileExt;
            self.reader.read_exact_at(&mut buf, offset)?;
        }
        #[cfg(not(unix))]
        {
            use std::io::{Read, Seek, SeekFrom};
            let mut f = File::open(&self.path)?;
            f.seek(SeekFrom::Start(offset))?;
            f.read_exact(&mut buf)?;
        }
        Ok(buf)
    }

    /// Reads the last record for `fingerprint` back from the file.
    pub fn read_last(&self, fingerprint: &str) -> Option<AnchorRecord> {
        self.refresh();
        let span = self.index.read().unwrap().spans.get(fingerprint).copied();
        let (offset, len) = span?;
        let bytes = match self.read_span(offset, len) {
            Ok(b) => b,
            Err(e) => {
                tracing::warn!(path = %self.path.display(), error = %e, "anchor read failed");
                return None;
            }
        };
        match serde_json::from_slice::<AnchorRecord>(&bytes) {
            Ok(r) if r.fingerprint == fingerprint => Some(r),
            _ => {
                tracing::warn!(path = %self.path.display(), offset, "anchor record does not match index");
                None
            }
        }
    }
}

impl AnchorLookup for FileAnchorStore {
    /// Unreadable or inconsistent records resolve to `ABSENT`.
    fn lookup(&self, fingerprint: &str, now: UnixTime) -> AnchorState {
        self.read_last(fingerprint).map_or(AnchorState::Absent, |r| r.state_at(now))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use trustgate_core::ledger::AnchorStatus;

    fn fp(n: u8) -> String {
        format!("{n:02x}").repeat(32)
    }

    #[test]
    fn anchor_revoke_reanchor_sequence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let store = FileAnchorStore::open(&path).unwrap();
        let r1 = store.anchor(&fp(1), 100, None).unwrap();
        assert_eq!((r1.block_id, r1.status), (1, AnchorStatus::Active));
        assert!(matches!(store.anchor(&fp(1), 101, None), Err(StoreError::Ledger(LedgerError::DuplicateActive))));
        store.revoke(&fp(1), 102).unwrap();
        let r3 = store.anchor(&fp(1), 103, None).unwrap();
        assert_eq!((r3.block_id, r3.status), (3, AnchorStatus::Active));

        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<AnchorRecord> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines.iter().map(|r| (r.block_id, r.status)).collect::<Vec<_>>(),
            [(1, AnchorStatus::Active), (2, AnchorStatus::Revoked), (3, AnchorStatus::Active)]
        );
    }

    #[test]
    fn lookup_states_and_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        {
            let store = FileAnchorStore::open(&path).unwrap();
            store.anchor(&fp(1), 100, None).unwrap();
            store.anchor(&fp(2), 100, Some(150)).unwrap();
            store.anchor(&fp(3), 100, None).unwrap();
            store.revoke(&fp(3), 120).unwrap();
        }
        let store = FileAnchorStore::open(&path).unwrap();
        assert_eq!(store.lookup(&fp(1), 200), AnchorState::Active);
        assert_eq!(store.lookup(&fp(2), 150), AnchorState::Active);
        assert_eq!(store.lookup(&fp(2), 151), AnchorState::Expired);
        assert_eq!(store.lookup(&fp(3), 200), AnchorState::Revoked);
        assert_eq!(store.lookup(&fp(4), 200), AnchorState::Absent);
        assert_eq!(store.anchor(&fp(4), 300, None).unwrap().block_id, 5);
    }

    #[test]
    fn sees_records_appended_by_another_handle() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let server = FileAnchorStore::open(&path).unwrap();
        server.anchor(&fp(1), 100, None).unwrap();
        let other = FileAnchorStore::open(&path).unwrap();
        other.anchor(&fp(2), 110, None).unwrap();
        assert_eq!(server.lookup(&fp(2), 120), AnchorState::Active);
        assert_eq!(server.anchor(&fp(3), 130, None).unwrap().block_id, 3);
        other.revoke(&fp(3), 140).unwrap();
        assert_eq!(server.lookup(&fp(3), 150), AnchorState::Revoked);
        assert_eq!(server.len(), 4);
    }

    #[test]
    fn rejects_corrupt_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        std::fs::write(&path, "{\"fingerprint\":\"x\"}\n").unwrap();
        assert!(matches!(FileAnchorStore::open(&path), Err(StoreError::Corrupt { line: 1, .. })));

        let a = format!(
            "{{\"anchored_at\":1,\"block_id\":2,\"expires_at\":null,\"fingerprint\":\"{}\",\"status\":\"ACTIVE\"}}\n",
            fp(1)
        );
        let b = a.replace("\"block_id\":2", "\"block_id\":1").replace(&fp(1), &fp(2));
        std::fs::write(&path, format!("{a}{b}")).unwrap();
        assert!(matches!(FileAnchorStore::open(&path), Err(StoreError::Corrupt { line: 2, .. })));

        std::fs::write(&path, a.trim_end()).unwrap();
        assert!(FileAnchorStore::open(&path).is_err());
    }

    #[test]
    fn lines_are_canonical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ledger.jsonl");
        let store = FileAnchorStore::open(&path).unwrap();
        store.anchor(&fp(7), 5, Some(9)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            format!("{{\"anchored_at\":5,\"block_id\":1,\"expires_at\":9,\"fingerprint\":\"{}\",\"status\":\"ACTIVE\"}}\n", fp(7))
        );
    }
}
