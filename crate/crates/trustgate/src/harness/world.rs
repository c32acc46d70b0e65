use std::collections::BTreeMap;
use std::path::Path;

use ed25519_dalek::SigningKey;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use trustgate_core::adapters::{parse_dg, VerificationRequest};
use trustgate_core::canonical::b64url_encode;
use trustgate_core::issue::{
    issue_dg_ld, issue_dg_sd_jwt, issue_vc_jwt, issue_vc_ld, CredentialTemplate, GrantTemplate,
};
use trustgate_core::jws::sign_ed25519;
use trustgate_core::model::{Scalar, StatusRef};
use trustgate_core::registry::{KeyRecordFile, RegistryFile, StatusDocumentFile, ALG_ED25519};
use trustgate_core::{chain_fingerprint, Scope};

use super::FIXTURE_EPOCH;
use crate::files::{read_json, LoadError, SeedFile};

const DAY: i64 = 86_400;

/// Principals in generation order: (name, controller, key id, in registry, revoked).
const PRINCIPALS: [(&str, &str, &str, bool, bool); 11] = [
    ("issuer-1", "did:example:issuer-1", "did:example:issuer-1#key-1", true, false),
    ("issuer-1-old", "did:example:issuer-1", "did:example:issuer-1#key-0", true, true),
    ("issuer-2", "did:example:issuer-2", "did:example:issuer-2#key-1", true, false),
    ("alice", "did:example:alice", "did:example:alice#key-1", true, false),
    ("bob", "did:example:bob", "did:example:bob#key-1", true, false),
    ("agent-1", "did:example:agent-1", "did:example:agent-1#key-1", true, false),
    ("agent-2", "did:example:agent-2", "did:example:agent-2#key-1", true, false),
    ("agent-3", "did:example:agent-3", "did:example:agent-3#key-1", true, false),
    ("agent-4", "did:example:agent-4", "did:example:agent-4#key-1", true, false),
    ("verifier", "did:example:verifier", "did:example:verifier#key-1", true, false),
    ("mallory", "did:example:mallory", "did:example:mallory#key-1", false, false),
];

pub const CREDENTIAL_LIST: &str = "status:credentials";
pub const GRANT_LIST: &str = "status:grants";
pub const STALE_LIST: &str = "status:stale";
pub const REVOKED_CREDENTIAL_INDEX: u64 = 3;
pub const REVOKED_GRANT_INDEX: u64 = 5;
pub const STATUS_LIST_BITS: u64 = 128;

pub const PERMISSIONS: [&str; 6] =
    ["records:read", "records:write", "calendar:read", "calendar:write", "mail:send", "files:read"];

/// Key material for every fixture principal.
#[derive(Debug, Clone)]
pub struct World {
    seeds: BTreeMap<String, SeedFile>,
}

pub struct Principal {
    pub did: String,
    pub key_id: String,
    pub key: SigningKey,
}

impl World {
    pub fn generate(seed: u64) -> World {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seeds = BTreeMap::new();
        for (name, did, kid, _, _) in PRINCIPALS {
            let mut s = [0u8; 32];
            rng.fill_bytes(&mut s);
            seeds.insert(name.to_string(), SeedFile::new(kid, did, s));
        }
        World { seeds }
    }

    pub fn load(private_keys: &Path) -> Result<World, LoadError> {
        let files: Vec<SeedFile> = read_json(private_keys)?;
        let mut seeds = BTreeMap::new();
        for f in files {
            let (name, ..) = PRINCIPALS
                .iter()
                .find(|p| p.2 == f.key_id)
                .ok_or_else(|| LoadError::BadSeed(private_keys.to_path_buf()))?;
            seeds.insert(name.to_string(), f);
        }
        Ok(World { seeds })
    }

    pub fn seed_files(&self) -> Vec<SeedFile> {
        PRINCIPALS.iter().map(|p| self.seeds[p.0].clone()).collect()
    }

    pub fn principal(&self, name: &str) -> Principal {
        let f = &self.seeds[name];
        Principal {
            did: f.controller.clone(),
            key_id: f.key_id.clone(),
            key: SigningKey::from_bytes(&f.seed_bytes().expect("validated seed")),
        }
    }

    pub fn did(&self, name: &str) -> String {
        self.seeds[name].controller.clone()
    }

    pub fn key_id(&self, name: &str) -> String {
        self.seeds[name].key_id.clone()
    }

    pub fn verifier_seed(&self) -> SeedFile {
        self.seeds["verifier"].clone()
    }

    pub fn registry_file(&self) -> RegistryFile {
        let keys = PRINCIPALS
            .iter()
            .filter(|p| p.3)
            .map(|(name, did, kid, _, revoked)| KeyRecordFile {
                key_id: kid.to_string(),
                controller: did.to_string(),
                algorithm: ALG_ED25519.into(),
                public_key: b64url_encode(&self.principal(name).key.verifying_key().to_bytes()),
                revoked: *revoked,
            })
            .collect();
        let list = |id: &str, revoked: Option<u64>, issued_at: i64| {
            let mut bits = vec![0u8; (STATUS_LIST_BITS / 8) as usize];
            if let Some(i) = revoked {
                bits[(i / 8) as usize] |= 0x80 >> (i % 8);
            }
            StatusDocumentFile { id: id.into(), purpose: "revocation".into(), encoded_list: b64url_encode(&bits), issued_at }
        };
        RegistryFile {
            keys,
            status_docs: vec![
                list(CREDENTIAL_LIST, Some(REVOKED_CREDENTIAL_INDEX), FIXTURE_EPOCH - 60),
                list(GRANT_LIST, Some(REVOKED_GRANT_INDEX), FIXTURE_EPOCH - 60),
                list(STALE_LIST, None, FIXTURE_EPOCH - DAY),
            ],
            trust_roots: vec![self.did("issuer-1")],
        }
    }

    /// JWKS view of the registered public keys.
    pub fn jwks(&self) -> Value {
        let keys: Vec<Value> = PRINCIPALS
            .iter()
            .filter(|p| p.3)
            .map(|(name, _, kid, _, _)| {
                json!({
                    "kty": "OKP",
                    "crv": "Ed25519",
                    "kid": kid,
                    "x": b64url_encode(&self.principal(name).key.verifying_key().to_bytes()),
                })
            })
            .collect();
        json!({ "keys": keys })
    }

    /// A credential from `issuer-1` to `holder`, valid around the epoch.
    pub fn credential(&self, id: &str, holder: &str, status_index: u64) -> CredentialTemplate {
        CredentialTemplate {
            id: id.into(),
            issuer: self.did("issuer-1"),
            subject: self.did(holder),
            holder_key_id: Some(self.key_id(holder)),
            claims: BTreeMap::from([
                ("role".to_string(), Scalar::from("analyst")),
                ("clearance".to_string(), Scalar::Int(2)),
            ]),
            issued_at: FIXTURE_EPOCH - 30 * DAY,
            expires_at: FIXTURE_EPOCH + 365 * DAY,
            status_ref: Some(StatusRef { list_id: CREDENTIAL_LIST.into(), index: status_index }),
        }
    }

    /// A grant from `from` to `to`, bound to the key of `to`.
    pub fn grant(&self, id: &str, from: &str, to: &str, scope: &[&str]) -> GrantTemplate {
        GrantTemplate {
            grant_id: id.into(),
            issuer: self.did(from),
            subject: self.did(to),
            scope: Scope::new(scope.iter().copied()).expect("fixture scopes are valid"),
            not_before: FIXTURE_EPOCH - DAY,
            not_after: FIXTURE_EPOCH + 30 * DAY,
            key_binding: self.key_id(to),
            status_ref: None,
            constraints: BTreeMap::from([("purpose".to_string(), "delegated-task".to_string())]),
        }
    }

    fn signer_of(&self, did: &str) -> &str {
        // the first registered, non-revoked key controlled by `did`
        PRINCIPALS.iter().find(|p| p.1 == did && !p.4).map(|p| p.0).expect("known principal")
    }

    pub fn vc_jwt(&self, t: &CredentialTemplate) -> Value {
        self.vc_jwt_by(t, self.signer_of(&t.issuer))
    }

    pub fn vc_jwt_by(&self, t: &CredentialTemplate, signer: &str) -> Value {
        let p = self.principal(signer);
        Value::String(issue_vc_jwt(t, &p.key_id, &p.key))
    }

    pub fn vc_ld(&self, t: &CredentialTemplate) -> Value {
        let p = self.principal(self.signer_of(&t.issuer));
        issue_vc_ld(t, &p.key_id, &p.key)
    }

    pub fn sd(&self, g: &GrantTemplate) -> Value {
        let p = self.principal(self.signer_of(&g.issuer));
        Value::String(issue_dg_sd_jwt(g, &["purpose"], &p.key_id, &p.key))
    }

    pub fn ld(&self, g: &GrantTemplate) -> Value {
        let p = self.principal(self.signer_of(&g.issuer));
        issue_dg_ld(g, &p.key_id, &p.key)
    }

    /// Presenter key id and proof-of-possession signature over `request_id`.
    pub fn presenter_proof(&self, name: &str, request_id: &str) -> (String, String) {
        let p = self.principal(name);
        (p.key_id, b64url_encode(&sign_ed25519(&p.key, request_id.as_bytes())))
    }
}

pub fn request(request_id: &str, policy_id: &str, presentation: Value, chain: Vec<Value>) -> VerificationRequest {
    VerificationRequest {
        request_id: request_id.into(),
        presentation,
        chain_tokens: chain,
        policy_id: policy_id.into(),
        presenter_key_id: None,
        presenter_signature: None,
    }
}

/// Fingerprint of a chain given as raw grant tokens.
pub fn fingerprint_of(tokens: &[Value]) -> String {
    let chain: Vec<_> = tokens.iter().map(|t| parse_dg(t).expect("fixture grant parses")).collect();
    chain_fingerprint(&chain).expect("nonempty chain")
}
