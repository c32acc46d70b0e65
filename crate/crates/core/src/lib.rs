//! Verification core for credentials and bounded delegation chains.
//!
//! Heterogeneous identity artifacts (VC-JWT, VC-LD, SD-JWT and LD
//! delegation grants) are mapped by [`adapters`] into a single
//! [`model::CanonicalVerificationContext`], which [`engine::verify`] checks
//! as a pure function of the context, the trust registry, the anchor log
//! and an injected clock.
//!
//! The crate is `no_std` and only needs `alloc`. File loading, the HTTP
//! gateway and the experiment harness live in the `trustgate` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod adapters;
pub mod canonical;
pub mod engine;
pub mod issue;
pub mod jws;
pub mod ledger;
pub mod model;
pub mod normalize;
pub mod registry;
pub mod scope;

pub use engine::{verify, Clock, Verification, VerifierKey};
pub use model::{
    chain_fingerprint, CanonicalVerificationContext, DelegationGrant, NormalizedCredential,
    ProfileTag, ResultCode, SourceFormat, VerificationPolicy, VerificationResultObject,
};
pub use registry::TrustRegistry;
pub use scope::{scope_contains, Scope};
