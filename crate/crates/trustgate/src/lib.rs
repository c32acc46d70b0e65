//! File-backed stores, the HTTP gateway and the evaluation harness around
//! `trustgate-core`.

pub mod anchor_store;
pub mod files;
pub mod gateway;
pub mod harness;
