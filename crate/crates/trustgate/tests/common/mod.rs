#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use tempfile::TempDir;
use trustgate::gateway::{spawn, Gateway};
use trustgate::harness::client::GatewayClient;
use trustgate::harness::fixtures::generate_fixtures;
use trustgate::harness::{Layout, FIXTURE_EPOCH};

pub const SEED: u64 = 7;

pub struct Corpus {
    pub dir: TempDir,
    pub layout: Layout,
}

pub fn corpus() -> Corpus {
    let dir = tempfile::tempdir().unwrap();
    let layout = Layout::new(dir.path().join("fixtures"));
    generate_fixtures(SEED, &layout.root).unwrap();
    Corpus { dir, layout }
}

pub async fn serve(layout: &Layout, allow_clock_override: bool, metrics: Option<&Path>) -> (Arc<Gateway>, GatewayClient) {
    let gw = Arc::new(Gateway::load(&layout.gateway_config(allow_clock_override, metrics)).unwrap());
    let (addr, _) = spawn(gw.clone(), SocketAddr::from(([127, 0, 0, 1], 0))).await.unwrap();
    let client = GatewayClient::new(&format!("http://{addr}"), Some(FIXTURE_EPOCH));
    (gw, client)
}
