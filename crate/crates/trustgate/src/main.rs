use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use anyhow::bail;
use clap::{Parser, Subcommand};
use tracing_subscriber::EnvFilter;
use trustgate::gateway::{self, Gateway, GatewayConfig};
use trustgate::harness::batch::{generate_batch, run_batch, write_outputs, DEFAULT_BATCH_SIZE};
use trustgate::harness::client::GatewayClient;
use trustgate::harness::fixtures::generate_fixtures;
use trustgate::harness::scenarios::run_scenario;
use trustgate::harness::{Layout, Scenario, FIXTURE_EPOCH};

#[derive(Parser)]
#[command(name = "trustgate", version, about = "Credential and delegation chain verification gateway")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP gateway.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Fixture directory; fills in any path not given explicitly.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long)]
        registry: Option<PathBuf>,
        #[arg(long)]
        policies: Option<PathBuf>,
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long)]
        verifier_key: Option<PathBuf>,
        /// Append one JSON metrics line per request to this file.
        #[arg(long)]
        metrics_out: Option<PathBuf>,
        /// Honour the x-verify-clock header. For tests and replays only.
        #[arg(long)]
        allow_clock_override: bool,
    },
    /// Generate keys, registry, policies, ledger and scenario requests.
    Fixtures {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run scenario suites against a running gateway.
    Scenario {
        /// S1..S5, or "all".
        #[arg(default_value = "all")]
        which: String,
        #[arg(long)]
        fixtures: PathBuf,
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        gateway: String,
    },
    /// Generate the seeded batch corpus.
    BatchGen {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
        n: usize,
        #[arg(long)]
        fixtures: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a batch corpus and write metrics and report files.
    BatchRun {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        gateway: String,
        #[arg(long, default_value_t = 2)]
        passes: usize,
    },
}

fn pick(explicit: Option<PathBuf>, fallback: Option<PathBuf>, name: &str) -> anyhow::Result<PathBuf> {
    match explicit.or(fallback) {
        Some(p) => Ok(p),
        None => bail!("--{name} or --fixtures is required"),
    }
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    match Cli::parse().command {
        Command::Serve { addr, fixtures, registry, policies, ledger, verifier_key, metrics_out, allow_clock_override } => {
            let layout = fixtures.map(Layout::new);
            let cfg = GatewayConfig {
                registry: pick(registry, layout.as_ref().map(Layout::registry), "registry")?,
                policies_dir: pick(policies, layout.as_ref().map(Layout::policies), "policies")?,
                ledger: pick(ledger, layout.as_ref().map(Layout::ledger), "ledger")?,
                verifier_key: pick(verifier_key, layout.as_ref().map(Layout::verifier_key), "verifier-key")?,
                metrics_out,
                allow_clock_override,
            };
            gateway::serve(Arc::new(Gateway::load(&cfg)?), addr).await?;
        }
        Command::Fixtures { seed, out } => {
            let summary = generate_fixtures(seed, &out)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Scenario { which, fixtures, gateway } => {
            let tags = if which.eq_ignore_ascii_case("all") {
                Scenario::ALL.to_vec()
            } else {
                match Scenario::parse(&which) {
                    Some(t) => vec![t],
                    None => bail!("unknown scenario {which}"),
                }
            };
            let layout = Layout::new(fixtures);
            let client = GatewayClient::new(&gateway, Some(FIXTURE_EPOCH));
            let mut failed = false;
            for tag in tags {
                let report = run_scenario(tag, &layout, &client).await?;
                println!("{} {}: {} cases, {} assertions", if report.passed() { "PASS" } else { "FAIL" }, tag.as_str(), report.cases, report.assertions.len());
                for f in report.failures() {
                    println!("    {}: {}", f.name, f.detail);
                }
                failed |= !report.passed();
            }
            if failed {
                std::process::exit(1);
            }
        }
        Command::BatchGen { seed, n, fixtures, out } => {
            let manifest = generate_batch(&fixtures, seed, n, &out)?;
            println!("wrote {} requests to {}", manifest.request_ids.len(), out.display());
        }
        Command::BatchRun { corpus, out, gateway, passes } => {
            let (manifest, _) = trustgate::harness::batch::load_batch(&corpus)?;
            let client = GatewayClient::new(&gateway, Some(manifest.epoch));
            let (records, report) = run_batch(&corpus, &client, passes).await?;
            write_outputs(&out, &records, &report)?;
            print!("{}", report.to_markdown());
        }
    }
    Ok(())
}
