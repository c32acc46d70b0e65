//! Aggregation of batch records into latency, size, invariant and anchor tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use serde::{Deserialize, Serialize};
use trustgate_core::model::InvariantFlags;
use trustgate_core::{ResultCode, SourceFormat};

use super::batch::{BatchRecord, MAX_DEPTH};

pub const VRO_PAYLOAD_LIMIT: u64 = 2048;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl Summary {
    /// Nearest-rank percentiles; an empty sample gives zeros.
    pub fn of(values: impl IntoIterator<Item = f64>) -> Summary {
        let mut v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return Summary::default();
        }
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let rank = |p: f64| v[((p * n as f64).ceil() as usize).clamp(1, n) - 1];
        let median = if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 };
        Summary { count: n, mean: v.iter().sum::<f64>() / n as f64, median, p95: rank(0.95) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyRow {
    pub label: String,
    pub e2e_ms: Summary,
    pub normalize_ms: Summary,
    pub verify_ms: Summary,
    pub signature_checks_mean: f64,
}

impl LatencyRow {
    fn of<'a>(label: impl Into<String>, rs: impl IntoIterator<Item = &'a BatchRecord> + Clone) -> LatencyRow {
        let sigs = Summary::of(rs.clone().into_iter().map(|r| f64::from(r.metrics.signature_checks)));
        LatencyRow {
            label: label.into(),
            e2e_ms: Summary::of(rs.clone().into_iter().map(|r| r.t_e2e_ms)),
            normalize_ms: Summary::of(rs.clone().into_iter().map(|r| r.metrics.t_normalize_ms)),
            verify_ms: Summary::of(rs.into_iter().map(|r| r.metrics.t_verify_ms)),
            signature_checks_mean: sigs.mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorDepthRow {
    pub depth: u32,
    pub with_anchor: usize,
    pub without_anchor: usize,
    pub with_verify_mean_ms: f64,
    pub without_verify_mean_ms: f64,
}

/// Chained requests split by whether the policy demanded an anchor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorTable {
    pub with_anchor: LatencyRow,
    pub without_anchor: LatencyRow,
    pub by_depth: Vec<AnchorDepthRow>,
    /// Mean verify time of unanchored chains, weighted to the depth mix of
    /// the anchored ones.
    pub without_anchor_reweighted_verify_ms: f64,
    pub verify_overhead_ms: f64,
    pub e2e_overhead_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantRow {
    pub invariant: String,
    pub passed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeTable {
    pub vc_jwt_bytes: Summary,
    pub vc_ld_bytes: Summary,
    pub source_bytes: Summary,
    pub chain_bytes: Summary,
    pub cvc_bytes: Summary,
    pub vro_bytes: Summary,
    pub vro_payload_bytes: Summary,
    /// Mean CVC size over mean source credential size.
    pub expansion_ratio: f64,
    pub cvc_larger_than_source: usize,
    pub vro_payload_under_limit: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Determinism {
    pub passes: usize,
    pub rerun_identical: usize,
    pub unique_payload_hashes: usize,
    pub signatures_valid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkCounters {
    /// Requests whose signature count equals 1 + depth (+1 with a presenter proof).
    pub signature_count_linear: usize,
    pub anchored: usize,
    pub anchored_with_one_lookup: usize,
    pub unanchored: usize,
    pub unanchored_without_lookup: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub total: usize,
    pub results: BTreeMap<ResultCode, usize>,
    pub profiles: BTreeMap<String, usize>,
    pub overall: LatencyRow,
    pub by_depth: Vec<LatencyRow>,
    pub sizes: SizeTable,
    pub invariants: Vec<InvariantRow>,
    pub anchor: AnchorTable,
    pub determinism: Determinism,
    pub work: WorkCounters,
}

fn mean_of<'a>(rs: impl Iterator<Item = &'a BatchRecord>, f: impl Fn(&BatchRecord) -> f64) -> f64 {
    Summary::of(rs.map(f)).mean
}

impl BatchReport {
    pub fn from_records(records: &[BatchRecord], passes: usize) -> BatchReport {
        let mut results = BTreeMap::new();
        let mut profiles = BTreeMap::new();
        for r in records {
            *results.entry(r.metrics.result).or_insert(0) += 1;
            let p = r.metrics.profile.map_or("NONE".to_string(), |p| p.as_str().to_string());
            *profiles.entry(p).or_insert(0) += 1;
        }

        let by_depth = (0..=MAX_DEPTH)
            .map(|d| LatencyRow::of(format!("depth {d}"), records.iter().filter(|r| r.metrics.depth == d)))
            .collect();

        let invariants = InvariantFlags::default()
            .as_array()
            .iter()
            .enumerate()
            .map(|(i, (name, _))| InvariantRow {
                invariant: (*name).into(),
                passed: records.iter().filter(|r| r.metrics.invariant_flags.as_array()[i].1).count(),
                total: records.len(),
            })
            .collect();

        let fmt = |f: SourceFormat| Summary::of(records.iter().filter(|r| r.input_format == f).map(|r| r.metrics.size_input_bytes as f64));
        let source_bytes = Summary::of(records.iter().map(|r| r.metrics.size_input_bytes as f64));
        let cvc_bytes = Summary::of(records.iter().map(|r| r.metrics.size_cvc_bytes as f64));
        let sizes = SizeTable {
            vc_jwt_bytes: fmt(SourceFormat::VcJwt),
            vc_ld_bytes: fmt(SourceFormat::VcLd),
            source_bytes,
            chain_bytes: Summary::of(records.iter().map(|r| r.metrics.size_chain_bytes as f64)),
            cvc_bytes,
            vro_bytes: Summary::of(records.iter().map(|r| r.metrics.size_vro_bytes as f64)),
            vro_payload_bytes: Summary::of(records.iter().map(|r| r.size_vro_payload_bytes as f64)),
            expansion_ratio: if source_bytes.mean > 0.0 { cvc_bytes.mean / source_bytes.mean } else { 0.0 },
            cvc_larger_than_source: records.iter().filter(|r| r.metrics.size_cvc_bytes > r.metrics.size_input_bytes).count(),
            vro_payload_under_limit: records.iter().filter(|r| r.size_vro_payload_bytes < VRO_PAYLOAD_LIMIT).count(),
        };

        let chained = || records.iter().filter(|r| r.metrics.depth > 0);
        let with: Vec<&BatchRecord> = chained().filter(|r| r.metrics.anchored).collect();
        let without: Vec<&BatchRecord> = chained().filter(|r| !r.metrics.anchored).collect();
        let anchor_depths: Vec<AnchorDepthRow> = (1..=MAX_DEPTH)
            .map(|d| AnchorDepthRow {
                depth: d,
                with_anchor: with.iter().filter(|r| r.metrics.depth == d).count(),
                without_anchor: without.iter().filter(|r| r.metrics.depth == d).count(),
                with_verify_mean_ms: mean_of(with.iter().copied().filter(|r| r.metrics.depth == d), |r| r.metrics.t_verify_ms),
                without_verify_mean_ms: mean_of(without.iter().copied().filter(|r| r.metrics.depth == d), |r| r.metrics.t_verify_ms),
            })
            .collect();
        let reweighted = if with.is_empty() {
            0.0
        } else {
            anchor_depths.iter().map(|row| row.without_verify_mean_ms * row.with_anchor as f64).sum::<f64>() / with.len() as f64
        };
        let with_row = LatencyRow::of("with anchor", with.iter().copied());
        let without_row = LatencyRow::of("without anchor", without.iter().copied());
        let anchor = AnchorTable {
            verify_overhead_ms: with_row.verify_ms.mean - reweighted,
            e2e_overhead_ms: with_row.e2e_ms.mean - without_row.e2e_ms.mean,
            without_anchor_reweighted_verify_ms: reweighted,
            with_anchor: with_row,
            without_anchor: without_row,
            by_depth: anchor_depths,
        };

        let hashes: BTreeSet<&str> = records.iter().map(|r| r.payload_hash.as_str()).collect();
        let determinism = Determinism {
            passes,
            rerun_identical: records.iter().filter(|r| r.rerun_identical).count(),
            unique_payload_hashes: hashes.len(),
            signatures_valid: records.iter().filter(|r| r.signature_valid).count(),
        };

        let anchored: Vec<&BatchRecord> = records.iter().filter(|r| r.metrics.anchored).collect();
        let unanchored: Vec<&BatchRecord> = records.iter().filter(|r| !r.metrics.anchored).collect();
        let work = WorkCounters {
            signature_count_linear: records
                .iter()
                .filter(|r| r.metrics.signature_checks == 1 + r.metrics.depth + u32::from(r.presenter_proof))
                .count(),
            anchored: anchored.len(),
            anchored_with_one_lookup: anchored.iter().filter(|r| r.metrics.ledger_lookups == 1).count(),
            unanchored: unanchored.len(),
            unanchored_without_lookup: unanchored.iter().filter(|r| r.metrics.ledger_lookups == 0).count(),
        };

        BatchReport {
            total: records.len(),
            results,
            profiles,
            overall: LatencyRow::of("all", records.iter()),
            by_depth,
            sizes,
            invariants,
            anchor,
            determinism,
            work,
        }
    }

    pub fn all_ok(&self) -> bool {
        self.total > 0 && self.results.get(&ResultCode::Ok) == Some(&self.total)
    }

    /// Mean verify time per depth, 0 to `MAX_DEPTH`.
    pub fn verify_means_by_depth(&self) -> Vec<f64> {
        self.by_depth.iter().map(|r| r.verify_ms.mean).collect()
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# Batch report\n");
        let _ = writeln!(s, "{} requests, results: {:?}, profiles: {:?}\n", self.total, self.results, self.profiles);

        let _ = writeln!(s, "## Latency by delegation depth\n");
        let _ = writeln!(s, "| Depth | N | Mean (ms) | Median (ms) | P95 (ms) | Normalize mean (ms) | Verify mean (ms) | Signatures |");
        let _ = writeln!(s, "|---|---|---|---|---|---|---|---|");
        for row in self.by_depth.iter().chain([&self.overall]) {
            let _ = writeln!(
                s,
                "| {} | {} | {:.3} | {:.3} | {:.3} | {:.3} | {:.3} | {:.2} |",
                row.label.trim_start_matches("depth "),
                row.e2e_ms.count,
                row.e2e_ms.mean,
                row.e2e_ms.median,
                row.e2e_ms.p95,
                row.normalize_ms.mean,
                row.verify_ms.mean,
                row.signature_checks_mean
            );
        }

        let z = &self.sizes;
        let _ = writeln!(s, "\n## Size metrics\n");
        let _ = writeln!(s, "| Artifact | N | Mean (bytes) | Median (bytes) |");
        let _ = writeln!(s, "|---|---|---|---|");
        for (name, m) in [
            ("Source VC-JWT", z.vc_jwt_bytes),
            ("Source VC-LD", z.vc_ld_bytes),
            ("Source credential (all)", z.source_bytes),
            ("Delegation chain", z.chain_bytes),
            ("CVC", z.cvc_bytes),
            ("VRO (compact JWS)", z.vro_bytes),
            ("VRO payload", z.vro_payload_bytes),
        ] {
            let _ = writeln!(s, "| {name} | {} | {:.1} | {:.1} |", m.count, m.mean, m.median);
        }
        let _ = writeln!(
            s,
            "\nExpansion ratio (mean CVC / mean source credential): {:.2}. CVC larger than source: {}/{}. VRO payload under {} bytes: {}/{}.",
            z.expansion_ratio, z.cvc_larger_than_source, self.total, VRO_PAYLOAD_LIMIT, z.vro_payload_under_limit, self.total
        );

        let _ = writeln!(s, "\n## Invariant pass rates\n");
        let _ = writeln!(s, "| Invariant | Passed | Total | Rate |");
        let _ = writeln!(s, "|---|---|---|---|");
        for row in &self.invariants {
            let rate = if row.total == 0 { 0.0 } else { 100.0 * row.passed as f64 / row.total as f64 };
            let _ = writeln!(s, "| {} | {} | {} | {rate:.1}% |", row.invariant, row.passed, row.total);
        }

        let a = &self.anchor;
        let _ = writeln!(s, "\n## Latency with and without anchor (chained requests)\n");
        let _ = writeln!(s, "| Condition | N | Mean (ms) | Median (ms) | P95 (ms) | Verify mean (ms) |");
        let _ = writeln!(s, "|---|---|---|---|---|---|");
        for row in [&a.with_anchor, &a.without_anchor] {
            let _ = writeln!(
                s,
                "| {} | {} | {:.3} | {:.3} | {:.3} | {:.4} |",
                row.label, row.e2e_ms.count, row.e2e_ms.mean, row.e2e_ms.median, row.e2e_ms.p95, row.verify_ms.mean
            );
        }
        let _ = writeln!(s, "\n| Depth | With anchor | Without anchor | Verify mean with (ms) | Verify mean without (ms) |");
        let _ = writeln!(s, "|---|---|---|---|---|");
        for row in &a.by_depth {
            let _ = writeln!(
                s,
                "| {} | {} | {} | {:.4} | {:.4} |",
                row.depth, row.with_anchor, row.without_anchor, row.with_verify_mean_ms, row.without_verify_mean_ms
            );
        }
        let _ = writeln!(
            s,
            "\nUnanchored verify mean at the anchored depth mix: {:.4} ms. Verify overhead: {:+.4} ms. End-to-end overhead: {:+.3} ms.",
            a.without_anchor_reweighted_verify_ms, a.verify_overhead_ms, a.e2e_overhead_ms
        );

        let d = &self.determinism;
        let w = &self.work;
        let _ = writeln!(s, "\n## Determinism and work counters\n");
        let _ = writeln!(s, "- identical payloads across {} passes: {}/{}", d.passes, d.rerun_identical, self.total);
        let _ = writeln!(s, "- unique payload hashes: {}/{}", d.unique_payload_hashes, self.total);
        let _ = writeln!(s, "- valid VRO signatures: {}/{}", d.signatures_valid, self.total);
        let _ = writeln!(s, "- signature count equals 1 + depth (+1 presenter proof): {}/{}", w.signature_count_linear, self.total);
        let _ = writeln!(s, "- anchored requests with exactly one ledger lookup: {}/{}", w.anchored_with_one_lookup, w.anchored);
        let _ = writeln!(s, "- unanchored requests with no ledger lookup: {}/{}", w.unanchored_without_lookup, w.unanchored);
        s
    }
}
