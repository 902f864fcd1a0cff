//! Detection: classify extracted records against signatures first,
//! then the whitelist, and reconstruct attack paths (who touched
//! which process component, with what) for the survivors.

use serde::{Deserialize, Serialize};
use std::net::Ipv4Addr;

use crate::baseline::{AttackSignature, Baseline, ReadKey, Severity, WriteKey};
use crate::codec::mms::ServiceTag;
use crate::extract::ExtractedRecord;

/// One reconstructed attack step: origin host → target device,
/// operation, addressed point, and the signature that caught it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackPath {
    pub ts_micros: u64,
    pub origin_ip: Ipv4Addr,
    pub target_ip: Ipv4Addr,
    pub operation: ServiceTag,
    pub domain_id: String,
    pub item_id: String,
    /// Process component behind the item, when the GGIO map knows it.
    pub component: Option<String>,
    pub signature_id: String,
    pub severity: Severity,
}

impl AttackPath {
    /// Report line: `ts origin -> target [service] domain/item (component) sig=id`.
    pub fn render(&self) -> String {
        format!(
            "{}.{:06} {} -> {} [{}] {}/{} ({}) sig={}",
            self.ts_micros / 1_000_000,
            self.ts_micros % 1_000_000,
            self.origin_ip,
            self.target_ip,
            self.operation.name(),
            self.domain_id,
            self.item_id,
            self.component.as_deref().unwrap_or("-"),
            self.signature_id,
        )
    }
}

/// A record that matched no signature and no whitelist entry. Kept
/// verbatim so an operator can promote it to a signature after
/// review; detection never promotes on its own.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NovelCandidate {
    pub record: ExtractedRecord,
    pub reason: String,
}

/// Classification counters. `scanned` is the sum of the other four.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionStats {
    pub scanned: usize,
    pub matched: usize,
    pub whitelisted: usize,
    pub novel: usize,
    /// Services outside the read/write model (directory lookups,
    /// name-list enumeration).
    pub ignored: usize,
}

/// Everything one detection pass produced.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detection {
    pub paths: Vec<AttackPath>,
    pub novel_candidates: Vec<NovelCandidate>,
    pub stats: DetectionStats,
}

impl Detection {
    /// True when any path carries blocking severity.
    pub fn has_blocking(&self) -> bool {
        self.paths.iter().any(|p| p.severity == Severity::Blocking)
    }
}

/// Classifies records. Signatures take precedence over the whitelist
/// — a signature hit is an attack even if someone managed to get the
/// tuple whitelisted. When several signatures match one record, the
/// smallest id wins, so results do not depend on input ordering.
pub fn detect(
    records: &[ExtractedRecord],
    baseline: &Baseline,
    signatures: &[AttackSignature],
) -> Detection {
    let mut sorted: Vec<&AttackSignature> = signatures.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let mut detection = Detection::default();
    for record in records {
        detection.stats.scanned += 1;
        if let Some(sig) = sorted.iter().find(|s| s.matches(record)) {
            detection.stats.matched += 1;
            detection.paths.push(AttackPath {
                ts_micros: record.ts_micros,
                origin_ip: record.src_ip,
                target_ip: record.dst_ip,
                operation: record.service,
                domain_id: record.domain_id.clone(),
                item_id: record.item_id.clone(),
                component: baseline.component_of(&record.item_id).map(str::to_string),
                signature_id: sig.id.clone(),
                severity: sig.severity(),
            });
            continue;
        }
        match record.service {
            ServiceTag::Read => {
                if baseline.read_whitelist.contains(&ReadKey::of(record)) {
                    detection.stats.whitelisted += 1;
                } else {
                    detection.stats.novel += 1;
                    detection.novel_candidates.push(NovelCandidate {
                        record: record.clone(),
                        reason: "read pair not in whitelist".to_string(),
                    });
                }
            }
            ServiceTag::Write => {
                if baseline.write_whitelist.contains(&WriteKey::of(record)) {
                    detection.stats.whitelisted += 1;
                } else {
                    detection.stats.novel += 1;
                    detection.novel_candidates.push(NovelCandidate {
                        record: record.clone(),
                        reason: "write tuple not in whitelist".to_string(),
                    });
                }
            }
            _ => detection.stats.ignored += 1,
        }
    }
    detection
}

/// Output format for [`render_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
    Json,
}

/// Renders a detection report.
///
/// Text: header counters, one line per path, then novel candidates.
/// CSV: the paths table. JSON: the whole [`Detection`], lossless —
/// parsing it back yields a field-equal value.
pub fn render_report(detection: &Detection, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            serde_json::to_string_pretty(detection).expect("detection serializes") + "\n"
        }
        ReportFormat::Csv => {
            let mut out =
                String::from("ts,origin,target,service,domain,item,component,signature,severity\n");
            for p in &detection.paths {
                out.push_str(&format!(
                    "{}.{:06},{},{},{},{},{},{},{},{}\n",
                    p.ts_micros / 1_000_000,
                    p.ts_micros % 1_000_000,
                    p.origin_ip,
                    p.target_ip,
                    p.operation.tag(),
                    p.domain_id,
                    p.item_id,
                    p.component.as_deref().unwrap_or(""),
                    p.signature_id,
                    p.severity,
                ));
            }
            out
        }
        ReportFormat::Text => {
            let s = &detection.stats;
            let mut out = String::from("# detection report\n");
            out.push_str(&format!(
                "# scanned={} matched={} whitelisted={} novel={} ignored={}\n",
                s.scanned, s.matched, s.whitelisted, s.novel, s.ignored
            ));
            for p in &detection.paths {
                out.push_str(&p.render());
                out.push('\n');
            }
            if !detection.novel_candidates.is_empty() {
                out.push_str(&format!(
                    "# novel candidates ({})\n",
                    detection.novel_candidates.len()
                ));
                for n in &detection.novel_candidates {
                    let r = &n.record;
                    out.push_str(&format!(
                        "{} {} -> {} [{}] {}/{} reason=\"{}\"\n",
                        r.ts_display(),
                        r.src_ip,
                        r.dst_ip,
                        r.service.name(),
                        r.domain_id,
                        r.item_id,
                        n.reason,
                    ));
                }
            }
            out
        }
    }
}
