//! Frame-level enforcement: applies compiled rules to a capture and
//! splits it into passed and dropped frames.
//!
//! The engine decodes traffic with the same reassembly/extraction
//! path the detector uses, so a record the detector would flag is
//! exactly the record a rule here can drop — the two stages cannot
//! disagree about packet contents. Enforcement is per frame: the
//! frame that completes a matching PDU is dropped, and when one
//! segment carries several PDUs the whole segment goes with it.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baseline::{Baseline, Severity};
use crate::detect::AttackPath;
use crate::extract::{decode_capture, records_with_frames};
use crate::pcap::{write_pcap, PcapError, RawFrame};
use crate::rulegen::{NidsRule, RuleAction};

/// Sid reserved for fail-closed policy drops; real rules start at
/// the signature sid base, far above it.
pub const FAIL_CLOSED_SID: u32 = 0;

/// How the filter treats traffic it cannot decode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterPolicy {
    /// When set, frames whose payload failed envelope or MMS
    /// decoding are dropped (sid [`FAIL_CLOSED_SID`]) instead of
    /// passed. Off by default: a monitoring deployment should not
    /// black-hole traffic it merely failed to parse.
    pub fail_closed: bool,
}

/// One dropped frame and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedFrame {
    pub frame_index: usize,
    pub sid: u32,
    /// The attack step the matching rule described. `None` for
    /// fail-closed policy drops, where there is no decoded record to
    /// describe.
    pub path: Option<AttackPath>,
}

/// One alert-rule hit. Alerts observe; they never remove frames.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlertEvent {
    pub ts_micros: u64,
    pub sid: u32,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub msg: String,
}

/// Result of one filter pass. Every input frame lands in exactly one
/// of `passed` or `dropped`.
#[derive(Debug, Clone, Default)]
pub struct FilterOutcome {
    pub passed: Vec<RawFrame>,
    pub dropped: Vec<DroppedFrame>,
    pub alerts: Vec<AlertEvent>,
    /// Frames whose payload failed decoding, recorded regardless of
    /// policy so an operator can see what a fail-closed stance would
    /// have cost.
    pub undecodable_frames: Vec<usize>,
}

impl FilterOutcome {
    /// One-line counter summary.
    pub fn summary(&self) -> String {
        format!(
            "passed={} dropped={} alerts={} undecodable={}",
            self.passed.len(),
            self.dropped.len(),
            self.alerts.len(),
            self.undecodable_frames.len()
        )
    }
}

/// Serializes alerts as JSON lines, one event per line.
pub fn alerts_to_json_lines(alerts: &[AlertEvent]) -> String {
    let mut out = String::new();
    for alert in alerts {
        out.push_str(&serde_json::to_string(alert).expect("alert serializes"));
        out.push('\n');
    }
    out
}

/// Writes the surviving frames as a classic pcap.
pub fn write_filtered(path: &Path, outcome: &FilterOutcome) -> Result<(), PcapError> {
    write_pcap(path, &outcome.passed)
}

/// Applies rules to a capture.
///
/// Rules are evaluated in sid order; when several drop rules claim
/// one frame the smallest sid wins, so the outcome is independent of
/// rule-list ordering. Alert rules fire for every match, including on
/// frames that were also dropped. The baseline, when given, only
/// enriches dropped-frame paths with the process component behind
/// the written item — matching never consults it.
pub fn filter(
    frames: &[RawFrame],
    rules: &[NidsRule],
    baseline: Option<&Baseline>,
    policy: FilterPolicy,
) -> FilterOutcome {
    let decode = decode_capture(frames);

    let mut undecodable: BTreeSet<usize> = decode.desync_frames.clone();
    for pdu in &decode.pdus {
        if pdu.pdu.is_err() {
            undecodable.insert(pdu.frame_index);
        }
    }

    let mut sorted: Vec<&NidsRule> = rules.iter().collect();
    sorted.sort_by_key(|r| r.sid);

    let mut drops: BTreeMap<usize, DroppedFrame> = BTreeMap::new();
    let mut alerts = Vec::new();
    for (frame_index, record) in records_with_frames(&decode) {
        for rule in &sorted {
            if !rule.match_spec.matches(&record) {
                continue;
            }
            match rule.action {
                RuleAction::Drop => {
                    let improves =
                        drops.get(&frame_index).map(|d| rule.sid < d.sid).unwrap_or(true);
                    if improves {
                        drops.insert(
                            frame_index,
                            DroppedFrame {
                                frame_index,
                                sid: rule.sid,
                                path: Some(AttackPath {
                                    ts_micros: record.ts_micros,
                                    origin_ip: record.src_ip,
                                    target_ip: record.dst_ip,
                                    operation: record.service,
                                    domain_id: record.domain_id.clone(),
                                    item_id: record.item_id.clone(),
                                    component: baseline
                                        .and_then(|b| b.component_of(&record.item_id))
                                        .map(str::to_string),
                                    signature_id: rule
                                        .signature_id()
                                        .map(str::to_string)
                                        .unwrap_or_else(|| format!("sid-{}", rule.sid)),
                                    severity: Severity::Blocking,
                                }),
                            },
                        );
                    }
                }
                RuleAction::Alert => alerts.push(AlertEvent {
                    ts_micros: record.ts_micros,
                    sid: rule.sid,
                    src_ip: record.src_ip,
                    dst_ip: record.dst_ip,
                    msg: rule.msg.clone(),
                }),
            }
        }
    }

    let mut dropped: Vec<DroppedFrame> = drops.into_values().collect();
    if policy.fail_closed {
        for &frame_index in &undecodable {
            if !dropped.iter().any(|d| d.frame_index == frame_index) {
                dropped.push(DroppedFrame { frame_index, sid: FAIL_CLOSED_SID, path: None });
            }
        }
        dropped.sort_by_key(|d| d.frame_index);
    }

    let dropped_set: BTreeSet<usize> = dropped.iter().map(|d| d.frame_index).collect();
    let passed = frames
        .iter()
        .enumerate()
        .filter(|(i, _)| !dropped_set.contains(i))
        .map(|(_, f)| f.clone())
        .collect();

    FilterOutcome {
        passed,
        dropped,
        alerts,
        undecodable_frames: undecodable.into_iter().collect(),
    }
}
