//! End-to-end field extraction: captured frames → reassembled flows →
//! MMS PDUs → one normalized record per read or written variable.
//!
//! Records are the working currency of everything downstream:
//! whitelist learning, diffing, detection and filtering all consume
//! [`ExtractedRecord`]s produced here, so detection and enforcement
//! can never disagree about what a packet contained.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};

use crate::codec::envelope;
use crate::codec::mms::{decode_mms, MessageKind, MmsError, MmsMessage, ServiceTag};
use crate::pcap::{reassemble, FlowKey, RawFrame, ReassemblyReport, StreamChunk};

/// One read or written variable, flattened to the fields the
/// whitelist model cares about.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedRecord {
    /// Microseconds since the epoch, from the completing segment.
    pub ts_micros: u64,
    pub src_ip: Ipv4Addr,
    pub dst_ip: Ipv4Addr,
    pub service: ServiceTag,
    pub domain_id: String,
    pub item_id: String,
    /// Quality bytes of (operTm, T) for control-operate writes.
    pub time_acc: Option<(u8, u8)>,
    /// Originator identification; `None` when the field was absent.
    pub or_ident: Option<Vec<u8>>,
    /// Originator category for control-operate writes.
    pub or_cat: Option<u8>,
}

impl ExtractedRecord {
    /// Timestamp rendered as `seconds.micros`.
    pub fn ts_display(&self) -> String {
        format!("{}.{:06}", self.ts_micros / 1_000_000, self.ts_micros % 1_000_000)
    }
}

/// Canonical text form of an originator-identification value:
/// `ABSENT` when the field was omitted, `EMPTY` when present with no
/// octets, otherwise lowercase hex.
pub fn canonical_or_ident(or_ident: Option<&[u8]>) -> String {
    match or_ident {
        None => "ABSENT".to_string(),
        Some([]) => "EMPTY".to_string(),
        Some(bytes) => hex::encode(bytes),
    }
}

/// Counters describing one extraction pass.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct ExtractionReport {
    pub total_frames: usize,
    /// MMS PDUs that decoded, of any kind.
    pub mms_pdus: usize,
    /// Confirmed requests per service tag number.
    pub per_service: BTreeMap<u8, usize>,
    pub initiate_requests: usize,
    /// PDUs located by the envelope scan that failed MMS decoding.
    pub decode_errors: usize,
}

/// One envelope-extracted PDU with its arrival metadata and decode
/// outcome. Errors stay attached to their frame so a fail-closed
/// filter can act on them.
#[derive(Debug, Clone)]
pub struct DecodedPdu {
    pub ts_micros: u64,
    pub frame_index: usize,
    pub flow: FlowKey,
    pub pdu: Result<MmsMessage, MmsError>,
}

/// Full decode of a capture: PDUs plus every skip/damage counter
/// accumulated on the way.
#[derive(Debug, Clone)]
pub struct CaptureDecode {
    /// All PDUs in (timestamp, frame index) order.
    pub pdus: Vec<DecodedPdu>,
    pub reassembly: ReassemblyReport,
    /// Envelope-level resynchronizations across all flow directions.
    pub resyncs: usize,
    /// Well-framed TPKTs without MMS payload.
    pub not_mms: usize,
    /// Frames whose payload fell inside desynchronized stream regions.
    pub desync_frames: BTreeSet<usize>,
    pub total_frames: usize,
}

/// Reassembles and decodes every MMS PDU in a capture.
pub fn decode_capture(frames: &[RawFrame]) -> CaptureDecode {
    let (chunks, reassembly) = reassemble(frames);

    let mut pdus = Vec::new();
    let mut resyncs = 0usize;
    let mut not_mms = 0usize;
    let mut desync_frames = BTreeSet::new();

    let mut start = 0usize;
    while start < chunks.len() {
        let flow = chunks[start].flow;
        let mut end = start + 1;
        while end < chunks.len() && chunks[end].flow == flow {
            end += 1;
        }
        let group: &[StreamChunk] = &chunks[start..end];
        let (timed, stats) = envelope::decode_envelope(group);
        resyncs += stats.resyncs;
        not_mms += stats.not_mms;
        desync_frames.extend(stats.skipped_frames.iter().copied());
        for pdu in timed {
            pdus.push(DecodedPdu {
                ts_micros: pdu.ts_micros,
                frame_index: pdu.frame_index,
                flow,
                pdu: decode_mms(&pdu.bytes),
            });
        }
        start = end;
    }

    pdus.sort_by_key(|p| (p.ts_micros, p.frame_index));
    CaptureDecode { pdus, reassembly, resyncs, not_mms, desync_frames, total_frames: frames.len() }
}

/// Flattens decoded PDUs to records, keeping the frame index of each
/// record's carrier so enforcement can drop the right frames.
pub fn records_with_frames(decode: &CaptureDecode) -> Vec<(usize, ExtractedRecord)> {
    let mut out = Vec::new();
    for entry in &decode.pdus {
        let Ok(msg) = &entry.pdu else { continue };
        if msg.kind != MessageKind::ConfirmedRequest {
            continue;
        }
        let Some(service) = msg.service else { continue };
        for name in &msg.reads {
            out.push((
                entry.frame_index,
                ExtractedRecord {
                    ts_micros: entry.ts_micros,
                    src_ip: entry.flow.src_ip,
                    dst_ip: entry.flow.dst_ip,
                    service,
                    domain_id: name.domain_id.clone(),
                    item_id: name.item_id.clone(),
                    time_acc: None,
                    or_ident: None,
                    or_cat: None,
                },
            ));
        }
        for item in &msg.writes {
            let oper = item.oper.as_ref();
            out.push((
                entry.frame_index,
                ExtractedRecord {
                    ts_micros: entry.ts_micros,
                    src_ip: entry.flow.src_ip,
                    dst_ip: entry.flow.dst_ip,
                    service,
                    domain_id: item.name.domain_id.clone(),
                    item_id: item.name.item_id.clone(),
                    time_acc: oper.map(|o| o.time_accuracy()),
                    or_ident: oper.and_then(|o| o.or_ident.clone()),
                    or_cat: oper.map(|o| o.or_cat),
                },
            ));
        }
    }
    out
}

fn build_report(decode: &CaptureDecode) -> ExtractionReport {
    let mut report = ExtractionReport { total_frames: decode.total_frames, ..Default::default() };
    for entry in &decode.pdus {
        match &entry.pdu {
            Err(_) => report.decode_errors += 1,
            Ok(msg) => {
                report.mms_pdus += 1;
                match msg.kind {
                    MessageKind::InitiateRequest => report.initiate_requests += 1,
                    MessageKind::ConfirmedRequest => {
                        if let Some(service) = msg.service {
                            *report.per_service.entry(service.tag()).or_insert(0) += 1;
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    report
}

/// Extracts every read/written variable from a capture.
///
/// Records come out ordered by (timestamp, frame, position in PDU);
/// the report counts each confirmed request once per PDU, so a read
/// of N variables yields N records but one service count.
pub fn extract(frames: &[RawFrame]) -> (Vec<ExtractedRecord>, ExtractionReport) {
    let decode = decode_capture(frames);
    let report = build_report(&decode);
    let records = records_with_frames(&decode).into_iter().map(|(_, r)| r).collect();
    (records, report)
}

/// CSV export of extracted records.
///
/// Header: `ts,src,dst,service,domain,item,acc1,acc2,orident,orcat`.
/// Identifier charsets exclude the separator, so no quoting is
/// needed; the originator identification renders canonically
/// (empty cell = absent, `EMPTY`, or lowercase hex).
pub fn records_to_csv(records: &[ExtractedRecord]) -> String {
    let mut out = String::from("ts,src,dst,service,domain,item,acc1,acc2,orident,orcat\n");
    for r in records {
        let (acc1, acc2) = match r.time_acc {
            Some((a, b)) => (format!("0x{a:02x}"), format!("0x{b:02x}")),
            None => (String::new(), String::new()),
        };
        let orident = match &r.or_ident {
            None => String::new(),
            Some(v) if v.is_empty() => "EMPTY".to_string(),
            Some(v) => hex::encode(v),
        };
        let orcat = r.or_cat.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.ts_display(),
            r.src_ip,
            r.dst_ip,
            r.service.tag(),
            r.domain_id,
            r.item_id,
            acc1,
            acc2,
            orident,
            orcat,
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::envelope::wrap_mms;
    use crate::codec::mms::{
        encode_mms, read_response_payload, MmsMessage, ObjectName, OperPayload, UtcTimestamp,
        WriteItem,
    };
    use crate::wire::{build_tcp_frame, TcpFrameSpec};

    const SCADA: Ipv4Addr = Ipv4Addr::new(172, 18, 5, 60);
    const PLC: Ipv4Addr = Ipv4Addr::new(172, 16, 3, 41);

    fn name(item: &str) -> ObjectName {
        ObjectName::new("WAGO61850ServerLogicalDevice", item).unwrap()
    }

    fn oper(acc: (u8, u8), or_cat: u8, or_ident: Option<Vec<u8>>) -> OperPayload {
        OperPayload {
            ctl_val: true,
            oper_tm: UtcTimestamp::new(1000, 0, acc.0),
            or_cat,
            or_ident,
            ctl_num: 1,
            t: UtcTimestamp::new(1000, 0, acc.1),
            test: false,
            check: 0,
        }
    }

    fn frame_with(seq: u32, ts: u32, src: Ipv4Addr, dst: Ipv4Addr, payload: Vec<u8>) -> RawFrame {
        build_tcp_frame(&TcpFrameSpec {
            ts_secs: ts,
            ts_micros: 0,
            src,
            dst,
            src_port: if dst == PLC { 51000 } else { 102 },
            dst_port: if dst == PLC { 102 } else { 51000 },
            seq,
            ack: 1,
            payload,
        })
    }

    fn sample_capture() -> Vec<RawFrame> {
        let read = MmsMessage::read_request(
            1,
            vec![name("LLN0$CircuitBreaker"), name("LLN0$AMI")],
        );
        let write = MmsMessage::write_request(
            2,
            vec![WriteItem::with_oper(
                name("GGIO12$CO$SPCSO$Oper"),
                oper((0x0F, 0x10), 2, Some(vec![0u8; 64])),
            )],
        );
        let response = MmsMessage::response(1, ServiceTag::Read, read_response_payload(2));

        let read_bytes = wrap_mms(&encode_mms(&read).unwrap());
        let write_bytes = wrap_mms(&encode_mms(&write).unwrap());
        let read_len = read_bytes.len() as u32;
        vec![
            frame_with(1000, 10, SCADA, PLC, read_bytes),
            frame_with(1000 + read_len, 12, SCADA, PLC, write_bytes),
            frame_with(500, 11, PLC, SCADA, wrap_mms(&encode_mms(&response).unwrap())),
        ]
    }

    #[test]
    fn capture_yields_records_in_timestamp_order() {
        let (records, report) = extract(&sample_capture());
        assert_eq!(report.total_frames, 3);
        assert_eq!(report.mms_pdus, 3);
        assert_eq!(report.decode_errors, 0);
        assert_eq!(report.per_service.get(&4), Some(&1));
        assert_eq!(report.per_service.get(&5), Some(&1));

        // Two read records then one write record.
        assert_eq!(records.len(), 3);
        assert_eq!(records[0].item_id, "LLN0$CircuitBreaker");
        assert_eq!(records[1].item_id, "LLN0$AMI");
        assert!(records.windows(2).all(|w| w[0].ts_micros <= w[1].ts_micros));

        let write = &records[2];
        assert_eq!(write.service, ServiceTag::Write);
        assert_eq!(write.src_ip, SCADA);
        assert_eq!(write.dst_ip, PLC);
        assert_eq!(write.time_acc, Some((0x0F, 0x10)));
        assert_eq!(write.or_ident.as_deref(), Some(&[0u8; 64][..]));
        assert_eq!(write.or_cat, Some(2));
    }

    #[test]
    fn read_records_carry_no_write_fields() {
        let (records, _) = extract(&sample_capture());
        for r in records.iter().filter(|r| r.service == ServiceTag::Read) {
            assert!(r.time_acc.is_none() && r.or_ident.is_none() && r.or_cat.is_none());
        }
    }

    #[test]
    fn one_segment_with_three_pdus_yields_three_records() {
        let mut payload = Vec::new();
        for invoke in 1..=3u32 {
            let msg = MmsMessage::read_request(invoke, vec![name("LLN0$Testbed")]);
            payload.extend_from_slice(&wrap_mms(&encode_mms(&msg).unwrap()));
        }
        let frames = vec![frame_with(1, 5, SCADA, PLC, payload)];
        let (records, report) = extract(&frames);
        assert_eq!(report.mms_pdus, 3);
        assert_eq!(records.len(), 3);
        assert!(records.iter().all(|r| r.ts_micros == 5_000_000));
    }

    #[test]
    fn initiate_and_garbage_are_counted() {
        let initiate = crate::codec::ber::tlv(0xA8, &[0x80, 0x01, 0x00]).unwrap();
        let mut garbage_then_pdu = vec![0xFF, 0xFE, 0xFD];
        garbage_then_pdu.extend_from_slice(&wrap_mms(&initiate));
        let frames = vec![frame_with(1, 5, SCADA, PLC, garbage_then_pdu)];
        let decode = decode_capture(&frames);
        assert_eq!(decode.resyncs, 1);
        assert_eq!(decode.desync_frames.iter().copied().collect::<Vec<_>>(), vec![0]);
        let (records, report) = extract(&frames);
        assert!(records.is_empty());
        assert_eq!(report.initiate_requests, 1);
        assert_eq!(report.mms_pdus, 1);
    }

    #[test]
    fn undecodable_pdu_is_a_decode_error_with_frame_attribution() {
        // Valid envelope, truncated MMS inside: a confirmed-request
        // tag carrying garbage.
        let bad_pdu = crate::codec::ber::tlv(0xA0, &[0x02]).unwrap();
        let frames = vec![frame_with(1, 5, SCADA, PLC, wrap_mms(&bad_pdu))];
        let decode = decode_capture(&frames);
        assert_eq!(decode.pdus.len(), 1);
        assert!(decode.pdus[0].pdu.is_err());
        assert_eq!(decode.pdus[0].frame_index, 0);
        let (_, report) = extract(&frames);
        assert_eq!(report.decode_errors, 1);
        assert_eq!(report.mms_pdus, 0);
    }

    #[test]
    fn csv_export_matches_expected_shape() {
        let (records, _) = extract(&sample_capture());
        let csv = records_to_csv(&records);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "ts,src,dst,service,domain,item,acc1,acc2,orident,orcat"
        );
        let first = lines.next().unwrap();
        assert_eq!(
            first,
            "10.000000,172.18.5.60,172.16.3.41,4,WAGO61850ServerLogicalDevice,LLN0$CircuitBreaker,,,,"
        );
        let write_line = csv.lines().last().unwrap();
        assert!(write_line.contains(",5,"), "service tag column: {write_line}");
        assert!(write_line.contains("0x0f,0x10"), "acc columns: {write_line}");
        assert!(write_line.ends_with(&format!("{},2", hex::encode([0u8; 64]))));
    }

    #[test]
    fn canonical_or_ident_covers_all_forms() {
        assert_eq!(canonical_or_ident(None), "ABSENT");
        assert_eq!(canonical_or_ident(Some(&[])), "EMPTY");
        assert_eq!(canonical_or_ident(Some(&[0x00, 0xAB])), "00ab");
    }

    #[test]
    fn record_json_roundtrip_is_field_equal() {
        let (records, _) = extract(&sample_capture());
        let json = serde_json::to_string(&records).unwrap();
        let back: Vec<ExtractedRecord> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, records);
    }
}
