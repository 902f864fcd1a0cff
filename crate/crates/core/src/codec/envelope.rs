//! TPKT/COTP framing and the ISO session/presentation skim.
//!
//! Substation MMS rides on a fixed stack: a 4-byte TPKT header, a
//! 3-byte COTP data TPDU, then session give-tokens/data SPDUs and a
//! presentation wrapper around the MMS PDU. Rather than model the two
//! OSI layers in full, the scanner matches the constant skeleton that
//! real stacks emit and falls back to scanning for a top-level MMS tag
//! that ends exactly at the TPKT boundary. Stream desynchronization is
//! repaired by hunting for the next plausible TPKT header.

use super::ber;
use super::mms::{
    TAG_CONFIRMED_REQUEST, TAG_CONFIRMED_RESPONSE, TAG_INITIATE_REQUEST, TAG_INITIATE_RESPONSE,
};
use crate::pcap::StreamChunk;

/// COTP data TPDU code.
const COTP_DT: u8 = 0xF0;
/// Session give-token + data SPDUs as emitted for established
/// associations: `01 00 01 00`.
const SESSION_DATA: [u8; 4] = [0x01, 0x00, 0x01, 0x00];

/// Counters from one envelope scan.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct EnvelopeStats {
    /// MMS PDUs located.
    pub pdus: usize,
    /// Times the scanner lost TPKT framing and had to hunt for the
    /// next header.
    pub resyncs: usize,
    /// Well-framed TPKTs that carried no MMS payload (connection
    /// setup, keepalives, non-data TPDUs).
    pub not_mms: usize,
    /// Bytes skipped while resynchronizing.
    pub skipped_bytes: usize,
    /// Byte ranges of the stream skipped during resync; used to
    /// attribute undecodable regions back to frames.
    pub skipped_ranges: Vec<(usize, usize)>,
    /// Frames whose payload bytes fell inside skipped ranges. Only
    /// [`decode_envelope`] can fill this — a bare byte stream has no
    /// frame attribution.
    pub skipped_frames: Vec<usize>,
}

/// Location of one MMS PDU inside a reassembled stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PduSpan {
    /// MMS PDU bytes: `stream[start..end]`.
    pub start: usize,
    pub end: usize,
    /// End offset of the TPKT carrying this PDU; the frame delivering
    /// this byte is the frame the PDU is attributed to.
    pub tpkt_end: usize,
}

/// One MMS PDU cut out of a stream together with its arrival metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimedPdu {
    /// Timestamp of the segment that completed the PDU's TPKT.
    pub ts_micros: u64,
    /// Index of the frame that delivered the final TPKT byte.
    pub frame_index: usize,
    pub bytes: Vec<u8>,
}

fn is_mms_top_tag(tag: u8) -> bool {
    matches!(
        tag,
        TAG_CONFIRMED_REQUEST | TAG_CONFIRMED_RESPONSE | TAG_INITIATE_REQUEST
            | TAG_INITIATE_RESPONSE
    )
}

/// Finds a complete MMS PDU inside the post-COTP bytes of one TPKT.
///
/// First tries the session/presentation skeleton
/// (`01 00 01 00`, `61 { 30 { 02 …, A0|.. { pdu } } }`), then falls
/// back to scanning for a top-level MMS tag whose TLV ends exactly at
/// the TPKT boundary.
fn locate_mms(rest: &[u8]) -> Option<(usize, usize)> {
    if rest.len() >= 4 && rest[..4] == SESSION_DATA {
        if let Some(span) = skim_presentation(&rest[4..]) {
            return Some((span.0 + 4, span.1 + 4));
        }
    }
    // Fallback: some stacks collapse or vary the middle layers. Accept
    // any top-level MMS TLV that ends exactly at the TPKT boundary.
    for start in 0..rest.len() {
        if !is_mms_top_tag(rest[start]) {
            continue;
        }
        if let Ok(tlv) = ber::decode_tlv(rest, start) {
            if tlv.end() == rest.len() {
                return Some(resolve_span(rest, &tlv));
            }
        }
    }
    None
}

/// Peels the presentation `[0]` single-ASN1-type wrapper when `tlv`
/// is one. The wrapper shares its `A0` tag byte with a confirmed
/// request, but a wrapper holds exactly one MMS TLV that fills it,
/// while a confirmed request starts with an INTEGER invoke id — the
/// two shapes cannot collide.
fn resolve_span(bytes: &[u8], tlv: &ber::Tlv) -> (usize, usize) {
    if tlv.tag == 0xA0 {
        if let Ok(inner) = ber::decode_tlv(bytes, tlv.content_start) {
            if inner.end() == tlv.content_end && is_mms_top_tag(inner.tag) {
                return (inner.start, inner.end());
            }
        }
    }
    (tlv.start, tlv.end())
}

/// Walks `61 { 30 { 02 context-id, XX { mms } } }` and returns the
/// offsets of the user data.
fn skim_presentation(bytes: &[u8]) -> Option<(usize, usize)> {
    let user_data = ber::decode_tlv(bytes, 0).ok()?;
    if user_data.tag != 0x61 || user_data.end() != bytes.len() {
        return None;
    }
    let pdv = ber::decode_tlv(bytes, user_data.content_start).ok()?;
    if pdv.tag != 0x30 {
        return None;
    }
    let context = ber::decode_tlv(bytes, pdv.content_start).ok()?;
    if context.tag != 0x02 {
        return None;
    }
    let value = ber::decode_tlv(bytes, context.end()).ok()?;
    if value.end() != pdv.content_end {
        return None;
    }
    // `value` is either the single-ASN1-type wrapper around the MMS
    // PDU or (from stacks that skip the wrapper) the PDU itself.
    let (start, end) = resolve_span(bytes, &value);
    if is_mms_top_tag(bytes[start]) {
        Some((start, end))
    } else {
        None
    }
}

/// Scans a reassembled byte stream for MMS PDUs.
///
/// Yields spans in stream order. Bytes that cannot be framed are
/// skipped and recorded; an incomplete TPKT at the stream tail is
/// left for a longer capture, not an error.
pub fn scan_stream(stream: &[u8]) -> (Vec<PduSpan>, EnvelopeStats) {
    let mut spans = Vec::new();
    let mut stats = EnvelopeStats::default();
    let mut pos = 0usize;

    while stream.len() - pos >= 4 {
        if stream[pos] != 0x03 || stream[pos + 1] != 0x00 {
            let skip_from = pos;
            pos = match find_tpkt(stream, pos + 1) {
                Some(next) => next,
                None => stream.len(),
            };
            stats.resyncs += 1;
            stats.skipped_bytes += pos - skip_from;
            stats.skipped_ranges.push((skip_from, pos));
            continue;
        }
        let len = u16::from_be_bytes([stream[pos + 2], stream[pos + 3]]) as usize;
        if len < 4 {
            // A TPKT cannot be shorter than its own header; treat the
            // prefix as garbage and resync.
            let skip_from = pos;
            pos = match find_tpkt(stream, pos + 1) {
                Some(next) => next,
                None => stream.len(),
            };
            stats.resyncs += 1;
            stats.skipped_bytes += pos - skip_from;
            stats.skipped_ranges.push((skip_from, pos));
            continue;
        }
        if pos + len > stream.len() {
            // Incomplete final TPKT: the capture was cut mid-message.
            break;
        }
        let tpkt_end = pos + len;
        let payload = &stream[pos + 4..tpkt_end];

        match cotp_data(payload) {
            Some(rest_offset) => {
                let rest = &payload[rest_offset..];
                match locate_mms(rest) {
                    Some((start, end)) => {
                        let base = pos + 4 + rest_offset;
                        spans.push(PduSpan { start: base + start, end: base + end, tpkt_end });
                        stats.pdus += 1;
                    }
                    None => stats.not_mms += 1,
                }
            }
            None => stats.not_mms += 1,
        }
        pos = tpkt_end;
    }
    (spans, stats)
}

/// Returns the offset past the COTP header when `payload` is a data
/// TPDU, `None` for anything else (CR/CC/DR or junk).
fn cotp_data(payload: &[u8]) -> Option<usize> {
    if payload.len() < 2 {
        return None;
    }
    let li = payload[0] as usize;
    if li + 1 > payload.len() {
        return None;
    }
    if payload[1] != COTP_DT {
        return None;
    }
    Some(li + 1)
}

fn find_tpkt(stream: &[u8], from: usize) -> Option<usize> {
    (from..stream.len().saturating_sub(3)).find(|&i| stream[i] == 0x03 && stream[i + 1] == 0x00)
}

/// Cuts MMS PDUs out of one direction of a reassembled flow.
///
/// `chunks` must belong to a single flow direction, in offset order
/// and gap-free (the reassembler guarantees this). Each PDU carries
/// the timestamp and frame index of the chunk that completed its TPKT.
pub fn decode_envelope(chunks: &[StreamChunk]) -> (Vec<TimedPdu>, EnvelopeStats) {
    let mut stream = Vec::new();
    // (end offset in stream, ts, frame index) per chunk.
    let mut boundaries: Vec<(usize, u64, usize)> = Vec::with_capacity(chunks.len());
    for chunk in chunks {
        stream.extend_from_slice(&chunk.payload);
        boundaries.push((stream.len(), chunk.ts_micros, chunk.frame_index));
    }

    let (spans, mut stats) = scan_stream(&stream);
    let pdus = spans
        .iter()
        .map(|span| {
            let (ts, frame_index) = chunk_at(&boundaries, span.tpkt_end - 1);
            TimedPdu { ts_micros: ts, frame_index, bytes: stream[span.start..span.end].to_vec() }
        })
        .collect();

    // Attribute desynchronized byte ranges to the frames that carried
    // them, so a fail-closed filter knows what it cannot vouch for.
    let mut skipped = std::collections::BTreeSet::new();
    for &(range_start, range_end) in &stats.skipped_ranges {
        let mut chunk_start = 0usize;
        for &(chunk_end, _, frame_index) in &boundaries {
            if chunk_start < range_end && range_start < chunk_end {
                skipped.insert(frame_index);
            }
            chunk_start = chunk_end;
        }
    }
    stats.skipped_frames = skipped.into_iter().collect();
    (pdus, stats)
}

/// Finds the chunk covering stream offset `offset`.
pub(crate) fn chunk_at(boundaries: &[(usize, u64, usize)], offset: usize) -> (u64, usize) {
    let idx = boundaries.partition_point(|&(end, _, _)| end <= offset);
    let (_, ts, frame) = boundaries[idx.min(boundaries.len().saturating_sub(1))];
    (ts, frame)
}

/// Wraps one encoded MMS PDU in the full TPKT/COTP/session/
/// presentation envelope, producing the payload of a single TCP
/// segment.
pub fn wrap_mms(mms: &[u8]) -> Vec<u8> {
    let presentation = {
        let mut pdv_content = Vec::new();
        // Presentation context identifier 3 = MMS in the fixed
        // context set negotiated by these stacks.
        ber::encode_tlv(0x02, &[0x03], &mut pdv_content).expect("1 byte");
        ber::encode_tlv(0xA0, mms, &mut pdv_content).expect("bounded by caller");
        let pdv = ber::tlv(0x30, &pdv_content).expect("bounded");
        ber::tlv(0x61, &pdv).expect("bounded")
    };

    let mut tpkt_payload = Vec::with_capacity(presentation.len() + 7);
    tpkt_payload.extend_from_slice(&[0x02, COTP_DT, 0x80]); // COTP DT, last unit
    tpkt_payload.extend_from_slice(&SESSION_DATA);
    tpkt_payload.extend_from_slice(&presentation);

    let total = tpkt_payload.len() + 4;
    assert!(total <= u16::MAX as usize, "PDU too large for one TPKT");
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&[0x03, 0x00]);
    out.extend_from_slice(&(total as u16).to_be_bytes());
    out.extend_from_slice(&tpkt_payload);
    out
}
