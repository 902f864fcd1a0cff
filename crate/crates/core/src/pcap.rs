//! Classic pcap reading/writing and TCP payload reassembly.
//!
//! Only the classic (libpcap) capture format with Ethernet link type
//! is accepted; pcapng and nanosecond captures are rejected with an
//! error naming the cure. Reassembly is a pure sequence-number byte
//! assembler: it follows relative TCP sequence numbers per flow
//! direction, drops retransmitted duplicates, and refuses to invent
//! bytes — a hole in the stream ends that direction with a warning.

use std::io::{Read, Write};
use std::net::Ipv4Addr;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Classic pcap magic, little-endian byte order as written.
const MAGIC_LE: [u8; 4] = [0xD4, 0xC3, 0xB2, 0xA1];
/// Classic pcap magic written big-endian.
const MAGIC_BE: [u8; 4] = [0xA1, 0xB2, 0xC3, 0xD4];
/// Nanosecond-resolution variants (both byte orders).
const MAGIC_NS_LE: [u8; 4] = [0x4D, 0x3C, 0xB2, 0xA1];
const MAGIC_NS_BE: [u8; 4] = [0xA1, 0xB2, 0x3C, 0x4D];
/// pcapng section header block type.
const MAGIC_PCAPNG: [u8; 4] = [0x0A, 0x0D, 0x0D, 0x0A];

/// Sanity cap on a single captured frame; classic pcap snap lengths
/// never exceed this, so a larger record length means corruption.
const MAX_FRAME: usize = 0x0004_0000;

/// Largest frame the writer accepts (fits the 16-bit snap length).
pub const MAX_WRITE_FRAME: usize = 0xFFFF;

/// Errors from capture I/O.
#[derive(Debug, Error)]
pub enum PcapError {
    /// The file is not a classic microsecond pcap with Ethernet frames.
    #[error("unsupported capture format: {0}")]
    UnsupportedFormat(String),
    /// A record header or body was cut short; `frames_read` frames
    /// were decoded before the damage.
    #[error("truncated capture record after {frames_read} frames")]
    TruncatedFile { frames_read: usize },
    /// The writer was handed a frame longer than [`MAX_WRITE_FRAME`].
    #[error("frame {index} is {len} bytes, over the {MAX_WRITE_FRAME}-byte limit")]
    OversizeFrame { index: usize, len: usize },
    #[error("capture I/O failed: {0}")]
    Io(#[from] std::io::Error),
}

/// One captured Ethernet frame with microsecond timestamp.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawFrame {
    pub ts_secs: u32,
    pub ts_micros: u32,
    /// Link-layer bytes starting at the Ethernet header.
    pub link_bytes: Vec<u8>,
}

impl RawFrame {
    /// Timestamp as total microseconds since the epoch.
    pub fn ts_total_micros(&self) -> u64 {
        u64::from(self.ts_secs) * 1_000_000 + u64::from(self.ts_micros)
    }
}

/// Directional TCP flow identity (source → destination).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlowKey {
    pub src_ip: Ipv4Addr,
    pub src_port: u16,
    pub dst_ip: Ipv4Addr,
    pub dst_port: u16,
}

impl FlowKey {
    /// The opposite direction of the same conversation.
    pub fn reversed(&self) -> FlowKey {
        FlowKey {
            src_ip: self.dst_ip,
            src_port: self.dst_port,
            dst_ip: self.src_ip,
            dst_port: self.src_port,
        }
    }
}

impl std::fmt::Display for FlowKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{} -> {}:{}", self.src_ip, self.src_port, self.dst_ip, self.dst_port)
    }
}

/// A contiguous run of reassembled payload bytes for one flow
/// direction. `offset` counts from the first byte seen on that
/// direction; the timestamp and frame index are those of the segment
/// whose arrival completed the run up to this chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamChunk {
    pub flow: FlowKey,
    pub offset: u64,
    pub payload: Vec<u8>,
    pub ts_micros: u64,
    pub frame_index: usize,
}

/// A sequence hole that ended reassembly for one direction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GapWarning {
    pub flow: FlowKey,
    /// Stream offset at which bytes were missing.
    pub offset: u64,
}

/// Skip/drop accounting for one reassembly pass.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize)]
pub struct ReassemblyReport {
    /// Ethernet frames that were not IPv4 unicast TCP (ARP, other
    /// ethertypes, non-TCP protocols, runts, IP fragments).
    pub non_tcp_skipped: usize,
    /// IPv6 frames, counted separately from other non-TCP traffic.
    pub ipv6_skipped: usize,
    /// 802.1Q tagged frames, skipped rather than unwrapped.
    pub vlan_skipped: usize,
    /// Retransmitted segments dropped (same direction and offset).
    pub duplicate_segments: usize,
    /// Directions cut short by missing bytes.
    pub gap_warnings: Vec<GapWarning>,
}

/// Reads a classic pcap file and returns its frames sorted by
/// timestamp (stable, so equal timestamps keep file order).
///
/// An empty file body after the 24-byte header yields an empty vector.
/// Records with less than an Ethernet header's worth of bytes are
/// skipped; records cut short by the end of file raise
/// [`PcapError::TruncatedFile`] carrying the number of frames already
/// decoded.
pub fn read_pcap(path: &Path) -> Result<Vec<RawFrame>, PcapError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    read_pcap_bytes(&bytes)
}

/// [`read_pcap`] over an in-memory buffer.
pub fn read_pcap_bytes(bytes: &[u8]) -> Result<Vec<RawFrame>, PcapError> {
    if bytes.len() >= 4 && bytes[..4] == MAGIC_PCAPNG {
        return Err(PcapError::UnsupportedFormat(
            "pcapng capture; convert to classic pcap (e.g. tshark -F pcap)".into(),
        ));
    }
    if bytes.len() < 24 {
        return Err(PcapError::UnsupportedFormat("file shorter than the 24-byte header".into()));
    }
    let magic: [u8; 4] = bytes[..4].try_into().unwrap();
    let big_endian = match magic {
        MAGIC_LE => false,
        MAGIC_BE => true,
        MAGIC_NS_LE | MAGIC_NS_BE => {
            return Err(PcapError::UnsupportedFormat(
                "nanosecond pcap; re-save with microsecond timestamps".into(),
            ))
        }
        _ => {
            return Err(PcapError::UnsupportedFormat(format!(
                "unknown magic {:02x}{:02x}{:02x}{:02x}",
                magic[0], magic[1], magic[2], magic[3]
            )))
        }
    };
    let read_u32 = |chunk: &[u8]| -> u32 {
        let arr: [u8; 4] = chunk.try_into().unwrap();
        if big_endian {
            u32::from_be_bytes(arr)
        } else {
            u32::from_le_bytes(arr)
        }
    };

    let link_type = read_u32(&bytes[20..24]);
    if link_type != 1 {
        return Err(PcapError::UnsupportedFormat(format!(
            "link type {link_type}; only Ethernet (1) is supported"
        )));
    }

    let mut frames = Vec::new();
    let mut pos = 24usize;
    while pos < bytes.len() {
        if bytes.len() - pos < 16 {
            return Err(PcapError::TruncatedFile { frames_read: frames.len() });
        }
        let ts_secs = read_u32(&bytes[pos..pos + 4]);
        let ts_micros = read_u32(&bytes[pos + 4..pos + 8]);
        let incl_len = read_u32(&bytes[pos + 8..pos + 12]) as usize;
        pos += 16;
        if incl_len > MAX_FRAME || incl_len > bytes.len() - pos {
            return Err(PcapError::TruncatedFile { frames_read: frames.len() });
        }
        // Runt records can't hold an Ethernet header; skip them.
        if incl_len >= 14 {
            frames.push(RawFrame {
                ts_secs,
                ts_micros,
                link_bytes: bytes[pos..pos + incl_len].to_vec(),
            });
        }
        pos += incl_len;
    }
    frames.sort_by_key(|f| (f.ts_secs, f.ts_micros));
    Ok(frames)
}

/// Writes frames as a classic little-endian microsecond pcap
/// (version 2.4, Ethernet). Output is byte-identical for identical
/// input — there is no environment-dependent state in the format.
pub fn write_pcap(path: &Path, frames: &[RawFrame]) -> Result<(), PcapError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(&pcap_header())?;
    for (index, frame) in frames.iter().enumerate() {
        let len = frame.link_bytes.len();
        if len > MAX_WRITE_FRAME {
            return Err(PcapError::OversizeFrame { index, len });
        }
        out.write_all(&frame.ts_secs.to_le_bytes())?;
        out.write_all(&frame.ts_micros.to_le_bytes())?;
        out.write_all(&(len as u32).to_le_bytes())?;
        out.write_all(&(len as u32).to_le_bytes())?;
        out.write_all(&frame.link_bytes)?;
    }
    out.flush()?;
    Ok(())
}

fn pcap_header() -> [u8; 24] {
    let mut header = [0u8; 24];
    header[..4].copy_from_slice(&MAGIC_LE);
    header[4..6].copy_from_slice(&2u16.to_le_bytes()); // major
    header[6..8].copy_from_slice(&4u16.to_le_bytes()); // minor
    // thiszone and sigfigs stay zero.
    header[16..20].copy_from_slice(&(MAX_WRITE_FRAME as u32).to_le_bytes()); // snaplen
    header[20..24].copy_from_slice(&1u32.to_le_bytes()); // Ethernet
    header
}

/// One TCP segment cut out of a frame.
struct Segment {
    flow: FlowKey,
    seq: u32,
    payload_start: usize,
    payload_end: usize,
    ts_micros: u64,
    frame_index: usize,
}

/// Parses the Ethernet/IPv4/TCP headers of one frame. `Err` carries
/// the skip category for the report.
enum SkipReason {
    NonTcp,
    Ipv6,
    Vlan,
}

fn parse_segment(frame: &RawFrame, frame_index: usize) -> Result<Option<Segment>, SkipReason> {
    let bytes = &frame.link_bytes;
    if bytes.len() < 14 {
        return Err(SkipReason::NonTcp);
    }
    let ethertype = u16::from_be_bytes([bytes[12], bytes[13]]);
    match ethertype {
        0x0800 => {}
        0x86DD => return Err(SkipReason::Ipv6),
        0x8100 | 0x88A8 => return Err(SkipReason::Vlan),
        _ => return Err(SkipReason::NonTcp),
    }
    let ip = &bytes[14..];
    if ip.len() < 20 || ip[0] >> 4 != 4 {
        return Err(SkipReason::NonTcp);
    }
    let ihl = usize::from(ip[0] & 0x0F) * 4;
    let total_len = usize::from(u16::from_be_bytes([ip[2], ip[3]]));
    if ihl < 20 || total_len < ihl || ip.len() < ihl {
        return Err(SkipReason::NonTcp);
    }
    let flags_frag = u16::from_be_bytes([ip[6], ip[7]]);
    if flags_frag & 0x2000 != 0 || flags_frag & 0x1FFF != 0 {
        // Fragmented IP is out of scope for a desk-scale assembler.
        return Err(SkipReason::NonTcp);
    }
    if ip[9] != 6 {
        return Err(SkipReason::NonTcp);
    }
    // The IP total length trims Ethernet padding off short frames.
    let ip_end = total_len.min(ip.len());
    let tcp = &ip[ihl..ip_end];
    if tcp.len() < 20 {
        return Err(SkipReason::NonTcp);
    }
    let data_offset = usize::from(tcp[12] >> 4) * 4;
    if data_offset < 20 || tcp.len() < data_offset {
        return Err(SkipReason::NonTcp);
    }
    let flow = FlowKey {
        src_ip: Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]),
        src_port: u16::from_be_bytes([tcp[0], tcp[1]]),
        dst_ip: Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]),
        dst_port: u16::from_be_bytes([tcp[2], tcp[3]]),
    };
    if tcp.len() == data_offset {
        return Ok(None); // pure ACK / control segment, no payload
    }
    let payload_offset = 14 + ihl + data_offset;
    Ok(Some(Segment {
        flow,
        seq: u32::from_be_bytes([tcp[4], tcp[5], tcp[6], tcp[7]]),
        payload_start: payload_offset,
        payload_end: 14 + ihl + (ip_end - ihl),
        ts_micros: frame.ts_total_micros(),
        frame_index,
    }))
}

struct BufferedSegment {
    frame_index: usize,
    ts_micros: u64,
    /// Arrival order among payload segments; drives "which segment
    /// completed this chunk" bookkeeping.
    arrival: usize,
    payload: Vec<u8>,
}

/// Reassembles per-direction TCP byte streams from captured frames.
///
/// Segments are keyed by their sequence offset relative to the first
/// segment seen on the direction (32-bit wrap handled); duplicates at
/// the same offset are dropped. A missing stretch of bytes emits a
/// [`GapWarning`] and discards everything after the hole — bytes are
/// never invented. Chunks come out grouped by flow in key order, each
/// group in stream order, so the output is deterministic for a given
/// input.
pub fn reassemble(frames: &[RawFrame]) -> (Vec<StreamChunk>, ReassemblyReport) {
    use std::collections::BTreeMap;

    struct Direction {
        base_seq: u32,
        segments: BTreeMap<i64, BufferedSegment>,
    }

    let mut report = ReassemblyReport::default();
    let mut directions: BTreeMap<FlowKey, Direction> = BTreeMap::new();
    let mut arrival = 0usize;

    for (frame_index, frame) in frames.iter().enumerate() {
        let segment = match parse_segment(frame, frame_index) {
            Ok(Some(segment)) => segment,
            Ok(None) => continue,
            Err(SkipReason::NonTcp) => {
                report.non_tcp_skipped += 1;
                continue;
            }
            Err(SkipReason::Ipv6) => {
                report.ipv6_skipped += 1;
                continue;
            }
            Err(SkipReason::Vlan) => {
                report.vlan_skipped += 1;
                continue;
            }
        };
        let dir = directions.entry(segment.flow).or_insert_with(|| Direction {
            base_seq: segment.seq,
            segments: BTreeMap::new(),
        });
        // Signed relative offset: segments arriving out of order
        // before the first-seen sequence number still land correctly.
        let rel = i64::from(segment.seq.wrapping_sub(dir.base_seq) as i32);
        if dir.segments.contains_key(&rel) {
            report.duplicate_segments += 1;
            continue;
        }
        dir.segments.insert(
            rel,
            BufferedSegment {
                frame_index: segment.frame_index,
                ts_micros: segment.ts_micros,
                arrival,
                payload: frame.link_bytes[segment.payload_start..segment.payload_end].to_vec(),
            },
        );
        arrival += 1;
    }

    let mut chunks = Vec::new();
    for (flow, dir) in &directions {
        let Some((&first_rel, _)) = dir.segments.iter().next() else { continue };
        let mut expected = first_rel;
        // Latest-arriving segment among everything emitted so far:
        // a buffered out-of-order chunk is only complete once the
        // segment filling the hole before it shows up.
        let mut completing: Option<(&BufferedSegment, usize)> = None;
        for (&rel, seg) in &dir.segments {
            if rel > expected {
                report.gap_warnings.push(GapWarning {
                    flow: *flow,
                    offset: (expected - first_rel) as u64,
                });
                break;
            }
            let (payload, offset) = if rel < expected {
                // Partial overlap with already-delivered bytes; keep
                // only the new tail.
                let skip = (expected - rel) as usize;
                if skip >= seg.payload.len() {
                    report.duplicate_segments += 1;
                    continue;
                }
                (&seg.payload[skip..], expected)
            } else {
                (&seg.payload[..], rel)
            };
            let newest = match completing {
                Some((_, newest_arrival)) if newest_arrival >= seg.arrival => completing.unwrap(),
                _ => (seg, seg.arrival),
            };
            completing = Some(newest);
            chunks.push(StreamChunk {
                flow: *flow,
                offset: (offset - first_rel) as u64,
                payload: payload.to_vec(),
                ts_micros: newest.0.ts_micros,
                frame_index: seg.frame_index,
            });
            expected = offset + payload.len() as i64;
        }
    }
    (chunks, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wire::{build_tcp_frame, TcpFrameSpec};
    use tempfile::tempdir;

    fn frame(ts: u32, payload: &[u8]) -> RawFrame {
        build_tcp_frame(&TcpFrameSpec {
            ts_secs: ts,
            ts_micros: 0,
            src: Ipv4Addr::new(172, 18, 5, 60),
            dst: Ipv4Addr::new(172, 16, 3, 41),
            src_port: 50000,
            dst_port: 102,
            seq: 1000,
            ack: 1,
            payload: payload.to_vec(),
        })
    }

    #[test]
    fn write_then_read_roundtrip_preserves_frames() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.pcap");
        let frames = vec![frame(10, b"hello"), frame(11, b"world...")];
        write_pcap(&path, &frames).unwrap();
        let back = read_pcap(&path).unwrap();
        assert_eq!(back, frames);
    }

    #[test]
    fn reader_sorts_by_timestamp_stably() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.pcap");
        let a = frame(20, b"a");
        let b = frame(10, b"b");
        let c = frame(20, b"c");
        write_pcap(&path, &[a.clone(), b.clone(), c.clone()]).unwrap();
        let back = read_pcap(&path).unwrap();
        assert_eq!(back, vec![b, a, c], "sorted, equal timestamps keep file order");
    }

    #[test]
    fn empty_body_yields_empty_vec() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.pcap");
        write_pcap(&path, &[]).unwrap();
        assert!(read_pcap(&path).unwrap().is_empty());
    }

    #[test]
    fn byte_swapped_magic_is_read() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&MAGIC_BE);
        bytes.extend_from_slice(&2u16.to_be_bytes());
        bytes.extend_from_slice(&4u16.to_be_bytes());
        bytes.extend_from_slice(&[0; 8]);
        bytes.extend_from_slice(&0xFFFFu32.to_be_bytes());
        bytes.extend_from_slice(&1u32.to_be_bytes());
        let f = frame(7, b"payload");
        bytes.extend_from_slice(&7u32.to_be_bytes());
        bytes.extend_from_slice(&0u32.to_be_bytes());
        bytes.extend_from_slice(&(f.link_bytes.len() as u32).to_be_bytes());
        bytes.extend_from_slice(&(f.link_bytes.len() as u32).to_be_bytes());
        bytes.extend_from_slice(&f.link_bytes);
        let frames = read_pcap_bytes(&bytes).unwrap();
        assert_eq!(frames, vec![f]);
    }

    #[test]
    fn pcapng_is_rejected_with_conversion_hint() {
        let mut bytes = MAGIC_PCAPNG.to_vec();
        bytes.extend_from_slice(&[0u8; 60]);
        match read_pcap_bytes(&bytes).unwrap_err() {
            PcapError::UnsupportedFormat(msg) => {
                assert!(msg.contains("pcapng"), "message should name the format: {msg}");
                assert!(msg.contains("convert"), "message should point to a fix: {msg}");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn truncated_record_reports_frames_already_read() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.pcap");
        let frames = vec![frame(1, b"one"), frame(2, b"two")];
        write_pcap(&path, &frames).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 2); // cut the last record's body
        match read_pcap_bytes(&bytes).unwrap_err() {
            PcapError::TruncatedFile { frames_read } => assert_eq!(frames_read, 1),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn nanosecond_and_unknown_magics_are_rejected() {
        for magic in [MAGIC_NS_LE, MAGIC_NS_BE, [0u8; 4]] {
            let mut bytes = magic.to_vec();
            bytes.extend_from_slice(&[0u8; 20]);
            assert!(matches!(
                read_pcap_bytes(&bytes).unwrap_err(),
                PcapError::UnsupportedFormat(_)
            ));
        }
    }

    #[test]
    fn writer_rejects_oversize_frames() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.pcap");
        let huge = RawFrame { ts_secs: 0, ts_micros: 0, link_bytes: vec![0; MAX_WRITE_FRAME + 1] };
        assert!(matches!(
            write_pcap(&path, &[huge]).unwrap_err(),
            PcapError::OversizeFrame { index: 0, .. }
        ));
    }

    fn seg(seq: u32, ts: u32, payload: &[u8]) -> RawFrame {
        build_tcp_frame(&TcpFrameSpec {
            ts_secs: ts,
            ts_micros: 0,
            src: Ipv4Addr::new(172, 18, 5, 60),
            dst: Ipv4Addr::new(172, 16, 3, 41),
            src_port: 50000,
            dst_port: 102,
            seq,
            ack: 1,
            payload: payload.to_vec(),
        })
    }

    #[test]
    fn in_order_segments_concatenate() {
        let frames = vec![seg(1000, 1, b"abc"), seg(1003, 2, b"def")];
        let (chunks, report) = reassemble(&frames);
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].offset, 0);
        assert_eq!(chunks[0].payload, b"abc");
        assert_eq!(chunks[1].offset, 3);
        assert_eq!(chunks[1].payload, b"def");
        assert!(report.gap_warnings.is_empty());
        assert_eq!(report.duplicate_segments, 0);
    }

    #[test]
    fn out_of_order_segment_is_released_by_the_filling_segment() {
        // B arrives before A; B's chunk must carry A's timestamp,
        // because only A's arrival made B deliverable.
        let frames = vec![seg(1003, 5, b"BBB"), seg(1000, 9, b"AAA")];
        let (chunks, _) = reassemble(&frames);
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[0].payload, b"AAA");
        assert_eq!(chunks[0].ts_micros, 9_000_000);
        assert_eq!(chunks[1].payload, b"BBB");
        assert_eq!(chunks[1].ts_micros, 9_000_000, "completion, not arrival, time");
        assert_eq!(chunks[1].frame_index, 0, "bytes still credited to their carrier");
    }

    #[test]
    fn retransmission_is_dropped() {
        let frames = vec![seg(1000, 1, b"abc"), seg(1000, 2, b"abc"), seg(1003, 3, b"def")];
        let (chunks, report) = reassemble(&frames);
        assert_eq!(report.duplicate_segments, 1);
        let stream: Vec<u8> = chunks.iter().flat_map(|c| c.payload.clone()).collect();
        assert_eq!(stream, b"abcdef");
    }

    #[test]
    fn gap_warns_and_discards_rest() {
        let frames = vec![seg(1000, 1, b"abc"), seg(1010, 2, b"late")];
        let (chunks, report) = reassemble(&frames);
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].payload, b"abc");
        assert_eq!(report.gap_warnings.len(), 1);
        assert_eq!(report.gap_warnings[0].offset, 3);
    }

    #[test]
    fn sequence_wrap_is_handled() {
        let frames = vec![seg(u32::MAX - 1, 1, b"ab"), seg(0, 2, b"cd")];
        let (chunks, report) = reassemble(&frames);
        assert!(report.gap_warnings.is_empty());
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[1].offset, 2);
        assert_eq!(chunks[1].payload, b"cd");
    }

    #[test]
    fn directions_are_independent() {
        let fwd = seg(1000, 1, b"request");
        let rev = build_tcp_frame(&TcpFrameSpec {
            ts_secs: 2,
            ts_micros: 0,
            src: Ipv4Addr::new(172, 16, 3, 41),
            dst: Ipv4Addr::new(172, 18, 5, 60),
            src_port: 102,
            dst_port: 50000,
            seq: 7000,
            ack: 1007,
            payload: b"response".to_vec(),
        });
        let (chunks, _) = reassemble(&[fwd, rev]);
        assert_eq!(chunks.len(), 2);
        assert_ne!(chunks[0].flow, chunks[1].flow);
        assert_eq!(chunks[0].flow, chunks[1].flow.reversed());
    }

    #[test]
    fn non_tcp_vlan_and_ipv6_are_counted() {
        let mut arp = vec![0u8; 60];
        arp[12] = 0x08;
        arp[13] = 0x06;
        let mut vlan = vec![0u8; 60];
        vlan[12] = 0x81;
        vlan[13] = 0x00;
        let mut v6 = vec![0u8; 60];
        v6[12] = 0x86;
        v6[13] = 0xDD;
        let frames = vec![
            RawFrame { ts_secs: 1, ts_micros: 0, link_bytes: arp },
            RawFrame { ts_secs: 2, ts_micros: 0, link_bytes: vlan },
            RawFrame { ts_secs: 3, ts_micros: 0, link_bytes: v6 },
        ];
        let (chunks, report) = reassemble(&frames);
        assert!(chunks.is_empty());
        assert_eq!(report.non_tcp_skipped, 1);
        assert_eq!(report.vlan_skipped, 1);
        assert_eq!(report.ipv6_skipped, 1);
    }

    #[test]
    fn ethernet_padding_is_trimmed_by_ip_length() {
        // A 1-byte payload forces Ethernet padding to 60 bytes; the
        // padding must not leak into the stream.
        let frames = vec![seg(1000, 1, b"x")];
        assert!(frames[0].link_bytes.len() >= 60);
        let (chunks, _) = reassemble(&frames);
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].payload, b"x");
    }
}
