//! Construction of Ethernet/IPv4/TCP frames with valid checksums.
//!
//! Used by the traffic synthesizer and by tests that need captured-
//! looking frames without a capture. Only plain data segments are
//! built — the reassembler follows byte streams, not TCP state, so
//! handshake frames would be dead weight.

use std::net::Ipv4Addr;

use crate::pcap::RawFrame;

/// Everything needed to build one TCP data segment.
#[derive(Debug, Clone)]
pub struct TcpFrameSpec {
    pub ts_secs: u32,
    pub ts_micros: u32,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub seq: u32,
    pub ack: u32,
    pub payload: Vec<u8>,
}

/// Locally-administered MAC derived from an IPv4 address, so frames
/// are self-consistent without an ARP table.
pub fn mac_for(ip: Ipv4Addr) -> [u8; 6] {
    let o = ip.octets();
    [0x02, 0x00, o[0], o[1], o[2], o[3]]
}

/// RFC 1071 ones'-complement checksum.
fn checksum(chunks: &[&[u8]]) -> u16 {
    let mut sum = 0u32;
    let mut carry_byte: Option<u8> = None;
    for chunk in chunks {
        for &b in *chunk {
            match carry_byte.take() {
                None => carry_byte = Some(b),
                Some(high) => sum += u32::from(u16::from_be_bytes([high, b])),
            }
        }
    }
    if let Some(high) = carry_byte {
        sum += u32::from(u16::from_be_bytes([high, 0]));
    }
    while sum >> 16 != 0 {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}

/// Builds one PSH+ACK data segment with correct IP and TCP checksums,
/// padded to the 60-byte Ethernet minimum.
pub fn build_tcp_frame(spec: &TcpFrameSpec) -> RawFrame {
    let payload = &spec.payload;
    let tcp_len = 20 + payload.len();
    let total_len = 20 + tcp_len;

    let mut ip = [0u8; 20];
    ip[0] = 0x45;
    ip[2..4].copy_from_slice(&(total_len as u16).to_be_bytes());
    ip[6] = 0x40; // don't fragment
    ip[8] = 64; // ttl
    ip[9] = 6; // tcp
    ip[12..16].copy_from_slice(&spec.src.octets());
    ip[16..20].copy_from_slice(&spec.dst.octets());
    let ip_csum = checksum(&[&ip]);
    ip[10..12].copy_from_slice(&ip_csum.to_be_bytes());

    let mut tcp = [0u8; 20];
    tcp[0..2].copy_from_slice(&spec.src_port.to_be_bytes());
    tcp[2..4].copy_from_slice(&spec.dst_port.to_be_bytes());
    tcp[4..8].copy_from_slice(&spec.seq.to_be_bytes());
    tcp[8..12].copy_from_slice(&spec.ack.to_be_bytes());
    tcp[12] = 0x50; // data offset 5 words
    tcp[13] = 0x18; // PSH|ACK
    tcp[14..16].copy_from_slice(&8192u16.to_be_bytes());
    let mut pseudo = [0u8; 12];
    pseudo[0..4].copy_from_slice(&spec.src.octets());
    pseudo[4..8].copy_from_slice(&spec.dst.octets());
    pseudo[9] = 6;
    pseudo[10..12].copy_from_slice(&(tcp_len as u16).to_be_bytes());
    let tcp_csum = checksum(&[&pseudo, &tcp, payload]);
    tcp[16..18].copy_from_slice(&tcp_csum.to_be_bytes());

    let mut link_bytes = Vec::with_capacity(14 + total_len);
    link_bytes.extend_from_slice(&mac_for(spec.dst));
    link_bytes.extend_from_slice(&mac_for(spec.src));
    link_bytes.extend_from_slice(&0x0800u16.to_be_bytes());
    link_bytes.extend_from_slice(&ip);
    link_bytes.extend_from_slice(&tcp);
    link_bytes.extend_from_slice(payload);
    while link_bytes.len() < 60 {
        link_bytes.push(0);
    }
    RawFrame { ts_secs: spec.ts_secs, ts_micros: spec.ts_micros, link_bytes }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_matches_known_vector() {
        // Classic RFC 1071 example: 0x0001 0xf203 0xf4f5 0xf6f7.
        let data = [0x00, 0x01, 0xF2, 0x03, 0xF4, 0xF5, 0xF6, 0xF7];
        assert_eq!(checksum(&[&data]), !0xDDF2u16);
    }

    #[test]
    fn built_frame_parses_back() {
        let spec = TcpFrameSpec {
            ts_secs: 100,
            ts_micros: 250,
            src: Ipv4Addr::new(172, 18, 5, 60),
            dst: Ipv4Addr::new(172, 16, 3, 41),
            src_port: 55000,
            dst_port: 102,
            seq: 0xDEADBEEF,
            ack: 0x01020304,
            payload: b"framed payload".to_vec(),
        };
        let frame = build_tcp_frame(&spec);
        assert!(frame.link_bytes.len() >= 60);
        let (chunks, report) = crate::pcap::reassemble(&[frame]);
        assert_eq!(report.non_tcp_skipped, 0);
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].payload, b"framed payload");
        assert_eq!(chunks[0].flow.dst_port, 102);
        assert_eq!(chunks[0].ts_micros, 100_000_250);
    }
}
