//! BER-TLV primitives for the MMS wire subset.
//!
//! MMS as spoken by substation gear uses plain single-byte tags and
//! definite lengths; the only long forms that show up on the wire are
//! `0x81` (one length byte) and `0x82` (two length bytes). Everything
//! else is rejected rather than guessed at. Offsets into the original
//! buffer are kept on the decoded [`Tlv`] so callers can walk nested
//! structures without copying.

use thiserror::Error;

/// Hard cap on TLV nesting accepted by the higher-level decoders.
///
/// Real MMS PDUs nest six or seven levels deep; 32 leaves generous
/// headroom while keeping hostile inputs from recursing unboundedly.
pub const MAX_NESTING_DEPTH: usize = 32;

/// Largest content length the encoder will emit (two length bytes).
pub const MAX_ENCODED_CONTENT: usize = 0xFFFF;

/// Error raised by the TLV decoder and encoder.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BerError {
    /// The buffer does not hold a well-formed TLV at `position`.
    #[error("malformed TLV at byte {position}: {reason}")]
    MalformedTlv { position: usize, reason: &'static str },
    /// Constructed values nest deeper than [`MAX_NESTING_DEPTH`].
    #[error("TLV nesting exceeds {MAX_NESTING_DEPTH} levels at byte {position}")]
    TooDeep { position: usize },
    /// The encoder was handed content longer than [`MAX_ENCODED_CONTENT`].
    #[error("content of {len} bytes exceeds the two-byte length form")]
    Oversize { len: usize },
}

fn malformed(position: usize, reason: &'static str) -> BerError {
    BerError::MalformedTlv { position, reason }
}

/// One decoded tag-length-value element, expressed as offsets into the
/// buffer it was decoded from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Tlv {
    /// Raw identifier octet.
    pub tag: u8,
    /// Offset of the first content byte.
    pub content_start: usize,
    /// Offset one past the last content byte.
    pub content_end: usize,
    /// Offset where the TLV itself begins (the tag byte).
    pub start: usize,
}

impl Tlv {
    /// Content bytes of this element within `bytes`.
    pub fn content<'a>(&self, bytes: &'a [u8]) -> &'a [u8] {
        &bytes[self.content_start..self.content_end]
    }

    /// Content length in bytes.
    pub fn len(&self) -> usize {
        self.content_end - self.content_start
    }

    /// True when the element carries no content.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Offset of the byte following this TLV.
    pub fn end(&self) -> usize {
        self.content_end
    }

    /// Full encoded extent (tag + length + content) within `bytes`.
    pub fn raw<'a>(&self, bytes: &'a [u8]) -> &'a [u8] {
        &bytes[self.start..self.content_end]
    }
}

/// Decodes the TLV starting at `cursor`.
///
/// Accepts short-form lengths and the long forms `0x81`/`0x82` only;
/// indefinite lengths and wider long forms are malformed. Never reads
/// past `bytes.len()` and never panics, whatever the input.
pub fn decode_tlv(bytes: &[u8], cursor: usize) -> Result<Tlv, BerError> {
    if cursor >= bytes.len() {
        return Err(malformed(cursor, "tag byte past end of buffer"));
    }
    if bytes.len() - cursor < 2 {
        return Err(malformed(cursor, "need at least tag and length bytes"));
    }
    let tag = bytes[cursor];
    let first_len = bytes[cursor + 1];
    let (len, content_start) = match first_len {
        0x00..=0x7F => (first_len as usize, cursor + 2),
        0x81 => {
            if bytes.len() - cursor < 3 {
                return Err(malformed(cursor + 1, "one-byte long form cut short"));
            }
            (bytes[cursor + 2] as usize, cursor + 3)
        }
        0x82 => {
            if bytes.len() - cursor < 4 {
                return Err(malformed(cursor + 1, "two-byte long form cut short"));
            }
            let len = u16::from_be_bytes([bytes[cursor + 2], bytes[cursor + 3]]) as usize;
            (len, cursor + 4)
        }
        0x80 => return Err(malformed(cursor + 1, "indefinite length not supported")),
        _ => return Err(malformed(cursor + 1, "length form wider than two bytes")),
    };
    let content_end = content_start + len;
    if content_end > bytes.len() {
        return Err(malformed(cursor + 1, "declared length overruns buffer"));
    }
    Ok(Tlv { tag, content_start, content_end, start: cursor })
}

/// Iterator-style walker over the sibling TLVs inside a byte range.
#[derive(Debug, Clone)]
pub struct TlvWalker<'a> {
    bytes: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> TlvWalker<'a> {
    /// Walks the children of `parent` within `bytes`.
    pub fn over(bytes: &'a [u8], parent: &Tlv) -> Self {
        TlvWalker { bytes, pos: parent.content_start, end: parent.content_end }
    }

    /// Walks the TLVs in `bytes[start..end]`.
    pub fn range(bytes: &'a [u8], start: usize, end: usize) -> Self {
        TlvWalker { bytes, pos: start, end }
    }

    /// True once the range is exhausted.
    pub fn done(&self) -> bool {
        self.pos >= self.end
    }

    /// Current cursor position (useful for error reporting).
    pub fn position(&self) -> usize {
        self.pos
    }

    /// Decodes the next sibling, or `None` when the range is exhausted.
    /// An element running past the range end is malformed.
    pub fn next_tlv(&mut self) -> Option<Result<Tlv, BerError>> {
        if self.done() {
            return None;
        }
        match decode_tlv(self.bytes, self.pos) {
            Ok(tlv) => {
                if tlv.end() > self.end {
                    self.pos = self.end;
                    Some(Err(malformed(tlv.start, "element overruns enclosing value")))
                } else {
                    self.pos = tlv.end();
                    Some(Ok(tlv))
                }
            }
            Err(e) => {
                self.pos = self.end;
                Some(Err(e))
            }
        }
    }
}

/// Appends `len` in the shortest supported length encoding.
pub fn encode_length(len: usize, out: &mut Vec<u8>) -> Result<(), BerError> {
    match len {
        0..=0x7F => out.push(len as u8),
        0x80..=0xFF => {
            out.push(0x81);
            out.push(len as u8);
        }
        0x100..=0xFFFF => {
            out.push(0x82);
            out.extend_from_slice(&(len as u16).to_be_bytes());
        }
        _ => return Err(BerError::Oversize { len }),
    }
    Ok(())
}

/// Appends one TLV with the given tag and content.
pub fn encode_tlv(tag: u8, content: &[u8], out: &mut Vec<u8>) -> Result<(), BerError> {
    out.push(tag);
    encode_length(content.len(), out)?;
    out.extend_from_slice(content);
    Ok(())
}

/// Builds a standalone TLV. Convenience wrapper over [`encode_tlv`].
pub fn tlv(tag: u8, content: &[u8]) -> Result<Vec<u8>, BerError> {
    let mut out = Vec::with_capacity(content.len() + 4);
    encode_tlv(tag, content, &mut out)?;
    Ok(out)
}

/// Reads a big-endian unsigned integer content field of up to eight
/// significant bytes. A single leading zero pad byte is accepted.
pub fn decode_unsigned(content: &[u8]) -> Option<u64> {
    if content.is_empty() {
        return None;
    }
    let trimmed = if content.len() > 1 && content[0] == 0 { &content[1..] } else { content };
    if trimmed.len() > 8 {
        return None;
    }
    let mut value: u64 = 0;
    for &b in trimmed {
        value = (value << 8) | u64::from(b);
    }
    Some(value)
}

/// Encodes an unsigned integer as the shortest content field whose
/// leading bit does not read as a sign bit.
pub fn encode_unsigned(value: u64) -> Vec<u8> {
    let bytes = value.to_be_bytes();
    let first = bytes.iter().position(|&b| b != 0).unwrap_or(7);
    let mut out = Vec::with_capacity(9);
    if bytes[first] & 0x80 != 0 {
        out.push(0);
    }
    out.extend_from_slice(&bytes[first..]);
    out
}
