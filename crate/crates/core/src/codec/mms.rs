//! Decoder and encoder for the MMS PDU subset spoken between SCADA
//! masters and substation controllers: confirmed read/write requests,
//! the directory services used to enumerate named variable lists, and
//! enough of the response side to pair answers with requests.
//!
//! The decoder is total: any byte sequence yields either an
//! [`MmsMessage`] or an [`MmsError`], never a panic. Unknown services
//! and vendor oddities degrade gracefully — a write whose value bytes
//! do not follow the control-operate layout still decodes, it simply
//! carries no [`OperPayload`].

use serde::{Deserialize, Serialize};

use super::ber::{self, BerError, Tlv, TlvWalker, MAX_NESTING_DEPTH};

// Top-level PDU choice tags.
pub(crate) const TAG_CONFIRMED_REQUEST: u8 = 0xA0;
pub(crate) const TAG_CONFIRMED_RESPONSE: u8 = 0xA1;
pub(crate) const TAG_INITIATE_REQUEST: u8 = 0xA8;
pub(crate) const TAG_INITIATE_RESPONSE: u8 = 0xA9;

// Universal tags used inside PDUs.
const TAG_INTEGER: u8 = 0x02;
const TAG_VISIBLE_STRING: u8 = 0x1A;
const TAG_SEQUENCE: u8 = 0x30;

// Context-specific tags inside service payloads.
const TAG_CTX_0: u8 = 0xA0;
const TAG_CTX_1: u8 = 0xA1;
const TAG_CTX_PRIM_0: u8 = 0x80;
const TAG_CTX_PRIM_2: u8 = 0x82;

// Data choice tags (context class, as seen in listOfData).
const TAG_DATA_STRUCTURE: u8 = 0xA2;
const TAG_DATA_BOOLEAN: u8 = 0x83;
const TAG_DATA_BITSTRING: u8 = 0x84;
const TAG_DATA_INTEGER: u8 = 0x85;
const TAG_DATA_UNSIGNED: u8 = 0x86;
const TAG_DATA_OCTETSTRING: u8 = 0x89;
const TAG_DATA_UTCTIME: u8 = 0x91;

/// Decode/encode failures for MMS PDUs.
#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum MmsError {
    /// Structurally invalid BER or a PDU violating the MMS grammar.
    /// `path` names the grammar element being parsed when the problem
    /// was found, e.g. `confirmed-request/read/variable-name`.
    #[error("malformed PDU at byte {position} in {path}: {reason}")]
    Malformed { position: usize, path: String, reason: &'static str },
    /// Nesting beyond the supported depth.
    #[error("PDU nesting exceeds {MAX_NESTING_DEPTH} levels at byte {position}")]
    TooDeep { position: usize },
    /// The message cannot be expressed in the supported encode subset.
    #[error("cannot encode message: {0}")]
    Unencodable(&'static str),
}

impl MmsError {
    fn from_ber(err: BerError, path: &str) -> Self {
        match err {
            BerError::MalformedTlv { position, reason } => {
                MmsError::Malformed { position, path: path.to_string(), reason }
            }
            BerError::TooDeep { position } => MmsError::TooDeep { position },
            BerError::Oversize { .. } => MmsError::Unencodable("value too long for length form"),
        }
    }
}

fn malformed(position: usize, path: &str, reason: &'static str) -> MmsError {
    MmsError::Malformed { position, path: path.to_string(), reason }
}

/// Confirmed service selector.
///
/// The five services observed in substation polling and control
/// traffic get named variants; everything else is preserved by tag
/// number so reports can still count it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ServiceTag {
    GetNameList,
    Read,
    Write,
    GetVariableAccessAttributes,
    GetNamedVariableListAttributes,
    Other(u8),
}

impl ServiceTag {
    /// Maps a confirmed-service choice tag number to a selector.
    pub fn from_tag(tag: u8) -> Self {
        match tag {
            1 => ServiceTag::GetNameList,
            4 => ServiceTag::Read,
            5 => ServiceTag::Write,
            6 => ServiceTag::GetVariableAccessAttributes,
            12 => ServiceTag::GetNamedVariableListAttributes,
            other => ServiceTag::Other(other),
        }
    }

    /// The wire tag number for this selector.
    pub fn tag(self) -> u8 {
        match self {
            ServiceTag::GetNameList => 1,
            ServiceTag::Read => 4,
            ServiceTag::Write => 5,
            ServiceTag::GetVariableAccessAttributes => 6,
            ServiceTag::GetNamedVariableListAttributes => 12,
            ServiceTag::Other(tag) => tag,
        }
    }

    /// Human-readable service name for reports.
    pub fn name(self) -> &'static str {
        match self {
            ServiceTag::GetNameList => "getNameList",
            ServiceTag::Read => "read",
            ServiceTag::Write => "write",
            ServiceTag::GetVariableAccessAttributes => "getVariableAccessAttributes",
            ServiceTag::GetNamedVariableListAttributes => "getNamedVariableListAttributes",
            ServiceTag::Other(_) => "other",
        }
    }
}

impl Serialize for ServiceTag {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.tag())
    }
}

impl<'de> Deserialize<'de> for ServiceTag {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(ServiceTag::from_tag(u8::deserialize(deserializer)?))
    }
}

/// Domain-scoped variable name: `domainId/itemId`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ObjectName {
    pub domain_id: String,
    pub item_id: String,
}

impl ObjectName {
    /// Builds a name after checking both identifiers for the visible
    /// ASCII character set MMS identifiers live in.
    pub fn new(domain_id: &str, item_id: &str) -> Result<Self, MmsError> {
        if !valid_identifier(domain_id) {
            return Err(MmsError::Unencodable("domain id is not a printable identifier"));
        }
        if !valid_identifier(item_id) {
            return Err(MmsError::Unencodable("item id is not a printable identifier"));
        }
        Ok(ObjectName { domain_id: domain_id.to_string(), item_id: item_id.to_string() })
    }
}

impl std::fmt::Display for ObjectName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.domain_id, self.item_id)
    }
}

/// True for non-empty printable-ASCII identifiers without separators
/// that would break report formats.
pub fn valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.len() <= 255
        && s.bytes().all(|b| (0x21..=0x7E).contains(&b) && b != b'/' && b != b'"' && b != b',')
}

/// Binary UTC timestamp: 4 bytes of seconds, 3 bytes of fraction,
/// 1 byte of quality flags. The quality byte doubles as the
/// time-accuracy fingerprint that distinguishes client stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtcTimestamp {
    pub seconds: u32,
    /// 24-bit binary fraction of a second (kept below `1 << 24`).
    pub fraction: u32,
    pub quality: u8,
}

impl UtcTimestamp {
    /// Builds a timestamp, masking the fraction to its 24-bit range.
    pub fn new(seconds: u32, fraction: u32, quality: u8) -> Self {
        UtcTimestamp { seconds, fraction: fraction & 0x00FF_FFFF, quality }
    }

    /// Timestamp at whole-microsecond resolution.
    pub fn from_micros(total_micros: u64, quality: u8) -> Self {
        let seconds = (total_micros / 1_000_000) as u32;
        let micros = total_micros % 1_000_000;
        let fraction = ((micros << 24) / 1_000_000) as u32;
        UtcTimestamp::new(seconds, fraction, quality)
    }

    /// Wire form: seconds, fraction, quality, big-endian.
    pub fn to_bytes(self) -> [u8; 8] {
        let mut out = [0u8; 8];
        out[..4].copy_from_slice(&self.seconds.to_be_bytes());
        let frac = self.fraction & 0x00FF_FFFF;
        out[4] = (frac >> 16) as u8;
        out[5] = (frac >> 8) as u8;
        out[6] = frac as u8;
        out[7] = self.quality;
        out
    }

    /// Parses the 8-byte wire form.
    pub fn from_bytes(b: &[u8; 8]) -> Self {
        UtcTimestamp {
            seconds: u32::from_be_bytes([b[0], b[1], b[2], b[3]]),
            fraction: (u32::from(b[4]) << 16) | (u32::from(b[5]) << 8) | u32::from(b[6]),
            quality: b[7],
        }
    }
}

/// Decoded control-operate structure written to `…$CO$…$Oper`
/// variables: the value, two timestamps, originator details and the
/// interlock/synchro check bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperPayload {
    pub ctl_val: bool,
    pub oper_tm: UtcTimestamp,
    /// Originator category (expected range 0..=8; out-of-range values
    /// are preserved and reported by [`OperPayload::or_cat_in_range`]).
    pub or_cat: u8,
    /// Originator identification octets; `None` when the origin
    /// structure omits the field entirely, `Some(vec![])` when it is
    /// present but empty. The distinction is a client fingerprint.
    pub or_ident: Option<Vec<u8>>,
    pub ctl_num: u8,
    pub t: UtcTimestamp,
    pub test: bool,
    /// Low two bits of the check bit-string.
    pub check: u8,
}

impl OperPayload {
    /// True when the originator category sits in its defined range.
    pub fn or_cat_in_range(&self) -> bool {
        self.or_cat <= 8
    }

    /// Quality bytes of the two embedded timestamps.
    pub fn time_accuracy(&self) -> (u8, u8) {
        (self.oper_tm.quality, self.t.quality)
    }
}

/// Pulls the pair of timestamp quality bytes out of a control-operate
/// payload; this pair is the strongest per-client fingerprint the
/// protocol carries.
pub fn extract_time_accuracy(oper: &OperPayload) -> (u8, u8) {
    oper.time_accuracy()
}

/// One variable written by a write request.
///
/// `raw_value_bytes` always holds the complete encoded data element;
/// `oper` is the structured view when (and only when) those bytes
/// follow the control-operate layout. The two stay consistent because
/// construction goes through [`WriteItem::with_oper`] or
/// [`WriteItem::with_raw_value`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteItem {
    pub name: ObjectName,
    pub oper: Option<OperPayload>,
    pub raw_value_bytes: Vec<u8>,
}

impl WriteItem {
    /// Item carrying a canonical encoding of `oper`.
    pub fn with_oper(name: ObjectName, oper: OperPayload) -> Self {
        let raw_value_bytes = encode_oper(&oper);
        WriteItem { name, oper: Some(oper), raw_value_bytes }
    }

    /// Item carrying arbitrary data bytes; the structured view is
    /// populated when the bytes happen to parse as control-operate.
    pub fn with_raw_value(name: ObjectName, raw_value_bytes: Vec<u8>) -> Self {
        let oper = parse_oper(&raw_value_bytes);
        WriteItem { name, oper, raw_value_bytes }
    }
}

/// PDU family of a decoded message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    ConfirmedRequest,
    ConfirmedResponse,
    InitiateRequest,
    InitiateResponse,
    Other,
}

/// One decoded MMS PDU.
///
/// `reads` collects every domain-scoped name the request addresses —
/// for read requests, attribute queries and variable-list lookups
/// alike. `writes` pairs names with values for write requests.
/// Responses keep their service payload verbatim in
/// `response_payload` so directory answers can be parsed on demand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MmsMessage {
    pub kind: MessageKind,
    pub invoke_id: Option<u32>,
    pub service: Option<ServiceTag>,
    pub reads: Vec<ObjectName>,
    pub writes: Vec<WriteItem>,
    pub response_payload: Vec<u8>,
}

impl MmsMessage {
    fn empty(kind: MessageKind) -> Self {
        MmsMessage {
            kind,
            invoke_id: None,
            service: None,
            reads: Vec::new(),
            writes: Vec::new(),
            response_payload: Vec::new(),
        }
    }

    /// Confirmed read request for the given names.
    pub fn read_request(invoke_id: u32, names: Vec<ObjectName>) -> Self {
        MmsMessage {
            kind: MessageKind::ConfirmedRequest,
            invoke_id: Some(invoke_id),
            service: Some(ServiceTag::Read),
            reads: names,
            writes: Vec::new(),
            response_payload: Vec::new(),
        }
    }

    /// Confirmed write request for the given items.
    pub fn write_request(invoke_id: u32, items: Vec<WriteItem>) -> Self {
        MmsMessage {
            kind: MessageKind::ConfirmedRequest,
            invoke_id: Some(invoke_id),
            service: Some(ServiceTag::Write),
            reads: Vec::new(),
            writes: items,
            response_payload: Vec::new(),
        }
    }

    /// Variable-list attribute (directory) request for one list name.
    pub fn variable_list_request(invoke_id: u32, name: ObjectName) -> Self {
        MmsMessage {
            kind: MessageKind::ConfirmedRequest,
            invoke_id: Some(invoke_id),
            service: Some(ServiceTag::GetNamedVariableListAttributes),
            reads: vec![name],
            writes: Vec::new(),
            response_payload: Vec::new(),
        }
    }

    /// Confirmed response carrying a pre-encoded service payload.
    pub fn response(invoke_id: u32, service: ServiceTag, payload: Vec<u8>) -> Self {
        MmsMessage {
            kind: MessageKind::ConfirmedResponse,
            invoke_id: Some(invoke_id),
            service: Some(service),
            reads: Vec::new(),
            writes: Vec::new(),
            response_payload: payload,
        }
    }
}

/// Decodes one complete top-level MMS PDU.
///
/// `bytes` must span exactly one PDU (the envelope layer guarantees
/// this); trailing bytes are malformed. Initiate PDUs are recognized
/// by kind only. Any input either decodes or returns a structured
/// error — the function never panics.
pub fn decode_mms(bytes: &[u8]) -> Result<MmsMessage, MmsError> {
    let top = ber::decode_tlv(bytes, 0).map_err(|e| MmsError::from_ber(e, "pdu"))?;
    if top.end() != bytes.len() {
        return Err(malformed(top.end(), "pdu", "trailing bytes after PDU"));
    }
    check_depth(bytes, &top, 1)?;
    match top.tag {
        TAG_CONFIRMED_REQUEST => decode_confirmed_request(bytes, &top),
        TAG_CONFIRMED_RESPONSE => decode_confirmed_response(bytes, &top),
        TAG_INITIATE_REQUEST => Ok(MmsMessage::empty(MessageKind::InitiateRequest)),
        TAG_INITIATE_RESPONSE => Ok(MmsMessage::empty(MessageKind::InitiateResponse)),
        _ => Ok(MmsMessage::empty(MessageKind::Other)),
    }
}

/// Walks constructed elements and rejects nesting beyond the cap.
/// Only constructed tags (bit 5 set) are descended into; primitive
/// content is opaque.
fn check_depth(bytes: &[u8], tlv: &Tlv, depth: usize) -> Result<(), MmsError> {
    if depth > MAX_NESTING_DEPTH {
        return Err(MmsError::TooDeep { position: tlv.start });
    }
    if tlv.tag & 0x20 == 0 {
        return Ok(());
    }
    let mut walker = TlvWalker::over(bytes, tlv);
    while let Some(child) = walker.next_tlv() {
        match child {
            // Children that do not parse are fine here: service
            // decoders treat such regions as opaque or report their
            // own, better-located errors.
            Err(_) => return Ok(()),
            Ok(child) => check_depth(bytes, &child, depth + 1)?,
        }
    }
    Ok(())
}

fn decode_invoke_id(bytes: &[u8], walker: &mut TlvWalker<'_>, path: &str) -> Result<u32, MmsError> {
    let pos = walker.position();
    let tlv = walker
        .next_tlv()
        .ok_or_else(|| malformed(pos, path, "missing invoke id"))?
        .map_err(|e| MmsError::from_ber(e, path))?;
    if tlv.tag != TAG_INTEGER {
        return Err(malformed(tlv.start, path, "invoke id is not an integer"));
    }
    let value = ber::decode_unsigned(tlv.content(bytes))
        .filter(|v| *v <= u64::from(u32::MAX))
        .ok_or_else(|| malformed(tlv.start, path, "invoke id out of range"))?;
    Ok(value as u32)
}

fn decode_confirmed_request(bytes: &[u8], top: &Tlv) -> Result<MmsMessage, MmsError> {
    let path = "confirmed-request";
    let mut walker = TlvWalker::over(bytes, top);
    let invoke_id = decode_invoke_id(bytes, &mut walker, path)?;
    let pos = walker.position();
    let service_tlv = walker
        .next_tlv()
        .ok_or_else(|| malformed(pos, path, "missing service element"))?
        .map_err(|e| MmsError::from_ber(e, path))?;
    let service = ServiceTag::from_tag(service_tlv.tag & 0x1F);

    let mut msg = MmsMessage::empty(MessageKind::ConfirmedRequest);
    msg.invoke_id = Some(invoke_id);
    msg.service = Some(service);

    match service {
        ServiceTag::Read => decode_read_request(bytes, &service_tlv, &mut msg)?,
        ServiceTag::Write => decode_write_request(bytes, &service_tlv, &mut msg)?,
        ServiceTag::GetVariableAccessAttributes => {
            // CHOICE { name [0] ObjectName, address [1] Address }.
            let inner = ber::decode_tlv(bytes, service_tlv.content_start)
                .map_err(|e| MmsError::from_ber(e, "confirmed-request/get-attributes"))?;
            if inner.tag == TAG_CTX_0 {
                if let Some(name) =
                    decode_object_name(bytes, &inner, "confirmed-request/get-attributes/name")?
                {
                    msg.reads.push(name);
                }
            }
        }
        ServiceTag::GetNamedVariableListAttributes => {
            // `[12]` tags the ObjectName CHOICE explicitly, so the
            // choice sits one level inside the service element.
            if let Some(name) = decode_object_name(
                bytes,
                &service_tlv,
                "confirmed-request/get-list-attributes/name",
            )? {
                msg.reads.push(name);
            }
        }
        _ => {}
    }
    Ok(msg)
}

fn decode_confirmed_response(bytes: &[u8], top: &Tlv) -> Result<MmsMessage, MmsError> {
    let path = "confirmed-response";
    let mut walker = TlvWalker::over(bytes, top);
    let invoke_id = decode_invoke_id(bytes, &mut walker, path)?;
    let pos = walker.position();
    let service_tlv = walker
        .next_tlv()
        .ok_or_else(|| malformed(pos, path, "missing service element"))?
        .map_err(|e| MmsError::from_ber(e, path))?;

    let mut msg = MmsMessage::empty(MessageKind::ConfirmedResponse);
    msg.invoke_id = Some(invoke_id);
    msg.service = Some(ServiceTag::from_tag(service_tlv.tag & 0x1F));
    msg.response_payload = service_tlv.raw(bytes).to_vec();
    Ok(msg)
}

/// Parses the ObjectName CHOICE. Domain-scoped names are returned;
/// vmd-specific and aa-specific names have no domain and are skipped
/// with `Ok(None)`.
fn decode_object_name_choice(
    bytes: &[u8],
    choice: &Tlv,
    path: &str,
) -> Result<Option<ObjectName>, MmsError> {
    match choice.tag {
        TAG_CTX_1 => {
            // domain-specific: SEQUENCE { domainId, itemId }.
            let mut walker = TlvWalker::over(bytes, choice);
            let domain = expect_identifier(bytes, &mut walker, path, "missing domain id")?;
            let item = expect_identifier(bytes, &mut walker, path, "missing item id")?;
            if !walker.done() {
                return Err(malformed(walker.position(), path, "extra bytes after item id"));
            }
            Ok(Some(ObjectName { domain_id: domain, item_id: item }))
        }
        TAG_CTX_PRIM_0 | TAG_CTX_PRIM_2 => Ok(None),
        _ => Err(malformed(choice.start, path, "unknown object-name choice tag")),
    }
}

/// Parses a `[0] name` wrapper holding an ObjectName choice.
fn decode_object_name(
    bytes: &[u8],
    wrapper: &Tlv,
    path: &str,
) -> Result<Option<ObjectName>, MmsError> {
    let choice =
        ber::decode_tlv(bytes, wrapper.content_start).map_err(|e| MmsError::from_ber(e, path))?;
    if choice.end() != wrapper.content_end {
        return Err(malformed(choice.end(), path, "trailing bytes after object name"));
    }
    decode_object_name_choice(bytes, &choice, path)
}

fn expect_identifier(
    bytes: &[u8],
    walker: &mut TlvWalker<'_>,
    path: &str,
    missing: &'static str,
) -> Result<String, MmsError> {
    let pos = walker.position();
    let tlv = walker
        .next_tlv()
        .ok_or_else(|| malformed(pos, path, missing))?
        .map_err(|e| MmsError::from_ber(e, path))?;
    if tlv.tag != TAG_VISIBLE_STRING {
        return Err(malformed(tlv.start, path, "identifier is not a visible string"));
    }
    let text = std::str::from_utf8(tlv.content(bytes))
        .map_err(|_| malformed(tlv.start, path, "identifier is not valid ASCII"))?;
    if !valid_identifier(text) {
        return Err(malformed(tlv.start, path, "identifier contains invalid characters"));
    }
    Ok(text.to_string())
}

/// Collects domain-scoped names from a variable access specification:
/// either `[0] listOfVariable` or `[1] variableListName`.
fn decode_access_spec(
    bytes: &[u8],
    spec: &Tlv,
    path: &str,
    out: &mut Vec<ObjectName>,
) -> Result<(), MmsError> {
    match spec.tag {
        TAG_CTX_0 => {
            // listOfVariable: SEQUENCE OF SEQUENCE { variableSpecification }.
            let mut items = TlvWalker::over(bytes, spec);
            while let Some(item) = items.next_tlv() {
                let item = item.map_err(|e| MmsError::from_ber(e, path))?;
                if item.tag != TAG_SEQUENCE {
                    return Err(malformed(item.start, path, "variable entry is not a sequence"));
                }
                let var_spec = ber::decode_tlv(bytes, item.content_start)
                    .map_err(|e| MmsError::from_ber(e, path))?;
                // variableSpecification CHOICE: only `name [0]` is used
                // by the traffic of interest; others are skipped.
                if var_spec.tag == TAG_CTX_0 {
                    if let Some(name) = decode_object_name(bytes, &var_spec, path)? {
                        out.push(name);
                    }
                }
            }
            Ok(())
        }
        TAG_CTX_1 => {
            // variableListName: ObjectName choice.
            let choice = ber::decode_tlv(bytes, spec.content_start)
                .map_err(|e| MmsError::from_ber(e, path))?;
            if let Some(name) = decode_object_name_choice(bytes, &choice, path)? {
                out.push(name);
            }
            Ok(())
        }
        _ => Err(malformed(spec.start, path, "unknown access specification tag")),
    }
}

fn decode_read_request(bytes: &[u8], service: &Tlv, msg: &mut MmsMessage) -> Result<(), MmsError> {
    let path = "confirmed-request/read";
    let mut walker = TlvWalker::over(bytes, service);
    while let Some(child) = walker.next_tlv() {
        let child = child.map_err(|e| MmsError::from_ber(e, path))?;
        match child.tag {
            // [0] specificationWithResult BOOLEAN — irrelevant here.
            TAG_CTX_PRIM_0 => {}
            // [1] variableAccessSpecification, an explicit wrapper
            // around the access-spec choice.
            TAG_CTX_1 => {
                let spec = ber::decode_tlv(bytes, child.content_start)
                    .map_err(|e| MmsError::from_ber(e, path))?;
                decode_access_spec(bytes, &spec, path, &mut msg.reads)?;
            }
            _ => return Err(malformed(child.start, path, "unexpected element in read request")),
        }
    }
    if msg.reads.is_empty() {
        return Err(malformed(service.start, path, "read request names no domain variables"));
    }
    Ok(())
}

fn decode_write_request(bytes: &[u8], service: &Tlv, msg: &mut MmsMessage) -> Result<(), MmsError> {
    let path = "confirmed-request/write";
    let mut walker = TlvWalker::over(bytes, service);

    // First element: access specification (the choice appears
    // directly, distinguished from listOfData by position).
    let pos = walker.position();
    let spec = walker
        .next_tlv()
        .ok_or_else(|| malformed(pos, path, "missing access specification"))?
        .map_err(|e| MmsError::from_ber(e, path))?;
    let mut names = Vec::new();
    decode_access_spec(bytes, &spec, path, &mut names)?;

    // Second element: [0] listOfData.
    let pos = walker.position();
    let list = walker
        .next_tlv()
        .ok_or_else(|| malformed(pos, path, "missing list of data"))?
        .map_err(|e| MmsError::from_ber(e, path))?;
    if list.tag != TAG_CTX_0 {
        return Err(malformed(list.start, path, "second element is not a list of data"));
    }
    if !walker.done() {
        return Err(malformed(walker.position(), path, "extra bytes after list of data"));
    }

    let mut data_items = Vec::new();
    let mut data = TlvWalker::over(bytes, &list);
    while let Some(item) = data.next_tlv() {
        let item = item.map_err(|e| MmsError::from_ber(e, path))?;
        data_items.push(item.raw(bytes).to_vec());
    }

    if names.is_empty() || data_items.is_empty() {
        return Err(malformed(service.start, path, "write request without names or data"));
    }

    // Pair names and values index-wise. A write through a variable
    // list name carries one name for many values; repeat it.
    for (idx, raw) in data_items.into_iter().enumerate() {
        let name = if idx < names.len() {
            names[idx].clone()
        } else if names.len() == 1 {
            names[0].clone()
        } else {
            return Err(malformed(list.start, path, "more data items than variable names"));
        };
        msg.writes.push(WriteItem::with_raw_value(name, raw));
    }
    Ok(())
}

/// Attempts to read `raw` as one encoded control-operate structure.
/// Returns `None` on any divergence from the layout — such writes are
/// kept as raw data, not errors.
pub fn parse_oper(raw: &[u8]) -> Option<OperPayload> {
    let top = ber::decode_tlv(raw, 0).ok()?;
    if top.tag != TAG_DATA_STRUCTURE || top.end() != raw.len() {
        return None;
    }
    let mut fields = Vec::with_capacity(7);
    let mut walker = TlvWalker::over(raw, &top);
    while let Some(child) = walker.next_tlv() {
        fields.push(child.ok()?);
    }
    if fields.len() != 7 {
        return None;
    }
    let [ctl_val, oper_tm, origin, ctl_num, t, test, check] =
        [fields[0], fields[1], fields[2], fields[3], fields[4], fields[5], fields[6]];

    let ctl_val = parse_bool(raw, &ctl_val)?;
    let oper_tm = parse_utc(raw, &oper_tm)?;
    let (or_cat, or_ident) = parse_origin(raw, &origin)?;
    if ctl_num.tag != TAG_DATA_UNSIGNED || ctl_num.len() != 1 {
        return None;
    }
    let ctl_num = ctl_num.content(raw)[0];
    let t = parse_utc(raw, &t)?;
    let test = parse_bool(raw, &test)?;
    // Check: 2-bit bit-string → content is [unused-bits = 6, data].
    if check.tag != TAG_DATA_BITSTRING || check.len() != 2 {
        return None;
    }
    let check_content = check.content(raw);
    if check_content[0] != 6 {
        return None;
    }
    let check = check_content[1] >> 6;

    Some(OperPayload { ctl_val, oper_tm, or_cat, or_ident, ctl_num, t, test, check })
}

fn parse_bool(raw: &[u8], tlv: &Tlv) -> Option<bool> {
    if tlv.tag != TAG_DATA_BOOLEAN || tlv.len() != 1 {
        return None;
    }
    Some(tlv.content(raw)[0] != 0)
}

fn parse_utc(raw: &[u8], tlv: &Tlv) -> Option<UtcTimestamp> {
    if tlv.tag != TAG_DATA_UTCTIME || tlv.len() != 8 {
        return None;
    }
    let mut b = [0u8; 8];
    b.copy_from_slice(tlv.content(raw));
    Some(UtcTimestamp::from_bytes(&b))
}

fn parse_origin(raw: &[u8], origin: &Tlv) -> Option<(u8, Option<Vec<u8>>)> {
    if origin.tag != TAG_DATA_STRUCTURE {
        return None;
    }
    let mut walker = TlvWalker::over(raw, origin);
    let or_cat = walker.next_tlv()?.ok()?;
    if or_cat.tag != TAG_DATA_INTEGER || or_cat.len() != 1 {
        return None;
    }
    let or_cat = or_cat.content(raw)[0];
    let or_ident = match walker.next_tlv() {
        None => None,
        Some(tlv) => {
            let tlv = tlv.ok()?;
            if tlv.tag != TAG_DATA_OCTETSTRING {
                return None;
            }
            Some(tlv.content(raw).to_vec())
        }
    };
    if !walker.done() {
        return None;
    }
    Some((or_cat, or_ident))
}

/// Encodes a control-operate payload in its canonical wire form.
pub fn encode_oper(oper: &OperPayload) -> Vec<u8> {
    let mut origin = Vec::new();
    ber::encode_tlv(TAG_DATA_INTEGER, &[oper.or_cat], &mut origin).expect("single byte");
    if let Some(ident) = &oper.or_ident {
        ber::encode_tlv(TAG_DATA_OCTETSTRING, ident, &mut origin).expect("checked length");
    }

    let mut body = Vec::new();
    ber::encode_tlv(TAG_DATA_BOOLEAN, &[oper.ctl_val as u8], &mut body).expect("single byte");
    ber::encode_tlv(TAG_DATA_UTCTIME, &oper.oper_tm.to_bytes(), &mut body).expect("8 bytes");
    ber::encode_tlv(TAG_DATA_STRUCTURE, &origin, &mut body).expect("checked length");
    ber::encode_tlv(TAG_DATA_UNSIGNED, &[oper.ctl_num], &mut body).expect("single byte");
    ber::encode_tlv(TAG_DATA_UTCTIME, &oper.t.to_bytes(), &mut body).expect("8 bytes");
    ber::encode_tlv(TAG_DATA_BOOLEAN, &[oper.test as u8], &mut body).expect("single byte");
    ber::encode_tlv(TAG_DATA_BITSTRING, &[6, (oper.check & 0b11) << 6], &mut body)
        .expect("2 bytes");

    ber::tlv(TAG_DATA_STRUCTURE, &body).expect("oper payload fits length form")
}

fn encode_object_name(name: &ObjectName, out: &mut Vec<u8>) -> Result<(), MmsError> {
    if !valid_identifier(&name.domain_id) || !valid_identifier(&name.item_id) {
        return Err(MmsError::Unencodable("object name has invalid identifiers"));
    }
    let mut seq = Vec::new();
    ber::encode_tlv(TAG_VISIBLE_STRING, name.domain_id.as_bytes(), &mut seq)
        .map_err(|e| MmsError::from_ber(e, "encode/object-name"))?;
    ber::encode_tlv(TAG_VISIBLE_STRING, name.item_id.as_bytes(), &mut seq)
        .map_err(|e| MmsError::from_ber(e, "encode/object-name"))?;
    ber::encode_tlv(TAG_CTX_1, &seq, out).map_err(|e| MmsError::from_ber(e, "encode/object-name"))
}

/// Wraps a name in the `SEQUENCE { [0] name { choice } }` shape used
/// by listOfVariable entries.
fn encode_list_variable(name: &ObjectName, out: &mut Vec<u8>) -> Result<(), MmsError> {
    let mut choice = Vec::new();
    encode_object_name(name, &mut choice)?;
    let mut wrapper = Vec::new();
    ber::encode_tlv(TAG_CTX_0, &choice, &mut wrapper)
        .map_err(|e| MmsError::from_ber(e, "encode/list-variable"))?;
    ber::encode_tlv(TAG_SEQUENCE, &wrapper, out)
        .map_err(|e| MmsError::from_ber(e, "encode/list-variable"))
}

/// Encodes a message from the supported subset back to wire bytes.
///
/// Supported: confirmed read, write and variable-list-attribute
/// requests, and confirmed responses carrying a payload. For these,
/// `decode_mms(encode_mms(m)) == m` holds.
pub fn encode_mms(msg: &MmsMessage) -> Result<Vec<u8>, MmsError> {
    match msg.kind {
        MessageKind::ConfirmedRequest => encode_confirmed_request(msg),
        MessageKind::ConfirmedResponse => encode_confirmed_response(msg),
        _ => Err(MmsError::Unencodable("only confirmed request/response kinds are encodable")),
    }
}

fn encode_confirmed_request(msg: &MmsMessage) -> Result<Vec<u8>, MmsError> {
    let invoke_id = msg.invoke_id.ok_or(MmsError::Unencodable("request missing invoke id"))?;
    let service = msg.service.ok_or(MmsError::Unencodable("request missing service"))?;

    let service_bytes = match service {
        ServiceTag::Read => {
            if msg.reads.is_empty() {
                return Err(MmsError::Unencodable("read request without names"));
            }
            let mut list = Vec::new();
            for name in &msg.reads {
                encode_list_variable(name, &mut list)?;
            }
            let mut spec = Vec::new();
            ber::encode_tlv(TAG_CTX_0, &list, &mut spec)
                .map_err(|e| MmsError::from_ber(e, "encode/read"))?;
            let mut wrapper = Vec::new();
            ber::encode_tlv(TAG_CTX_1, &spec, &mut wrapper)
                .map_err(|e| MmsError::from_ber(e, "encode/read"))?;
            ber::tlv(0xA0 | ServiceTag::Read.tag(), &wrapper)
                .map_err(|e| MmsError::from_ber(e, "encode/read"))?
        }
        ServiceTag::Write => {
            if msg.writes.is_empty() {
                return Err(MmsError::Unencodable("write request without items"));
            }
            let mut list = Vec::new();
            for item in &msg.writes {
                encode_list_variable(&item.name, &mut list)?;
            }
            let mut body = Vec::new();
            ber::encode_tlv(TAG_CTX_0, &list, &mut body)
                .map_err(|e| MmsError::from_ber(e, "encode/write"))?;
            let mut data = Vec::new();
            for item in &msg.writes {
                if ber::decode_tlv(&item.raw_value_bytes, 0)
                    .map(|t| t.end() != item.raw_value_bytes.len())
                    .unwrap_or(true)
                {
                    return Err(MmsError::Unencodable("write value bytes are not a single TLV"));
                }
                data.extend_from_slice(&item.raw_value_bytes);
            }
            ber::encode_tlv(TAG_CTX_0, &data, &mut body)
                .map_err(|e| MmsError::from_ber(e, "encode/write"))?;
            ber::tlv(0xA0 | ServiceTag::Write.tag(), &body)
                .map_err(|e| MmsError::from_ber(e, "encode/write"))?
        }
        ServiceTag::GetNamedVariableListAttributes => {
            let name = msg
                .reads
                .first()
                .ok_or(MmsError::Unencodable("variable-list request without a name"))?;
            let mut choice = Vec::new();
            encode_object_name(name, &mut choice)?;
            ber::tlv(0xA0 | ServiceTag::GetNamedVariableListAttributes.tag(), &choice)
                .map_err(|e| MmsError::from_ber(e, "encode/get-list-attributes"))?
        }
        _ => return Err(MmsError::Unencodable("service not in the encodable subset")),
    };

    let mut body = Vec::new();
    ber::encode_tlv(TAG_INTEGER, &ber::encode_unsigned(u64::from(invoke_id)), &mut body)
        .map_err(|e| MmsError::from_ber(e, "encode/invoke-id"))?;
    body.extend_from_slice(&service_bytes);
    ber::tlv(TAG_CONFIRMED_REQUEST, &body).map_err(|e| MmsError::from_ber(e, "encode/request"))
}

fn encode_confirmed_response(msg: &MmsMessage) -> Result<Vec<u8>, MmsError> {
    let invoke_id = msg.invoke_id.ok_or(MmsError::Unencodable("response missing invoke id"))?;
    let payload = &msg.response_payload;
    let parsed = ber::decode_tlv(payload, 0)
        .map_err(|_| MmsError::Unencodable("response payload is not a single TLV"))?;
    if parsed.end() != payload.len() {
        return Err(MmsError::Unencodable("response payload is not a single TLV"));
    }
    let expected = msg.service.ok_or(MmsError::Unencodable("response missing service"))?;
    if ServiceTag::from_tag(parsed.tag & 0x1F) != expected {
        return Err(MmsError::Unencodable("response payload tag disagrees with service"));
    }
    let mut body = Vec::new();
    ber::encode_tlv(TAG_INTEGER, &ber::encode_unsigned(u64::from(invoke_id)), &mut body)
        .map_err(|e| MmsError::from_ber(e, "encode/invoke-id"))?;
    body.extend_from_slice(payload);
    ber::tlv(TAG_CONFIRMED_RESPONSE, &body).map_err(|e| MmsError::from_ber(e, "encode/response"))
}

/// Canned read-response payload: every access result reports success
/// with a boolean value. Good enough for request/response pairing.
pub fn read_response_payload(count: usize) -> Vec<u8> {
    let mut results = Vec::new();
    for _ in 0..count {
        ber::encode_tlv(TAG_DATA_BOOLEAN, &[0x01], &mut results).expect("single byte");
    }
    let mut list = Vec::new();
    ber::encode_tlv(TAG_CTX_1, &results, &mut list).expect("bounded");
    ber::tlv(0xA0 | ServiceTag::Read.tag(), &list).expect("bounded")
}

/// Canned write-response payload: `count` success markers.
pub fn write_response_payload(count: usize) -> Vec<u8> {
    let mut results = Vec::new();
    for _ in 0..count {
        ber::encode_tlv(0x81, &[], &mut results).expect("empty");
    }
    ber::tlv(0xA0 | ServiceTag::Write.tag(), &results).expect("bounded")
}

/// Directory response payload listing the members of a named variable
/// list: `[0] mmsDeletable, [1] listOfVariable`.
pub fn variable_list_response_payload(members: &[ObjectName]) -> Vec<u8> {
    let mut list = Vec::new();
    for name in members {
        encode_list_variable(name, &mut list).expect("valid member names");
    }
    let mut body = Vec::new();
    ber::encode_tlv(TAG_CTX_PRIM_0, &[0x00], &mut body).expect("single byte");
    ber::encode_tlv(TAG_CTX_1, &list, &mut body).expect("bounded");
    ber::tlv(0xA0 | ServiceTag::GetNamedVariableListAttributes.tag(), &body).expect("bounded")
}

/// Reads the member names out of a directory response payload built
/// like [`variable_list_response_payload`]. `None` when the payload
/// has a different shape.
pub fn decode_variable_list_response(payload: &[u8]) -> Option<Vec<ObjectName>> {
    let top = ber::decode_tlv(payload, 0).ok()?;
    if top.tag != 0xA0 | ServiceTag::GetNamedVariableListAttributes.tag()
        || top.end() != payload.len()
    {
        return None;
    }
    let mut members = Vec::new();
    let mut walker = TlvWalker::over(payload, &top);
    while let Some(child) = walker.next_tlv() {
        let child = child.ok()?;
        if child.tag != TAG_CTX_1 {
            continue;
        }
        let mut entries = TlvWalker::over(payload, &child);
        while let Some(entry) = entries.next_tlv() {
            let entry = entry.ok()?;
            if entry.tag != TAG_SEQUENCE {
                return None;
            }
            let wrapper = ber::decode_tlv(payload, entry.content_start).ok()?;
            if wrapper.tag != TAG_CTX_0 {
                continue;
            }
            let name = decode_object_name(payload, &wrapper, "directory-response").ok()??;
            members.push(name);
        }
    }
    Some(members)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn name(domain: &str, item: &str) -> ObjectName {
        ObjectName::new(domain, item).unwrap()
    }

    fn sample_oper(or_cat: u8, or_ident: Option<Vec<u8>>, acc: (u8, u8)) -> OperPayload {
        OperPayload {
            ctl_val: true,
            oper_tm: UtcTimestamp::new(0x5F00_0000, 0x123456, acc.0),
            or_cat,
            or_ident,
            ctl_num: 7,
            t: UtcTimestamp::new(0x5F00_0001, 0x654321, acc.1),
            test: false,
            check: 0,
        }
    }

    #[test]
    fn read_request_roundtrip_two_names() {
        let msg = MmsMessage::read_request(
            42,
            vec![
                name("WAGO61850ServerLogicalDevice", "LLN0$CircuitBreaker"),
                name("GIED1CTRL", "LLN0$DC$NamPlt$configRev"),
            ],
        );
        let bytes = encode_mms(&msg).unwrap();
        assert_eq!(bytes[0], TAG_CONFIRMED_REQUEST);
        let back = decode_mms(&bytes).unwrap();
        assert_eq!(back, msg);
        assert_eq!(back.reads.len(), 2);
    }

    #[test]
    fn write_request_roundtrip_with_oper() {
        let oper = sample_oper(2, Some(vec![0u8; 64]), (0x0F, 0x10));
        let item = WriteItem::with_oper(
            name("WAGO61850ServerLogicalDevice", "GGIO12$CO$SPCSO$Oper"),
            oper.clone(),
        );
        let msg = MmsMessage::write_request(7, vec![item]);
        let bytes = encode_mms(&msg).unwrap();
        let back = decode_mms(&bytes).unwrap();
        assert_eq!(back, msg);
        let got = back.writes[0].oper.as_ref().unwrap();
        assert_eq!(got, &oper);
        assert_eq!(extract_time_accuracy(got), (0x0F, 0x10));
    }

    #[test]
    fn oper_without_orident_keeps_absent_distinct_from_empty() {
        let absent = sample_oper(3, None, (0x0A, 0x00));
        let empty = sample_oper(3, Some(Vec::new()), (0x0A, 0x00));
        let absent_bytes = encode_oper(&absent);
        let empty_bytes = encode_oper(&empty);
        assert_ne!(absent_bytes, empty_bytes);
        assert_eq!(parse_oper(&absent_bytes).unwrap().or_ident, None);
        assert_eq!(parse_oper(&empty_bytes).unwrap().or_ident, Some(Vec::new()));
    }

    #[test]
    fn oper_out_of_range_orcat_is_preserved_and_flagged() {
        let odd = sample_oper(9, Some(vec![0u8; 4]), (0x0A, 0x0A));
        let parsed = parse_oper(&encode_oper(&odd)).unwrap();
        assert_eq!(parsed.or_cat, 9);
        assert!(!parsed.or_cat_in_range());
        assert!(sample_oper(8, None, (0, 0)).or_cat_in_range());
    }

    #[test]
    fn non_oper_write_value_decodes_raw() {
        // A bare boolean write (no structure) must decode with no
        // structured payload and survive a roundtrip.
        let raw = ber::tlv(TAG_DATA_BOOLEAN, &[0x01]).unwrap();
        let item = WriteItem::with_raw_value(
            name("WAGO61850ServerLogicalDevice", "GGIO12$CO$SPCSO$Oper$ctlVal"),
            raw.clone(),
        );
        assert!(item.oper.is_none());
        let msg = MmsMessage::write_request(9, vec![item]);
        let back = decode_mms(&encode_mms(&msg).unwrap()).unwrap();
        assert_eq!(back, msg);
        assert_eq!(back.writes[0].raw_value_bytes, raw);
        assert!(back.writes[0].oper.is_none());
    }

    #[test]
    fn oper_layout_mismatches_fall_back_to_raw() {
        let good = encode_oper(&sample_oper(2, Some(vec![0u8; 64]), (0x0F, 0x00)));
        assert!(parse_oper(&good).is_some());

        // Drop the final check field: six members instead of seven.
        let inner = ber::decode_tlv(&good, 0).unwrap();
        let mut walker = TlvWalker::over(&good, &inner);
        let mut members = Vec::new();
        while let Some(m) = walker.next_tlv() {
            members.push(m.unwrap());
        }
        let truncated_body = &good[inner.content_start..members[5].end()];
        let truncated = ber::tlv(TAG_DATA_STRUCTURE, truncated_body).unwrap();
        assert!(parse_oper(&truncated).is_none());

        // Wrong timestamp width.
        let mut body = Vec::new();
        ber::encode_tlv(TAG_DATA_BOOLEAN, &[1], &mut body).unwrap();
        ber::encode_tlv(TAG_DATA_UTCTIME, &[0; 7], &mut body).unwrap();
        let bad = ber::tlv(TAG_DATA_STRUCTURE, &body).unwrap();
        assert!(parse_oper(&bad).is_none());
    }

    #[test]
    fn utc_timestamp_bytes_roundtrip_and_quality_position() {
        let ts = UtcTimestamp::new(0x01020304, 0x00ABCDEF, 0x0A);
        let bytes = ts.to_bytes();
        assert_eq!(bytes, [0x01, 0x02, 0x03, 0x04, 0xAB, 0xCD, 0xEF, 0x0A]);
        assert_eq!(UtcTimestamp::from_bytes(&bytes), ts);
        // The quality byte is the eighth and final octet.
        assert_eq!(bytes[7], 0x0A);
    }

    #[test]
    fn variable_list_request_roundtrip() {
        let msg = MmsMessage::variable_list_request(
            3,
            name("WAGO61850ServerLogicalDevice", "LLN0$CircuitBreaker"),
        );
        let bytes = encode_mms(&msg).unwrap();
        let back = decode_mms(&bytes).unwrap();
        assert_eq!(back, msg);
        assert_eq!(back.service, Some(ServiceTag::GetNamedVariableListAttributes));
    }

    #[test]
    fn directory_response_payload_roundtrip() {
        let members = vec![
            name("WAGO61850ServerLogicalDevice", "GGIO12$ST$SPCSO$stVal"),
            name("WAGO61850ServerLogicalDevice", "GGIO13$ST$SPCSO$stVal"),
        ];
        let payload = variable_list_response_payload(&members);
        let msg = MmsMessage::response(3, ServiceTag::GetNamedVariableListAttributes, payload);
        let bytes = encode_mms(&msg).unwrap();
        let back = decode_mms(&bytes).unwrap();
        assert_eq!(back, msg);
        assert_eq!(decode_variable_list_response(&back.response_payload).unwrap(), members);
    }

    #[test]
    fn response_and_initiate_kinds_are_recognized() {
        let resp =
            MmsMessage::response(11, ServiceTag::Read, read_response_payload(3));
        let back = decode_mms(&encode_mms(&resp).unwrap()).unwrap();
        assert_eq!(back.kind, MessageKind::ConfirmedResponse);
        assert_eq!(back.service, Some(ServiceTag::Read));
        assert_eq!(back, resp);

        let initiate = ber::tlv(TAG_INITIATE_REQUEST, &[0x80, 0x01, 0x00]).unwrap();
        assert_eq!(decode_mms(&initiate).unwrap().kind, MessageKind::InitiateRequest);
        let initiate_resp = ber::tlv(TAG_INITIATE_RESPONSE, &[]).unwrap();
        assert_eq!(decode_mms(&initiate_resp).unwrap().kind, MessageKind::InitiateResponse);
    }

    #[test]
    fn unknown_service_tag_decodes_as_other() {
        // Service tag [2] is outside the modeled set.
        let mut body = Vec::new();
        ber::encode_tlv(TAG_INTEGER, &[0x05], &mut body).unwrap();
        ber::encode_tlv(0xA2, &[], &mut body).unwrap();
        let bytes = ber::tlv(TAG_CONFIRMED_REQUEST, &body).unwrap();
        let msg = decode_mms(&bytes).unwrap();
        assert_eq!(msg.service, Some(ServiceTag::Other(2)));
        assert!(msg.reads.is_empty() && msg.writes.is_empty());
    }

    #[test]
    fn malformed_inputs_report_position_and_path() {
        // Read request whose name list holds a non-sequence element.
        let mut spec_content = Vec::new();
        ber::encode_tlv(TAG_CTX_PRIM_0, &[0xFF], &mut spec_content).unwrap();
        let mut spec = Vec::new();
        ber::encode_tlv(TAG_CTX_0, &spec_content, &mut spec).unwrap();
        let mut wrapper = Vec::new();
        ber::encode_tlv(TAG_CTX_1, &spec, &mut wrapper).unwrap();
        let mut body = Vec::new();
        ber::encode_tlv(TAG_INTEGER, &[0x01], &mut body).unwrap();
        let service = ber::tlv(0xA4, &wrapper).unwrap();
        body.extend_from_slice(&service);
        let bytes = ber::tlv(TAG_CONFIRMED_REQUEST, &body).unwrap();

        match decode_mms(&bytes).unwrap_err() {
            MmsError::Malformed { path, .. } => assert_eq!(path, "confirmed-request/read"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn truncated_and_trailing_inputs_are_malformed() {
        let msg = MmsMessage::read_request(1, vec![name("D1", "LLN0$X")]);
        let mut bytes = encode_mms(&msg).unwrap();
        // Trailing garbage.
        bytes.push(0x00);
        assert!(matches!(decode_mms(&bytes).unwrap_err(), MmsError::Malformed { .. }));
        // Truncation.
        bytes.truncate(bytes.len() - 4);
        assert!(decode_mms(&bytes).is_err());
    }

    #[test]
    fn nesting_deeper_than_cap_is_rejected() {
        let mut pdu = vec![0x05u8, 0x00];
        for _ in 0..40 {
            pdu = ber::tlv(0xA4, &pdu).unwrap();
        }
        let mut body = Vec::new();
        ber::encode_tlv(TAG_INTEGER, &[0x01], &mut body).unwrap();
        body.extend_from_slice(&pdu);
        let bytes = ber::tlv(TAG_CONFIRMED_REQUEST, &body).unwrap();
        assert!(matches!(decode_mms(&bytes).unwrap_err(), MmsError::TooDeep { .. }));
    }

    #[test]
    fn vmd_specific_names_are_skipped() {
        // Build a read whose single variable uses a vmd-specific name;
        // with no domain-scoped names left the request is degenerate.
        let mut choice = Vec::new();
        ber::encode_tlv(TAG_CTX_PRIM_0, b"vmdvar", &mut choice).unwrap();
        let mut name_wrapper = Vec::new();
        ber::encode_tlv(TAG_CTX_0, &choice, &mut name_wrapper).unwrap();
        let mut seq = Vec::new();
        ber::encode_tlv(TAG_SEQUENCE, &name_wrapper, &mut seq).unwrap();
        let mut list = Vec::new();
        ber::encode_tlv(TAG_CTX_0, &seq, &mut list).unwrap();
        let mut spec = Vec::new();
        ber::encode_tlv(TAG_CTX_1, &list, &mut spec).unwrap();
        let mut body = Vec::new();
        ber::encode_tlv(TAG_INTEGER, &[0x01], &mut body).unwrap();
        let service = ber::tlv(0xA4, &spec).unwrap();
        body.extend_from_slice(&service);
        let bytes = ber::tlv(TAG_CONFIRMED_REQUEST, &body).unwrap();
        assert!(decode_mms(&bytes).is_err(), "no domain-scoped names remain");
    }

    #[test]
    fn single_name_multi_data_write_repeats_name() {
        // Encode a write via a variable list name with two data items.
        let mut choice = Vec::new();
        let list_name = name("WAGO61850ServerLogicalDevice", "LLN0$CircuitBreaker");
        let mut seq = Vec::new();
        ber::encode_tlv(TAG_VISIBLE_STRING, list_name.domain_id.as_bytes(), &mut seq).unwrap();
        ber::encode_tlv(TAG_VISIBLE_STRING, list_name.item_id.as_bytes(), &mut seq).unwrap();
        ber::encode_tlv(TAG_CTX_1, &seq, &mut choice).unwrap();
        let mut body = Vec::new();
        ber::encode_tlv(TAG_CTX_1, &choice, &mut body).unwrap(); // variableListName
        let mut data = Vec::new();
        ber::encode_tlv(TAG_DATA_BOOLEAN, &[1], &mut data).unwrap();
        ber::encode_tlv(TAG_DATA_BOOLEAN, &[0], &mut data).unwrap();
        ber::encode_tlv(TAG_CTX_0, &data, &mut body).unwrap();
        let service = ber::tlv(0xA5, &body).unwrap();
        let mut pdu_body = Vec::new();
        ber::encode_tlv(TAG_INTEGER, &[0x02], &mut pdu_body).unwrap();
        pdu_body.extend_from_slice(&service);
        let bytes = ber::tlv(TAG_CONFIRMED_REQUEST, &pdu_body).unwrap();

        let msg = decode_mms(&bytes).unwrap();
        assert_eq!(msg.writes.len(), 2);
        assert!(msg.writes.iter().all(|w| w.name == list_name));
    }

    #[test]
    fn service_tag_mapping_is_stable() {
        for (tag, service) in [
            (1u8, ServiceTag::GetNameList),
            (4, ServiceTag::Read),
            (5, ServiceTag::Write),
            (6, ServiceTag::GetVariableAccessAttributes),
            (12, ServiceTag::GetNamedVariableListAttributes),
            (9, ServiceTag::Other(9)),
        ] {
            assert_eq!(ServiceTag::from_tag(tag), service);
            assert_eq!(service.tag(), tag);
        }
    }
}
