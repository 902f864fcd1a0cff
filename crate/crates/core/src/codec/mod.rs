//! Wire codecs: BER-TLV primitives, the MMS PDU subset, and the
//! TPKT/COTP/session envelope that carries MMS over TCP port 102.

pub mod ber;
pub mod envelope;
pub mod mms;

pub use ber::{decode_tlv, BerError, Tlv, MAX_NESTING_DEPTH};
pub use envelope::{decode_envelope, scan_stream, wrap_mms, EnvelopeStats, TimedPdu};
pub use mms::{
    decode_mms, encode_mms, extract_time_accuracy, MessageKind, MmsError, MmsMessage, ObjectName,
    OperPayload, ServiceTag, UtcTimestamp, WriteItem,
};
