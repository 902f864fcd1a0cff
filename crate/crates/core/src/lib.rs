//! Whitelist-based intrusion detection and filtering for IEC 61850
//! MMS substation traffic.
//!
//! The pipeline, end to end:
//!
//! 1. [`pcap`] reads classic captures and reassembles TCP payload
//!    streams per flow direction.
//! 2. [`codec`] peels the TPKT/COTP/session envelope off each stream
//!    and decodes the MMS PDUs inside.
//! 3. [`extract`] flattens decoded PDUs into one record per read or
//!    written variable — the working currency of every later stage.
//! 4. [`baseline`] learns read/write whitelists from benign records,
//!    diffs suspect traffic against them, and promotes validated
//!    differences to attack signatures.
//! 5. [`detect`] classifies records (signature, whitelisted, novel)
//!    and reconstructs attack paths for the hits.
//! 6. [`rulegen`] compiles signatures into filter rules with a
//!    round-trippable text form.
//! 7. [`engine`] applies those rules to captures, dropping the frames
//!    that carry signature-matching operations.
//! 8. [`synth`] generates deterministic synthetic scenarios (benign
//!    polling plus scripted attacks) so the whole loop can be
//!    validated closed-circuit, no lab network required.
//!
//! Detection and enforcement share one decode path, so a record the
//! detector flags is byte-for-byte the record the filter drops.

pub mod baseline;
pub mod codec;
pub mod detect;
pub mod engine;
pub mod extract;
pub mod pcap;
pub mod rulegen;
pub mod synth;
pub mod wire;

pub use baseline::{
    builtin_signatures, diff, learn, validate_and_sign, AttackSignature, Baseline, Severity,
};
pub use detect::{detect, render_report, AttackPath, Detection, ReportFormat};
pub use engine::{filter, FilterOutcome, FilterPolicy};
pub use extract::{extract, ExtractedRecord, ExtractionReport};
pub use pcap::{read_pcap, write_pcap, RawFrame};
pub use rulegen::{compile, emit_dsl, parse_dsl, NidsRule};
pub use synth::{preset, synthesize, Manifest, ScenarioConfig};
