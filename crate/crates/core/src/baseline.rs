//! Whitelist learning and attack-signature extraction.
//!
//! The model is deliberately plain: legitimate SCADA behavior is an
//! exact-match whitelist over what is read and written. Reads are
//! keyed by (domain, item). Writes additionally carry the two
//! timestamp quality bytes and the originator identification of the
//! control-operate payload, because those fields fingerprint the
//! writing client stack far more reliably than addresses do. Traffic
//! diffed against the whitelist yields candidate keys; candidates that
//! address a mapped process component become conjunctive attack
//! signatures ready for rule generation.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::mms::{decode_variable_list_response, MessageKind, ServiceTag};
use crate::extract::{canonical_or_ident, DecodedPdu, ExtractedRecord};

/// Baseline file schema version this build reads and writes.
pub const BASELINE_VERSION: u64 = 1;

/// Lowest rule sid rule generation will accept; doubles as the
/// "local rules" convention marker.
pub const SID_BASE_MIN: u32 = 1_000_000;

const ZERO64_HEX_LEN: usize = 128;

/// Errors from learning and persistence.
#[derive(Debug, thiserror::Error)]
pub enum BaselineError {
    /// Learning over traffic with no MMS requests produces an empty
    /// whitelist that would flag everything; refuse instead.
    #[error("benign capture contains no MMS requests; refusing to learn an empty whitelist")]
    EmptyBenign,
    /// The file is valid JSON but not a baseline this build accepts.
    #[error("baseline schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("baseline I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("baseline JSON invalid: {0}")]
    Json(#[from] serde_json::Error),
}

/// Whitelist key for read operations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ReadKey {
    pub domain_id: String,
    pub item_id: String,
}

impl ReadKey {
    pub fn of(record: &ExtractedRecord) -> ReadKey {
        ReadKey { domain_id: record.domain_id.clone(), item_id: record.item_id.clone() }
    }
}

/// Whitelist key for write operations.
///
/// `time_acc` is `None` for writes whose value bytes do not follow
/// the control-operate layout (a raw `$ctlVal` write, for instance);
/// such writes are still legitimate traffic and must be learnable.
/// `or_ident_canonical` uses the canonical text form (`ABSENT`,
/// `EMPTY`, or lowercase hex).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WriteKey {
    pub domain_id: String,
    pub item_id: String,
    pub time_acc: Option<(u8, u8)>,
    pub or_ident_canonical: String,
}

impl WriteKey {
    pub fn of(record: &ExtractedRecord) -> WriteKey {
        WriteKey {
            domain_id: record.domain_id.clone(),
            item_id: record.item_id.clone(),
            time_acc: record.time_acc,
            or_ident_canonical: canonical_or_ident(record.or_ident.as_deref()),
        }
    }
}

/// Where a baseline came from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Capture identifiers the whitelist was learned from.
    pub sources: Vec<String>,
    /// Timestamp of the newest record that contributed, in capture
    /// time. Capture time rather than wall clock keeps re-learning
    /// byte-identical.
    pub learned_at_micros: u64,
}

/// Learned model of legitimate behavior.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Baseline {
    pub read_whitelist: BTreeSet<ReadKey>,
    pub write_whitelist: BTreeSet<WriteKey>,
    /// GGIO node → process component (dataset name), discovered from
    /// directory request/response pairs.
    pub ggio_map: BTreeMap<String, String>,
    pub provenance: Provenance,
}

impl Baseline {
    /// Component behind an item, via its leading GGIO node.
    pub fn component_of(&self, item_id: &str) -> Option<&str> {
        let node = ggio_node_of(item_id)?;
        self.ggio_map.get(node).map(String::as_str)
    }
}

/// First `$`-separated segment of an item when it names a GGIO node.
pub fn ggio_node_of(item_id: &str) -> Option<&str> {
    let node = item_id.split('$').next()?;
    let digits = node.strip_prefix("GGIO")?;
    if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
        Some(node)
    } else {
        None
    }
}

/// Learns a whitelist from benign records.
///
/// The GGIO map is built separately from decoded PDUs (see
/// [`build_ggio_map`]) because directory *responses* carry it, and
/// records only describe requests. Learning is insertion-order
/// independent and idempotent: the same record multiset yields the
/// same baseline whatever the permutation.
pub fn learn(
    records: &[ExtractedRecord],
    ggio_map: BTreeMap<String, String>,
    sources: Vec<String>,
) -> Result<Baseline, BaselineError> {
    if records.is_empty() {
        return Err(BaselineError::EmptyBenign);
    }
    let mut baseline = Baseline {
        ggio_map,
        provenance: Provenance {
            sources,
            learned_at_micros: records.iter().map(|r| r.ts_micros).max().unwrap_or(0),
        },
        ..Default::default()
    };
    for record in records {
        match record.service {
            ServiceTag::Read => {
                baseline.read_whitelist.insert(ReadKey::of(record));
            }
            ServiceTag::Write => {
                baseline.write_whitelist.insert(WriteKey::of(record));
            }
            _ => {}
        }
    }
    Ok(baseline)
}

/// Whitelist size after each chunk of records; lets an operator see
/// whether learning saturated before the capture ran out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GrowthPoint {
    pub records_seen: usize,
    pub read_keys: usize,
    pub write_keys: usize,
}

/// Growth curve of the whitelists, sampled every `bucket` records and
/// once at the end.
pub fn growth_curve(records: &[ExtractedRecord], bucket: usize) -> Vec<GrowthPoint> {
    let bucket = bucket.max(1);
    let mut reads = BTreeSet::new();
    let mut writes = BTreeSet::new();
    let mut points = Vec::new();
    for (i, record) in records.iter().enumerate() {
        match record.service {
            ServiceTag::Read => {
                reads.insert(ReadKey::of(record));
            }
            ServiceTag::Write => {
                writes.insert(WriteKey::of(record));
            }
            _ => {}
        }
        if (i + 1) % bucket == 0 || i + 1 == records.len() {
            points.push(GrowthPoint {
                records_seen: i + 1,
                read_keys: reads.len(),
                write_keys: writes.len(),
            });
        }
    }
    points
}

/// Keys present in traffic but not in the whitelist.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffResult {
    pub potential_read: BTreeSet<ReadKey>,
    pub potential_write: BTreeSet<WriteKey>,
}

impl DiffResult {
    pub fn is_empty(&self) -> bool {
        self.potential_read.is_empty() && self.potential_write.is_empty()
    }
}

/// Diffs traffic against a baseline: every read/write key not in the
/// whitelist comes back as a potential signature source. Services
/// other than read and write are ignored here.
pub fn diff(baseline: &Baseline, records: &[ExtractedRecord]) -> DiffResult {
    let mut result = DiffResult::default();
    for record in records {
        match record.service {
            ServiceTag::Read => {
                let key = ReadKey::of(record);
                if !baseline.read_whitelist.contains(&key) {
                    result.potential_read.insert(key);
                }
            }
            ServiceTag::Write => {
                let key = WriteKey::of(record);
                if !baseline.write_whitelist.contains(&key) {
                    result.potential_write.insert(key);
                }
            }
            _ => {}
        }
    }
    result
}

/// Shape of the originator-identification constraint a signature
/// places on traffic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", content = "hex", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OrIdentForm {
    /// Field omitted from the origin structure.
    Absent,
    /// Present and exactly 64 zero octets — the fill pattern of
    /// GUI-driven control tools.
    AllZero64,
    /// Present with exactly these octets (lowercase hex, may be
    /// empty for a present-but-empty field).
    Exact(String),
    /// No constraint.
    Any,
}

impl OrIdentForm {
    /// Generalizes a canonical originator string into a constraint:
    /// the 64-zero-octet pattern becomes [`OrIdentForm::AllZero64`],
    /// everything else stays exact.
    pub fn from_canonical(canonical: &str) -> OrIdentForm {
        match canonical {
            "ABSENT" => OrIdentForm::Absent,
            "EMPTY" => OrIdentForm::Exact(String::new()),
            hex if hex.len() == ZERO64_HEX_LEN && hex.bytes().all(|b| b == b'0') => {
                OrIdentForm::AllZero64
            }
            hex => OrIdentForm::Exact(hex.to_string()),
        }
    }

    fn matches(&self, or_ident: Option<&[u8]>) -> bool {
        match self {
            OrIdentForm::Absent => or_ident.is_none(),
            OrIdentForm::AllZero64 => {
                or_ident.map(|v| v.len() == 64 && v.iter().all(|&b| b == 0)).unwrap_or(false)
            }
            OrIdentForm::Exact(hex_str) => {
                or_ident.map(|v| hex::encode(v) == *hex_str).unwrap_or(false)
            }
            OrIdentForm::Any => true,
        }
    }

    /// Short token for signature ids and the rule DSL.
    pub fn token(&self) -> String {
        match self {
            OrIdentForm::Absent => "absent".to_string(),
            OrIdentForm::AllZero64 => "zero64".to_string(),
            OrIdentForm::Exact(hex_str) if hex_str.is_empty() => "empty".to_string(),
            OrIdentForm::Exact(hex_str) => format!("hex-{hex_str}"),
            OrIdentForm::Any => "any".to_string(),
        }
    }
}

/// Item constraint on a signature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ItemPattern {
    Exact(String),
    Prefix(String),
}

impl ItemPattern {
    pub fn matches(&self, item_id: &str) -> bool {
        match self {
            ItemPattern::Exact(s) => item_id == s,
            ItemPattern::Prefix(s) => item_id.starts_with(s),
        }
    }
}

/// How a signature came to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SignatureProvenance {
    /// Learned offline by diffing an attack capture.
    LearnedM1,
    /// Promoted from a novel event flagged at detection time.
    FlaggedM2,
    /// Shipped with the tool.
    Builtin,
}

impl std::fmt::Display for SignatureProvenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SignatureProvenance::LearnedM1 => "LEARNED_M1",
            SignatureProvenance::FlaggedM2 => "FLAGGED_M2",
            SignatureProvenance::Builtin => "BUILTIN",
        })
    }
}

/// Enforcement weight of a signature, derived from what it matches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    /// Process-impacting: carriers get dropped.
    Blocking,
    /// Reconnaissance: logged, never dropped.
    Monitor,
}

impl std::fmt::Display for Severity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Severity::Blocking => "BLOCKING",
            Severity::Monitor => "MONITOR",
        })
    }
}

/// A conjunctive protocol-level attack signature. Every populated
/// constraint must hold for a record to match.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackSignature {
    /// Stable, human-readable identity derived from the constraints.
    pub id: String,
    pub service: ServiceTag,
    #[serde(with = "hex_pair")]
    pub time_acc: Option<(u8, u8)>,
    pub or_ident_form: OrIdentForm,
    pub domain_constraint: Option<String>,
    pub item_constraint: Option<ItemPattern>,
    pub provenance: SignatureProvenance,
    pub description: String,
}

impl AttackSignature {
    /// True when the record satisfies every constraint.
    pub fn matches(&self, record: &ExtractedRecord) -> bool {
        if record.service != self.service {
            return false;
        }
        if let Some(acc) = self.time_acc {
            if record.time_acc != Some(acc) {
                return false;
            }
        }
        if !self.or_ident_form.matches(record.or_ident.as_deref()) {
            return false;
        }
        if let Some(domain) = &self.domain_constraint {
            if &record.domain_id != domain {
                return false;
            }
        }
        if let Some(item) = &self.item_constraint {
            if !item.matches(&record.item_id) {
                return false;
            }
        }
        true
    }

    /// Writes block; everything else monitors.
    pub fn severity(&self) -> Severity {
        if self.service == ServiceTag::Write {
            Severity::Blocking
        } else {
            Severity::Monitor
        }
    }

    /// A signature that matches on service alone would flag all
    /// traffic of that service; such signatures are never emitted.
    pub fn constrains_beyond_service(&self) -> bool {
        self.time_acc.is_some()
            || self.or_ident_form != OrIdentForm::Any
            || self.domain_constraint.is_some()
            || self.item_constraint.is_some()
    }
}

/// `Option<(u8, u8)>` as `["0x0a", "0x0a"]` / `null` in JSON.
mod hex_pair {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<(u8, u8)>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some((a, b)) => s.collect_seq([format!("0x{a:02x}"), format!("0x{b:02x}")]),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<(u8, u8)>, D::Error> {
        let raw: Option<[String; 2]> = Option::deserialize(d)?;
        raw.map(|[a, b]| Ok((parse_hex_byte(&a)?, parse_hex_byte(&b)?))).transpose()
    }

    fn parse_hex_byte<E: serde::de::Error>(s: &str) -> Result<u8, E> {
        s.strip_prefix("0x")
            .and_then(|h| u8::from_str_radix(h, 16).ok())
            .ok_or_else(|| E::custom(format!("expected \"0x..\" hex byte, got {s:?}")))
    }
}

/// One candidate that did not survive validation, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscardedCandidate {
    pub domain_id: String,
    pub item_id: String,
    pub reason: String,
}

/// Output of signature validation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SignOutcome {
    pub signatures: Vec<AttackSignature>,
    pub discarded: Vec<DiscardedCandidate>,
}

fn write_signature_id(time_acc: Option<(u8, u8)>, form: &OrIdentForm) -> String {
    let acc = match time_acc {
        Some((a, b)) => format!("{a:02x}{b:02x}"),
        None => "raw".to_string(),
    };
    format!("write-acc-{acc}-ident-{}", form.token())
}

fn read_signature_id(key: &ReadKey) -> String {
    format!("read-{}-{}", key.domain_id, key.item_id)
}

/// Validates diffed keys and promotes the survivors to signatures.
///
/// Write candidates must address a known process component: their
/// item's GGIO node appears in the map, or the item carries a control
/// (`$CO$`) path. Validated write signatures generalize away domain
/// and item — the client fingerprint (time accuracy + originator
/// form) is the attack property, the touched point is incidental —
/// and deduplicate on that fingerprint. Read candidates become
/// monitor signatures pinned to their exact (domain, item).
pub fn validate_and_sign(diffed: &DiffResult, ggio_map: &BTreeMap<String, String>) -> SignOutcome {
    sign_keys(diffed, ggio_map, SignatureProvenance::LearnedM1)
}

/// [`validate_and_sign`] with caller-chosen provenance; used when
/// promoting novel events flagged during live detection.
pub fn sign_keys(
    diffed: &DiffResult,
    ggio_map: &BTreeMap<String, String>,
    provenance: SignatureProvenance,
) -> SignOutcome {
    let mut outcome = SignOutcome::default();
    let mut seen_write: BTreeSet<String> = BTreeSet::new();

    for key in &diffed.potential_write {
        let node_component =
            ggio_node_of(&key.item_id).and_then(|node| ggio_map.get(node)).cloned();
        let is_control = key.item_id.contains("$CO$");
        if node_component.is_none() && !is_control {
            outcome.discarded.push(DiscardedCandidate {
                domain_id: key.domain_id.clone(),
                item_id: key.item_id.clone(),
                reason: "no mapped GGIO component and no control ($CO$) path".to_string(),
            });
            continue;
        }
        let form = OrIdentForm::from_canonical(&key.or_ident_canonical);
        let id = write_signature_id(key.time_acc, &form);
        if !seen_write.insert(id.clone()) {
            continue; // same fingerprint already signed
        }
        let acc_text = match key.time_acc {
            Some((a, b)) => format!("time accuracy 0x{a:02x},0x{b:02x}"),
            None => "no control-operate layout".to_string(),
        };
        let ident_text = match &form {
            OrIdentForm::Absent => "originator ident omitted".to_string(),
            OrIdentForm::AllZero64 => "originator ident of 64 zero octets".to_string(),
            OrIdentForm::Exact(h) if h.is_empty() => "empty originator ident".to_string(),
            OrIdentForm::Exact(h) => format!("originator ident {h}"),
            OrIdentForm::Any => "any originator ident".to_string(),
        };
        let component = node_component.unwrap_or_else(|| "control point".to_string());
        outcome.signatures.push(AttackSignature {
            id,
            service: ServiceTag::Write,
            time_acc: key.time_acc,
            or_ident_form: form,
            domain_constraint: None,
            item_constraint: None,
            provenance,
            description: format!(
                "unwhitelisted control write ({acc_text}, {ident_text}) first seen on \
                 {}/{} ({component})",
                key.domain_id, key.item_id
            ),
        });
    }

    for key in &diffed.potential_read {
        outcome.signatures.push(AttackSignature {
            id: read_signature_id(key),
            service: ServiceTag::Read,
            time_acc: None,
            or_ident_form: OrIdentForm::Any,
            domain_constraint: Some(key.domain_id.clone()),
            item_constraint: Some(ItemPattern::Exact(key.item_id.clone())),
            provenance,
            description: format!(
                "reconnaissance read outside the whitelist: {}/{}",
                key.domain_id, key.item_id
            ),
        });
    }

    outcome.signatures.sort_by(|a, b| a.id.cmp(&b.id));
    outcome
}

/// The two control-tool write fingerprints this tool ships with, for
/// deployments that cannot capture their own attack traffic. Ids
/// match what [`validate_and_sign`] would learn from the same
/// behavior, so the sets merge cleanly.
pub fn builtin_signatures() -> Vec<AttackSignature> {
    let mut sigs = vec![
        AttackSignature {
            id: write_signature_id(Some((0x0A, 0x0A)), &OrIdentForm::AllZero64),
            service: ServiceTag::Write,
            time_acc: Some((0x0A, 0x0A)),
            or_ident_form: OrIdentForm::AllZero64,
            domain_constraint: None,
            item_constraint: None,
            provenance: SignatureProvenance::Builtin,
            description: "control write with time accuracy 0x0a,0x0a and a 64-zero-octet \
                          originator ident (GUI control-tool fingerprint)"
                .to_string(),
        },
        AttackSignature {
            id: write_signature_id(Some((0x0A, 0x00)), &OrIdentForm::Absent),
            service: ServiceTag::Write,
            time_acc: Some((0x0A, 0x00)),
            or_ident_form: OrIdentForm::Absent,
            domain_constraint: None,
            item_constraint: None,
            provenance: SignatureProvenance::Builtin,
            description: "control write with time accuracy 0x0a,0x00 and the originator \
                          ident omitted (scripted client-library fingerprint)"
                .to_string(),
        },
    ];
    sigs.sort_by(|a, b| a.id.cmp(&b.id));
    sigs
}

/// Outcome of scanning directory exchanges for the GGIO map.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GgioMapOutcome {
    pub map: BTreeMap<String, String>,
    /// Directory responses with no pending matching request.
    pub unmatched_responses: usize,
}

fn dataset_component(item_id: &str) -> String {
    item_id.strip_prefix("LLN0$").unwrap_or(item_id).to_string()
}

/// Builds the GGIO node → component map from variable-list directory
/// request/response pairs (matched on reversed flow + invoke id).
pub fn build_ggio_map(pdus: &[DecodedPdu]) -> GgioMapOutcome {
    let mut outcome = GgioMapOutcome::default();
    let mut pending: BTreeMap<(crate::pcap::FlowKey, u32), String> = BTreeMap::new();

    for entry in pdus {
        let Ok(msg) = &entry.pdu else { continue };
        if msg.service != Some(ServiceTag::GetNamedVariableListAttributes) {
            continue;
        }
        match msg.kind {
            MessageKind::ConfirmedRequest => {
                if let (Some(invoke), Some(name)) = (msg.invoke_id, msg.reads.first()) {
                    pending.insert((entry.flow, invoke), name.item_id.clone());
                }
            }
            MessageKind::ConfirmedResponse => {
                let Some(invoke) = msg.invoke_id else { continue };
                let Some(dataset) = pending.remove(&(entry.flow.reversed(), invoke)) else {
                    outcome.unmatched_responses += 1;
                    continue;
                };
                let Some(members) = decode_variable_list_response(&msg.response_payload) else {
                    continue;
                };
                let component = dataset_component(&dataset);
                for member in members {
                    if let Some(node) = ggio_node_of(&member.item_id) {
                        outcome.map.insert(node.to_string(), component.clone());
                    }
                }
            }
            _ => {}
        }
    }
    outcome
}

fn hex_cell(byte: u8) -> serde_json::Value {
    serde_json::Value::String(format!("0x{byte:02x}"))
}

fn parse_hex_cell(value: &serde_json::Value, what: &str) -> Result<u8, BaselineError> {
    value
        .as_str()
        .and_then(|s| s.strip_prefix("0x"))
        .and_then(|h| u8::from_str_radix(h, 16).ok())
        .ok_or_else(|| BaselineError::SchemaMismatch(format!("{what}: expected \"0x..\" byte")))
}

/// Writes a baseline as versioned JSON with sorted whitelists.
///
/// Read rows are `[domain, item]`; write rows are
/// `[domain, item, acc1, acc2, orident]` with `null` accuracy cells
/// for writes without the control-operate layout. Output is
/// deterministic: sets serialize in key order.
pub fn save_baseline(path: &Path, baseline: &Baseline) -> Result<(), BaselineError> {
    let read_rows: Vec<serde_json::Value> = baseline
        .read_whitelist
        .iter()
        .map(|k| serde_json::json!([k.domain_id, k.item_id]))
        .collect();
    let write_rows: Vec<serde_json::Value> = baseline
        .write_whitelist
        .iter()
        .map(|k| {
            let (acc1, acc2) = match k.time_acc {
                Some((a, b)) => (hex_cell(a), hex_cell(b)),
                None => (serde_json::Value::Null, serde_json::Value::Null),
            };
            serde_json::json!([k.domain_id, k.item_id, acc1, acc2, k.or_ident_canonical])
        })
        .collect();
    let doc = serde_json::json!({
        "version": BASELINE_VERSION,
        "read_whitelist": read_rows,
        "write_whitelist": write_rows,
        "ggio_map": baseline.ggio_map,
        "provenance": baseline.provenance,
    });
    std::fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

fn str_cell(value: &serde_json::Value, what: &str) -> Result<String, BaselineError> {
    value
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| BaselineError::SchemaMismatch(format!("{what}: expected string")))
}

/// Reads a baseline written by [`save_baseline`], validating version
/// and row shapes.
pub fn load_baseline(path: &Path) -> Result<Baseline, BaselineError> {
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let version = doc.get("version").and_then(|v| v.as_u64());
    if version != Some(BASELINE_VERSION) {
        return Err(BaselineError::SchemaMismatch(format!(
            "version {version:?}, this build reads {BASELINE_VERSION}"
        )));
    }
    let mut baseline = Baseline {
        ggio_map: serde_json::from_value(doc.get("ggio_map").cloned().unwrap_or_default())
            .map_err(|e| BaselineError::SchemaMismatch(format!("ggio_map: {e}")))?,
        provenance: serde_json::from_value(doc.get("provenance").cloned().unwrap_or_default())
            .map_err(|e| BaselineError::SchemaMismatch(format!("provenance: {e}")))?,
        ..Default::default()
    };

    let reads = doc
        .get("read_whitelist")
        .and_then(|v| v.as_array())
        .ok_or_else(|| BaselineError::SchemaMismatch("read_whitelist missing".into()))?;
    for row in reads {
        let cells = row
            .as_array()
            .filter(|c| c.len() == 2)
            .ok_or_else(|| BaselineError::SchemaMismatch("read row is not [domain, item]".into()))?;
        baseline.read_whitelist.insert(ReadKey {
            domain_id: str_cell(&cells[0], "read row domain")?,
            item_id: str_cell(&cells[1], "read row item")?,
        });
    }

    let writes = doc
        .get("write_whitelist")
        .and_then(|v| v.as_array())
        .ok_or_else(|| BaselineError::SchemaMismatch("write_whitelist missing".into()))?;
    for row in writes {
        let cells = row.as_array().filter(|c| c.len() == 5).ok_or_else(|| {
            BaselineError::SchemaMismatch("write row is not [domain, item, acc1, acc2, orident]".into())
        })?;
        let time_acc = match (&cells[2], &cells[3]) {
            (serde_json::Value::Null, serde_json::Value::Null) => None,
            (a, b) => {
                Some((parse_hex_cell(a, "write row acc1")?, parse_hex_cell(b, "write row acc2")?))
            }
        };
        baseline.write_whitelist.insert(WriteKey {
            domain_id: str_cell(&cells[0], "write row domain")?,
            item_id: str_cell(&cells[1], "write row item")?,
            time_acc,
            or_ident_canonical: str_cell(&cells[4], "write row orident")?,
        });
    }
    Ok(baseline)
}

/// Writes signatures as a JSON array. A derived `severity` field is
/// included for human readers; loading ignores it.
pub fn save_signatures(path: &Path, signatures: &[AttackSignature]) -> Result<(), BaselineError> {
    let rows: Vec<serde_json::Value> = signatures
        .iter()
        .map(|sig| {
            let mut value = serde_json::to_value(sig).expect("signature serializes");
            value
                .as_object_mut()
                .expect("signature is an object")
                .insert("severity".to_string(), serde_json::json!(sig.severity()));
            value
        })
        .collect();
    std::fs::write(path, serde_json::to_string_pretty(&rows)? + "\n")?;
    Ok(())
}

/// Reads a signature array written by [`save_signatures`].
pub fn load_signatures(path: &Path) -> Result<Vec<AttackSignature>, BaselineError> {
    let sigs: Vec<AttackSignature> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(sigs)
}
