//! Deterministic traffic synthesis: turns a declarative scenario
//! (which points a SCADA client polls, what it writes, who attacks
//! when) into a capture plus a ground-truth manifest labeling every
//! frame.
//!
//! Everything random flows from one seeded generator and affects only
//! request *spacing*, never counts or contents, so a fixed config
//! yields a byte-identical capture on every run — the property the
//! closed-loop validation (synthesize → learn → attack → detect →
//! filter) leans on.

use std::collections::{BTreeMap, BTreeSet};
use std::net::Ipv4Addr;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::codec::envelope::wrap_mms;
use crate::codec::mms::{
    encode_mms, read_response_payload, valid_identifier, variable_list_response_payload,
    write_response_payload, MmsError, MmsMessage, ObjectName, OperPayload, ServiceTag,
    UtcTimestamp, WriteItem,
};
use crate::pcap::RawFrame;
use crate::wire::{build_tcp_frame, TcpFrameSpec};

pub const CONFIG_VERSION: u32 = 1;
pub const MANIFEST_VERSION: u32 = 1;

/// Scenario clock zero: 2023-11-14T22:13:20Z. Comfortably inside the
/// u32 seconds a classic capture header can express.
pub const BASE_EPOCH_SECS: u32 = 1_700_000_000;

const MMS_PORT: u16 = 102;
const CLIENT_PORT_BASE: u16 = 49152;
const RESPONSE_DELAY_MICROS: u64 = 1_500;
const READ_GAP_MICROS: u64 = 20_000;
const ATTACK_GAP_MICROS: u64 = 250_000;

/// Quality bytes of (operTm, T) stamped by the GUI-driven attack
/// client.
pub const BEAN_TIME_ACC: (u8, u8) = (0x0A, 0x0A);
/// Quality bytes of (operTm, T) stamped by the scripted attack client,
/// which also omits the originator identification entirely.
pub const SCRIPT_TIME_ACC: (u8, u8) = (0x0A, 0x00);
/// Both attack clients declare themselves remote-control originators.
pub const ATTACK_OR_CAT: u8 = 3;

/// Synthesis errors.
#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid scenario config: {0}")]
    Config(String),
    #[error("MMS encoding failed: {0}")]
    Encode(#[from] MmsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

fn config_err(reason: impl Into<String>) -> SynthError {
    SynthError::Config(reason.into())
}

/// Hosts taking part in a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoints {
    pub scada: Ipv4Addr,
    pub plc: Ipv4Addr,
    pub attackers: Vec<Ipv4Addr>,
}

/// One polled point: `count` single-variable read requests spread
/// over the polling cycles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadTask {
    pub item: String,
    pub count: usize,
}

/// Originator identification a benign write carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "form", content = "hex", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WriteIdent {
    Absent,
    Zero64,
    Hex(String),
}

impl WriteIdent {
    fn bytes(&self) -> Option<Vec<u8>> {
        match self {
            WriteIdent::Absent => None,
            WriteIdent::Zero64 => Some(vec![0u8; 64]),
            WriteIdent::Hex(h) => Some(hex::decode(h).expect("validated hex")),
        }
    }
}

/// One legitimate operator action, issued `count` times at evenly
/// spaced cycles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteTask {
    pub item: String,
    pub time_acc: (u8, u8),
    pub or_cat: u8,
    pub or_ident: WriteIdent,
    pub count: usize,
}

/// Attack client flavor; fixes the protocol fingerprint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AttackKind {
    /// GUI client: low-accuracy timestamps, zero-filled 64-byte ident.
    Bean,
    /// Scripted client: low/none accuracy pair, ident omitted.
    Script,
}

impl AttackKind {
    fn fingerprint(self) -> ((u8, u8), Option<Vec<u8>>) {
        match self {
            AttackKind::Bean => (BEAN_TIME_ACC, Some(vec![0u8; 64])),
            AttackKind::Script => (SCRIPT_TIME_ACC, None),
        }
    }

    fn frame_kind(self) -> FrameKind {
        match self {
            AttackKind::Bean => FrameKind::AttackBean,
            AttackKind::Script => FrameKind::AttackScript,
        }
    }
}

/// A burst of `count` rogue control writes starting `at_secs` into
/// the scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackTask {
    pub kind: AttackKind,
    pub attacker: Ipv4Addr,
    pub item: String,
    pub count: usize,
    pub at_secs: u32,
}

/// Declarative scenario description. Serializable so scenarios can be
/// kept and replayed as files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub version: u32,
    pub seed: u64,
    pub duration_secs: u32,
    pub poll_period_secs: u32,
    pub endpoints: Endpoints,
    pub plc_domain: String,
    pub read_plan: Vec<ReadTask>,
    pub write_plan: Vec<WriteTask>,
    pub attack_plan: Vec<AttackTask>,
    /// Component name → GGIO nodes it aggregates; becomes the
    /// directory exchanges at scenario start.
    pub dataset_decl: BTreeMap<String, Vec<String>>,
}

/// Ground-truth label of one frame.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FrameKind {
    BenignRead,
    BenignWrite,
    AttackBean,
    AttackScript,
    Directory,
    Response,
}

impl FrameKind {
    pub fn name(self) -> &'static str {
        match self {
            FrameKind::BenignRead => "BENIGN_READ",
            FrameKind::BenignWrite => "BENIGN_WRITE",
            FrameKind::AttackBean => "ATTACK_BEAN",
            FrameKind::AttackScript => "ATTACK_SCRIPT",
            FrameKind::Directory => "DIRECTORY",
            FrameKind::Response => "RESPONSE",
        }
    }
}

/// Ground truth for one synthesized capture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    /// `labels[i]` is the kind of frame `i` in the written capture.
    pub labels: Vec<FrameKind>,
    pub counts: BTreeMap<FrameKind, usize>,
    /// Request records extraction should produce: one per read,
    /// write, attack and directory request; responses yield none.
    pub expected_records: usize,
}

/// Checks a scenario for internal consistency.
pub fn validate(config: &ScenarioConfig) -> Result<(), SynthError> {
    if config.version != CONFIG_VERSION {
        return Err(config_err(format!(
            "config version {} (expected {CONFIG_VERSION})",
            config.version
        )));
    }
    if config.duration_secs == 0 || config.poll_period_secs == 0 {
        return Err(config_err("duration and poll period must be at least 1s"));
    }
    if !valid_identifier(&config.plc_domain) {
        return Err(config_err(format!("bad domain identifier {:?}", config.plc_domain)));
    }

    let ep = &config.endpoints;
    if ep.scada == ep.plc {
        return Err(config_err("scada and plc addresses must differ"));
    }
    let mut attacker_set = BTreeSet::new();
    for attacker in &ep.attackers {
        if *attacker == ep.scada || *attacker == ep.plc {
            return Err(config_err(format!("attacker {attacker} collides with scada/plc")));
        }
        if !attacker_set.insert(*attacker) {
            return Err(config_err(format!("duplicate attacker {attacker}")));
        }
    }

    let mut declared_nodes = BTreeSet::new();
    for (component, nodes) in &config.dataset_decl {
        if !valid_identifier(component) {
            return Err(config_err(format!("bad component identifier {component:?}")));
        }
        if nodes.is_empty() {
            return Err(config_err(format!("component {component} declares no GGIO nodes")));
        }
        for node in nodes {
            if crate::baseline::ggio_node_of(node) != Some(node.as_str()) {
                return Err(config_err(format!(
                    "{node:?} in component {component} is not a GGIO node"
                )));
            }
            if !declared_nodes.insert(node.clone()) {
                return Err(config_err(format!(
                    "GGIO node {node} declared by more than one component"
                )));
            }
        }
    }

    for task in &config.read_plan {
        if !valid_identifier(&task.item) {
            return Err(config_err(format!("bad read item {:?}", task.item)));
        }
        if task.count == 0 {
            return Err(config_err(format!("read task {} has count 0", task.item)));
        }
    }
    for task in &config.write_plan {
        if !valid_identifier(&task.item) {
            return Err(config_err(format!("bad write item {:?}", task.item)));
        }
        if task.count == 0 {
            return Err(config_err(format!("write task {} has count 0", task.item)));
        }
        if task.or_cat > 8 {
            return Err(config_err(format!("orCat {} out of range", task.or_cat)));
        }
        if let WriteIdent::Hex(h) = &task.or_ident {
            if hex::decode(h).is_err() {
                return Err(config_err(format!("bad or_ident hex {h:?}")));
            }
        }
    }
    for task in &config.attack_plan {
        if !ep.attackers.contains(&task.attacker) {
            return Err(config_err(format!("{} is not a declared attacker", task.attacker)));
        }
        if !valid_identifier(&task.item) {
            return Err(config_err(format!("bad attack item {:?}", task.item)));
        }
        if task.count == 0 {
            return Err(config_err(format!("attack task {} has count 0", task.item)));
        }
        if task.at_secs > config.duration_secs {
            return Err(config_err(format!(
                "attack at {}s starts after the scenario ends",
                task.at_secs
            )));
        }
        match crate::baseline::ggio_node_of(&task.item) {
            Some(node) if declared_nodes.contains(node) => {}
            Some(node) => {
                return Err(config_err(format!(
                    "attack targets undeclared GGIO node {node}"
                )))
            }
            None => {
                return Err(config_err(format!(
                    "attack item {:?} does not address a GGIO node",
                    task.item
                )))
            }
        }
    }
    Ok(())
}

enum EventBody {
    Read { item: String },
    Write {
        item: String,
        acc: (u8, u8),
        or_cat: u8,
        or_ident: Option<Vec<u8>>,
        ctl_num: u8,
        check: u8,
    },
    Directory { dataset: String, members: Vec<String> },
}

struct PlannedEvent {
    ts: u64,
    kind: FrameKind,
    client: Ipv4Addr,
    body: EventBody,
}

struct ClientState {
    port: u16,
    invoke: u32,
    seq: u32,
    server_seq: u32,
}

fn build_messages(
    domain: &str,
    event: &PlannedEvent,
    invoke: u32,
) -> Result<(MmsMessage, MmsMessage), SynthError> {
    match &event.body {
        EventBody::Read { item } => {
            let name = ObjectName::new(domain, item)?;
            Ok((
                MmsMessage::read_request(invoke, vec![name]),
                MmsMessage::response(invoke, ServiceTag::Read, read_response_payload(1)),
            ))
        }
        EventBody::Write { item, acc, or_cat, or_ident, ctl_num, check } => {
            let name = ObjectName::new(domain, item)?;
            let oper = OperPayload {
                ctl_val: true,
                oper_tm: UtcTimestamp::from_micros(event.ts, acc.0),
                or_cat: *or_cat,
                or_ident: or_ident.clone(),
                ctl_num: *ctl_num,
                t: UtcTimestamp::from_micros(event.ts, acc.1),
                test: false,
                check: *check,
            };
            Ok((
                MmsMessage::write_request(invoke, vec![WriteItem::with_oper(name, oper)]),
                MmsMessage::response(invoke, ServiceTag::Write, write_response_payload(1)),
            ))
        }
        EventBody::Directory { dataset, members } => {
            let name = ObjectName::new(domain, dataset)?;
            let members: Vec<ObjectName> = members
                .iter()
                .map(|m| ObjectName::new(domain, m))
                .collect::<Result<_, _>>()?;
            Ok((
                MmsMessage::variable_list_request(invoke, name),
                MmsMessage::response(
                    invoke,
                    ServiceTag::GetNamedVariableListAttributes,
                    variable_list_response_payload(&members),
                ),
            ))
        }
    }
}

/// Synthesizes the capture a scenario describes.
///
/// Fixed seed, fixed output: every jitter draw comes from one seeded
/// generator consumed in plan order. Frames come back sorted by
/// timestamp, so indices in the manifest match both the written file
/// and what a reader of that file will see.
pub fn synthesize(config: &ScenarioConfig) -> Result<(Vec<RawFrame>, Manifest), SynthError> {
    validate(config)?;

    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
    let base = u64::from(BASE_EPOCH_SECS) * 1_000_000;
    let poll = u64::from(config.poll_period_secs) * 1_000_000;
    let cycle_jitter_max = (poll / 20) as i64; // ±5 %

    let mut events: Vec<PlannedEvent> = Vec::new();

    // Directory sweep first: the SCADA client asks each declared
    // dataset for its members, which is where the GGIO map comes from.
    let mut dir_ts = base + 200_000;
    for (component, nodes) in &config.dataset_decl {
        let jitter: u64 = rng.random_range(0..=10_000);
        events.push(PlannedEvent {
            ts: dir_ts + jitter,
            kind: FrameKind::Directory,
            client: config.endpoints.scada,
            body: EventBody::Directory {
                dataset: format!("LLN0${component}"),
                members: nodes.iter().map(|n| format!("{n}$ST$Ind1$stVal")).collect(),
            },
        });
        dir_ts += 100_000;
    }

    // Polling cycles: cycle k issues one read per task that still has
    // budget; planned writes land at the tail of their cycle.
    let read_cycles = config.read_plan.iter().map(|t| t.count).max().unwrap_or(0);
    let total_cycles =
        read_cycles.max(if config.write_plan.is_empty() { 0 } else { 1 });
    let mut write_cycles: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (w, task) in config.write_plan.iter().enumerate() {
        for j in 0..task.count {
            let cycle = ((j + 1) * total_cycles / (task.count + 1))
                .min(total_cycles.saturating_sub(1));
            write_cycles.entry(cycle).or_default().push(w);
        }
    }

    let lead_in = base + 1_000_000 + config.dataset_decl.len() as u64 * 100_000;
    let mut benign_writes_done = 0u64;
    for k in 0..total_cycles {
        let jitter: i64 = rng.random_range(-cycle_jitter_max..=cycle_jitter_max);
        let cycle_start = (lead_in + k as u64 * poll).saturating_add_signed(jitter);
        let mut offset = 0u64;
        for task in &config.read_plan {
            if task.count > k {
                let read_jitter: u64 = rng.random_range(0..=2_000);
                events.push(PlannedEvent {
                    ts: cycle_start + offset + read_jitter,
                    kind: FrameKind::BenignRead,
                    client: config.endpoints.scada,
                    body: EventBody::Read { item: task.item.clone() },
                });
                offset += READ_GAP_MICROS;
            }
        }
        for &w in write_cycles.get(&k).into_iter().flatten() {
            let task = &config.write_plan[w];
            let write_jitter: u64 = rng.random_range(0..=2_000);
            benign_writes_done += 1;
            events.push(PlannedEvent {
                ts: cycle_start + offset + 10_000 + write_jitter,
                kind: FrameKind::BenignWrite,
                client: config.endpoints.scada,
                body: EventBody::Write {
                    item: task.item.clone(),
                    acc: task.time_acc,
                    or_cat: task.or_cat,
                    or_ident: task.or_ident.bytes(),
                    ctl_num: (benign_writes_done % 250 + 1) as u8,
                    check: 3,
                },
            });
            offset += READ_GAP_MICROS;
        }
    }

    // Attack bursts.
    for task in &config.attack_plan {
        let (acc, or_ident) = task.kind.fingerprint();
        for i in 0..task.count {
            let jitter: u64 = rng.random_range(0..=50_000);
            events.push(PlannedEvent {
                ts: base
                    + u64::from(task.at_secs) * 1_000_000
                    + i as u64 * ATTACK_GAP_MICROS
                    + jitter,
                kind: task.kind.frame_kind(),
                client: task.attacker,
                body: EventBody::Write {
                    item: task.item.clone(),
                    acc,
                    or_cat: ATTACK_OR_CAT,
                    or_ident: or_ident.clone(),
                    ctl_num: (i % 250 + 1) as u8,
                    check: 0,
                },
            });
        }
    }

    events.sort_by_key(|e| e.ts);

    // One long-lived TCP connection per client, ports pre-assigned in
    // endpoint order so output does not depend on event timing.
    let mut states: BTreeMap<Ipv4Addr, ClientState> = BTreeMap::new();
    states.insert(
        config.endpoints.scada,
        ClientState { port: CLIENT_PORT_BASE, invoke: 0, seq: 1, server_seq: 1 },
    );
    for (i, attacker) in config.endpoints.attackers.iter().enumerate() {
        states.insert(
            *attacker,
            ClientState {
                port: CLIENT_PORT_BASE + 1 + i as u16,
                invoke: 0,
                seq: 1,
                server_seq: 1,
            },
        );
    }

    let mut labeled: Vec<(RawFrame, FrameKind)> = Vec::with_capacity(events.len() * 2);
    for event in &events {
        let state = states.get_mut(&event.client).expect("validated client");
        state.invoke += 1;
        let (request, response) = build_messages(&config.plc_domain, event, state.invoke)?;
        let request_bytes = wrap_mms(&encode_mms(&request)?);
        let response_bytes = wrap_mms(&encode_mms(&response)?);

        labeled.push((
            build_tcp_frame(&TcpFrameSpec {
                ts_secs: (event.ts / 1_000_000) as u32,
                ts_micros: (event.ts % 1_000_000) as u32,
                src: event.client,
                dst: config.endpoints.plc,
                src_port: state.port,
                dst_port: MMS_PORT,
                seq: state.seq,
                ack: state.server_seq,
                payload: request_bytes.clone(),
            }),
            event.kind,
        ));
        state.seq = state.seq.wrapping_add(request_bytes.len() as u32);

        let response_ts = event.ts + RESPONSE_DELAY_MICROS;
        labeled.push((
            build_tcp_frame(&TcpFrameSpec {
                ts_secs: (response_ts / 1_000_000) as u32,
                ts_micros: (response_ts % 1_000_000) as u32,
                src: config.endpoints.plc,
                dst: event.client,
                src_port: MMS_PORT,
                dst_port: state.port,
                seq: state.server_seq,
                ack: state.seq,
                payload: response_bytes.clone(),
            }),
            FrameKind::Response,
        ));
        state.server_seq = state.server_seq.wrapping_add(response_bytes.len() as u32);
    }

    // Per-flow timestamps are strictly increasing, so a stable sort
    // by time keeps every flow's internal order while interleaving
    // flows the way a capture tap would have seen them.
    labeled.sort_by_key(|(f, _)| (f.ts_secs, f.ts_micros));

    let mut counts: BTreeMap<FrameKind, usize> = BTreeMap::new();
    for (_, kind) in &labeled {
        *counts.entry(*kind).or_insert(0) += 1;
    }
    let expected_records =
        labeled.iter().filter(|(_, k)| *k != FrameKind::Response).count();
    let labels: Vec<FrameKind> = labeled.iter().map(|(_, k)| *k).collect();
    let frames: Vec<RawFrame> = labeled.into_iter().map(|(f, _)| f).collect();

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: config.seed,
        labels,
        counts,
        expected_records,
    };
    Ok((frames, manifest))
}

/// Built-in scenario names, in the order `preset` knows them.
pub const PRESET_NAMES: &[&str] =
    &["scenario1_scaled", "bean_attack", "script_attack", "mixed"];

fn benign_base(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        version: CONFIG_VERSION,
        seed,
        duration_secs: 1_900,
        poll_period_secs: 2,
        endpoints: Endpoints {
            scada: Ipv4Addr::new(172, 18, 5, 60),
            plc: Ipv4Addr::new(172, 16, 3, 41),
            attackers: vec![Ipv4Addr::new(172, 16, 4, 201), Ipv4Addr::new(172, 16, 5, 103)],
        },
        plc_domain: "WAGO61850ServerLogicalDevice".to_string(),
        read_plan: vec![
            ReadTask { item: "LLN0$DC$NamPlt$configRev".to_string(), count: 944 },
            ReadTask { item: "MMXU1$MX$TotW$mag$f".to_string(), count: 236 },
            ReadTask { item: "PDIS1$ST$Str$general".to_string(), count: 236 },
            ReadTask { item: "GGIO12$ST$Ind1$stVal".to_string(), count: 238 },
            ReadTask { item: "GGIO13$ST$Ind1$stVal".to_string(), count: 237 },
        ],
        write_plan: vec![WriteTask {
            item: "GGIO12$CO$SPCSO$Oper".to_string(),
            time_acc: (0x0F, 0x10),
            or_cat: 2,
            or_ident: WriteIdent::Zero64,
            count: 1,
        }],
        attack_plan: vec![],
        dataset_decl: BTreeMap::from([
            (
                "CircuitBreaker".to_string(),
                vec!["GGIO12".to_string(), "GGIO13".to_string()],
            ),
            ("Disconnector".to_string(), vec!["GGIO14".to_string()]),
        ]),
    }
}

fn bean_task() -> AttackTask {
    AttackTask {
        kind: AttackKind::Bean,
        attacker: Ipv4Addr::new(172, 16, 4, 201),
        item: "GGIO12$CO$SPCSO$Oper".to_string(),
        count: 1,
        at_secs: 900,
    }
}

fn script_task() -> AttackTask {
    AttackTask {
        kind: AttackKind::Script,
        attacker: Ipv4Addr::new(172, 16, 5, 103),
        item: "GGIO12$CO$SPCSO$Oper".to_string(),
        count: 1,
        at_secs: 1_200,
    }
}

/// Built-in scenarios. All four share the same benign plans, so a
/// baseline learned on `scenario1_scaled` whitelists exactly the
/// benign portion of the attack scenarios.
pub fn preset(name: &str) -> Option<ScenarioConfig> {
    match name {
        "scenario1_scaled" => Some(benign_base(1_001)),
        "bean_attack" => {
            let mut config = benign_base(1_002);
            config.attack_plan = vec![bean_task()];
            Some(config)
        }
        "script_attack" => {
            let mut config = benign_base(1_003);
            config.attack_plan = vec![script_task()];
            Some(config)
        }
        "mixed" => {
            let mut config = benign_base(1_004);
            config.attack_plan = vec![bean_task(), script_task()];
            Some(config)
        }
        _ => None,
    }
}

/// Writes a scenario config as pretty JSON.
pub fn save_config(path: &Path, config: &ScenarioConfig) -> Result<(), SynthError> {
    let json = serde_json::to_string_pretty(config)?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

/// Reads and validates a scenario config.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, SynthError> {
    let config: ScenarioConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    validate(&config)?;
    Ok(config)
}

/// Writes a manifest as pretty JSON.
pub fn save_manifest(path: &Path, manifest: &Manifest) -> Result<(), SynthError> {
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(path, json + "\n")?;
    Ok(())
}

/// Reads a manifest back.
pub fn load_manifest(path: &Path) -> Result<Manifest, SynthError> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
