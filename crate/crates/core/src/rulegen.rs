//! Rule generation: compiles attack signatures into filter rules,
//! serializes them in a line-oriented DSL, and exports an
//! approximate suricata-style rendering for operators who want to
//! eyeball the byte patterns.
//!
//! The DSL, not the suricata export, is the load-bearing artifact:
//! `parse_dsl(emit_dsl(rules)) == rules` holds exactly, while the
//! export is lossy by construction (byte-offset matching cannot see
//! across TPKT fragmentation and cannot express field *absence*).

use serde::{Deserialize, Serialize};

use crate::baseline::{AttackSignature, ItemPattern, OrIdentForm, Severity, SID_BASE_MIN};
use crate::extract::ExtractedRecord;

/// Rule action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleAction {
    Drop,
    Alert,
}

impl RuleAction {
    fn token(self) -> &'static str {
        match self {
            RuleAction::Drop => "drop",
            RuleAction::Alert => "alert",
        }
    }
}

/// The protocol constraints one rule places on a record. Mirrors the
/// signature constraint set exactly, so rule matching and signature
/// matching cannot drift apart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleMatch {
    /// Confirmed-service tag number.
    pub service: u8,
    pub time_acc: Option<(u8, u8)>,
    pub or_ident_form: OrIdentForm,
    pub domain: Option<String>,
    pub item: Option<ItemPattern>,
}

impl RuleMatch {
    /// True when the record satisfies every constraint.
    pub fn matches(&self, record: &ExtractedRecord) -> bool {
        if record.service.tag() != self.service {
            return false;
        }
        if let Some(acc) = self.time_acc {
            if record.time_acc != Some(acc) {
                return false;
            }
        }
        if !match &self.or_ident_form {
            OrIdentForm::Absent => record.or_ident.is_none(),
            OrIdentForm::AllZero64 => record
                .or_ident
                .as_ref()
                .map(|v| v.len() == 64 && v.iter().all(|&b| b == 0))
                .unwrap_or(false),
            OrIdentForm::Exact(hex_str) => {
                record.or_ident.as_ref().map(|v| hex::encode(v) == *hex_str).unwrap_or(false)
            }
            OrIdentForm::Any => true,
        } {
            return false;
        }
        if let Some(domain) = &self.domain {
            if &record.domain_id != domain {
                return false;
            }
        }
        if let Some(item) = &self.item {
            if !item.matches(&record.item_id) {
                return false;
            }
        }
        true
    }
}

/// One filter rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NidsRule {
    pub sid: u32,
    pub action: RuleAction,
    pub match_spec: RuleMatch,
    /// Free-text message; carries `sig=<id>` so enforcement can name
    /// the originating signature.
    pub msg: String,
    pub rev: u32,
}

impl NidsRule {
    /// Transport is fixed: MMS runs over TCP to port 102.
    pub const PROTO: &'static str = "tcp";
    pub const DST_PORT: u16 = 102;

    /// The `sig=<id>` token embedded in the message, if present.
    pub fn signature_id(&self) -> Option<&str> {
        self.msg.split_whitespace().find_map(|tok| tok.strip_prefix("sig="))
    }
}

/// Rule generation and DSL errors.
#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum RulegenError {
    #[error("duplicate signature id {0:?}")]
    DuplicateSignatureId(String),
    #[error("sid base {0} is below the minimum {SID_BASE_MIN}")]
    InvalidSidBase(u32),
    #[error("rule parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
}

/// Compiles signatures into rules, one per signature, sids assigned
/// in signature-id order starting at `sid_base`. Blocking signatures
/// become drop rules, monitor signatures alert rules. Compilation is
/// deterministic: same signatures, same rules.
pub fn compile(
    signatures: &[AttackSignature],
    sid_base: u32,
) -> Result<Vec<NidsRule>, RulegenError> {
    if sid_base < SID_BASE_MIN {
        return Err(RulegenError::InvalidSidBase(sid_base));
    }
    let mut sorted: Vec<&AttackSignature> = signatures.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in sorted.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(RulegenError::DuplicateSignatureId(pair[0].id.clone()));
        }
    }
    Ok(sorted
        .iter()
        .enumerate()
        .map(|(i, sig)| NidsRule {
            sid: sid_base + i as u32,
            action: match sig.severity() {
                Severity::Blocking => RuleAction::Drop,
                Severity::Monitor => RuleAction::Alert,
            },
            match_spec: RuleMatch {
                service: sig.service.tag(),
                time_acc: sig.time_acc,
                or_ident_form: sig.or_ident_form.clone(),
                domain: sig.domain_constraint.clone(),
                item: sig.item_constraint.clone(),
            },
            msg: format!("{} prov={} sig={}", sig.description, sig.provenance, sig.id),
            rev: 1,
        })
        .collect())
}

fn escape(text: &str) -> String {
    text.replace('\\', "\\\\").replace('"', "\\\"")
}

fn orident_token(form: &OrIdentForm) -> Option<String> {
    match form {
        OrIdentForm::Any => None,
        OrIdentForm::Absent => Some("absent".to_string()),
        OrIdentForm::AllZero64 => Some("zero64".to_string()),
        OrIdentForm::Exact(h) if h.is_empty() => Some("empty".to_string()),
        OrIdentForm::Exact(h) => Some(format!("hex:{h}")),
    }
}

/// Serializes rules to the line DSL. One `RULE` line per rule; an
/// empty slice yields an empty string.
pub fn emit_dsl(rules: &[NidsRule]) -> String {
    let mut out = String::new();
    for rule in rules {
        out.push_str(&format!("RULE {} {} service={}", rule.sid, rule.action.token(),
            rule.match_spec.service));
        if let Some((a, b)) = rule.match_spec.time_acc {
            out.push_str(&format!(" acc=0x{a:02x},0x{b:02x}"));
        }
        if let Some(token) = orident_token(&rule.match_spec.or_ident_form) {
            out.push_str(&format!(" orident={token}"));
        }
        if let Some(domain) = &rule.match_spec.domain {
            out.push_str(&format!(" domain=\"{}\"", escape(domain)));
        }
        match &rule.match_spec.item {
            Some(ItemPattern::Exact(item)) => {
                out.push_str(&format!(" item=\"{}\"", escape(item)));
            }
            Some(ItemPattern::Prefix(prefix)) => {
                out.push_str(&format!(" item_prefix=\"{}\"", escape(prefix)));
            }
            None => {}
        }
        if rule.rev != 1 {
            out.push_str(&format!(" rev={}", rule.rev));
        }
        out.push_str(&format!(" msg=\"{}\"\n", escape(&rule.msg)));
    }
    out
}

/// One whitespace-separated token with its 1-based column.
struct Token {
    column: usize,
    text: String,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> RulegenError {
    RulegenError::Parse { line, column, message: message.into() }
}

/// Splits a line into tokens, keeping quoted strings (with `\"` and
/// `\\` escapes) as single tokens with the quotes stripped and a
/// leading marker so values can't be confused with bare words.
fn tokenize(line: &str, line_no: usize) -> Result<Vec<Token>, RulegenError> {
    let bytes = line.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0usize;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let mut text = String::new();
        let mut in_quotes = false;
        while i < bytes.len() {
            let b = bytes[i];
            if in_quotes {
                match b {
                    b'\\' => {
                        let esc = *bytes.get(i + 1).ok_or_else(|| {
                            parse_err(line_no, i + 2, "dangling escape in quoted string")
                        })?;
                        if esc != b'"' && esc != b'\\' {
                            return Err(parse_err(line_no, i + 2, "unknown escape sequence"));
                        }
                        text.push(esc as char);
                        i += 2;
                    }
                    b'"' => {
                        in_quotes = false;
                        i += 1;
                    }
                    _ => {
                        text.push(b as char);
                        i += 1;
                    }
                }
            } else if b == b'"' {
                in_quotes = true;
                // Marker byte distinguishing "quoted content" from a
                // bare word that happens to look like it.
                text.push('\u{1}');
                i += 1;
            } else if b.is_ascii_whitespace() {
                break;
            } else {
                text.push(b as char);
                i += 1;
            }
        }
        if in_quotes {
            return Err(parse_err(line_no, start + 1, "unterminated quoted string"));
        }
        tokens.push(Token { column: start + 1, text });
    }
    Ok(tokens)
}

fn parse_hex_byte(s: &str) -> Option<u8> {
    u8::from_str_radix(s.strip_prefix("0x")?, 16).ok()
}

/// Takes `key=value` apart; `value` may have been quoted.
fn key_value(tok: &Token) -> Option<(&str, &str)> {
    let eq = tok.text.find('=')?;
    Some((&tok.text[..eq], &tok.text[eq + 1..]))
}

fn unquote(value: &str) -> Option<&str> {
    value.strip_prefix('\u{1}')
}

/// Parses the line DSL back into rules.
///
/// Blank lines and `#` comments are skipped. Inverse of
/// [`emit_dsl`]: every emitted document parses back to the same rule
/// list, field for field.
pub fn parse_dsl(text: &str) -> Result<Vec<NidsRule>, RulegenError> {
    let mut rules = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim_end();
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let tokens = tokenize(line, line_no)?;
        if tokens[0].text != "RULE" {
            return Err(parse_err(
                line_no,
                tokens[0].column,
                format!("expected RULE, found {:?}", tokens[0].text),
            ));
        }
        if tokens.len() < 3 {
            return Err(parse_err(line_no, line.len() + 1, "missing sid or action"));
        }
        let sid: u32 = tokens[1].text.parse().map_err(|_| {
            parse_err(line_no, tokens[1].column, format!("bad sid {:?}", tokens[1].text))
        })?;
        let action = match tokens[2].text.as_str() {
            "drop" => RuleAction::Drop,
            "alert" => RuleAction::Alert,
            other => {
                return Err(parse_err(
                    line_no,
                    tokens[2].column,
                    format!("unknown action {other:?}"),
                ))
            }
        };

        let mut service: Option<u8> = None;
        let mut time_acc: Option<(u8, u8)> = None;
        let mut or_ident_form = OrIdentForm::Any;
        let mut domain: Option<String> = None;
        let mut item: Option<ItemPattern> = None;
        let mut msg: Option<String> = None;
        let mut rev: u32 = 1;

        for tok in &tokens[3..] {
            let Some((key, value)) = key_value(tok) else {
                return Err(parse_err(
                    line_no,
                    tok.column,
                    format!("expected key=value, found {:?}", tok.text),
                ));
            };
            match key {
                "service" => {
                    service = Some(value.parse().map_err(|_| {
                        parse_err(line_no, tok.column, format!("bad service {value:?}"))
                    })?);
                }
                "acc" => {
                    let (a, b) = value.split_once(',').ok_or_else(|| {
                        parse_err(line_no, tok.column, "acc needs two comma-separated bytes")
                    })?;
                    let (a, b) = (parse_hex_byte(a), parse_hex_byte(b));
                    match (a, b) {
                        (Some(a), Some(b)) => time_acc = Some((a, b)),
                        _ => {
                            return Err(parse_err(
                                line_no,
                                tok.column,
                                "acc bytes must look like 0x0a",
                            ))
                        }
                    }
                }
                "orident" => {
                    or_ident_form = match value {
                        "absent" => OrIdentForm::Absent,
                        "zero64" => OrIdentForm::AllZero64,
                        "empty" => OrIdentForm::Exact(String::new()),
                        "any" => OrIdentForm::Any,
                        hex_val if hex_val.starts_with("hex:") => {
                            let h = &hex_val[4..];
                            if h.len() % 2 != 0 || !h.bytes().all(|b| b.is_ascii_hexdigit()) {
                                return Err(parse_err(
                                    line_no,
                                    tok.column,
                                    format!("bad orident hex {h:?}"),
                                ));
                            }
                            OrIdentForm::Exact(h.to_ascii_lowercase())
                        }
                        other => {
                            return Err(parse_err(
                                line_no,
                                tok.column,
                                format!("unknown orident form {other:?}"),
                            ))
                        }
                    };
                }
                "domain" => {
                    let value = unquote(value).ok_or_else(|| {
                        parse_err(line_no, tok.column, "domain value must be quoted")
                    })?;
                    domain = Some(value.to_string());
                }
                "item" => {
                    let value = unquote(value).ok_or_else(|| {
                        parse_err(line_no, tok.column, "item value must be quoted")
                    })?;
                    item = Some(ItemPattern::Exact(value.to_string()));
                }
                "item_prefix" => {
                    let value = unquote(value).ok_or_else(|| {
                        parse_err(line_no, tok.column, "item_prefix value must be quoted")
                    })?;
                    item = Some(ItemPattern::Prefix(value.to_string()));
                }
                "rev" => {
                    rev = value.parse().map_err(|_| {
                        parse_err(line_no, tok.column, format!("bad rev {value:?}"))
                    })?;
                }
                "msg" => {
                    let value = unquote(value).ok_or_else(|| {
                        parse_err(line_no, tok.column, "msg value must be quoted")
                    })?;
                    msg = Some(value.to_string());
                }
                other => {
                    return Err(parse_err(
                        line_no,
                        tok.column,
                        format!("unknown key {other:?}"),
                    ))
                }
            }
        }

        let service = service
            .ok_or_else(|| parse_err(line_no, line.len() + 1, "missing service constraint"))?;
        let msg = msg.ok_or_else(|| parse_err(line_no, line.len() + 1, "missing msg"))?;
        rules.push(NidsRule {
            sid,
            action,
            match_spec: RuleMatch { service, time_acc, or_ident_form, domain, item },
            msg,
            rev,
        });
    }
    Ok(rules)
}

fn suricata_escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' | '"' | ';' | '|' => {
                out.push('\\');
                out.push(c);
            }
            _ => out.push(c),
        }
    }
    out
}

fn hex_content(bytes: &[u8]) -> String {
    let hex: Vec<String> = bytes.iter().map(|b| format!("{b:02x}")).collect();
    format!("content:\"|{}|\";", hex.join(" "))
}

/// Renders rules in a suricata-like syntax for review.
///
/// This export is approximate and says so in its header: content
/// offsets assume each PDU sits in one TPKT, and a constraint on
/// field *absence* (an omitted originator ident) has no content-match
/// equivalent. The hex patterns themselves are exact — they are the
/// bytes the encoder produces for the constrained fields.
pub fn export_suricata_like(rules: &[NidsRule]) -> String {
    let mut out = String::from(
        "# Approximate export for review only.\n\
         # Byte-offset matching assumes one PDU per TPKT and cannot express field absence;\n\
         # use the native rule engine for enforcement.\n",
    );
    for rule in rules {
        if rule.match_spec.or_ident_form == OrIdentForm::Absent {
            out.push_str(&format!(
                "# sid {}: originator-ident absence is matched by layout in the native \
                 engine; the content checks below are necessary but not sufficient.\n",
                rule.sid
            ));
        }
        let mut options = Vec::new();
        options.push(format!("msg:\"{}\";", suricata_escape(&rule.msg)));
        options.push("flow:established,to_server;".to_string());
        // Service: the confirmed-service choice tag byte.
        options.push(hex_content(&[0xA0 | rule.match_spec.service]));
        if let Some((a, b)) = rule.match_spec.time_acc {
            // Each UTC timestamp encodes as `91 08` + 8 bytes with the
            // quality byte last: 7 bytes past the header match.
            for quality in [a, b] {
                options.push(hex_content(&[0x91, 0x08]));
                options.push(format!("content:\"|{quality:02x}|\"; distance:7; within:1;"));
            }
        }
        match &rule.match_spec.or_ident_form {
            OrIdentForm::AllZero64 => {
                let mut pattern = vec![0x89, 0x40];
                pattern.extend_from_slice(&[0u8; 64]);
                options.push(hex_content(&pattern));
            }
            OrIdentForm::Exact(hex_str) => {
                let ident = hex::decode(hex_str).expect("validated hex");
                let mut pattern = vec![0x89, ident.len() as u8];
                pattern.extend_from_slice(&ident);
                options.push(hex_content(&pattern));
            }
            OrIdentForm::Absent | OrIdentForm::Any => {}
        }
        if let Some(domain) = &rule.match_spec.domain {
            options.push(format!("content:\"{}\";", suricata_escape(domain)));
        }
        match &rule.match_spec.item {
            Some(ItemPattern::Exact(item)) | Some(ItemPattern::Prefix(item)) => {
                options.push(format!("content:\"{}\";", suricata_escape(item)));
            }
            None => {}
        }
        options.push(format!("sid:{};", rule.sid));
        options.push(format!("rev:{};", rule.rev));
        out.push_str(&format!(
            "{} {} any any -> any {} ({})\n",
            rule.action.token(),
            NidsRule::PROTO,
            NidsRule::DST_PORT,
            options.join(" ")
        ));
    }
    out
}
