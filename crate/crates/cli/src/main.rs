//! Command-line front end for the `mmsguard` library.
//!
//! One executable exposes the whole pipeline: learn a whitelist from
//! benign captures, diff suspect traffic against it, turn the novel
//! keys into signatures, compile those into filtering rules, apply
//! the rules to captures, and generate labelled synthetic traffic to
//! exercise all of the above. `pipeline` chains learn → diff → sign →
//! rulegen → report over a benign/attack capture pair in one call.
//!
//! Exit codes are stable for scripting: 0 success, 1 runtime error,
//! 2 when `detect` finds blocking attack paths, 64 for usage errors.
//! All file outputs are written atomically (temp file + rename), so a
//! crash never leaves a half-written artifact behind.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use mmsguard::baseline::{
    build_ggio_map, builtin_signatures, diff, learn, load_baseline, load_signatures,
    save_baseline, save_signatures, validate_and_sign, Baseline, DiffResult, SID_BASE_MIN,
};
use mmsguard::detect::{detect, render_report, Detection, ReportFormat};
use mmsguard::engine::{alerts_to_json_lines, filter, write_filtered, FilterPolicy};
use mmsguard::extract::{decode_capture, extract, records_with_frames, ExtractedRecord};
use mmsguard::pcap::{read_pcap, write_pcap, RawFrame};
use mmsguard::rulegen::{compile, emit_dsl, export_suricata_like, parse_dsl};
use mmsguard::synth::{load_config, preset, save_config, save_manifest, synthesize, PRESET_NAMES};

const EXIT_OK: i32 = 0;
const EXIT_ERROR: i32 = 1;
const EXIT_BLOCKING: i32 = 2;
const EXIT_USAGE: i32 = 64;

const AFTER_HELP: &str = "\
Exit codes:
  0   success (including --help and --version)
  1   runtime error (unreadable input, malformed file, ...)
  2   `detect` found blocking attack paths
  64  usage error (unknown flag, missing argument, ...)

Output is plain text; the NO_COLOR environment variable suppresses
color in this help and in argument errors.";

#[derive(Parser)]
#[command(
    name = "mmsguard",
    version,
    about = "Whitelist learning, attack-signature extraction, and rule-based \
             filtering for IEC 61850 MMS captures",
    after_help = AFTER_HELP,
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Report format selector shared by `detect` and `report`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> ReportFormat {
        match f {
            Format::Text => ReportFormat::Text,
            Format::Csv => ReportFormat::Csv,
            Format::Json => ReportFormat::Json,
        }
    }
}

/// Scenario source for `synth`: exactly one of a named preset or a
/// config file.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct ScenarioSource {
    /// Built-in scenario name (scenario1_scaled, bean_attack, script_attack, mixed).
    #[arg(long)]
    preset: Option<String>,
    /// Scenario config JSON written by --write-config or by hand.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Learn a read/write whitelist from benign captures.
    Learn {
        /// Benign pcap input; repeat the flag for multiple captures.
        #[arg(long = "input", value_name = "PCAP", required = true)]
        inputs: Vec<PathBuf>,
        /// Baseline output path (JSON).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// List read/write keys of a capture that the baseline does not whitelist.
    Diff {
        /// Baseline JSON from `learn`.
        #[arg(long, value_name = "FILE")]
        baseline: PathBuf,
        /// Capture to compare.
        #[arg(long, value_name = "PCAP")]
        input: PathBuf,
        /// Diff output path (JSON).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Validate diffed keys and turn them into attack signatures.
    Sign {
        /// Baseline JSON (supplies the GGIO component map).
        #[arg(long, value_name = "FILE")]
        baseline: PathBuf,
        /// Diff JSON from `diff`.
        #[arg(long, value_name = "FILE")]
        diff: PathBuf,
        /// Signature output path (JSON).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Match a capture against baseline and signatures; exit 2 on blocking paths.
    Detect {
        /// Baseline JSON from `learn`.
        #[arg(long, value_name = "FILE")]
        baseline: PathBuf,
        /// Signature JSON from `sign`; defaults to the built-in set.
        #[arg(long, value_name = "FILE")]
        signatures: Option<PathBuf>,
        /// Capture to scan.
        #[arg(long, value_name = "PCAP")]
        input: PathBuf,
        /// Report format.
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Shorthand for --format json.
        #[arg(long, conflicts_with = "format")]
        json: bool,
        /// Report output path; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Compile signatures into filtering rules.
    Rulegen {
        /// Signature JSON from `sign`.
        #[arg(long, value_name = "FILE")]
        signatures: PathBuf,
        /// Rule file output path (native rule DSL).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// First SID to assign.
        #[arg(long, default_value_t = SID_BASE_MIN)]
        sid_base: u32,
        /// Also write an approximate Suricata-flavored export here.
        #[arg(long, value_name = "FILE")]
        suricata: Option<PathBuf>,
    },
    /// Apply rules to a capture and write the frames that pass.
    Filter {
        /// Rule file from `rulegen`.
        #[arg(long, value_name = "FILE")]
        rules: PathBuf,
        /// Capture to filter.
        #[arg(long, value_name = "PCAP")]
        input: PathBuf,
        /// Filtered pcap output path.
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Baseline JSON; enriches dropped-frame paths with components.
        #[arg(long, value_name = "FILE")]
        baseline: Option<PathBuf>,
        /// Also drop frames that cannot be decoded as MMS.
        #[arg(long)]
        fail_closed: bool,
        /// Write alert events as JSON lines here.
        #[arg(long, value_name = "FILE")]
        alerts: Option<PathBuf>,
    },
    /// Generate a deterministic, labelled synthetic capture.
    Synth {
        #[command(flatten)]
        source: ScenarioSource,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Capture output path (pcap).
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Write the per-frame label manifest here (JSON).
        #[arg(long, value_name = "FILE")]
        manifest: Option<PathBuf>,
        /// Write the effective scenario config here (JSON), for reruns.
        #[arg(long, value_name = "FILE")]
        write_config: Option<PathBuf>,
    },
    /// Render a detection report for a capture; always exits 0.
    Report {
        /// Baseline JSON from `learn`.
        #[arg(long, value_name = "FILE")]
        baseline: PathBuf,
        /// Signature JSON from `sign`; defaults to the built-in set.
        #[arg(long, value_name = "FILE")]
        signatures: Option<PathBuf>,
        /// Capture to report on.
        #[arg(long, value_name = "PCAP")]
        input: PathBuf,
        /// Report format.
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
        /// Shorthand for --format json.
        #[arg(long, conflicts_with = "format")]
        json: bool,
        /// Report output path; stdout when omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// learn → diff → sign → rulegen → report over a benign/attack pair.
    Pipeline {
        /// Benign capture to learn the baseline from.
        #[arg(long, value_name = "PCAP")]
        benign: PathBuf,
        /// Suspect capture to extract signatures from.
        #[arg(long, value_name = "PCAP")]
        attack: PathBuf,
        /// Output directory for baseline.json, signatures.json,
        /// rules.rules, and report.txt (created if missing).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// First SID to assign when compiling rules.
        #[arg(long, default_value_t = SID_BASE_MIN)]
        sid_base: u32,
    },
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
            // clap routes help to stdout and errors (with usage) to stderr.
            let _ = err.print();
            std::process::exit(code);
        }
    };
    match run(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(EXIT_ERROR);
        }
    }
}

fn run(command: Command) -> anyhow::Result<i32> {
    match command {
        Command::Learn { inputs, out } => cmd_learn(&inputs, &out),
        Command::Diff { baseline, input, out } => cmd_diff(&baseline, &input, &out),
        Command::Sign { baseline, diff, out } => cmd_sign(&baseline, &diff, &out),
        Command::Detect { baseline, signatures, input, format, json, out } => {
            let detection = run_detection(&baseline, signatures.as_deref(), &input)?;
            emit_report(&detection, pick_format(format, json), out.as_deref())?;
            Ok(if detection.has_blocking() { EXIT_BLOCKING } else { EXIT_OK })
        }
        Command::Report { baseline, signatures, input, format, json, out } => {
            let detection = run_detection(&baseline, signatures.as_deref(), &input)?;
            emit_report(&detection, pick_format(format, json), out.as_deref())?;
            Ok(EXIT_OK)
        }
        Command::Rulegen { signatures, out, sid_base, suricata } => {
            cmd_rulegen(&signatures, &out, sid_base, suricata.as_deref())
        }
        Command::Filter { rules, input, out, baseline, fail_closed, alerts } => {
            cmd_filter(&rules, &input, &out, baseline.as_deref(), fail_closed, alerts.as_deref())
        }
        Command::Synth { source, seed, out, manifest, write_config } => {
            cmd_synth(&source, seed, &out, manifest.as_deref(), write_config.as_deref())
        }
        Command::Pipeline { benign, attack, out, sid_base } => {
            cmd_pipeline(&benign, &attack, &out, sid_base)
        }
    }
}

// ---------------------------------------------------------------------------
// shared plumbing

/// Fails early with a readable message when an input file is missing.
fn require_file(path: &Path, role: &str) -> anyhow::Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        bail!("{role} file not found: {}", path.display())
    }
}

/// Writes through a sibling temp file and renames it into place, so
/// the destination is either the old content or the complete new one.
fn write_atomic<E>(path: &Path, write: impl FnOnce(&Path) -> Result<(), E>) -> anyhow::Result<()>
where
    E: Into<anyhow::Error>,
{
    let file_name = path
        .file_name()
        .ok_or_else(|| anyhow!("output path has no file name: {}", path.display()))?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    let result = write(&tmp)
        .map_err(Into::into)
        .and_then(|()| fs::rename(&tmp, path).map_err(anyhow::Error::from));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.with_context(|| format!("writing {}", path.display()))
}

fn write_text_atomic(path: &Path, text: &str) -> anyhow::Result<()> {
    write_atomic(path, |p| fs::write(p, text))
}

fn read_capture(path: &Path) -> anyhow::Result<Vec<RawFrame>> {
    require_file(path, "capture")?;
    read_pcap(path).with_context(|| format!("reading {}", path.display()))
}

fn load_baseline_arg(path: &Path) -> anyhow::Result<Baseline> {
    require_file(path, "baseline")?;
    load_baseline(path).with_context(|| format!("loading baseline {}", path.display()))
}

/// Decodes a capture once and returns its request records plus the
/// GGIO component map discovered from directory responses.
fn records_and_components(
    frames: &[RawFrame],
) -> (Vec<ExtractedRecord>, BTreeMap<String, String>) {
    let decode = decode_capture(frames);
    let components = build_ggio_map(&decode.pdus).map;
    let records = records_with_frames(&decode).into_iter().map(|(_, r)| r).collect();
    (records, components)
}

fn pick_format(format: Format, json: bool) -> ReportFormat {
    if json { ReportFormat::Json } else { format.into() }
}

fn emit_report(
    detection: &Detection,
    format: ReportFormat,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let rendered = render_report(detection, format);
    match out {
        Some(path) => write_text_atomic(path, &rendered),
        None => {
            print!("{rendered}");
            Ok(())
        }
    }
}

fn run_detection(
    baseline_path: &Path,
    signatures_path: Option<&Path>,
    input: &Path,
) -> anyhow::Result<Detection> {
    let baseline = load_baseline_arg(baseline_path)?;
    let signatures = match signatures_path {
        Some(path) => {
            require_file(path, "signatures")?;
            load_signatures(path).with_context(|| format!("loading {}", path.display()))?
        }
        None => builtin_signatures(),
    };
    let frames = read_capture(input)?;
    let (records, _) = extract(&frames);
    Ok(detect(&records, &baseline, &signatures))
}

// ---------------------------------------------------------------------------
// subcommands

fn cmd_learn(inputs: &[PathBuf], out: &Path) -> anyhow::Result<i32> {
    for path in inputs {
        require_file(path, "capture")?;
    }
    let mut records = Vec::new();
    let mut components = BTreeMap::new();
    let mut sources = Vec::new();
    for path in inputs {
        let frames = read_capture(path)?;
        let (capture_records, capture_components) = records_and_components(&frames);
        records.extend(capture_records);
        components.extend(capture_components);
        sources.push(path.display().to_string());
    }
    let baseline = learn(&records, components, sources)?;
    write_atomic(out, |p| save_baseline(p, &baseline))?;
    eprintln!(
        "learned {} read keys, {} write keys, {} components from {} records",
        baseline.read_whitelist.len(),
        baseline.write_whitelist.len(),
        baseline.ggio_map.len(),
        records.len()
    );
    Ok(EXIT_OK)
}

fn cmd_diff(baseline_path: &Path, input: &Path, out: &Path) -> anyhow::Result<i32> {
    let baseline = load_baseline_arg(baseline_path)?;
    let frames = read_capture(input)?;
    let (records, _) = extract(&frames);
    let diffed = diff(&baseline, &records);
    let text = serde_json::to_string_pretty(&diffed)? + "\n";
    write_text_atomic(out, &text)?;
    eprintln!(
        "diff: {} novel read keys, {} novel write keys",
        diffed.potential_read.len(),
        diffed.potential_write.len()
    );
    Ok(EXIT_OK)
}

fn cmd_sign(baseline_path: &Path, diff_path: &Path, out: &Path) -> anyhow::Result<i32> {
    let baseline = load_baseline_arg(baseline_path)?;
    require_file(diff_path, "diff")?;
    let diffed: DiffResult = serde_json::from_str(&fs::read_to_string(diff_path)?)
        .with_context(|| format!("parsing {}", diff_path.display()))?;
    let outcome = validate_and_sign(&diffed, &baseline.ggio_map);
    write_atomic(out, |p| save_signatures(p, &outcome.signatures))?;
    for discarded in &outcome.discarded {
        eprintln!(
            "discarded {}/{}: {}",
            discarded.domain_id, discarded.item_id, discarded.reason
        );
    }
    eprintln!("signed {} signatures", outcome.signatures.len());
    Ok(EXIT_OK)
}

fn cmd_rulegen(
    signatures_path: &Path,
    out: &Path,
    sid_base: u32,
    suricata: Option<&Path>,
) -> anyhow::Result<i32> {
    require_file(signatures_path, "signatures")?;
    let signatures = load_signatures(signatures_path)
        .with_context(|| format!("loading {}", signatures_path.display()))?;
    let rules = compile(&signatures, sid_base)?;
    write_text_atomic(out, &emit_dsl(&rules))?;
    if let Some(path) = suricata {
        write_text_atomic(path, &export_suricata_like(&rules))?;
    }
    eprintln!("compiled {} rules starting at sid {}", rules.len(), sid_base);
    Ok(EXIT_OK)
}

fn cmd_filter(
    rules_path: &Path,
    input: &Path,
    out: &Path,
    baseline_path: Option<&Path>,
    fail_closed: bool,
    alerts: Option<&Path>,
) -> anyhow::Result<i32> {
    require_file(rules_path, "rules")?;
    let rules = parse_dsl(&fs::read_to_string(rules_path)?)
        .with_context(|| format!("parsing {}", rules_path.display()))?;
    let baseline = baseline_path.map(load_baseline_arg).transpose()?;
    let frames = read_capture(input)?;
    let outcome = filter(&frames, &rules, baseline.as_ref(), FilterPolicy { fail_closed });
    write_atomic(out, |p| write_filtered(p, &outcome))?;
    if let Some(path) = alerts {
        write_text_atomic(path, &alerts_to_json_lines(&outcome.alerts))?;
    }
    println!("{}", outcome.summary());
    Ok(EXIT_OK)
}

fn cmd_synth(
    source: &ScenarioSource,
    seed: Option<u64>,
    out: &Path,
    manifest_path: Option<&Path>,
    write_config: Option<&Path>,
) -> anyhow::Result<i32> {
    let mut config = match (&source.preset, &source.config) {
        (Some(name), None) => preset(name).ok_or_else(|| {
            anyhow!("unknown preset '{name}' (available: {})", PRESET_NAMES.join(", "))
        })?,
        (None, Some(path)) => {
            require_file(path, "config")?;
            load_config(path).with_context(|| format!("loading {}", path.display()))?
        }
        // clap's argument group guarantees exactly one source.
        _ => unreachable!("scenario source group"),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let (frames, manifest) = synthesize(&config)?;
    write_atomic(out, |p| write_pcap(p, &frames))?;
    if let Some(path) = manifest_path {
        write_atomic(path, |p| save_manifest(p, &manifest))?;
    }
    if let Some(path) = write_config {
        write_atomic(path, |p| save_config(p, &config))?;
    }
    let attacks: usize = manifest
        .counts
        .iter()
        .filter(|(kind, _)| kind.name().starts_with("ATTACK_"))
        .map(|(_, n)| n)
        .sum();
    eprintln!("synthesized {} frames ({} attack) with seed {}", frames.len(), attacks, config.seed);
    Ok(EXIT_OK)
}

fn cmd_pipeline(
    benign: &Path,
    attack: &Path,
    out_dir: &Path,
    sid_base: u32,
) -> anyhow::Result<i32> {
    require_file(benign, "benign capture")?;
    require_file(attack, "attack capture")?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    // Learn the whitelist and component map from the benign capture.
    let benign_frames = read_capture(benign)?;
    let (benign_records, components) = records_and_components(&benign_frames);
    let baseline = learn(&benign_records, components, vec![benign.display().to_string()])?;
    write_atomic(&out_dir.join("baseline.json"), |p| save_baseline(p, &baseline))?;

    // Diff the suspect capture and sign what does not belong.
    let attack_frames = read_capture(attack)?;
    let (attack_records, _) = extract(&attack_frames);
    let diffed = diff(&baseline, &attack_records);
    let outcome = validate_and_sign(&diffed, &baseline.ggio_map);
    write_atomic(&out_dir.join("signatures.json"), |p| save_signatures(p, &outcome.signatures))?;

    // Compile rules and report the reconstructed attack paths.
    let rules = compile(&outcome.signatures, sid_base)?;
    write_text_atomic(&out_dir.join("rules.rules"), &emit_dsl(&rules))?;
    let detection = detect(&attack_records, &baseline, &outcome.signatures);
    write_text_atomic(
        &out_dir.join("report.txt"),
        &render_report(&detection, ReportFormat::Text),
    )?;

    eprintln!(
        "pipeline: {} whitelist keys, {} signatures, {} rules, {} attack paths → {}",
        baseline.read_whitelist.len() + baseline.write_whitelist.len(),
        outcome.signatures.len(),
        rules.len(),
        detection.paths.len(),
        out_dir.display()
    );
    Ok(EXIT_OK)
}
