//! Acceptance gate: one test per criterion, each printing a single
//! `acceptance <name>: PASS|FAIL` line (visible with
//! `cargo test --test acceptance -- --nocapture`).
//!
//! The criteria exercise the whole loop on synthetic scenarios:
//! signature extraction from diffed attack traffic, zero benign false
//! positives, full attack recall with correct path reconstruction,
//! filter closure, codec robustness under random and mutated input,
//! learn/diff consistency, throughput, and rule-DSL round-tripping.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use mmsguard::baseline::{
    build_ggio_map, builtin_signatures, diff, learn, validate_and_sign, Baseline, ItemPattern,
    OrIdentForm, Severity, SID_BASE_MIN,
};
use mmsguard::codec::ber;
use mmsguard::codec::mms::{
    decode_mms, encode_mms, read_response_payload, variable_list_response_payload,
    write_response_payload, MmsMessage, ObjectName, OperPayload, ServiceTag, UtcTimestamp,
    WriteItem,
};
use mmsguard::detect::detect;
use mmsguard::engine::{filter, FilterPolicy};
use mmsguard::extract::{decode_capture, extract, ExtractedRecord};
use mmsguard::rulegen::{compile, emit_dsl, parse_dsl, NidsRule, RuleAction, RuleMatch};
use mmsguard::synth::{preset, synthesize, FrameKind};
use mmsguard::wire::{build_tcp_frame, TcpFrameSpec};

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn criterion(name: &str, run: impl FnOnce() -> Result<(), String>) {
    match run() {
        Ok(()) => println!("acceptance {name}: PASS"),
        Err(why) => {
            println!("acceptance {name}: FAIL ({why})");
            panic!("{name}: {why}");
        }
    }
}

/// Baseline learned from the benign preset, GGIO map included.
fn trained_baseline() -> Baseline {
    let config = preset("scenario1_scaled").expect("preset exists");
    let (frames, _) = synthesize(&config).expect("benign synthesis");
    let (records, _) = extract(&frames);
    let map = build_ggio_map(&decode_capture(&frames).pdus).map;
    learn(&records, map, vec!["scenario1_scaled".to_string()]).expect("non-empty benign")
}

#[test]
fn c1_signatures_extracted_from_attack_diff() {
    criterion("c1 signature-extraction", || {
        let started = Instant::now();
        let baseline = trained_baseline();

        let (attack_frames, _) = synthesize(&preset("mixed").unwrap()).unwrap();
        let (attack_records, _) = extract(&attack_frames);
        let diffed = diff(&baseline, &attack_records);
        ensure!(
            diffed.potential_read.is_empty(),
            "benign reads of the attack capture leaked into the diff"
        );
        ensure!(
            diffed.potential_write.len() == 2,
            "expected 2 novel write tuples, got {}",
            diffed.potential_write.len()
        );

        let outcome = validate_and_sign(&diffed, &baseline.ggio_map);
        ensure!(outcome.discarded.is_empty(), "validation discarded a real candidate");
        ensure!(
            outcome.signatures.len() == 2,
            "expected exactly 2 signatures, got {}",
            outcome.signatures.len()
        );

        let by_id = |id: &str| outcome.signatures.iter().find(|s| s.id == id);
        let gui = by_id("write-acc-0a0a-ident-zero64")
            .ok_or("missing zero64 write signature")?;
        ensure!(gui.service == ServiceTag::Write, "gui signature service");
        ensure!(gui.time_acc == Some((0x0A, 0x0A)), "gui signature accuracy");
        ensure!(gui.or_ident_form == OrIdentForm::AllZero64, "gui signature ident form");
        ensure!(gui.severity() == Severity::Blocking, "gui signature severity");
        ensure!(
            gui.description.contains("CircuitBreaker"),
            "gui signature should resolve the attacked component"
        );

        let script = by_id("write-acc-0a00-ident-absent")
            .ok_or("missing ident-absent write signature")?;
        ensure!(script.time_acc == Some((0x0A, 0x00)), "script signature accuracy");
        ensure!(script.or_ident_form == OrIdentForm::Absent, "script signature ident form");
        ensure!(script.severity() == Severity::Blocking, "script signature severity");

        let elapsed = started.elapsed();
        ensure!(
            elapsed < Duration::from_secs(5),
            "learning + diffing + signing took {elapsed:?} (budget 5s)"
        );
        Ok(())
    });
}

#[test]
fn c2_benign_traffic_raises_no_blocking_detections() {
    criterion("c2 benign-false-positives", || {
        let baseline = trained_baseline();
        let signatures = builtin_signatures();
        let rules = compile(&signatures, SID_BASE_MIN).unwrap();

        let (frames, _) = synthesize(&preset("scenario1_scaled").unwrap()).unwrap();
        let (records, _) = extract(&frames);
        let detection = detect(&records, &baseline, &signatures);
        ensure!(
            detection.paths.is_empty(),
            "benign capture produced {} attack paths",
            detection.paths.len()
        );
        ensure!(!detection.has_blocking(), "benign capture flagged as blocking");
        ensure!(
            detection.stats.novel == 0,
            "{} benign records classified novel",
            detection.stats.novel
        );

        let outcome = filter(&frames, &rules, Some(&baseline), FilterPolicy::default());
        ensure!(
            outcome.dropped.is_empty(),
            "filter dropped {} benign frames",
            outcome.dropped.len()
        );
        ensure!(outcome.passed.len() == frames.len(), "benign frames went missing");
        Ok(())
    });
}

#[test]
fn c3_full_attack_recall_with_correct_paths() {
    criterion("c3 attack-recall", || {
        let baseline = trained_baseline();
        let signatures = builtin_signatures();
        let rules = compile(&signatures, SID_BASE_MIN).unwrap();
        let bean_ip = Ipv4Addr::new(172, 16, 4, 201);
        let script_ip = Ipv4Addr::new(172, 16, 5, 103);
        let plc_ip = Ipv4Addr::new(172, 16, 3, 41);

        for n in [10usize, 100, 1000] {
            let mut config = preset("mixed").unwrap();
            config.attack_plan[0].count = n;
            config.attack_plan[1].count = n;
            let (frames, manifest) = synthesize(&config).unwrap();
            let (records, _) = extract(&frames);

            let detection = detect(&records, &baseline, &signatures);
            ensure!(
                detection.paths.len() == 2 * n,
                "n={n}: expected {} paths, got {}",
                2 * n,
                detection.paths.len()
            );
            ensure!(detection.stats.novel == 0, "n={n}: benign mixed traffic marked novel");
            for path in &detection.paths {
                ensure!(path.target_ip == plc_ip, "n={n}: wrong target {}", path.target_ip);
                ensure!(
                    path.operation == ServiceTag::Write,
                    "n={n}: wrong operation {:?}",
                    path.operation
                );
                ensure!(
                    path.component.as_deref() == Some("CircuitBreaker"),
                    "n={n}: component not resolved"
                );
                ensure!(path.severity == Severity::Blocking, "n={n}: severity");
                let expected_sig = if path.origin_ip == bean_ip {
                    "write-acc-0a0a-ident-zero64"
                } else if path.origin_ip == script_ip {
                    "write-acc-0a00-ident-absent"
                } else {
                    return Err(format!("n={n}: unexpected origin {}", path.origin_ip));
                };
                ensure!(
                    path.signature_id == expected_sig,
                    "n={n}: origin {} matched {} instead of {}",
                    path.origin_ip,
                    path.signature_id,
                    expected_sig
                );
            }

            // Frame-level recall: the filter must drop exactly the
            // attack-labeled frames.
            let outcome = filter(&frames, &rules, Some(&baseline), FilterPolicy::default());
            let attack_frames: Vec<usize> = manifest
                .labels
                .iter()
                .enumerate()
                .filter(|(_, k)| matches!(k, FrameKind::AttackBean | FrameKind::AttackScript))
                .map(|(i, _)| i)
                .collect();
            let dropped: Vec<usize> = outcome.dropped.iter().map(|d| d.frame_index).collect();
            ensure!(
                dropped == attack_frames,
                "n={n}: dropped frames {:?}.. != attack frames {:?}..",
                &dropped[..dropped.len().min(4)],
                &attack_frames[..attack_frames.len().min(4)]
            );
        }
        Ok(())
    });
}

#[test]
fn c4_filter_is_idempotent() {
    criterion("c4 filter-closure", || {
        let rules = compile(&builtin_signatures(), SID_BASE_MIN).unwrap();
        let (mut frames, _) = synthesize(&preset("mixed").unwrap()).unwrap();
        // An undecodable frame keeps the closure honest under the
        // fail-closed policy too.
        frames.push(build_tcp_frame(&TcpFrameSpec {
            ts_secs: 1_700_002_000,
            ts_micros: 0,
            src: Ipv4Addr::new(172, 16, 4, 201),
            dst: Ipv4Addr::new(172, 16, 3, 41),
            src_port: 40000,
            dst_port: 102,
            seq: 1,
            ack: 1,
            payload: vec![0xEE; 40],
        }));

        for fail_closed in [false, true] {
            let policy = FilterPolicy { fail_closed };
            let first = filter(&frames, &rules, None, policy);
            ensure!(
                first.passed.len() + first.dropped.len() == frames.len(),
                "fail_closed={fail_closed}: first pass lost frames"
            );
            ensure!(!first.dropped.is_empty(), "fail_closed={fail_closed}: nothing dropped");

            let second = filter(&first.passed, &rules, None, policy);
            ensure!(
                second.dropped.is_empty(),
                "fail_closed={fail_closed}: second pass dropped {} more frames",
                second.dropped.len()
            );
            ensure!(
                second.passed.len() == first.passed.len(),
                "fail_closed={fail_closed}: second pass lost frames"
            );
        }
        Ok(())
    });
}

const IDENT_CHARS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789$_";

fn random_ident(rng: &mut ChaCha20Rng) -> String {
    let len = rng.random_range(1..=16);
    (0..len).map(|_| IDENT_CHARS[rng.random_range(0..IDENT_CHARS.len())] as char).collect()
}

fn random_name(rng: &mut ChaCha20Rng) -> ObjectName {
    ObjectName::new(&random_ident(rng), &random_ident(rng)).expect("charset is valid")
}

fn random_oper(rng: &mut ChaCha20Rng) -> OperPayload {
    let or_ident = match rng.random_range(0..4) {
        0 => None,
        1 => Some(Vec::new()),
        2 => Some(vec![0u8; 64]),
        _ => {
            let len = rng.random_range(1..=64);
            Some((0..len).map(|_| rng.random()).collect())
        }
    };
    OperPayload {
        ctl_val: rng.random(),
        oper_tm: UtcTimestamp::new(rng.random(), rng.random::<u32>() & 0x00FF_FFFF, rng.random()),
        or_cat: rng.random_range(0..=8),
        or_ident,
        ctl_num: rng.random(),
        t: UtcTimestamp::new(rng.random(), rng.random::<u32>() & 0x00FF_FFFF, rng.random()),
        test: rng.random(),
        check: rng.random_range(0..=3),
    }
}

fn random_message(rng: &mut ChaCha20Rng) -> MmsMessage {
    let invoke = rng.random_range(0..=u32::from(u16::MAX));
    match rng.random_range(0..5) {
        0 => {
            let names = (0..rng.random_range(1..=3)).map(|_| random_name(rng)).collect();
            MmsMessage::read_request(invoke, names)
        }
        1 => {
            let items = (0..rng.random_range(1..=2))
                .map(|_| WriteItem::with_oper(random_name(rng), random_oper(rng)))
                .collect();
            MmsMessage::write_request(invoke, items)
        }
        2 => {
            let len = rng.random_range(0..=16);
            let value: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            let raw = ber::tlv(0x83, &value).expect("bounded");
            MmsMessage::write_request(
                invoke,
                vec![WriteItem::with_raw_value(random_name(rng), raw)],
            )
        }
        3 => MmsMessage::variable_list_request(invoke, random_name(rng)),
        _ => match rng.random_range(0..3) {
            0 => MmsMessage::response(
                invoke,
                ServiceTag::Read,
                read_response_payload(rng.random_range(1..=4)),
            ),
            1 => MmsMessage::response(
                invoke,
                ServiceTag::Write,
                write_response_payload(rng.random_range(1..=4)),
            ),
            _ => {
                let members: Vec<ObjectName> =
                    (0..rng.random_range(0..=3)).map(|_| random_name(rng)).collect();
                MmsMessage::response(
                    invoke,
                    ServiceTag::GetNamedVariableListAttributes,
                    variable_list_response_payload(&members),
                )
            }
        },
    }
}

#[test]
fn c5_codec_roundtrips_and_survives_fuzzing() {
    criterion("c5 codec-robustness", || {
        let mut rng = ChaCha20Rng::seed_from_u64(0xC0DEC);

        // 100k structured round trips: encode → decode → re-encode
        // must reproduce the original bytes.
        for i in 0..100_000 {
            let msg = random_message(&mut rng);
            let encoded = encode_mms(&msg).map_err(|e| format!("iteration {i}: encode: {e}"))?;
            let decoded =
                decode_mms(&encoded).map_err(|e| format!("iteration {i}: decode: {e}"))?;
            let reencoded = encode_mms(&decoded)
                .map_err(|e| format!("iteration {i}: re-encode: {e}"))?;
            ensure!(reencoded == encoded, "iteration {i}: round trip changed bytes");
        }

        // 1M random buffers through the TLV decoder: errors are fine,
        // panics and hangs are not.
        let mut buf = [0u8; 64];
        for _ in 0..1_000_000 {
            let len = rng.random_range(0..=buf.len());
            rng.fill(&mut buf[..len]);
            let _ = ber::decode_tlv(&buf[..len], 0);
        }

        // 100k random buffers through the full MMS decoder.
        let mut big = [0u8; 96];
        for _ in 0..100_000 {
            let len = rng.random_range(0..=big.len());
            rng.fill(&mut big[..len]);
            let _ = decode_mms(&big[..len]);
        }

        // 100k mutations of valid PDUs: flip a few bytes, decode.
        let samples: Vec<Vec<u8>> =
            (0..32).map(|_| encode_mms(&random_message(&mut rng)).unwrap()).collect();
        for _ in 0..100_000 {
            let mut bytes = samples[rng.random_range(0..samples.len())].clone();
            for _ in 0..rng.random_range(1..=3) {
                let at = rng.random_range(0..bytes.len());
                bytes[at] = rng.random();
            }
            let _ = decode_mms(&bytes);
        }
        Ok(())
    });
}

fn random_record(rng: &mut ChaCha20Rng, domains: &[String], items: &[String]) -> ExtractedRecord {
    let service = if rng.random_bool(0.7) { ServiceTag::Read } else { ServiceTag::Write };
    let (time_acc, or_ident, or_cat) = if service == ServiceTag::Write && rng.random_bool(0.8) {
        let ident = match rng.random_range(0..4) {
            0 => None,
            1 => Some(Vec::new()),
            2 => Some(vec![0u8; 64]),
            _ => Some(vec![rng.random(); rng.random_range(1..=8)]),
        };
        (Some((rng.random(), rng.random())), ident, Some(rng.random_range(0..=8)))
    } else {
        (None, None, None)
    };
    ExtractedRecord {
        ts_micros: rng.random_range(0..10_000_000),
        src_ip: Ipv4Addr::new(10, 0, 0, rng.random_range(1..=20)),
        dst_ip: Ipv4Addr::new(10, 0, 1, 1),
        service,
        domain_id: domains[rng.random_range(0..domains.len())].clone(),
        item_id: items[rng.random_range(0..items.len())].clone(),
        time_acc,
        or_ident,
        or_cat,
    }
}

#[test]
fn c6_learn_then_diff_is_empty_and_monotone() {
    criterion("c6 learn-diff-consistency", || {
        let mut rng = ChaCha20Rng::seed_from_u64(0x1EA2);
        let domains: Vec<String> = (0..3).map(|_| random_ident(&mut rng)).collect();
        let items: Vec<String> = (0..12).map(|_| random_ident(&mut rng)).collect();

        for trial in 0..100 {
            let base: Vec<ExtractedRecord> = (0..rng.random_range(1..=200))
                .map(|_| random_record(&mut rng, &domains, &items))
                .collect();
            let learned = learn(&base, BTreeMap::new(), vec![])
                .map_err(|e| format!("trial {trial}: learn: {e}"))?;
            ensure!(
                diff(&learned, &base).is_empty(),
                "trial {trial}: diff(learn(R), R) is not empty"
            );

            // Monotonicity: learning more never shrinks the whitelist,
            // and the superset baseline still covers the original set.
            let mut extended = base.clone();
            extended.extend(
                (0..rng.random_range(1..=100)).map(|_| random_record(&mut rng, &domains, &items)),
            );
            let relearned = learn(&extended, BTreeMap::new(), vec![]).unwrap();
            ensure!(
                learned.read_whitelist.is_subset(&relearned.read_whitelist),
                "trial {trial}: read whitelist shrank"
            );
            ensure!(
                learned.write_whitelist.is_subset(&relearned.write_whitelist),
                "trial {trial}: write whitelist shrank"
            );
            ensure!(
                diff(&relearned, &base).is_empty(),
                "trial {trial}: superset baseline no longer covers the original records"
            );
        }
        Ok(())
    });
}

#[test]
fn c7_hundred_thousand_packets_within_budget() {
    criterion("c7 throughput", || {
        let baseline = trained_baseline();
        let signatures = builtin_signatures();

        let mut config = preset("scenario1_scaled").unwrap();
        for (task, count) in config.read_plan.iter_mut().zip([25_000, 6_250, 6_250, 6_250, 6_250])
        {
            task.count = count;
        }
        let (frames, _) = synthesize(&config).map_err(|e| format!("synthesis: {e}"))?;
        ensure!(
            frames.len() >= 100_000,
            "need at least 100k MMS packets, got {}",
            frames.len()
        );

        let started = Instant::now();
        let (records, report) = extract(&frames);
        let detection = detect(&records, &baseline, &signatures);
        let elapsed = started.elapsed();

        ensure!(report.decode_errors == 0, "decode errors in synthetic capture");
        ensure!(detection.stats.scanned == records.len(), "detector skipped records");
        ensure!(detection.paths.is_empty(), "benign throughput run produced paths");
        ensure!(
            elapsed < Duration::from_secs(10),
            "extract+detect over {} frames took {elapsed:?} (budget 10s)",
            frames.len()
        );
        Ok(())
    });
}

fn random_rule(rng: &mut ChaCha20Rng) -> NidsRule {
    let or_ident_form = match rng.random_range(0..5) {
        0 => OrIdentForm::Absent,
        1 => OrIdentForm::AllZero64,
        2 => OrIdentForm::Exact(String::new()),
        3 => {
            let len = rng.random_range(1..=8);
            let bytes: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            OrIdentForm::Exact(hex::encode(bytes))
        }
        _ => OrIdentForm::Any,
    };
    let item = match rng.random_range(0..3) {
        0 => None,
        1 => Some(ItemPattern::Exact(random_ident(rng))),
        _ => Some(ItemPattern::Prefix(random_ident(rng))),
    };
    let msg_len = rng.random_range(0..=40);
    let msg: String = (0..msg_len)
        .map(|_| char::from(rng.random_range(0x20u8..=0x7E)))
        .collect();
    NidsRule {
        sid: SID_BASE_MIN + rng.random_range(0..1_000_000),
        action: if rng.random() { RuleAction::Drop } else { RuleAction::Alert },
        match_spec: RuleMatch {
            service: rng.random(),
            time_acc: if rng.random() { Some((rng.random(), rng.random())) } else { None },
            or_ident_form,
            domain: if rng.random() { Some(random_ident(rng)) } else { None },
            item,
        },
        msg,
        rev: rng.random_range(1..=9),
    }
}

#[test]
fn c8_rule_dsl_roundtrips() {
    criterion("c8 rule-dsl-roundtrip", || {
        let compiled = compile(&builtin_signatures(), SID_BASE_MIN).unwrap();
        let parsed =
            parse_dsl(&emit_dsl(&compiled)).map_err(|e| format!("compiled rules: {e}"))?;
        ensure!(parsed == compiled, "compiled rules changed across the DSL");

        let mut rng = ChaCha20Rng::seed_from_u64(0xD51);
        for batch in 0..100 {
            let rules: Vec<NidsRule> =
                (0..rng.random_range(1..=10)).map(|_| random_rule(&mut rng)).collect();
            let text = emit_dsl(&rules);
            let parsed = parse_dsl(&text).map_err(|e| format!("batch {batch}: {e}"))?;
            ensure!(
                parsed == rules,
                "batch {batch}: rules changed across the DSL:\n{text}"
            );
        }
        Ok(())
    });
}
