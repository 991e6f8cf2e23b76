use std::ffi::{c_char, c_void, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use cuegraph_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cg_last_error()) }
        .to_str()
        .unwrap()
        .to_string()
}

fn take_string(raw: *mut c_char) -> String {
    assert!(!raw.is_null());
    let text = unsafe { CStr::from_ptr(raw) }.to_str().unwrap().to_string();
    unsafe { cg_string_free(raw) };
    text
}

fn generator_json(n: usize, seed: u64) -> CString {
    CString::new(format!(
        r#"{{
            "name": "smoke",
            "n_segments": {n},
            "seed": {seed},
            "scenarios": [
                {{
                    "name": "chat",
                    "weight": 0.5,
                    "cue_probs": {{
                        "osad": 0.9, "stad": 0.8, "aud": 0.8, "udsd": 0.7,
                        "pad": 0.8, "igd": 0.7, "ogd": 0.7, "sfd": 0.2
                    }}
                }},
                {{
                    "name": "alone",
                    "weight": 0.5,
                    "cue_probs": {{
                        "osad": 0.1, "stad": 0.0, "aud": 0.0, "udsd": 0.0,
                        "pad": 0.1, "igd": 0.0, "ogd": 0.0, "sfd": 0.8
                    }}
                }}
            ]
        }}"#
    ))
    .unwrap()
}

fn generate_manifest(n: usize, seed: u64) -> *mut CgManifest {
    let config = generator_json(n, seed);
    let mut handle: *mut CgManifest = ptr::null_mut();
    let status = unsafe { cg_manifest_generate(config.as_ptr(), &mut handle) };
    assert_eq!(status, CgStatus::Ok, "{}", last_error());
    assert!(!handle.is_null());
    handle
}

fn eager_bits(bits: u8) -> (bool, bool) {
    let id = CString::new("s").unwrap();
    let policy = CString::new("EAGER").unwrap();
    let mut interacting = false;
    let mut intervene_ok = false;
    let status = unsafe {
        cg_evaluate_bits(
            id.as_ptr(),
            policy.as_ptr(),
            bits,
            &mut interacting,
            &mut intervene_ok,
            ptr::null_mut(),
        )
    };
    assert_eq!(status, CgStatus::Ok, "{}", last_error());
    (interacting, intervene_ok)
}

#[test]
fn version_and_cue_tables() {
    let version = unsafe { CStr::from_ptr(cg_version()) }.to_str().unwrap();
    assert!(version.contains('.'), "odd version {version:?}");

    assert_eq!(cg_cue_count(), 8);
    let names: Vec<&str> = (0..8)
        .map(|i| unsafe { CStr::from_ptr(cg_cue_name(i)) }.to_str().unwrap())
        .collect();
    assert_eq!(
        names,
        ["OSAD", "STAD", "AUD", "UDSD", "PAD", "IGD", "OGD", "SFD"]
    );
    let aud = unsafe { CStr::from_ptr(cg_cue_question(2)) }
        .to_str()
        .unwrap();
    assert_eq!(aud, "Is someone talking to me?");
    assert!(cg_cue_name(8).is_null());
    assert!(cg_cue_question(99).is_null());
}

#[test]
fn manifest_round_trip_and_inspection() {
    let handle = generate_manifest(40, 11);

    let mut len = 0usize;
    assert_eq!(unsafe { cg_manifest_len(handle, &mut len) }, CgStatus::Ok);
    assert_eq!(len, 40);

    let mut violations = usize::MAX;
    assert_eq!(
        unsafe { cg_manifest_validate(handle, &mut violations) },
        CgStatus::Ok
    );
    assert_eq!(violations, 0);

    let mut id_raw: *mut c_char = ptr::null_mut();
    assert_eq!(
        unsafe { cg_manifest_segment_id(handle, 0, &mut id_raw) },
        CgStatus::Ok
    );
    assert_eq!(take_string(id_raw), "smoke-seg-000000");

    // Ground truth must equal AUD || UDSD (bits 2 and 3) on every segment.
    for index in 0..len {
        let mut bits = 0u8;
        let mut truth = false;
        let status = unsafe { cg_manifest_cues(handle, index, &mut bits, &mut truth) };
        assert_eq!(status, CgStatus::Ok);
        assert_eq!(truth, bits >> 2 & 1 == 1 || bits >> 3 & 1 == 1);
    }

    let status = unsafe { cg_manifest_cues(handle, len, ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(status, CgStatus::Failure);
    assert!(last_error().contains("out of range"), "{}", last_error());

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("smoke.jsonl").to_str().unwrap()).unwrap();
    assert_eq!(
        unsafe { cg_manifest_save(handle, path.as_ptr()) },
        CgStatus::Ok
    );

    let mut reloaded: *mut CgManifest = ptr::null_mut();
    assert_eq!(
        unsafe { cg_manifest_load(path.as_ptr(), &mut reloaded) },
        CgStatus::Ok,
        "{}",
        last_error()
    );
    let mut reloaded_len = 0usize;
    assert_eq!(
        unsafe { cg_manifest_len(reloaded, &mut reloaded_len) },
        CgStatus::Ok
    );
    assert_eq!(reloaded_len, len);

    // Determinism: same config, fresh handle, same first segment.
    let again = generate_manifest(40, 11);
    let (mut a, mut b) = (0u8, 0u8);
    unsafe {
        assert_eq!(
            cg_manifest_cues(handle, 7, &mut a, ptr::null_mut()),
            CgStatus::Ok
        );
        assert_eq!(
            cg_manifest_cues(again, 7, &mut b, ptr::null_mut()),
            CgStatus::Ok
        );
    }
    assert_eq!(a, b);

    unsafe {
        cg_manifest_free(handle);
        cg_manifest_free(reloaded);
        cg_manifest_free(again);
        cg_manifest_free(ptr::null_mut());
    }
}

#[test]
fn evaluate_bits_agrees_with_belief_formulas() {
    for bits in 0..=255u8 {
        let stad = bits >> 1 & 1 != 0;
        let aud = bits >> 2 & 1 != 0;
        let udsd = bits >> 3 & 1 != 0;
        let pad = bits >> 4 & 1 != 0;
        let igd = bits >> 5 & 1 != 0;
        let ogd = bits >> 6 & 1 != 0;
        let sfd = bits >> 7 & 1 != 0;
        let interacting = (pad && igd && aud) || (stad && udsd && ogd);
        let intervene_ok = !interacting && !sfd;

        assert_eq!(
            eager_bits(bits),
            (interacting, intervene_ok),
            "bits {bits:#010b}"
        );
    }
}

#[test]
fn evaluate_policies_and_decision_json() {
    let id = CString::new("seg-x").unwrap();
    for policy in ["SHORT_CIRCUIT", "HIERARCHICAL"] {
        let policy_c = CString::new(policy).unwrap();
        for bits in 0..=255u8 {
            let mut interacting = false;
            let mut intervene_ok = false;
            let status = unsafe {
                cg_evaluate_bits(
                    id.as_ptr(),
                    policy_c.as_ptr(),
                    bits,
                    &mut interacting,
                    &mut intervene_ok,
                    ptr::null_mut(),
                )
            };
            assert_eq!(status, CgStatus::Ok, "{}", last_error());
            let (eager_interacting, eager_ok) = eager_bits(bits);
            if policy == "SHORT_CIRCUIT" {
                assert_eq!((interacting, intervene_ok), (eager_interacting, eager_ok));
            } else {
                // Staged gating pins skipped cues to "no", so it can miss
                // interactions but never invent them, and it can only widen
                // the set of segments where interrupting is allowed.
                assert!(!interacting || eager_interacting, "bits {bits:#010b}");
                assert!(!eager_ok || intervene_ok, "bits {bits:#010b}");
            }
        }
    }

    let policy = CString::new("HIERARCHICAL").unwrap();
    let mut json_raw: *mut c_char = ptr::null_mut();
    let status = unsafe {
        cg_evaluate_bits(
            id.as_ptr(),
            policy.as_ptr(),
            0,
            ptr::null_mut(),
            ptr::null_mut(),
            &mut json_raw,
        )
    };
    assert_eq!(status, CgStatus::Ok, "{}", last_error());
    let json = take_string(json_raw);
    let decision: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(decision["segment_id"], "seg-x");
    let queried = decision["trace"]["steps"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|step| step["queried"] == true)
        .count();
    assert_eq!(queried, 3, "quiet scene should stop after the first stage");
}

extern "C" fn bit_source(cue_index: u32, user_data: *mut c_void) -> i32 {
    let bits = unsafe { *(user_data as *const u8) };
    (bits >> cue_index & 1) as i32
}

extern "C" fn failing_source(cue_index: u32, _user_data: *mut c_void) -> i32 {
    -(cue_index as i32) - 1
}

#[test]
fn evaluate_with_callback() {
    let id = CString::new("cb").unwrap();
    let policy = CString::new("EAGER").unwrap();
    for bits in [0u8, 0b0011_0100, 0xFF] {
        let mut via_callback = false;
        let status = unsafe {
            cg_evaluate(
                id.as_ptr(),
                policy.as_ptr(),
                Some(bit_source),
                &bits as *const u8 as *mut c_void,
                &mut via_callback,
                ptr::null_mut(),
                ptr::null_mut(),
            )
        };
        assert_eq!(status, CgStatus::Ok, "{}", last_error());
        assert_eq!(via_callback, eager_bits(bits).0);
    }

    let status = unsafe {
        cg_evaluate(
            id.as_ptr(),
            policy.as_ptr(),
            Some(failing_source),
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(status, CgStatus::Failure);
    assert!(
        last_error().contains("callback returned -1"),
        "{}",
        last_error()
    );

    let status = unsafe {
        cg_evaluate(
            id.as_ptr(),
            policy.as_ptr(),
            None,
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(status, CgStatus::NullArgument);
}

#[test]
fn metrics_and_answer_parsing() {
    let mut value = 0.0f64;
    assert_eq!(unsafe { cg_itm(50, 10, 5, 100, &mut value) }, CgStatus::Ok);
    assert!((value - 100.0 / 110.0).abs() < 1e-12);

    assert_eq!(unsafe { cg_sim(50, 10, 5, 100, &mut value) }, CgStatus::Ok);
    let f1_pos = 2.0 * 50.0 / (2.0 * 50.0 + 10.0 + 5.0);
    let f1_neg = 2.0 * 100.0 / (2.0 * 100.0 + 5.0 + 10.0);
    assert!((value - (f1_pos + f1_neg) / 2.0).abs() < 1e-12);

    assert_eq!(unsafe { cg_itm(5, 0, 2, 0, &mut value) }, CgStatus::Failure);
    assert!(!last_error().is_empty());

    let yes = CString::new("Yes, they are chatting.").unwrap();
    let no = CString::new("no").unwrap();
    let noise = CString::new("perhaps, hard to tell").unwrap();
    let mut answer = false;
    assert_eq!(
        unsafe { cg_parse_answer(yes.as_ptr(), &mut answer) },
        CgStatus::Ok
    );
    assert!(answer);
    assert_eq!(
        unsafe { cg_parse_answer(no.as_ptr(), &mut answer) },
        CgStatus::Ok
    );
    assert!(!answer);
    assert_eq!(
        unsafe { cg_parse_answer(noise.as_ptr(), &mut answer) },
        CgStatus::Failure
    );
}

#[test]
fn run_experiment_from_json() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("run");
    let config = CString::new(format!(
        r#"{{
            "dataset": {{ "generate": {} }},
            "backend": {{ "kind": "oracle" }},
            "modality": {{ "mode": "AUDIO_VIDEO", "frame_budget": 10 }},
            "variant": "auto",
            "policy": "EAGER",
            "component_mask": "FULL",
            "output_dir": {},
            "parallelism": 2,
            "seed": 7
        }}"#,
        generator_json(30, 5).to_str().unwrap(),
        serde_json::to_string(out_dir.to_str().unwrap()).unwrap(),
    ))
    .unwrap();

    let mut report_raw: *mut c_char = ptr::null_mut();
    let status = unsafe { cg_run_experiment(config.as_ptr(), &mut report_raw) };
    assert_eq!(status, CgStatus::Ok, "{}", last_error());
    let report = take_string(report_raw);
    let parsed: serde_json::Value = serde_json::from_str(&report).unwrap();

    // Oracle cue answers can complete a belief conjunction only when the
    // segment really interacts, so false positives are impossible and itm
    // is exactly 1; missed conjunctions still cost false negatives, which
    // sim must reflect.
    let cm = &parsed["interaction_confusion"];
    let count = |k: &str| cm[k].as_u64().unwrap();
    assert_eq!(count("fp"), 0);
    assert_eq!(count("tp") + count("fp") + count("fn") + count("tn"), 30);
    assert_eq!(parsed["itm"], 1.0);
    let mut expected_sim = 0.0f64;
    let status = unsafe {
        cg_sim(
            count("tp"),
            count("fp"),
            count("fn"),
            count("tn"),
            &mut expected_sim,
        )
    };
    assert_eq!(status, CgStatus::Ok, "{}", last_error());
    assert!((parsed["sim"].as_f64().unwrap() - expected_sim).abs() < 1e-12);
    assert_eq!(parsed["parse_failure_count"], 0);
    assert!(out_dir.join("records.jsonl").exists());
    assert!(out_dir.join("report.json").exists());

    let garbage = CString::new("{\"dataset\":").unwrap();
    let status = unsafe { cg_run_experiment(garbage.as_ptr(), &mut report_raw) };
    assert_eq!(status, CgStatus::Failure);
}

#[test]
fn null_and_encoding_errors() {
    let mut handle: *mut CgManifest = ptr::null_mut();
    assert_eq!(
        unsafe { cg_manifest_load(ptr::null(), &mut handle) },
        CgStatus::NullArgument
    );
    assert!(last_error().contains("null"));

    let bad_utf8 = [0xFFu8, 0xFE, 0x00];
    assert_eq!(
        unsafe { cg_manifest_load(bad_utf8.as_ptr() as *const c_char, &mut handle) },
        CgStatus::Utf8Error
    );
    assert!(last_error().contains("UTF-8"));

    let missing = CString::new("/nonexistent/smoke.jsonl").unwrap();
    assert_eq!(
        unsafe { cg_manifest_load(missing.as_ptr(), &mut handle) },
        CgStatus::Failure
    );
    assert!(
        last_error().contains("/nonexistent/smoke.jsonl"),
        "{}",
        last_error()
    );

    let id = CString::new("s").unwrap();
    let lazy = CString::new("LAZY").unwrap();
    let status = unsafe {
        cg_evaluate_bits(
            id.as_ptr(),
            lazy.as_ptr(),
            0,
            ptr::null_mut(),
            ptr::null_mut(),
            ptr::null_mut(),
        )
    };
    assert_eq!(status, CgStatus::Failure);
    assert!(last_error().contains("gate policy"), "{}", last_error());

    unsafe { cg_string_free(ptr::null_mut()) };
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn find_compiler() -> Option<&'static str> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|cc| Command::new(cc).arg("--version").output().is_ok())
}

const C_DEMO: &str = r#"
#include <stdio.h>
#include <string.h>
#include <math.h>
#include "cuegraph.h"

int main(void) {
    if (strlen(cg_version()) == 0) return 1;
    if (cg_cue_count() != 8) return 2;

    bool interacting = false, ok_to_interrupt = true;
    if (cg_evaluate_bits("c-demo", "EAGER", 0xFF, &interacting, &ok_to_interrupt, NULL) != CG_STATUS_OK)
        return 3;
    if (!interacting || ok_to_interrupt) return 4;

    double v = 0.0;
    if (cg_itm(50, 10, 5, 100, &v) != CG_STATUS_OK) return 5;
    if (fabs(v - 100.0 / 110.0) > 1e-12) return 6;

    if (cg_itm(1, 0, 1, 0, &v) != CG_STATUS_FAILURE) return 7;
    if (strlen(cg_last_error()) == 0) return 8;

    char *id = NULL;
    CgManifest *manifest = NULL;
    if (cg_manifest_generate(
            "{\"name\":\"c\",\"n_segments\":3,\"seed\":1,\"scenarios\":"
            "[{\"name\":\"s\",\"weight\":1.0,\"cue_probs\":{\"osad\":1.0,\"stad\":1.0,"
            "\"aud\":1.0,\"udsd\":1.0,\"pad\":1.0,\"igd\":1.0,\"ogd\":1.0,\"sfd\":0.0}}]}",
            &manifest) != CG_STATUS_OK)
        return 9;
    uintptr_t len = 0;
    if (cg_manifest_len(manifest, &len) != CG_STATUS_OK || len != 3) return 10;
    if (cg_manifest_segment_id(manifest, 0, &id) != CG_STATUS_OK) return 11;
    if (strcmp(id, "c-seg-000000") != 0) return 12;
    cg_string_free(id);
    cg_manifest_free(manifest);

    printf("ok\n");
    return 0;
}
"#;

#[test]
fn c_demo_compiles_links_and_runs() {
    let root = workspace_root();
    let include_dir = root.join("crates/cuegraph-ffi/include");
    assert!(
        include_dir.join("cuegraph.h").exists(),
        "header not generated"
    );

    let static_lib = root.join("target/debug/libcuegraph_ffi.a");
    if !static_lib.exists() {
        let built = Command::new("cargo")
            .args(["build", "-p", "cuegraph-ffi"])
            .current_dir(&root)
            .status()
            .expect("run cargo build");
        assert!(built.success());
    }
    assert!(static_lib.exists(), "static library missing");

    let compiler = match find_compiler() {
        Some(cc) => cc,
        None => panic!("no C compiler on PATH"),
    };

    let dir = tempfile::tempdir().unwrap();
    let source = dir.path().join("demo.c");
    std::fs::write(&source, C_DEMO).unwrap();
    let binary = dir.path().join("demo");

    let compile = Command::new(compiler)
        .arg(&source)
        .arg("-I")
        .arg(&include_dir)
        .arg(&static_lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&binary)
        .output()
        .expect("run C compiler");
    assert!(
        compile.status.success(),
        "compile failed:\n{}",
        String::from_utf8_lossy(&compile.stderr)
    );

    let run = Command::new(&binary).output().expect("run demo");
    assert!(
        run.status.success(),
        "demo exited {:?}: {}",
        run.status.code(),
        String::from_utf8_lossy(&run.stdout)
    );
    assert_eq!(String::from_utf8_lossy(&run.stdout), "ok\n");
}
