//! C ABI over the cuegraph pipeline.
//!
//! Conventions:
//! - Fallible calls return [`CgStatus`]; anything nonzero is an error and
//!   [`cg_last_error`] holds a message for the calling thread.
//! - Handles ([`CgManifest`]) are opaque; free them with their `_free`
//!   function exactly once.
//! - Strings returned through `*mut *mut c_char` out-parameters are owned by
//!   the caller and must be released with [`cg_string_free`].
//! - Out-parameters documented as optional may be null to skip that output.
//! - Panics never cross the boundary; they surface as [`CgStatus::Panic`].
//!
//! `build.rs` regenerates `include/cuegraph.h` from this file via cbindgen.

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::str::FromStr;
use std::sync::OnceLock;

use cuegraph::dataset::{check_manifest, load_manifest, save_manifest};
use cuegraph::detectors::parse_answer;
use cuegraph::graph::{evaluate, CueSource};
use cuegraph::metrics::{itm, sim, ConfusionMatrix};
use cuegraph::synthgen::{generate, GeneratorConfig};
use cuegraph::{Cue, CueVector, DatasetManifest, Error, ExperimentConfig, GatePolicy};

/// Result of every fallible call in this API.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CgStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    Utf8Error = 2,
    /// The operation failed; `cg_last_error()` has the message.
    Failure = 3,
    /// A panic was caught at the boundary; outputs were not written.
    Panic = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(message: impl std::fmt::Display) -> CgStatus {
    let text: String = message
        .to_string()
        .chars()
        .map(|c| if c == '\0' { ' ' } else { c })
        .collect();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::new(text).unwrap());
    CgStatus::Failure
}

fn fail_as(status: CgStatus, message: impl std::fmt::Display) -> CgStatus {
    fail(message);
    status
}

/// Message from the most recent failing call on this thread, empty if none.
///
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cg_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string; never freed by the caller.
#[no_mangle]
pub extern "C" fn cg_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

/// Release a string produced by this library. Null is a no-op.
///
/// # Safety
/// `s` must have come from an out-parameter of this API and not have been
/// freed already.
#[no_mangle]
pub unsafe extern "C" fn cg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn guard(body: impl FnOnce() -> CgStatus) -> CgStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let text = if let Some(s) = payload.downcast_ref::<&str>() {
                s.to_string()
            } else if let Some(s) = payload.downcast_ref::<String>() {
                s.clone()
            } else {
                "unknown payload".to_string()
            };
            fail_as(CgStatus::Panic, format!("panic: {text}"))
        }
    }
}

/// # Safety
/// Caller promises `ptr` is null or a readable NUL-terminated string.
unsafe fn str_arg<'a>(name: &str, ptr: *const c_char) -> Result<&'a str, CgStatus> {
    if ptr.is_null() {
        return Err(fail_as(CgStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|e| fail_as(CgStatus::Utf8Error, format!("{name} is not UTF-8: {e}")))
}

/// # Safety
/// Caller promises `ptr` is null or valid for writes of `T`.
unsafe fn write_out<T>(ptr: *mut T, value: T) {
    if !ptr.is_null() {
        ptr.write(value);
    }
}

fn out_string(text: String) -> *mut c_char {
    let text: String = text
        .chars()
        .map(|c| if c == '\0' { ' ' } else { c })
        .collect();
    CString::new(text).unwrap().into_raw()
}

/// Number of cues in the graph. Valid cue indices are `0..cg_cue_count()`.
#[no_mangle]
pub extern "C" fn cg_cue_count() -> u32 {
    Cue::ALL.len() as u32
}

fn cue_cstring(
    table: &'static OnceLock<[CString; 8]>,
    text: fn(Cue) -> &'static str,
    index: u32,
) -> *const c_char {
    let all =
        table.get_or_init(|| std::array::from_fn(|i| CString::new(text(Cue::ALL[i])).unwrap()));
    match Cue::from_index(index as usize) {
        Some(cue) => all[cue.index()].as_ptr(),
        None => ptr::null(),
    }
}

/// Static short name of a cue (`"OSAD"`, ...), or null for a bad index.
#[no_mangle]
pub extern "C" fn cg_cue_name(cue_index: u32) -> *const c_char {
    static NAMES: OnceLock<[CString; 8]> = OnceLock::new();
    cue_cstring(&NAMES, Cue::name, cue_index)
}

/// Static question text a detector answers for a cue, or null for a bad index.
#[no_mangle]
pub extern "C" fn cg_cue_question(cue_index: u32) -> *const c_char {
    static QUESTIONS: OnceLock<[CString; 8]> = OnceLock::new();
    cue_cstring(&QUESTIONS, Cue::question, cue_index)
}

/// Opaque handle to a loaded or generated dataset manifest.
pub struct CgManifest {
    inner: DatasetManifest,
}

/// Load a JSONL manifest from `path` into a fresh handle.
///
/// # Safety
/// `path` must be a readable NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_manifest_load(
    path: *const c_char,
    out: *mut *mut CgManifest,
) -> CgStatus {
    guard(|| {
        if out.is_null() {
            return fail_as(CgStatus::NullArgument, "out is null");
        }
        let path = match str_arg("path", path) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match load_manifest(Path::new(path)) {
            Ok(inner) => {
                out.write(Box::into_raw(Box::new(CgManifest { inner })));
                CgStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Generate a synthetic manifest from generator-config JSON.
///
/// # Safety
/// `config_json` must be a readable NUL-terminated string and `out` valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn cg_manifest_generate(
    config_json: *const c_char,
    out: *mut *mut CgManifest,
) -> CgStatus {
    guard(|| {
        if out.is_null() {
            return fail_as(CgStatus::NullArgument, "out is null");
        }
        let text = match str_arg("config_json", config_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let result = GeneratorConfig::from_json(text).and_then(|config| generate(&config));
        match result {
            Ok(inner) => {
                out.write(Box::into_raw(Box::new(CgManifest { inner })));
                CgStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Write a manifest back out as JSONL.
///
/// # Safety
/// `manifest` must be a live handle from this API; `path` must be a readable
/// NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn cg_manifest_save(
    manifest: *const CgManifest,
    path: *const c_char,
) -> CgStatus {
    guard(|| {
        if manifest.is_null() {
            return fail_as(CgStatus::NullArgument, "manifest is null");
        }
        let path = match str_arg("path", path) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match save_manifest(&(*manifest).inner, Path::new(path)) {
            Ok(()) => CgStatus::Ok,
            Err(e) => fail(e),
        }
    })
}

/// Number of segments in the manifest.
///
/// # Safety
/// `manifest` must be a live handle from this API; `out_len` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_manifest_len(
    manifest: *const CgManifest,
    out_len: *mut usize,
) -> CgStatus {
    guard(|| {
        if manifest.is_null() || out_len.is_null() {
            return fail_as(CgStatus::NullArgument, "manifest or out_len is null");
        }
        let manifest = &(*manifest).inner;
        out_len.write(manifest.segments.len());
        CgStatus::Ok
    })
}

/// Check every manifest invariant. Returns `Ok` for a clean manifest;
/// otherwise `Failure` with the violations joined into the error message.
/// `out_violation_count` (optional) receives the number of violations either
/// way.
///
/// # Safety
/// `manifest` must be a live handle from this API; `out_violation_count` must
/// be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_manifest_validate(
    manifest: *const CgManifest,
    out_violation_count: *mut usize,
) -> CgStatus {
    guard(|| {
        if manifest.is_null() {
            return fail_as(CgStatus::NullArgument, "manifest is null");
        }
        let violations = check_manifest(&(*manifest).inner);
        write_out(out_violation_count, violations.len());
        if violations.is_empty() {
            CgStatus::Ok
        } else {
            let joined: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            fail(joined.join("; "))
        }
    })
}

/// Copy the id of segment `index` into a caller-owned string.
///
/// # Safety
/// `manifest` must be a live handle from this API; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn cg_manifest_segment_id(
    manifest: *const CgManifest,
    index: usize,
    out: *mut *mut c_char,
) -> CgStatus {
    guard(|| {
        if manifest.is_null() || out.is_null() {
            return fail_as(CgStatus::NullArgument, "manifest or out is null");
        }
        let manifest = &(*manifest).inner;
        match manifest.segments.get(index) {
            Some(seg) => {
                out.write(out_string(seg.segment.segment_id.clone()));
                CgStatus::Ok
            }
            None => fail(format!(
                "segment index {index} out of range 0..{}",
                manifest.segments.len()
            )),
        }
    })
}

/// Read the consensus cues of segment `index` as a bitmask (bit `i` is cue
/// `i` in canonical order) plus its ground-truth interaction flag.
///
/// # Safety
/// `manifest` must be a live handle from this API; `out_cue_bits` and
/// `out_ground_truth` must each be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_manifest_cues(
    manifest: *const CgManifest,
    index: usize,
    out_cue_bits: *mut u8,
    out_ground_truth: *mut bool,
) -> CgStatus {
    guard(|| {
        if manifest.is_null() {
            return fail_as(CgStatus::NullArgument, "manifest is null");
        }
        let manifest = &(*manifest).inner;
        match manifest.segments.get(index) {
            Some(seg) => {
                write_out(out_cue_bits, seg.consensus.bits());
                write_out(out_ground_truth, seg.ground_truth_interaction);
                CgStatus::Ok
            }
            None => fail(format!(
                "segment index {index} out of range 0..{}",
                manifest.segments.len()
            )),
        }
    })
}

/// Release a manifest handle. Null is a no-op.
///
/// # Safety
/// `manifest` must have come from this API and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn cg_manifest_free(manifest: *mut CgManifest) {
    if !manifest.is_null() {
        drop(Box::from_raw(manifest));
    }
}

/// Answers one cue query for [`cg_evaluate`]. `cue_index` follows canonical
/// cue order. Return 1 for yes, 0 for no, any negative value to abort the
/// evaluation with an error.
pub type CgCueSource = Option<extern "C" fn(cue_index: u32, user_data: *mut c_void) -> i32>;

unsafe fn evaluate_common(
    segment_id: *const c_char,
    policy: *const c_char,
    source: &mut dyn CueSource,
    out_interacting: *mut bool,
    out_intervene_ok: *mut bool,
    out_decision_json: *mut *mut c_char,
) -> CgStatus {
    let segment_id = match str_arg("segment_id", segment_id) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let policy = match str_arg("policy", policy) {
        Ok(s) => s,
        Err(status) => return status,
    };
    let policy = match GatePolicy::from_str(policy) {
        Ok(p) => p,
        Err(e) => return fail(e),
    };
    match evaluate(segment_id, source, policy) {
        Ok(decision) => {
            write_out(out_interacting, decision.interacting);
            write_out(out_intervene_ok, decision.intervene_ok);
            if !out_decision_json.is_null() {
                out_decision_json.write(out_string(
                    serde_json::to_string(&decision).expect("decision serializes"),
                ));
            }
            CgStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Evaluate one segment by querying `source` under `policy` (`"EAGER"`,
/// `"SHORT_CIRCUIT"`, or `"HIERARCHICAL"`).
///
/// `out_interacting`, `out_intervene_ok`, and `out_decision_json` are each
/// optional; `out_decision_json` receives the full decision (beliefs plus
/// query trace) as a caller-owned JSON string.
///
/// # Safety
/// `segment_id` and `policy` must be readable NUL-terminated strings; each
/// out-parameter must be null or valid for writes; `source` must be callable
/// with `user_data` for the duration of the call.
#[no_mangle]
pub unsafe extern "C" fn cg_evaluate(
    segment_id: *const c_char,
    policy: *const c_char,
    source: CgCueSource,
    user_data: *mut c_void,
    out_interacting: *mut bool,
    out_intervene_ok: *mut bool,
    out_decision_json: *mut *mut c_char,
) -> CgStatus {
    guard(|| {
        let callback = match source {
            Some(f) => f,
            None => return fail_as(CgStatus::NullArgument, "source callback is null"),
        };
        let mut ask = |cue: Cue| match callback(cue.index() as u32, user_data) {
            n if n < 0 => Err(Error::validation(format!(
                "cue source callback returned {n} while answering {}",
                cue.name()
            ))),
            n => Ok(n > 0),
        };
        evaluate_common(
            segment_id,
            policy,
            &mut ask,
            out_interacting,
            out_intervene_ok,
            out_decision_json,
        )
    })
}

/// [`cg_evaluate`] with cue answers taken from a bitmask instead of a
/// callback (bit `i` answers cue `i` in canonical order).
///
/// # Safety
/// Same as [`cg_evaluate`] minus the callback.
#[no_mangle]
pub unsafe extern "C" fn cg_evaluate_bits(
    segment_id: *const c_char,
    policy: *const c_char,
    cue_bits: u8,
    out_interacting: *mut bool,
    out_intervene_ok: *mut bool,
    out_decision_json: *mut *mut c_char,
) -> CgStatus {
    guard(|| {
        let cues = CueVector::from_bits(cue_bits);
        let mut ask = |cue: Cue| Ok(*cues.get(cue));
        evaluate_common(
            segment_id,
            policy,
            &mut ask,
            out_interacting,
            out_intervene_ok,
            out_decision_json,
        )
    })
}

unsafe fn metric_common(
    metric: fn(&ConfusionMatrix) -> cuegraph::Result<f64>,
    true_positives: u64,
    false_positives: u64,
    false_negatives: u64,
    true_negatives: u64,
    out: *mut f64,
) -> CgStatus {
    if out.is_null() {
        return fail_as(CgStatus::NullArgument, "out is null");
    }
    let cm = ConfusionMatrix::new(
        true_positives,
        false_positives,
        false_negatives,
        true_negatives,
    );
    match metric(&cm) {
        Ok(value) => {
            out.write(value);
            CgStatus::Ok
        }
        Err(e) => fail(e),
    }
}

/// Intervention-timing metric: true-negative rate over non-interaction
/// segments. Fails when `false_positives + true_negatives` is zero.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_itm(
    true_positives: u64,
    false_positives: u64,
    false_negatives: u64,
    true_negatives: u64,
    out: *mut f64,
) -> CgStatus {
    guard(|| {
        metric_common(
            itm,
            true_positives,
            false_positives,
            false_negatives,
            true_negatives,
            out,
        )
    })
}

/// Social-interaction metric: macro F1 over the two classes. Fails on an
/// empty matrix.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_sim(
    true_positives: u64,
    false_positives: u64,
    false_negatives: u64,
    true_negatives: u64,
    out: *mut f64,
) -> CgStatus {
    guard(|| {
        metric_common(
            sim,
            true_positives,
            false_positives,
            false_negatives,
            true_negatives,
            out,
        )
    })
}

/// Parse a model's free-text reply to a yes/no question.
///
/// # Safety
/// `text` must be a readable NUL-terminated string; `out` must be valid for
/// writes.
#[no_mangle]
pub unsafe extern "C" fn cg_parse_answer(text: *const c_char, out: *mut bool) -> CgStatus {
    guard(|| {
        if out.is_null() {
            return fail_as(CgStatus::NullArgument, "out is null");
        }
        let text = match str_arg("text", text) {
            Ok(s) => s,
            Err(status) => return status,
        };
        match parse_answer(text) {
            Ok(value) => {
                out.write(value);
                CgStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Run a full experiment from experiment-config JSON (the same schema the
/// CLI's `run` command reads). Outputs land under the config's `output_dir`;
/// `out_report_json` receives the caller-owned metrics report.
///
/// # Safety
/// `config_json` must be a readable NUL-terminated string; `out_report_json`
/// must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn cg_run_experiment(
    config_json: *const c_char,
    out_report_json: *mut *mut c_char,
) -> CgStatus {
    guard(|| {
        if out_report_json.is_null() {
            return fail_as(CgStatus::NullArgument, "out_report_json is null");
        }
        let text = match str_arg("config_json", config_json) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let result = ExperimentConfig::from_json(text).and_then(|config| cuegraph::run(&config));
        match result {
            Ok(outcome) => {
                out_report_json.write(out_string(outcome.report.to_json()));
                CgStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}
