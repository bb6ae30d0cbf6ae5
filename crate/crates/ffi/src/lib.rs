//! C ABI over the certification pipeline. Handles are opaque pointers
//! created and destroyed here; strings returned through out-parameters are
//! owned by the caller and must be released with [`hf_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use hardy_forge::error::Error;
use hardy_forge::evaluator::{quantum_value, search_policies, LeakagePolicy};
use hardy_forge::io::{PolicyFile, ReportFile, SettingsFile, StateFile};
use hardy_forge::pipeline::{certify, Certificate, PipelineOptions};
use hardy_forge::state::PureState;

/// Opaque handle over a pure multiparty state.
pub struct HfState {
    inner: PureState,
}

/// Opaque handle over a finished certificate.
pub struct HfCertificate {
    inner: Certificate,
}

/// Status codes returned by every fallible entry point. The numeric values
/// match the CLI exit codes for the same failure classes.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum HfStatus {
    /// The call succeeded.
    Ok = 0,
    /// Malformed input: bad JSON, bad dimensions, a null pointer, or an
    /// amplitude array of the wrong length.
    InvalidInput = 1,
    /// The state is a product state; there is nothing to certify.
    NotEntangled = 2,
    /// Construction or evaluation failed past input validation.
    ConstructionFailed = 3,
    /// A panic was caught at the boundary; the library state is unharmed.
    Internal = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let safe = CString::new(msg).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(safe));
}

fn fail(status: HfStatus, msg: String) -> HfStatus {
    set_error(msg);
    status
}

fn status_for(err: &Error) -> HfStatus {
    match err {
        Error::TooFewParties(_)
        | Error::BadDimension(_)
        | Error::AmplitudeLength { .. }
        | Error::ZeroState
        | Error::NotNormalized(_)
        | Error::PartyOutOfRange { .. }
        | Error::LocalDimension { .. }
        | Error::FactorCount { .. }
        | Error::MissingFactor { .. }
        | Error::NotProperSubset { .. }
        | Error::PartyCountUnsupported { .. }
        | Error::InvalidSettings(_)
        | Error::Io(_)
        | Error::Json(_) => HfStatus::InvalidInput,
        Error::NotEntangled { .. } => HfStatus::NotEntangled,
        _ => HfStatus::ConstructionFailed,
    }
}

fn from_error(err: Error) -> HfStatus {
    let status = status_for(&err);
    set_error(err.to_string());
    status
}

fn guarded(f: impl FnOnce() -> HfStatus) -> HfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(HfStatus::Internal, "panic caught at the C boundary".into()),
    }
}

unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, HfStatus> {
    if ptr.is_null() {
        return Err(fail(HfStatus::InvalidInput, format!("{what} is null")));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| fail(HfStatus::InvalidInput, format!("{what} is not UTF-8")))
}

fn give_string(out: *mut *mut c_char, text: String) -> HfStatus {
    match CString::new(text) {
        Ok(s) => {
            unsafe { *out = s.into_raw() };
            HfStatus::Ok
        }
        Err(_) => fail(
            HfStatus::Internal,
            "serialized text contains an interior NUL".into(),
        ),
    }
}

/// Version of the underlying library, as a NUL-terminated static string.
/// The pointer stays valid for the life of the process; do not free it.
#[no_mangle]
pub extern "C" fn hf_version() -> *const c_char {
    static VERSION: OnceLock<CString> = OnceLock::new();
    VERSION
        .get_or_init(|| CString::new(hardy_forge::VERSION).unwrap())
        .as_ptr()
}

/// Message describing the most recent failure on this thread, or null when
/// no failure has been recorded. The pointer is invalidated by the next
/// failing call on the same thread; do not free it.
#[no_mangle]
pub extern "C" fn hf_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |s| s.as_ptr())
    })
}

/// Parse a state from JSON of the form
/// `{"dims":[...],"amplitudes":[[re,im],...]}` (party one most significant).
/// On success writes a new handle to `out`; release it with
/// [`hf_state_free`].
#[no_mangle]
pub unsafe extern "C" fn hf_state_parse_json(
    json: *const c_char,
    out: *mut *mut HfState,
) -> HfStatus {
    guarded(|| {
        if out.is_null() {
            return fail(HfStatus::InvalidInput, "out is null".into());
        }
        let text = match str_arg(json, "json") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let file: StateFile = match serde_json::from_str(text) {
            Ok(f) => f,
            Err(e) => return fail(HfStatus::InvalidInput, format!("bad state JSON: {e}")),
        };
        match file.to_state() {
            Ok(state) => {
                *out = Box::into_raw(Box::new(HfState { inner: state }));
                HfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Build a state from raw arrays: `dims` has `n_parties` entries and `amps`
/// holds `amp_count` interleaved (re, im) pairs, so `2 * amp_count` doubles,
/// flattened with party one most significant. On success writes a new
/// handle to `out`; release it with [`hf_state_free`].
#[no_mangle]
pub unsafe extern "C" fn hf_state_new(
    dims: *const usize,
    n_parties: usize,
    amps: *const f64,
    amp_count: usize,
    out: *mut *mut HfState,
) -> HfStatus {
    guarded(|| {
        if dims.is_null() || amps.is_null() || out.is_null() {
            return fail(HfStatus::InvalidInput, "null pointer argument".into());
        }
        let dims = std::slice::from_raw_parts(dims, n_parties).to_vec();
        let raw = std::slice::from_raw_parts(amps, amp_count * 2);
        let amps = raw
            .chunks_exact(2)
            .map(|pair| num_complex::Complex64::new(pair[0], pair[1]))
            .collect();
        match PureState::new(dims, amps) {
            Ok(state) => {
                *out = Box::into_raw(Box::new(HfState { inner: state }));
                HfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Release a state handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hf_state_free(state: *mut HfState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Run the full pipeline on `state`: closest product, frame, measurement
/// synthesis, exact evaluation, classical bound, certificate. `seed` drives
/// every randomized stage; `policy_search` additionally tries every leak
/// assignment for parties with local dimension above two. On success writes
/// a new handle to `out`; release it with [`hf_certificate_free`].
#[no_mangle]
pub unsafe extern "C" fn hf_certify(
    state: *const HfState,
    seed: u64,
    policy_search: bool,
    out: *mut *mut HfCertificate,
) -> HfStatus {
    guarded(|| {
        if state.is_null() || out.is_null() {
            return fail(HfStatus::InvalidInput, "null pointer argument".into());
        }
        let opts = PipelineOptions {
            seed,
            policy_search,
            ..PipelineOptions::default()
        };
        match certify(&(*state).inner, &opts) {
            Ok(cert) => {
                *out = Box::into_raw(Box::new(HfCertificate { inner: cert }));
                HfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Serialize a certificate to JSON. On success writes a caller-owned string
/// to `out`; release it with [`hf_string_free`].
#[no_mangle]
pub unsafe extern "C" fn hf_certificate_to_json(
    cert: *const HfCertificate,
    out: *mut *mut c_char,
) -> HfStatus {
    guarded(|| {
        if cert.is_null() || out.is_null() {
            return fail(HfStatus::InvalidInput, "null pointer argument".into());
        }
        match serde_json::to_string_pretty(&(*cert).inner) {
            Ok(json) => give_string(out, json),
            Err(e) => fail(HfStatus::Internal, format!("serialization failed: {e}")),
        }
    })
}

/// Certified value of the combination (quantum value, leakage included).
/// Returns NaN on a null handle.
#[no_mangle]
pub unsafe extern "C" fn hf_certificate_value(cert: *const HfCertificate) -> f64 {
    if cert.is_null() {
        return f64::NAN;
    }
    (*cert).inner.report.value
}

/// Whether the certificate passed: value above the classical bound by the
/// margin, nondegenerate settings, and all consistency gates. Returns false
/// on a null handle.
#[no_mangle]
pub unsafe extern "C" fn hf_certificate_passed(cert: *const HfCertificate) -> bool {
    if cert.is_null() {
        return false;
    }
    (*cert).inner.passed
}

/// Scenario the synthesis chose: `"bell"` (rotation tables) or `"hardy"`
/// (parametric tables). The pointer is static; do not free it.
#[no_mangle]
pub unsafe extern "C" fn hf_certificate_scenario(cert: *const HfCertificate) -> *const c_char {
    if cert.is_null() {
        return std::ptr::null();
    }
    match (*cert).inner.report.scenario.as_str() {
        "bell" => c"bell".as_ptr(),
        "hardy" => c"hardy".as_ptr(),
        _ => c"unknown".as_ptr(),
    }
}

/// Release a certificate handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hf_certificate_free(cert: *mut HfCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// Evaluate existing measurement settings against a state, both as JSON in
/// the CLI file formats. `policy_json` may be null for the default leak
/// assignment, or the literal string `"search"` to try every assignment and
/// keep the best. On success writes a caller-owned report JSON to `out`;
/// release it with [`hf_string_free`].
#[no_mangle]
pub unsafe extern "C" fn hf_evaluate_json(
    state_json: *const c_char,
    settings_json: *const c_char,
    policy_json: *const c_char,
    out: *mut *mut c_char,
) -> HfStatus {
    guarded(|| {
        if out.is_null() {
            return fail(HfStatus::InvalidInput, "out is null".into());
        }
        let state_text = match str_arg(state_json, "state_json") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let settings_text = match str_arg(settings_json, "settings_json") {
            Ok(t) => t,
            Err(status) => return status,
        };
        let state = match serde_json::from_str::<StateFile>(state_text)
            .map_err(Error::from)
            .and_then(|f| f.to_state())
        {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        let settings = match serde_json::from_str::<SettingsFile>(settings_text)
            .map_err(Error::from)
            .and_then(|f| f.to_settings())
        {
            Ok(s) => s,
            Err(e) => return from_error(e),
        };
        let policy = if policy_json.is_null() {
            LeakagePolicy::default()
        } else {
            let text = match str_arg(policy_json, "policy_json") {
                Ok(t) => t,
                Err(status) => return status,
            };
            if text == "search" {
                match search_policies(&state, &settings) {
                    Ok((best, _)) => best,
                    Err(e) => return from_error(e),
                }
            } else {
                match serde_json::from_str::<PolicyFile>(text)
                    .map_err(Error::from)
                    .and_then(|f| f.to_policy())
                {
                    Ok(p) => p,
                    Err(e) => return from_error(e),
                }
            }
        };
        match quantum_value(&state, &settings, &policy) {
            Ok(report) => match serde_json::to_string_pretty(&ReportFile::from_report(
                &report, 1e-9,
            )) {
                Ok(json) => give_string(out, json),
                Err(e) => fail(HfStatus::Internal, format!("serialization failed: {e}")),
            },
            Err(e) => from_error(e),
        }
    })
}

/// Exact classical maximum of the combination for `n` parties by exhaustive
/// enumeration, with the number of maximizing strategies. Out-pointers may
/// be null when the caller does not need that field.
#[no_mangle]
pub unsafe extern "C" fn hf_classical_max(
    n: usize,
    out_maximum: *mut i64,
    out_witness_count: *mut u64,
) -> HfStatus {
    guarded(|| match hardy_forge::lhv::classical_max(n) {
        Ok(res) => {
            if !out_maximum.is_null() {
                *out_maximum = res.maximum;
            }
            if !out_witness_count.is_null() {
                *out_witness_count = res.witness_count;
            }
            HfStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

/// Whether no deterministic assignment satisfies all paradox conditions at
/// once for `n` parties (the contextuality-style impossibility).
#[no_mangle]
pub unsafe extern "C" fn hf_contextual_impossibility(
    n: usize,
    out_impossible: *mut bool,
) -> HfStatus {
    guarded(|| match hardy_forge::lhv::contextual_impossibility(n) {
        Ok(res) => {
            if !out_impossible.is_null() {
                *out_impossible = res.impossible;
            }
            HfStatus::Ok
        }
        Err(e) => from_error(e),
    })
}

/// Release a string produced by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn hf_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(CString::from_raw(text));
    }
}
