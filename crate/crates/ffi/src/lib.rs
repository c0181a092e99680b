//! C ABI over the `flisr` crate.
//!
//! Every fallible call returns a [`FlisrStatus`]; on failure the message is
//! available from [`flisr_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function. Strings returned through
//! out-parameters are owned by the caller and released with
//! [`flisr_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use flisr::planner::{evaluate_rules, ControlVerb};
use flisr::protocol::{decode_str, encode};
use flisr::scenario::ScenarioEngine;
use flisr::topology::import_topology;
use flisr::{FaultScenario, GridGraph, PointMessage, PointValue, SimulationResult, SwitchObservation};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlisrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidTopology = 3,
    InvalidScenario = 4,
    InvalidMessage = 5,
    UnknownSite = 6,
    RunFailed = 7,
    Panic = 99,
}

/// Verb chosen by the per-switch rule.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlisrVerb {
    None = 0,
    Open = 1,
    Close = 2,
    CloseNormallyOpen = 3,
}

/// Decoded point message. `value` is 1 for ON and 0 for OFF.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FlisrPoint {
    pub link_add: u32,
    pub asdu_ca: u32,
    pub type_id: u32,
    pub ioa: u32,
    pub value: u8,
}

/// Opaque grid topology.
pub struct FlisrTopology(GridGraph);

/// Opaque simulation result.
pub struct FlisrResult {
    inner: SimulationResult,
    operations: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl ToString) {
    let c = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: FlisrStatus, msg: impl ToString) -> FlisrStatus {
    set_error(msg);
    status
}

/// Runs `f`, turning panics into `Panic` so they never cross the boundary.
fn guard(f: impl FnOnce() -> FlisrStatus) -> FlisrStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    std::panic::catch_unwind(std::panic::AssertUnwindSafe(f))
        .unwrap_or_else(|_| fail(FlisrStatus::Panic, "internal panic"))
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, FlisrStatus> {
    if p.is_null() {
        return Err(fail(FlisrStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(FlisrStatus::InvalidUtf8, e))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn flisr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn flisr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a topology document.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flisr_topology_from_json(json: *const c_char, out: *mut *mut FlisrTopology) -> FlisrStatus {
    guard(|| {
        if out.is_null() {
            return fail(FlisrStatus::NullPointer, "null out pointer");
        }
        let text = match str_arg(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match import_topology(text) {
            Ok(g) => {
                *out = Box::into_raw(Box::new(FlisrTopology(g)));
                FlisrStatus::Ok
            }
            Err(e) => fail(FlisrStatus::InvalidTopology, e),
        }
    })
}

/// Loads one of the built-in sites by id.
///
/// # Safety
/// `site_id` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flisr_topology_fixture(site_id: *const c_char, out: *mut *mut FlisrTopology) -> FlisrStatus {
    guard(|| {
        if out.is_null() {
            return fail(FlisrStatus::NullPointer, "null out pointer");
        }
        let id = match str_arg(site_id) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match flisr::fixtures::site(id) {
            Some(g) => {
                *out = Box::into_raw(Box::new(FlisrTopology(g)));
                FlisrStatus::Ok
            }
            None => fail(FlisrStatus::UnknownSite, format!("unknown site {id}")),
        }
    })
}

/// Number of switches in the topology, 0 for NULL.
///
/// # Safety
/// `topology` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flisr_topology_switch_count(topology: *const FlisrTopology) -> usize {
    topology.as_ref().map_or(0, |t| t.0.switches().len())
}

/// # Safety
/// `topology` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn flisr_topology_free(topology: *mut FlisrTopology) {
    if !topology.is_null() {
        drop(Box::from_raw(topology));
    }
}

/// Applies the per-switch rule to one set of indications.
#[no_mangle]
pub extern "C" fn flisr_evaluate_rules(fpi: bool, lvi: bool, normally_open: bool) -> FlisrVerb {
    match evaluate_rules(&SwitchObservation::new("", fpi, lvi), normally_open).map(|a| a.verb) {
        None => FlisrVerb::None,
        Some(ControlVerb::Open) => FlisrVerb::Open,
        Some(ControlVerb::Close) => FlisrVerb::Close,
        Some(ControlVerb::CloseNormallyOpenPoint) => FlisrVerb::CloseNormallyOpen,
    }
}

/// Encodes a point message as compact JSON.
///
/// # Safety
/// `out` must be writable; free the string with [`flisr_string_free`].
#[no_mangle]
pub unsafe extern "C" fn flisr_encode_message(point: FlisrPoint, out: *mut *mut c_char) -> FlisrStatus {
    guard(|| {
        if out.is_null() {
            return fail(FlisrStatus::NullPointer, "null out pointer");
        }
        let value = match point.value {
            0 => PointValue::Off,
            1 => PointValue::On,
            v => return fail(FlisrStatus::InvalidMessage, format!("value must be 0 or 1, got {v}")),
        };
        let msg = PointMessage {
            link_add: point.link_add,
            asdu_ca: point.asdu_ca,
            type_id: point.type_id,
            ioa: point.ioa,
            value,
        };
        *out = into_c_string(encode(&msg));
        FlisrStatus::Ok
    })
}

/// Decodes a JSON point message.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn flisr_decode_message(json: *const c_char, out: *mut FlisrPoint) -> FlisrStatus {
    guard(|| {
        if out.is_null() {
            return fail(FlisrStatus::NullPointer, "null out pointer");
        }
        let text = match str_arg(json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match decode_str(text) {
            Ok(m) => {
                *out = FlisrPoint {
                    link_add: m.link_add,
                    asdu_ca: m.asdu_ca,
                    type_id: m.type_id,
                    ioa: m.ioa,
                    value: u8::from(m.value.is_on()),
                };
                FlisrStatus::Ok
            }
            Err(e) => fail(FlisrStatus::InvalidMessage, e),
        }
    })
}

/// Runs a fault scenario (JSON, same shape as scenario files) on a topology
/// with the default simulated engine.
///
/// # Safety
/// `topology` must be a live handle, `scenario_json` a NUL-terminated string
/// and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn flisr_run_scenario(
    topology: *const FlisrTopology,
    scenario_json: *const c_char,
    out: *mut *mut FlisrResult,
) -> FlisrStatus {
    guard(|| {
        let Some(topo) = topology.as_ref() else {
            return fail(FlisrStatus::NullPointer, "null topology");
        };
        if out.is_null() {
            return fail(FlisrStatus::NullPointer, "null out pointer");
        }
        let text = match str_arg(scenario_json) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let scenario: FaultScenario = match serde_json::from_str(text) {
            Ok(s) => s,
            Err(e) => return fail(FlisrStatus::InvalidScenario, e),
        };
        match ScenarioEngine::default().run(&topo.0, &scenario) {
            Ok(r) => {
                let operations = CString::new(r.operations.clone()).unwrap_or_default();
                *out = Box::into_raw(Box::new(FlisrResult { inner: r, operations }));
                FlisrStatus::Ok
            }
            Err(e) => fail(FlisrStatus::RunFailed, e),
        }
    })
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flisr_result_affected_pre(result: *const FlisrResult) -> u32 {
    result.as_ref().map_or(0, |r| r.inner.affected_pre)
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flisr_result_affected_post(result: *const FlisrResult) -> u32 {
    result.as_ref().map_or(0, |r| r.inner.affected_post)
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flisr_result_cml_pre(result: *const FlisrResult) -> u64 {
    result.as_ref().map_or(0, |r| r.inner.cml_per_hour_pre)
}

/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flisr_result_cml_post(result: *const FlisrResult) -> u64 {
    result.as_ref().map_or(0, |r| r.inner.cml_per_hour_post)
}

/// Simulated time from the first status to the last control, in ms.
///
/// # Safety
/// `result` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flisr_result_elapsed_ms(result: *const FlisrResult) -> f64 {
    result.as_ref().map_or(0.0, |r| r.inner.elapsed_ms)
}

/// Rendered operation list, borrowed from the handle.
///
/// # Safety
/// `result` must be NULL or a live handle; the pointer dies with it.
#[no_mangle]
pub unsafe extern "C" fn flisr_result_operations(result: *const FlisrResult) -> *const c_char {
    result.as_ref().map_or(ptr::null(), |r| r.operations.as_ptr())
}

/// Full result as JSON.
///
/// # Safety
/// `result` must be a live handle; free the string with [`flisr_string_free`].
#[no_mangle]
pub unsafe extern "C" fn flisr_result_to_json(result: *const FlisrResult, out: *mut *mut c_char) -> FlisrStatus {
    guard(|| {
        let Some(r) = result.as_ref() else {
            return fail(FlisrStatus::NullPointer, "null result");
        };
        if out.is_null() {
            return fail(FlisrStatus::NullPointer, "null out pointer");
        }
        match serde_json::to_string(&r.inner) {
            Ok(s) => {
                *out = into_c_string(s);
                FlisrStatus::Ok
            }
            Err(e) => fail(FlisrStatus::RunFailed, e),
        }
    })
}

/// # Safety
/// `result` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn flisr_result_free(result: *mut FlisrResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}
