//! C ABI for the equicut solver.
//!
//! Handles are opaque pointers created and destroyed by this library;
//! every fallible call returns an [`EqStatus`] code and stores a
//! human-readable message retrievable with [`eq_last_error_message`].
//! The generated header lives in `include/equicut.h`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use equicut::cutting_plane::{initialize_cuts_joint, solve_mnd, SolverConfig, Termination};
use equicut::knapsack::{generate_instance, verify_gne, GeneratorConfig, KnapsackGameInstance};
use equicut::{KnapsackGame, SolveReport};

/// Status codes returned by every fallible function.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqStatus {
    Ok = 0,
    NullPointer = -1,
    InvalidArgument = -2,
    ParseError = -3,
    SolveError = -4,
    Utf8Error = -5,
    BufferTooSmall = -6,
}

/// Termination status of a solve, mirrored as plain integers.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqTermination {
    EquilibriumFound = 1,
    ToleranceReached = 2,
    IterationLimit = 3,
}

/// Opaque knapsack game instance handle.
pub struct EqInstance {
    inner: KnapsackGameInstance,
}

/// Opaque solve report handle.
pub struct EqReport {
    inner: SolveReport,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let text = CString::new(message.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = text);
}

fn fail(status: EqStatus, message: impl Into<String>) -> EqStatus {
    set_error(message);
    status
}

/// Version of the library as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn eq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the message of the most recent error on this thread into `buf`
/// (NUL-terminated, truncated to `cap` bytes) and returns the full message
/// length in bytes, excluding the terminator. Passing a null or empty
/// buffer just queries the length.
///
/// # Safety
/// When `buf` is non-null it must point to at least `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn eq_last_error_message(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Generates a random instance; on success stores a new handle in `out`.
/// The caller frees it with [`eq_instance_free`].
///
/// # Safety
/// `out` must be a valid pointer to writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn eq_instance_generate(
    players: usize,
    markets: usize,
    seed: u64,
    gamma: i64,
    out: *mut *mut EqInstance,
) -> EqStatus {
    if out.is_null() {
        return fail(EqStatus::NullPointer, "out is null");
    }
    let cfg = GeneratorConfig {
        seed,
        players,
        markets,
        gamma,
    };
    match generate_instance(&cfg) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(EqInstance { inner }));
            EqStatus::Ok
        }
        Err(e) => fail(EqStatus::InvalidArgument, e.to_string()),
    }
}

/// Parses and validates an instance from its JSON representation.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer
/// to writable handle storage.
#[no_mangle]
pub unsafe extern "C" fn eq_instance_from_json(
    json: *const c_char,
    out: *mut *mut EqInstance,
) -> EqStatus {
    if json.is_null() || out.is_null() {
        return fail(EqStatus::NullPointer, "json or out is null");
    }
    let Ok(text) = CStr::from_ptr(json).to_str() else {
        return fail(EqStatus::Utf8Error, "json is not valid UTF-8");
    };
    match KnapsackGameInstance::from_json_str(text) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(EqInstance { inner }));
            EqStatus::Ok
        }
        Err(e) => fail(EqStatus::ParseError, e.to_string()),
    }
}

/// Serializes the instance to JSON. The returned string is owned by the
/// caller and must be released with [`eq_string_free`]; null on error.
///
/// # Safety
/// `inst` must be a live handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn eq_instance_to_json(inst: *const EqInstance) -> *mut c_char {
    let Some(inst) = inst.as_ref() else {
        set_error("instance is null");
        return std::ptr::null_mut();
    };
    match CString::new(inst.inner.to_json_string()) {
        Ok(s) => s.into_raw(),
        Err(_) => {
            set_error("serialized instance contained a NUL byte");
            std::ptr::null_mut()
        }
    }
}

/// # Safety
/// `inst` must be a live handle from this library, or null (a no-op).
#[no_mangle]
pub unsafe extern "C" fn eq_instance_free(inst: *mut EqInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Number of players, or 0 when `inst` is null.
///
/// # Safety
/// `inst` must be a live handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn eq_instance_players(inst: *const EqInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.players)
}

/// Number of markets, or 0 when `inst` is null.
///
/// # Safety
/// `inst` must be a live handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn eq_instance_markets(inst: *const EqInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.markets)
}

/// Releases a string returned by [`eq_instance_to_json`].
///
/// # Safety
/// `s` must be a string returned by this library and not yet freed, or null.
#[no_mangle]
pub unsafe extern "C" fn eq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs the cutting-plane solver on the instance, seeding the cut set with
/// the joint-problem optimizer. On success stores a report handle in `out`;
/// the caller frees it with [`eq_report_free`].
///
/// # Safety
/// `inst` must be a live handle and `out` a valid pointer to writable
/// handle storage.
#[no_mangle]
pub unsafe extern "C" fn eq_solve(
    inst: *const EqInstance,
    epsilon: f64,
    max_iterations: usize,
    node_limit: u64,
    out: *mut *mut EqReport,
) -> EqStatus {
    if inst.is_null() || out.is_null() {
        return fail(EqStatus::NullPointer, "instance or out is null");
    }
    let inst = &(*inst).inner;
    let config = SolverConfig {
        epsilon,
        max_iterations,
        node_limit,
    };
    let result = (|| -> Result<SolveReport, String> {
        let game = KnapsackGame::new(inst.clone()).map_err(|e| e.to_string())?;
        let cuts = initialize_cuts_joint(&game, node_limit).map_err(|e| e.to_string())?;
        solve_mnd(&game, cuts, &config).map_err(|e| e.to_string())
    })();
    match result {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(EqReport { inner }));
            EqStatus::Ok
        }
        Err(message) => fail(EqStatus::SolveError, message),
    }
}

/// Termination status as an [`EqTermination`] value, or -1 when null.
///
/// # Safety
/// `report` must be a live handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn eq_report_status(report: *const EqReport) -> i32 {
    report.as_ref().map_or(-1, |r| match r.inner.status {
        Termination::EquilibriumFound => EqTermination::EquilibriumFound as i32,
        Termination::ToleranceReached => EqTermination::ToleranceReached as i32,
        Termination::IterationLimit => EqTermination::IterationLimit as i32,
    })
}

/// # Safety
/// `report` must be a live handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn eq_report_iterations(report: *const EqReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.num_iterations())
}

/// # Safety
/// `report` must be a live handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn eq_report_delta_lower(report: *const EqReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.inner.delta_lower)
}

/// # Safety
/// `report` must be a live handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn eq_report_delta_upper(report: *const EqReport) -> f64 {
    report.as_ref().map_or(f64::NAN, |r| r.inner.delta_upper)
}

/// Length of the final joint decision vector.
///
/// # Safety
/// `report` must be a live handle from this library (or null).
#[no_mangle]
pub unsafe extern "C" fn eq_report_point_len(report: *const EqReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.point.len())
}

/// Copies the final joint decision into `buf`.
///
/// # Safety
/// `report` must be a live handle and `buf` must point to at least `cap`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn eq_report_point(
    report: *const EqReport,
    buf: *mut f64,
    cap: usize,
) -> EqStatus {
    let Some(report) = report.as_ref() else {
        return fail(EqStatus::NullPointer, "report is null");
    };
    if buf.is_null() {
        return fail(EqStatus::NullPointer, "buf is null");
    }
    let point = &report.inner.point;
    if cap < point.len() {
        return fail(
            EqStatus::BufferTooSmall,
            format!("buffer holds {cap} doubles, point needs {}", point.len()),
        );
    }
    std::ptr::copy_nonoverlapping(point.as_ptr(), buf, point.len());
    EqStatus::Ok
}

/// # Safety
/// `report` must be a live handle from this library, or null (a no-op).
#[no_mangle]
pub unsafe extern "C" fn eq_report_free(report: *mut EqReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Checks whether `point` is a generalized Nash equilibrium of the
/// instance: no player can improve by more than `tol` unilaterally.
/// Writes 1 or 0 into `out_is_equilibrium`.
///
/// # Safety
/// `inst` must be a live handle, `point` must reference `len` readable
/// doubles, and `out_is_equilibrium` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eq_verify_gne(
    inst: *const EqInstance,
    point: *const f64,
    len: usize,
    tol: f64,
    node_limit: u64,
    out_is_equilibrium: *mut i32,
) -> EqStatus {
    if inst.is_null() || point.is_null() || out_is_equilibrium.is_null() {
        return fail(
            EqStatus::NullPointer,
            "instance, point or out pointer is null",
        );
    }
    let inst = &(*inst).inner;
    if len != inst.num_binaries() {
        return fail(
            EqStatus::InvalidArgument,
            format!(
                "point has {len} entries, instance needs {}",
                inst.num_binaries()
            ),
        );
    }
    let point = std::slice::from_raw_parts(point, len);
    match verify_gne(inst, point, tol, node_limit) {
        Ok(ok) => {
            *out_is_equilibrium = i32::from(ok);
            EqStatus::Ok
        }
        Err(e) => fail(EqStatus::SolveError, e.to_string()),
    }
}
