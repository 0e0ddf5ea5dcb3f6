//! C ABI over the core laboratory: opaque run handles, error codes, JSON
//! reports. The contract is documented in `include/evolop.h`, which is
//! maintained by hand and kept in sync by the `header_sync` test.

use evolop::config::ExperimentConfig;
use evolop::expr::Var;
use evolop::report::RunReport;
use evolop::runner::{run, Overrides, Subcommand};
use libc::c_char;
use std::ffi::{CStr, CString};
use std::path::PathBuf;

pub const EVOLOP_OK: i32 = 0;
pub const EVOLOP_ERR_ARGUMENT: i32 = 1;
pub const EVOLOP_ERR_CONFIG: i32 = 2;
pub const EVOLOP_ERR_NUMERIC: i32 = 3;

/// Opaque handle: a parsed configuration plus the last run's outcome.
pub struct EvolopRun {
    config: ExperimentConfig,
    report: Option<RunReport>,
    last_error: String,
}

fn to_c_string(s: &str) -> *mut c_char {
    // interior NULs cannot survive the trip; replace rather than fail
    let cleaned: String = s.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    CString::new(cleaned).expect("no interior NUL").into_raw()
}

unsafe fn read_str<'a>(p: *const c_char) -> Option<&'a str> {
    if p.is_null() {
        return None;
    }
    unsafe { CStr::from_ptr(p) }.to_str().ok()
}

fn put_err(err_out: *mut *mut c_char, msg: &str) {
    if !err_out.is_null() {
        unsafe { *err_out = to_c_string(msg) };
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn evolop_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parse a JSON configuration into a fresh handle.
///
/// # Safety
/// `config_json` must be a valid NUL-terminated string; `err_out` may be
/// null or must point to writable storage for one `char*`.
#[no_mangle]
pub unsafe extern "C" fn evolop_run_new(
    config_json: *const c_char,
    err_out: *mut *mut c_char,
) -> *mut EvolopRun {
    let Some(text) = (unsafe { read_str(config_json) }) else {
        put_err(err_out, "config_json is null or not valid UTF-8");
        return std::ptr::null_mut();
    };
    match ExperimentConfig::from_json(text) {
        Ok(config) => Box::into_raw(Box::new(EvolopRun {
            config,
            report: None,
            last_error: String::new(),
        })),
        Err(e) => {
            put_err(err_out, &e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Load the configuration from a file path.
///
/// # Safety
/// As for [`evolop_run_new`].
#[no_mangle]
pub unsafe extern "C" fn evolop_run_from_path(
    config_path: *const c_char,
    err_out: *mut *mut c_char,
) -> *mut EvolopRun {
    let Some(path) = (unsafe { read_str(config_path) }) else {
        put_err(err_out, "config_path is null or not valid UTF-8");
        return std::ptr::null_mut();
    };
    match ExperimentConfig::from_path(std::path::Path::new(path)) {
        Ok(config) => Box::into_raw(Box::new(EvolopRun {
            config,
            report: None,
            last_error: String::new(),
        })),
        Err(e) => {
            put_err(err_out, &e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Execute a subcommand; returns the status-code contract of the CLI.
///
/// # Safety
/// `run` must come from `evolop_run_new`/`evolop_run_from_path` and not have
/// been freed; `subcommand` must be NUL-terminated; `out_dir` may be null.
#[no_mangle]
pub unsafe extern "C" fn evolop_run(
    run_ptr: *mut EvolopRun,
    subcommand: *const c_char,
    out_dir: *const c_char,
    seed: i64,
) -> i32 {
    let Some(handle) = (unsafe { run_ptr.as_mut() }) else {
        return EVOLOP_ERR_ARGUMENT;
    };
    let Some(sub_str) = (unsafe { read_str(subcommand) }) else {
        handle.last_error = "subcommand is null or not valid UTF-8".into();
        return EVOLOP_ERR_ARGUMENT;
    };
    let Some(sub) = Subcommand::parse(sub_str) else {
        handle.last_error = format!("unknown subcommand `{sub_str}`");
        return EVOLOP_ERR_ARGUMENT;
    };
    let over = Overrides {
        out_dir: unsafe { read_str(out_dir) }.map(PathBuf::from),
        seed: (seed >= 0).then_some(seed as u64),
        refine: 0,
        parallel: false,
    };
    match run(handle.config.clone(), sub, &over) {
        Ok(rep) => {
            let ok = rep.all_passed();
            handle.report = Some(rep);
            if ok {
                handle.last_error.clear();
                EVOLOP_OK
            } else {
                handle.last_error = "one or more checks failed; see the report".into();
                EVOLOP_ERR_NUMERIC
            }
        }
        Err(e @ evolop::Error::Config(_)) | Err(e @ evolop::Error::Parse(_)) => {
            handle.last_error = e.to_string();
            EVOLOP_ERR_CONFIG
        }
        Err(e) => {
            handle.last_error = e.to_string();
            EVOLOP_ERR_NUMERIC
        }
    }
}

/// JSON report of the last run, or null if no run happened yet.
///
/// # Safety
/// `run` as above; the returned string is freed by `evolop_string_free`.
#[no_mangle]
pub unsafe extern "C" fn evolop_report_json(run_ptr: *const EvolopRun) -> *mut c_char {
    let Some(handle) = (unsafe { run_ptr.as_ref() }) else {
        return std::ptr::null_mut();
    };
    match &handle.report {
        Some(rep) => to_c_string(&rep.to_json()),
        None => std::ptr::null_mut(),
    }
}

/// Message of the last error on this handle (empty string if none).
///
/// # Safety
/// `run` as above.
#[no_mangle]
pub unsafe extern "C" fn evolop_last_error(run_ptr: *const EvolopRun) -> *mut c_char {
    match unsafe { run_ptr.as_ref() } {
        Some(handle) => to_c_string(&handle.last_error),
        None => to_c_string("null handle"),
    }
}

/// Evaluate an expression at `(t, x1, x2)`.
///
/// # Safety
/// `source` NUL-terminated; `value_out` non-null; `err_out` optional.
#[no_mangle]
pub unsafe extern "C" fn evolop_expr_eval(
    source: *const c_char,
    t: f64,
    x1: f64,
    x2: f64,
    value_out: *mut f64,
    err_out: *mut *mut c_char,
) -> i32 {
    let Some(src) = (unsafe { read_str(source) }) else {
        put_err(err_out, "source is null or not valid UTF-8");
        return EVOLOP_ERR_ARGUMENT;
    };
    if value_out.is_null() {
        put_err(err_out, "value_out is null");
        return EVOLOP_ERR_ARGUMENT;
    }
    let expr = match evolop::parse_expr(src) {
        Ok(e) => e,
        Err(e) => {
            put_err(err_out, &e.to_string());
            return EVOLOP_ERR_CONFIG;
        }
    };
    match expr.eval(t, &[x1, x2]) {
        Ok(v) => {
            unsafe { *value_out = v };
            EVOLOP_OK
        }
        Err(e) => {
            put_err(err_out, &e.to_string());
            EVOLOP_ERR_NUMERIC
        }
    }
}

/// Printed symbolic derivative of an expression.
///
/// # Safety
/// `source` and `var` NUL-terminated; `err_out` optional.
#[no_mangle]
pub unsafe extern "C" fn evolop_expr_derivative(
    source: *const c_char,
    var: *const c_char,
    err_out: *mut *mut c_char,
) -> *mut c_char {
    let (Some(src), Some(var_name)) = (unsafe { read_str(source) }, unsafe { read_str(var) })
    else {
        put_err(err_out, "source/var is null or not valid UTF-8");
        return std::ptr::null_mut();
    };
    let var = match var_name {
        "t" => Var::T,
        "x1" => Var::X1,
        "x2" => Var::X2,
        other => {
            put_err(err_out, &format!("unknown variable `{other}` (use t, x1, x2)"));
            return std::ptr::null_mut();
        }
    };
    match evolop::parse_expr(src) {
        Ok(e) => to_c_string(&e.differentiate(var).to_string()),
        Err(e) => {
            put_err(err_out, &e.to_string());
            std::ptr::null_mut()
        }
    }
}

/// Release a run handle.
///
/// # Safety
/// `run` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn evolop_run_free(run_ptr: *mut EvolopRun) {
    if !run_ptr.is_null() {
        drop(unsafe { Box::from_raw(run_ptr) });
    }
}

/// Release a string produced by this library.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn evolop_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
