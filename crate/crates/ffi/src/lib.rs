//! C ABI over the ventasm interpreter, checker and closed-loop sessions.
//!
//! Objects are opaque handles created by `*_new`/`*_load` calls and
//! released with the matching `*_free`. Every call returns a
//! [`VentasmStatus`]; on failure `ventasm_last_error` describes it.
//! Strings cross the boundary as NUL-terminated UTF-8. Results are written
//! into caller buffers, and `out_len` always receives the length needed
//! (without the NUL).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ventasm::engine::{self, MachineState, MonitoredEnv};
use ventasm::models;
use ventasm::service::{OperatorCommand, SessionCore, SessionSpec};
use ventasm::verify::{self, AbstractionConfig, CheckOutcome};
use ventasm::{MachineDefinition, Value};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VentasmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    UnknownName = 4,
    BadValue = 5,
    StepError = 6,
    VerifyError = 7,
    SessionError = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// Model configuration to bind for bundled levels.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VentasmConfig {
    Default = 0,
    Test = 1,
}

/// A machine and its current state plus inputs for the next step.
pub struct VentasmMachine {
    def: MachineDefinition,
    state: MachineState,
    env: MonitoredEnv,
}

/// A closed-loop session with the lung simulator.
pub struct VentasmSession {
    core: SessionCore,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: VentasmStatus, msg: impl ToString) -> VentasmStatus {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
    status
}

fn guard(f: impl FnOnce() -> VentasmStatus) -> VentasmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(VentasmStatus::Panic, "internal panic"),
    }
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, VentasmStatus> {
    if p.is_null() {
        return Err(fail(VentasmStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(VentasmStatus::InvalidUtf8, "argument is not UTF-8"))
}

/// Copies `s` into `buf` when it fits (with its NUL) and reports the length.
unsafe fn emit(s: &str, buf: *mut c_char, cap: usize, out_len: *mut usize) -> VentasmStatus {
    if !out_len.is_null() {
        *out_len = s.len();
    }
    if buf.is_null() || cap < s.len() + 1 {
        return fail(VentasmStatus::BufferTooSmall, format!("{} bytes needed", s.len() + 1));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    VentasmStatus::Ok
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

fn machine_handle(def: MachineDefinition) -> *mut VentasmMachine {
    let state = MachineState::initial(&def);
    let env = state.monitored_env(&def);
    Box::into_raw(Box::new(VentasmMachine { def, state, env }))
}

/// Message of the last failed call on this thread; valid until the next call.
#[no_mangle]
pub extern "C" fn ventasm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads bundled level 0-3.
///
/// # Safety
/// `out` must be a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn ventasm_machine_load(level: u8, config: VentasmConfig, out: *mut *mut VentasmMachine) -> VentasmStatus {
    guard(|| {
        if out.is_null() {
            return fail(VentasmStatus::NullPointer, "null out pointer");
        }
        let loaded = match config {
            VentasmConfig::Default => models::load(level),
            VentasmConfig::Test => models::load_for_tests(level),
        };
        match loaded {
            Ok(def) => {
                *out = machine_handle(def);
                VentasmStatus::Ok
            }
            Err(e) => fail(VentasmStatus::ParseError, e),
        }
    })
}

/// Parses a model from source text.
///
/// # Safety
/// `source` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ventasm_machine_parse(source: *const c_char, out: *mut *mut VentasmMachine) -> VentasmStatus {
    guard(|| {
        let src = try_ffi!(text(source));
        if out.is_null() {
            return fail(VentasmStatus::NullPointer, "null out pointer");
        }
        match ventasm::parse_str(src) {
            Ok(def) => {
                *out = machine_handle(def);
                VentasmStatus::Ok
            }
            Err(e) => fail(VentasmStatus::ParseError, e),
        }
    })
}

/// # Safety
/// `m` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ventasm_machine_free(m: *mut VentasmMachine) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Back to the initial state with default inputs.
///
/// # Safety
/// `m` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ventasm_machine_reset(m: *mut VentasmMachine) -> VentasmStatus {
    guard(|| {
        let Some(m) = m.as_mut() else {
            return fail(VentasmStatus::NullPointer, "null machine");
        };
        m.state = MachineState::initial(&m.def);
        m.env = m.state.monitored_env(&m.def);
        VentasmStatus::Ok
    })
}

/// Sets a monitored input for the next step, e.g. `("startupEnded", "true")`.
/// Inputs keep their value across steps.
///
/// # Safety
/// `m` must be a live handle and the strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ventasm_machine_set_input(m: *mut VentasmMachine, name: *const c_char, value: *const c_char) -> VentasmStatus {
    guard(|| {
        let Some(m) = m.as_mut() else {
            return fail(VentasmStatus::NullPointer, "null machine");
        };
        let (name, value) = (try_ffi!(text(name)), try_ffi!(text(value)));
        let Some(loc) = m.def.loc_by_name(name).filter(|l| m.def.monitored_locs().contains(l)) else {
            return fail(VentasmStatus::UnknownName, format!("'{name}' is not a monitored location"));
        };
        match m.def.parse_value(m.def.loc_type(loc), value) {
            Some(v) => {
                m.env.insert(loc, v);
                VentasmStatus::Ok
            }
            None => fail(VentasmStatus::BadValue, format!("'{value}' does not fit '{name}'")),
        }
    })
}

/// Runs one step. Unless the clock input was set since the last step, it
/// advances by `clock_step_ms`.
///
/// # Safety
/// `m` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ventasm_machine_step(m: *mut VentasmMachine, clock_step_ms: u64) -> VentasmStatus {
    guard(|| {
        let Some(m) = m.as_mut() else {
            return fail(VentasmStatus::NullPointer, "null machine");
        };
        if let Some(c) = m.def.clock_loc() {
            let now = m.state.clock(&m.def);
            let set = m.env.get(&c).copied();
            if set.is_none() || set == Some(Value::Instant(now)) {
                m.env.insert(c, Value::Instant(now + clock_step_ms));
            }
        }
        match engine::step(&m.def, &m.state, &m.env) {
            Ok(next) => {
                m.state = next;
                VentasmStatus::Ok
            }
            Err(e) => fail(VentasmStatus::StepError, e),
        }
    })
}

/// Current value of a location (`"state"`, `"start(timerRm)"`) in model syntax.
///
/// # Safety
/// `m` must be a live handle, `name` NUL-terminated, `buf` at least `cap`
/// bytes, and `out_len` null or valid.
#[no_mangle]
pub unsafe extern "C" fn ventasm_machine_get(
    m: *const VentasmMachine,
    name: *const c_char,
    buf: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> VentasmStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            return fail(VentasmStatus::NullPointer, "null machine");
        };
        let name = try_ffi!(text(name));
        match m.state.show(&m.def, name) {
            Some(v) => emit(&v, buf, cap, out_len),
            None => fail(VentasmStatus::UnknownName, format!("no location '{name}'")),
        }
    })
}

/// Checks an invariant property (`g(...)`, `not f(...)`) with the default
/// abstraction; `verified` receives the verdict.
///
/// # Safety
/// `m` must be a live handle, `property` NUL-terminated and `verified` valid.
#[no_mangle]
pub unsafe extern "C" fn ventasm_check_property(m: *const VentasmMachine, property: *const c_char, verified: *mut bool) -> VentasmStatus {
    guard(|| {
        let Some(m) = m.as_ref() else {
            return fail(VentasmStatus::NullPointer, "null machine");
        };
        let prop = try_ffi!(text(property));
        if verified.is_null() {
            return fail(VentasmStatus::NullPointer, "null verdict pointer");
        }
        let cfg = AbstractionConfig::default().with_budget(verify::budget_from_env());
        let outcome = verify::parse_property(&m.def, prop).and_then(|p| verify::check_invariant(&m.def, &p, &cfg));
        match outcome {
            Ok(o) => {
                *verified = matches!(o, CheckOutcome::Verified);
                VentasmStatus::Ok
            }
            Err(e) => fail(VentasmStatus::VerifyError, e),
        }
    })
}

/// Starts a paused closed-loop session. `spec_json` may be null for the
/// defaults or a JSON session spec (level, config, patient, circuit,
/// tickMs, lungDtMs).
///
/// # Safety
/// `spec_json` must be null or NUL-terminated, and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ventasm_session_new(spec_json: *const c_char, out: *mut *mut VentasmSession) -> VentasmStatus {
    guard(|| {
        if out.is_null() {
            return fail(VentasmStatus::NullPointer, "null out pointer");
        }
        let spec = if spec_json.is_null() {
            SessionSpec::default()
        } else {
            match serde_json::from_str(try_ffi!(text(spec_json))) {
                Ok(s) => s,
                Err(e) => return fail(VentasmStatus::ParseError, e),
            }
        };
        match SessionCore::new(spec) {
            Ok(core) => {
                *out = Box::into_raw(Box::new(VentasmSession { core }));
                VentasmStatus::Ok
            }
            Err(e) => fail(VentasmStatus::SessionError, e),
        }
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn ventasm_session_free(s: *mut VentasmSession) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Queues an operator command such as `{"command":"startupEnded"}`.
///
/// # Safety
/// `s` must be a live handle and `command_json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn ventasm_session_command(s: *mut VentasmSession, command_json: *const c_char) -> VentasmStatus {
    guard(|| {
        let Some(s) = s.as_mut() else {
            return fail(VentasmStatus::NullPointer, "null session");
        };
        let cmd: OperatorCommand = match serde_json::from_str(try_ffi!(text(command_json))) {
            Ok(c) => c,
            Err(e) => return fail(VentasmStatus::ParseError, e),
        };
        match s.core.apply_command(cmd) {
            Ok(()) => VentasmStatus::Ok,
            Err(e) => fail(VentasmStatus::SessionError, e),
        }
    })
}

/// Advances the session by `count` controller ticks.
///
/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ventasm_session_step(s: *mut VentasmSession, count: u64) -> VentasmStatus {
    guard(|| {
        let Some(s) = s.as_mut() else {
            return fail(VentasmStatus::NullPointer, "null session");
        };
        for _ in 0..count {
            if let Err(e) = s.core.step() {
                return fail(VentasmStatus::SessionError, e);
            }
        }
        VentasmStatus::Ok
    })
}

/// Latest sample as JSON.
///
/// # Safety
/// `s` must be a live handle, `buf` at least `cap` bytes, `out_len` null or valid.
#[no_mangle]
pub unsafe extern "C" fn ventasm_session_snapshot(s: *const VentasmSession, buf: *mut c_char, cap: usize, out_len: *mut usize) -> VentasmStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(VentasmStatus::NullPointer, "null session");
        };
        let json = serde_json::to_string(s.core.snapshot()).expect("samples serialize");
        emit(&json, buf, cap, out_len)
    })
}

/// Whole run log as JSON lines.
///
/// # Safety
/// As for [`ventasm_session_snapshot`].
#[no_mangle]
pub unsafe extern "C" fn ventasm_session_log(s: *const VentasmSession, buf: *mut c_char, cap: usize, out_len: *mut usize) -> VentasmStatus {
    guard(|| {
        let Some(s) = s.as_ref() else {
            return fail(VentasmStatus::NullPointer, "null session");
        };
        emit(&s.core.export_log(), buf, cap, out_len)
    })
}
