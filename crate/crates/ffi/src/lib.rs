//! C ABI over the `bellmeter` library.
//!
//! Objects cross the boundary as opaque handles owned by the caller and
//! released with the matching `*_free` function. Every fallible function
//! returns a [`BmStatus`]; on failure a description is available from
//! [`bm_last_error_message`] on the same thread. Strings returned through
//! out-parameters are released with [`bm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use bellmeter::behaviour::{Behaviour, SettingsDistribution, Tolerance};
use bellmeter::error::BellError;
use bellmeter::hvmodel::{self, HvModel};
use bellmeter::{chsh, polytope, quantum, schema, sim};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Json = 3,
    Structural = 4,
    InvalidBehaviour = 5,
    Signalling = 6,
    WrongSettingCount = 7,
    IndexOutOfRange = 8,
    Domain = 9,
    VertexCap = 10,
    Model = 11,
    Config = 12,
    Solver = 13,
    Io = 14,
    Panic = 15,
}

/// Opaque behaviour handle, optionally carrying a settings distribution.
pub struct BmBehaviour {
    behaviour: Behaviour,
    settings: Option<SettingsDistribution>,
}

/// Opaque hidden-variable model handle.
pub struct BmHvModel {
    model: HvModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: BmStatus,
    message: String,
}

impl From<BellError> for Failure {
    fn from(e: BellError) -> Self {
        let status = match &e {
            BellError::Structural(_) => BmStatus::Structural,
            BellError::InvalidBehaviour(_) => BmStatus::InvalidBehaviour,
            BellError::Signalling(_) => BmStatus::Signalling,
            BellError::WrongSettingCount { .. } => BmStatus::WrongSettingCount,
            BellError::IndexOutOfRange(_) => BmStatus::IndexOutOfRange,
            BellError::Domain(_) => BmStatus::Domain,
            BellError::VertexCap { .. } => BmStatus::VertexCap,
            BellError::Model(_) => BmStatus::Model,
            BellError::Config(_) => BmStatus::Config,
            BellError::Solver(_) => BmStatus::Solver,
            BellError::Json(_) => BmStatus::Json,
            BellError::Io(_) => BmStatus::Io,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn fail(status: BmStatus, message: &str) -> Failure {
    Failure {
        status,
        message: message.to_string(),
    }
}

fn set_last_error(message: Option<String>) {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = message.map(|m| {
            CString::new(m.replace('\0', " ")).expect("interior nul bytes removed")
        });
    });
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(None);
            BmStatus::Ok
        }
        Ok(Err(e)) => {
            set_last_error(Some(e.message));
            e.status
        }
        Err(_) => {
            set_last_error(Some("internal panic".to_string()));
            BmStatus::Panic
        }
    }
}

fn tolerance(tol: f64) -> Result<Tolerance, Failure> {
    Ok(Tolerance::new(tol)?)
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, Failure> {
    if s.is_null() {
        return Err(fail(BmStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(BmStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn handle<'a, T>(p: *const T) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(BmStatus::NullPointer, "handle is null"))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(BmStatus::NullPointer, "output pointer is null"));
    }
    out.write(value);
    Ok(())
}

unsafe fn read_slice<'a>(p: *const f64, len: usize) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(BmStatus::NullPointer, "array argument is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| fail(BmStatus::Structural, "output contains a nul byte"))
}

fn boxed_behaviour(behaviour: Behaviour) -> *mut BmBehaviour {
    Box::into_raw(Box::new(BmBehaviour {
        behaviour,
        settings: None,
    }))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn bm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn bm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string obtained from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a behaviour JSON document. Entries within `tol` of `[0, 1]` are clamped.
///
/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_behaviour_from_json(
    json: *const c_char,
    tol: f64,
    out: *mut *mut BmBehaviour,
) -> BmStatus {
    guard(|| {
        let (behaviour, settings) = schema::behaviour_from_json(read_str(json)?, tolerance(tol)?)?;
        write_out(out, Box::into_raw(Box::new(BmBehaviour { behaviour, settings })))
    })
}

/// Serializes a behaviour; free the result with [`bm_string_free`].
///
/// # Safety
/// `b` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_behaviour_to_json(b: *const BmBehaviour, out: *mut *mut c_char) -> BmStatus {
    guard(|| {
        let b = handle(b)?;
        let text = schema::behaviour_to_json(&b.behaviour, b.settings.as_ref());
        write_out(out, into_c_string(text)?)
    })
}

/// Releases a behaviour handle. Null is ignored.
///
/// # Safety
/// `b` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bm_behaviour_free(b: *mut BmBehaviour) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// # Safety
/// `b` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_behaviour_num_settings(
    b: *const BmBehaviour,
    out_a: *mut usize,
    out_b: *mut usize,
) -> BmStatus {
    guard(|| {
        let b = handle(b)?;
        write_out(out_a, b.behaviour.num_settings_a())?;
        write_out(out_b, b.behaviour.num_settings_b())
    })
}

/// `P(a,b|x,y)` with outcome index 0 meaning `+1`.
///
/// # Safety
/// `b` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_behaviour_probability(
    b: *const BmBehaviour,
    x: usize,
    y: usize,
    a: usize,
    outcome_b: usize,
    out: *mut f64,
) -> BmStatus {
    guard(|| {
        let h = handle(b)?;
        let beh = &h.behaviour;
        if x >= beh.num_settings_a() || y >= beh.num_settings_b() || a > 1 || outcome_b > 1 {
            return Err(fail(BmStatus::IndexOutOfRange, "index out of range"));
        }
        write_out(out, beh.p(x, y, a, outcome_b))
    })
}

/// Writes whether the behaviour is valid and non-signalling within `tol`.
///
/// # Safety
/// `b` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_behaviour_is_non_signalling(
    b: *const BmBehaviour,
    tol: f64,
    out: *mut bool,
) -> BmStatus {
    guard(|| {
        let b = handle(b)?;
        let tol = tolerance(tol)?;
        let ok = b.behaviour.validate(tol).is_valid() && b.behaviour.is_non_signalling(tol);
        write_out(out, ok)
    })
}

/// Writes the four CHSH values into `out[0..4]`.
///
/// # Safety
/// `b` must be a live handle; `out` must have room for four doubles.
#[no_mangle]
pub unsafe extern "C" fn bm_chsh_values(b: *const BmBehaviour, out: *mut f64) -> BmStatus {
    guard(|| {
        let s = chsh::chsh_values(&handle(b)?.behaviour)?;
        if out.is_null() {
            return Err(fail(BmStatus::NullPointer, "output pointer is null"));
        }
        ptr::copy_nonoverlapping(s.as_ptr(), out, 4);
        Ok(())
    })
}

/// Closed-form measure from the largest CHSH value (two settings only).
///
/// # Safety
/// `b` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_measure_formula(b: *const BmBehaviour, tol: f64, out: *mut f64) -> BmStatus {
    guard(|| {
        let r = chsh::chsh_report(&handle(b)?.behaviour, tolerance(tol)?)?;
        write_out(out, r.measure)
    })
}

/// Local content from the linear program over deterministic strategies.
///
/// # Safety
/// `b` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_measure_lp(b: *const BmBehaviour, tol: f64, out: *mut f64) -> BmStatus {
    guard(|| {
        let lc = polytope::local_content_lp(&handle(b)?.behaviour, tolerance(tol)?)?;
        write_out(out, lc.mu)
    })
}

/// Splits a two-setting behaviour as `p·local + (1 − p)·PR-box`.
/// `out_pr_index` receives 1..=8, or 0 when the behaviour is local.
/// `out_local` may be null when the local part is not wanted.
///
/// # Safety
/// `b` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_split_local_pr(
    b: *const BmBehaviour,
    tol: f64,
    out_p: *mut f64,
    out_pr_index: *mut u32,
    out_local: *mut *mut BmBehaviour,
) -> BmStatus {
    guard(|| {
        let d = polytope::split_local_pr(&handle(b)?.behaviour, tolerance(tol)?)?;
        write_out(out_p, d.p)?;
        write_out(out_pr_index, d.pr_index.map_or(0, |i| i as u32))?;
        if !out_local.is_null() {
            out_local.write(boxed_behaviour(d.local_part));
        }
        Ok(())
    })
}

/// Born-rule behaviour of `cos(θ/2)|00⟩ + sin(θ/2)|11⟩` measured at the
/// given x–z plane basis angles.
///
/// # Safety
/// `alice` and `bob` must point to `num_alice` and `num_bob` doubles;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_quantum_behaviour(
    theta: f64,
    alice: *const f64,
    num_alice: usize,
    bob: *const f64,
    num_bob: usize,
    out: *mut *mut BmBehaviour,
) -> BmStatus {
    guard(|| {
        let state = quantum::TwoQubitPureState::new(theta)?;
        let a = quantum::bases(read_slice(alice, num_alice)?);
        let b = quantum::bases(read_slice(bob, num_bob)?);
        let beh = quantum::born_behaviour(&state, &a, &b)?;
        write_out(out, boxed_behaviour(beh))
    })
}

/// Chained-settings behaviour of the maximally entangled state, `m ≥ 2`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_chained_behaviour(m: usize, out: *mut *mut BmBehaviour) -> BmStatus {
    guard(|| write_out(out, boxed_behaviour(quantum::chained_behaviour(m)?)))
}

/// Chained expression value, the free-choice bound it implies, and the
/// `π²/(4(2m − 1))` envelope.
///
/// # Safety
/// Outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_chained_bound(
    m: usize,
    tol: f64,
    out_value: *mut f64,
    out_bound: *mut f64,
    out_envelope: *mut f64,
) -> BmStatus {
    guard(|| {
        let (_, r) = quantum::chained_report(m, tolerance(tol)?)?;
        write_out(out_value, r.s_value)?;
        write_out(out_bound, r.bound_exact)?;
        write_out(out_envelope, r.bound_envelope)
    })
}

/// Fully local, fully non-free model of `b`. `settings` holds the `[x][y]`
/// settings distribution; when null, the behaviour's own distribution is used,
/// or the uniform one if it has none.
///
/// # Safety
/// `b` must be a live handle; `settings` must be null or point to
/// `num_settings_a · num_settings_b` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_dilate(
    b: *const BmBehaviour,
    settings: *const f64,
    tol: f64,
    out: *mut *mut BmHvModel,
) -> BmStatus {
    guard(|| {
        let h = handle(b)?;
        let tol = tolerance(tol)?;
        let (ma, mb) = (h.behaviour.num_settings_a(), h.behaviour.num_settings_b());
        let s = if !settings.is_null() {
            SettingsDistribution::new(ma, mb, read_slice(settings, ma * mb)?.to_vec(), tol)?
        } else if let Some(s) = &h.settings {
            s.clone()
        } else {
            SettingsDistribution::uniform(ma, mb)?
        };
        let model = hvmodel::dilate(&h.behaviour, &s, tol)?;
        write_out(out, Box::into_raw(Box::new(BmHvModel { model })))
    })
}

/// # Safety
/// `json` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_model_from_json(json: *const c_char, tol: f64, out: *mut *mut BmHvModel) -> BmStatus {
    guard(|| {
        let model = schema::model_from_json(read_str(json)?, tolerance(tol)?)?;
        write_out(out, Box::into_raw(Box::new(BmHvModel { model })))
    })
}

/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_model_to_json(m: *const BmHvModel, out: *mut *mut c_char) -> BmStatus {
    guard(|| write_out(out, into_c_string(schema::model_to_json(&handle(m)?.model))?))
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `m` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bm_model_free(m: *mut BmHvModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Total prior mass of local and of free hidden values.
///
/// # Safety
/// `m` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_model_measures(
    m: *const BmHvModel,
    tol: f64,
    out_locality: *mut f64,
    out_freedom: *mut f64,
) -> BmStatus {
    guard(|| {
        let ms = handle(m)?.model.measures(tolerance(tol)?);
        write_out(out_locality, ms.locality_mass)?;
        write_out(out_freedom, ms.freedom_mass)
    })
}

/// Behaviour reproduced by the model.
///
/// # Safety
/// `m` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_model_behaviour(m: *const BmHvModel, out: *mut *mut BmBehaviour) -> BmStatus {
    guard(|| write_out(out, boxed_behaviour(handle(m)?.model.reconstruct_behaviour())))
}

/// Monte Carlo run with settings drawn from the model; writes the result as
/// JSON. Free the string with [`bm_string_free`].
///
/// # Safety
/// `m` must be a live handle; `out_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bm_simulate(
    m: *const BmHvModel,
    trials: u64,
    seed: u64,
    tol: f64,
    out_json: *mut *mut c_char,
) -> BmStatus {
    guard(|| {
        let cfg = sim::SimConfig::new(trials, seed);
        let r = sim::run(&handle(m)?.model, &cfg, tolerance(tol)?)?;
        let text = serde_json::to_string(&r).map_err(BellError::from)?;
        write_out(out_json, into_c_string(text)?)
    })
}
