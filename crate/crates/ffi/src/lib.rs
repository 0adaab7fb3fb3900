//! C ABI over `arks-core`.
//!
//! Every function returns an [`ArksStatus`]; on failure the message is kept in
//! thread-local storage and can be read with [`arks_last_error`]. Simulations
//! are opaque handles created by [`arks_simulation_new`] and released with
//! [`arks_simulation_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use arks::analysis::{fit_decay, linearized_rates};
use arks::config::{make_init, RunConfig};
use arks::functionals::DiagnosticsRow;
use arks::model::{classify, Params};
use arks::solver::{Simulation, Termination};
use arks::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArksStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    InvalidArgument = 4,
    Runtime = 5,
    BufferSize = 6,
    OutOfRange = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArksField {
    U = 0,
    V = 1,
    W = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArksRunState {
    Running = 0,
    Finished = 1,
    Blowup = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArksParams {
    pub chi: f64,
    pub xi: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub d1: f64,
    pub d2: f64,
}

impl From<ArksParams> for Params {
    fn from(p: ArksParams) -> Self {
        Params {
            chi: p.chi,
            xi: p.xi,
            alpha: p.alpha,
            beta: p.beta,
            gamma: p.gamma,
            delta: p.delta,
            d1: p.d1,
            d2: p.d2,
        }
    }
}

/// One diagnostics record; `e_legacy` is NaN when not defined.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArksDiagnostics {
    pub t: f64,
    pub mass: f64,
    pub min_u: f64,
    pub max_u: f64,
    pub entropy: f64,
    pub e: f64,
    pub f: f64,
    pub residual: f64,
    pub ckp_lower: f64,
    pub ckp_upper: f64,
    pub l1_u: f64,
    pub linf_u: f64,
    pub linf_v: f64,
    pub linf_w: f64,
    pub phi_star_v: f64,
    pub phi_star_w: f64,
    pub e_legacy: f64,
}

impl From<&DiagnosticsRow> for ArksDiagnostics {
    fn from(r: &DiagnosticsRow) -> Self {
        ArksDiagnostics {
            t: r.t,
            mass: r.mass,
            min_u: r.min_u,
            max_u: r.max_u,
            entropy: r.entropy,
            e: r.e,
            f: r.f,
            residual: r.residual,
            ckp_lower: r.ckp_lower,
            ckp_upper: r.ckp_upper,
            l1_u: r.l1_u,
            linf_u: r.linf_u,
            linf_v: r.linf_v,
            linf_w: r.linf_w,
            phi_star_v: r.phi_star_v,
            phi_star_w: r.phi_star_w,
            e_legacy: r.e_legacy.unwrap_or(f64::NAN),
        }
    }
}

/// Regime report; optional values are NaN (or -1 for `lin2018`) when absent.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArksRegime {
    pub theta1: f64,
    pub theta2: f64,
    pub ratio: f64,
    pub cond_main: bool,
    pub cond_strict: bool,
    pub lc5_diffusion: bool,
    pub lc5_decay: bool,
    pub min_eig_a1: f64,
    pub min_eig_a2: f64,
    pub min_eig_a3: f64,
    pub mu2: f64,
    pub mu3: f64,
    /// 1 holds, 0 fails, -1 not applicable.
    pub lin2018: i32,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArksDecayFit {
    pub rate: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub samples: usize,
}

/// Opaque simulation handle.
pub struct ArksSimulation {
    sim: Simulation,
    rows: Vec<DiagnosticsRow>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(e: &Error) -> ArksStatus {
    match e {
        Error::Config { .. } => ArksStatus::Config,
        Error::InvalidParameter { .. }
        | Error::InvalidGrid(_)
        | Error::ZeroMass
        | Error::InsufficientSamples { .. }
        | Error::Fit(_) => ArksStatus::InvalidArgument,
        _ => ArksStatus::Runtime,
    }
}

fn fail(status: ArksStatus, msg: impl Into<String>) -> ArksStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> ArksStatus {
    fail(status_of(&e), e.to_string())
}

/// Runs `f`, converting panics into `ArksStatus::Panic`.
fn guard(f: impl FnOnce() -> ArksStatus) -> ArksStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(ArksStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(ArksStatus::NullPointer, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message for the most recent failure on this thread, or null. The pointer
/// stays valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn arks_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a simulation from configuration text in the `key = value` format.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arks_simulation_new(config: *const c_char, out: *mut *mut ArksSimulation) -> ArksStatus {
    guard(|| {
        non_null!(config, out);
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(config).to_str() else {
            return fail(ArksStatus::InvalidUtf8, "config is not UTF-8");
        };
        let built = RunConfig::parse(text).and_then(|cfg| {
            let init = make_init(&cfg)?;
            Simulation::new(init, cfg.params, cfg.solver)
        });
        match built {
            Ok(sim) => {
                *out = Box::into_raw(Box::new(ArksSimulation { sim, rows: Vec::new() }));
                ArksStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `sim` must come from [`arks_simulation_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn arks_simulation_free(sim: *mut ArksSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Integrates up to `target` (clamped to the configured end time), storing
/// every scheduled record. `state` receives whether the run has finished.
///
/// # Safety
/// `sim` must be a live handle; `state` may be null.
#[no_mangle]
pub unsafe extern "C" fn arks_simulation_advance(
    sim: *mut ArksSimulation,
    target: f64,
    state: *mut ArksRunState,
) -> ArksStatus {
    guard(|| {
        non_null!(sim);
        if target.is_nan() {
            return fail(ArksStatus::InvalidArgument, "target time is NaN");
        }
        let h = &mut *sim;
        match h.sim.advance_to(target, &mut h.rows) {
            Ok(st) => {
                if !state.is_null() {
                    *state = match st {
                        None => ArksRunState::Running,
                        Some(Termination::Normal) => ArksRunState::Finished,
                        Some(Termination::Blowup) => ArksRunState::Blowup,
                    };
                }
                ArksStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `sim` must be a live handle and `t` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arks_simulation_time(sim: *const ArksSimulation, t: *mut f64) -> ArksStatus {
    guard(|| {
        non_null!(sim, t);
        *t = (*sim).sim.time();
        ArksStatus::Ok
    })
}

/// # Safety
/// `sim` must be a live handle; `nx`, `ny` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn arks_simulation_grid(
    sim: *const ArksSimulation,
    nx: *mut usize,
    ny: *mut usize,
) -> ArksStatus {
    guard(|| {
        non_null!(sim, nx, ny);
        let g = (*sim).sim.state().grid();
        *nx = g.nx();
        *ny = g.ny();
        ArksStatus::Ok
    })
}

/// Diagnostics of the current state.
///
/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arks_simulation_diagnostics(
    sim: *const ArksSimulation,
    out: *mut ArksDiagnostics,
) -> ArksStatus {
    guard(|| {
        non_null!(sim, out);
        match (*sim).sim.snapshot_row() {
            Ok(r) => {
                *out = ArksDiagnostics::from(&r);
                ArksStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Number of scheduled records stored so far.
///
/// # Safety
/// `sim` must be a live handle and `count` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arks_simulation_record_count(sim: *const ArksSimulation, count: *mut usize) -> ArksStatus {
    guard(|| {
        non_null!(sim, count);
        *count = (*sim).rows.len();
        ArksStatus::Ok
    })
}

/// # Safety
/// `sim` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn arks_simulation_record(
    sim: *const ArksSimulation,
    index: usize,
    out: *mut ArksDiagnostics,
) -> ArksStatus {
    guard(|| {
        non_null!(sim, out);
        let rows = &(*sim).rows;
        match rows.get(index) {
            Some(r) => {
                *out = ArksDiagnostics::from(r);
                ArksStatus::Ok
            }
            None => fail(ArksStatus::OutOfRange, format!("record {index} of {}", rows.len())),
        }
    })
}

/// Copies one field (row-major, `nx * ny` values) into `buf`.
///
/// # Safety
/// `sim` must be a live handle and `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn arks_simulation_copy_field(
    sim: *const ArksSimulation,
    field: ArksField,
    buf: *mut f64,
    len: usize,
) -> ArksStatus {
    guard(|| {
        non_null!(sim, buf);
        let s = (*sim).sim.state();
        let src = match field {
            ArksField::U => s.u.values(),
            ArksField::V => s.v.values(),
            ArksField::W => s.w.values(),
        };
        if len < src.len() {
            return fail(
                ArksStatus::BufferSize,
                format!("buffer holds {len}, field has {}", src.len()),
            );
        }
        ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
        ArksStatus::Ok
    })
}

/// Regime conditions for `params`; pass `ubar <= 0` or NaN to skip the
/// mass-dependent ones.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn arks_classify(params: *const ArksParams, ubar: f64, out: *mut ArksRegime) -> ArksStatus {
    guard(|| {
        non_null!(params, out);
        let mass = if ubar > 0.0 { Some(ubar) } else { None };
        match classify(&Params::from(*params), mass) {
            Ok(r) => {
                *out = ArksRegime {
                    theta1: r.theta1,
                    theta2: r.theta2,
                    ratio: r.ratio,
                    cond_main: r.cond_main,
                    cond_strict: r.cond_strict,
                    lc5_diffusion: r.lc5_diffusion,
                    lc5_decay: r.lc5_decay,
                    min_eig_a1: r.min_eig_a1,
                    min_eig_a2: r.min_eig_a2,
                    min_eig_a3: r.min_eig_a3,
                    mu2: r.mu2,
                    mu3: r.mu3.unwrap_or(f64::NAN),
                    lin2018: r.lin2018.map_or(-1, i32::from),
                };
                ArksStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Eigenvalues of the linearisation on a mode with Laplacian eigenvalue
/// `-k2`, sorted by descending real part.
///
/// # Safety
/// `params` must be valid; `re` and `im` must each hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn arks_linearized_rates(
    params: *const ArksParams,
    ubar: f64,
    k2: f64,
    re: *mut f64,
    im: *mut f64,
) -> ArksStatus {
    guard(|| {
        non_null!(params, re, im);
        let p = Params::from(*params);
        if let Err(e) = p.validate() {
            return from_error(e);
        }
        if !(ubar > 0.0 && k2 >= 0.0 && k2.is_finite()) {
            return fail(ArksStatus::InvalidArgument, "need ubar > 0 and finite k2 >= 0");
        }
        let r = linearized_rates(&p, ubar, k2);
        ptr::copy_nonoverlapping(r.eigen_real_parts.as_ptr(), re, 3);
        ptr::copy_nonoverlapping(r.eigen_imag_parts.as_ptr(), im, 3);
        ArksStatus::Ok
    })
}

/// Exponential fit over the trailing `window` fraction of `n` samples.
///
/// # Safety
/// `t` and `v` must each hold `n` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn arks_fit_decay(
    t: *const f64,
    v: *const f64,
    n: usize,
    window: f64,
    out: *mut ArksDecayFit,
) -> ArksStatus {
    guard(|| {
        non_null!(t, v, out);
        let (ts, vs) = (std::slice::from_raw_parts(t, n), std::slice::from_raw_parts(v, n));
        match fit_decay(ts, vs, window) {
            Ok(f) => {
                *out = ArksDecayFit {
                    rate: f.rate,
                    amplitude: f.amplitude,
                    r_squared: f.r_squared,
                    t_start: f.window.0,
                    t_end: f.window.1,
                    samples: f.samples,
                };
                ArksStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
