//! C ABI over `dglab`. Handles are opaque heap objects released with the
//! matching `_free`; every call returns a `DglabStatus` and leaves a message
//! for `dglab_last_error` on failure.

use dglab::basis::{KernelSpec, NodeFamily};
use dglab::dgsem3d::{ConservedField, Solver, SolverConfig, SolverError, NVAR};
use dglab::diagnostics::{enstrophy, kinetic_energy, tgv_initial_condition};
use dglab::vn1d::{interface_jump, secondary_mode_error, SvvSettings, VnConfig, VnContext, VnError};
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DglabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    EigenFailure = 3,
    Positivity = 4,
    BufferTooSmall = 5,
    Internal = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DglabFamily {
    Gauss = 0,
    GaussLobatto = 1,
}

/// Per-k mode data returned by `dglab_vn_modes`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DglabModeSummary {
    pub primary: usize,
    pub secondary_error: f64,
    pub jump_abs: f64,
    pub cond: f64,
}

pub struct DglabVn(VnContext);

pub struct DglabSolver(Solver);

pub struct DglabField(ConservedField);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn fail(status: DglabStatus, msg: impl ToString) -> DglabStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.to_string());
    status
}

fn vn_status(e: VnError) -> DglabStatus {
    let s = match e {
        VnError::Eigen { .. } => DglabStatus::EigenFailure,
        _ => DglabStatus::InvalidArgument,
    };
    fail(s, e)
}

fn solver_status(e: SolverError) -> DglabStatus {
    let s = match e {
        SolverError::Positivity { .. } => DglabStatus::Positivity,
        _ => DglabStatus::InvalidArgument,
    };
    fail(s, e)
}

fn guard(f: impl FnOnce() -> DglabStatus) -> DglabStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(DglabStatus::Internal, "panic inside dglab"))
}

/// Copy the last error message of this thread into `buf` (NUL-terminated,
/// truncated to fit). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dglab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Build a 1D analysis context. `pe` NaN means inviscid; `svv_mu <= 0`
/// disables SVV.
///
/// # Safety
/// `out` must be valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn dglab_vn_create(
    n: usize,
    family: DglabFamily,
    lambda: f64,
    pe: f64,
    svv_mu: f64,
    svv_p: f64,
    out: *mut *mut DglabVn,
) -> DglabStatus {
    if out.is_null() {
        return fail(DglabStatus::NullPointer, "out is null");
    }
    guard(|| {
        let cfg = VnConfig {
            n,
            family: match family {
                DglabFamily::Gauss => NodeFamily::Gauss,
                DglabFamily::GaussLobatto => NodeFamily::GaussLobatto,
            },
            lambda,
            pe: (!pe.is_nan()).then_some(pe),
            svv: (svv_mu > 0.0).then_some(SvvSettings { mu: svv_mu, kernel: KernelSpec::Power { p: svv_p } }),
            ..VnConfig::default()
        };
        match VnContext::new(&cfg) {
            Ok(ctx) => {
                *out = Box::into_raw(Box::new(DglabVn(ctx)));
                DglabStatus::Ok
            }
            Err(e) => vn_status(e),
        }
    })
}

/// # Safety
/// `ctx` must come from `dglab_vn_create` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dglab_vn_free(ctx: *mut DglabVn) {
    if !ctx.is_null() {
        drop(Box::from_raw(ctx));
    }
}

/// Modes per element, N + 1.
///
/// # Safety
/// `ctx` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dglab_vn_size(ctx: *const DglabVn) -> usize {
    ctx.as_ref().map_or(0, |c| c.0.basis.np())
}

/// Eigenfrequencies omega at `kh` into `re`/`im` (length at least N + 1),
/// plus the primary-mode summary.
///
/// # Safety
/// `ctx` live; `re`, `im` valid for `len` doubles; `summary` null or valid.
#[no_mangle]
pub unsafe extern "C" fn dglab_vn_modes(
    ctx: *const DglabVn,
    kh: f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
    summary: *mut DglabModeSummary,
) -> DglabStatus {
    let Some(ctx) = ctx.as_ref() else { return fail(DglabStatus::NullPointer, "ctx is null") };
    if re.is_null() || im.is_null() {
        return fail(DglabStatus::NullPointer, "output buffer is null");
    }
    let np = ctx.0.basis.np();
    if len < np {
        return fail(DglabStatus::BufferTooSmall, format!("need {np} entries, got {len}"));
    }
    if !(kh.abs() <= std::f64::consts::PI) {
        return fail(DglabStatus::InvalidArgument, format!("|kh| must be <= pi, got {kh}"));
    }
    guard(|| match ctx.0.decompose(&ctx.0.operator(kh)) {
        Ok(d) => {
            let re = std::slice::from_raw_parts_mut(re, np);
            let im = std::slice::from_raw_parts_mut(im, np);
            for (i, w) in d.omega.iter().enumerate() {
                re[i] = w.re;
                im[i] = w.im;
            }
            if let Some(s) = summary.as_mut() {
                *s = DglabModeSummary {
                    primary: d.primary,
                    secondary_error: secondary_mode_error(&d),
                    jump_abs: interface_jump(&d).norm(),
                    cond: d.cond,
                };
            }
            DglabStatus::Ok
        }
        Err(e) => vn_status(e),
    })
}

/// Create a 3D solver from a JSON solver configuration; null selects the
/// defaults.
///
/// # Safety
/// `json` null or a NUL-terminated string; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dglab_solver_create(json: *const c_char, out: *mut *mut DglabSolver) -> DglabStatus {
    if out.is_null() {
        return fail(DglabStatus::NullPointer, "out is null");
    }
    guard(|| {
        let cfg: SolverConfig = if json.is_null() {
            SolverConfig::default()
        } else {
            let text = match CStr::from_ptr(json).to_str() {
                Ok(t) => t,
                Err(e) => return fail(DglabStatus::InvalidArgument, e),
            };
            match serde_json::from_str(text) {
                Ok(c) => c,
                Err(e) => return fail(DglabStatus::InvalidArgument, e),
            }
        };
        match Solver::new(&cfg) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(DglabSolver(s)));
                DglabStatus::Ok
            }
            Err(e) => solver_status(e),
        }
    })
}

/// # Safety
/// `s` from `dglab_solver_create`, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dglab_solver_free(s: *mut DglabSolver) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Taylor-Green initial field on the solver mesh.
///
/// # Safety
/// `s` live; `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn dglab_field_tgv(s: *const DglabSolver, out: *mut *mut DglabField) -> DglabStatus {
    let Some(s) = s.as_ref() else { return fail(DglabStatus::NullPointer, "solver is null") };
    if out.is_null() {
        return fail(DglabStatus::NullPointer, "out is null");
    }
    guard(|| {
        let gas = s.0.cfg.gas;
        *out = Box::into_raw(Box::new(DglabField(s.0.new_field(|x| tgv_initial_condition(x, &gas).0))));
        DglabStatus::Ok
    })
}

/// # Safety
/// `f` from `dglab_field_tgv`, not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dglab_field_free(f: *mut DglabField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Number of doubles in the field: E^3 (N+1)^3 * 5.
///
/// # Safety
/// `f` null or live.
#[no_mangle]
pub unsafe extern "C" fn dglab_field_len(f: *const DglabField) -> usize {
    f.as_ref().map_or(0, |f| f.0.data.len())
}

/// Copy field values (element, node, variable order) into `buf`.
///
/// # Safety
/// `f` live; `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dglab_field_copy(f: *const DglabField, buf: *mut f64, len: usize) -> DglabStatus {
    let Some(f) = f.as_ref() else { return fail(DglabStatus::NullPointer, "field is null") };
    if buf.is_null() {
        return fail(DglabStatus::NullPointer, "buf is null");
    }
    if len < f.0.data.len() {
        return fail(DglabStatus::BufferTooSmall, format!("need {} doubles, got {len}", f.0.data.len()));
    }
    std::ptr::copy_nonoverlapping(f.0.data.as_ptr(), buf, f.0.data.len());
    DglabStatus::Ok
}

/// One RK3 step at the stable dt, in place. The field is untouched on error.
///
/// # Safety
/// `s`, `f` live; `dt_out` null or valid.
#[no_mangle]
pub unsafe extern "C" fn dglab_solver_step(s: *const DglabSolver, f: *mut DglabField, dt_out: *mut f64) -> DglabStatus {
    let (Some(s), Some(f)) = (s.as_ref(), f.as_mut()) else {
        return fail(DglabStatus::NullPointer, "solver or field is null");
    };
    guard(|| {
        let step = s.0.compute_dt(&f.0).and_then(|dt| s.0.rk3_step(&f.0, dt).map(|u| (dt, u)));
        match step {
            Ok((dt, u)) => {
                f.0 = u;
                if let Some(d) = dt_out.as_mut() {
                    *d = dt;
                }
                DglabStatus::Ok
            }
            Err(e) => solver_status(e),
        }
    })
}

/// Domain integrals of the conserved variables (mass, momentum, energy).
///
/// # Safety
/// `s`, `f` live; `out` valid for 5 doubles.
#[no_mangle]
pub unsafe extern "C" fn dglab_solver_totals(s: *const DglabSolver, f: *const DglabField, out: *mut f64) -> DglabStatus {
    let (Some(s), Some(f)) = (s.as_ref(), f.as_ref()) else {
        return fail(DglabStatus::NullPointer, "solver or field is null");
    };
    if out.is_null() {
        return fail(DglabStatus::NullPointer, "out is null");
    }
    if f.0.mesh.e != s.0.cfg.e || f.0.n != s.0.cfg.n {
        return fail(DglabStatus::InvalidArgument, "field does not belong to this solver");
    }
    let t: [f64; NVAR] = s.0.totals(&f.0);
    std::ptr::copy_nonoverlapping(t.as_ptr(), out, NVAR);
    DglabStatus::Ok
}

/// Volume-averaged kinetic energy and enstrophy.
///
/// # Safety
/// `s`, `f` live; `k`, `zeta` null or valid.
#[no_mangle]
pub unsafe extern "C" fn dglab_solver_diagnostics(
    s: *const DglabSolver,
    f: *const DglabField,
    k: *mut f64,
    zeta: *mut f64,
) -> DglabStatus {
    let (Some(s), Some(f)) = (s.as_ref(), f.as_ref()) else {
        return fail(DglabStatus::NullPointer, "solver or field is null");
    };
    if f.0.mesh.e != s.0.cfg.e || f.0.n != s.0.cfg.n {
        return fail(DglabStatus::InvalidArgument, "field does not belong to this solver");
    }
    guard(|| {
        if let Some(k) = k.as_mut() {
            *k = kinetic_energy(&s.0, &f.0);
        }
        if let Some(z) = zeta.as_mut() {
            *z = enstrophy(&s.0, &f.0);
        }
        DglabStatus::Ok
    })
}
