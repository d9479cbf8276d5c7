//! C ABI over the solver.
//!
//! Every function returns a [`VsStatus`]; on failure a message is available
//! from [`vs_last_error`] on the same thread. Simulations are opaque
//! [`VsSimulation`] handles released with [`vs_simulation_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use vlasov_siac::bench::{self, Case, RunConfig};
use vlasov_siac::diagnostics::{conserved_quantities, ErrorNorms};
use vlasov_siac::integrator::{integrate, reflect_v};
use vlasov_siac::kinetic::{KineticOperator, SimulationState};
use vlasov_siac::siac::{kernel_coefficients, postprocess_point, SiacKernel};
use vlasov_siac::snapshot::write_snapshot;
use vlasov_siac::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BadInput = 3,
    OutOfDomain = 4,
    Usage = 5,
    Divergence = 6,
    Parse = 7,
    Io = 8,
    BufferTooSmall = 9,
    Internal = 10,
    Panic = 11,
}

/// Benchmark selector for [`vs_simulation_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VsCase {
    Landau = 0,
    TwoStream = 1,
    Weibel = 2,
}

/// Monitored integrals of the current state.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VsQuantities {
    pub t: f64,
    pub mass: f64,
    pub l2_f: f64,
    pub kinetic_energy: f64,
    pub field_energy: f64,
}

/// Error norms of one reversibility experiment. Field arrays hold
/// `n_fields` entries (1 for Vlasov–Ampère: E; 3 for Weibel: E1, E2, B3).
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct VsErrorReport {
    pub steps: usize,
    pub n_fields: usize,
    pub f_l2: f64,
    pub f_linf: f64,
    pub field_l2: [f64; 3],
    pub field_linf: [f64; 3],
    /// Nonzero when the filtered entries below are set.
    pub has_filtered: c_int,
    pub f_l2_filtered: f64,
    pub f_linf_filtered: f64,
    pub field_l2_filtered: [f64; 3],
    pub field_linf_filtered: [f64; 3],
}

/// Opaque simulation handle.
pub struct VsSimulation {
    config: RunConfig,
    op: KineticOperator,
    state: SimulationState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> VsStatus {
    match e {
        Error::Config(_) => VsStatus::InvalidArgument,
        Error::Input(_) => VsStatus::BadInput,
        Error::Domain(_) => VsStatus::OutOfDomain,
        Error::Usage(_) => VsStatus::Usage,
        Error::Divergence { .. } => VsStatus::Divergence,
        Error::Parse { .. } => VsStatus::Parse,
        Error::Io(_) => VsStatus::Io,
        Error::Internal(_) => VsStatus::Internal,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
    Small(usize),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> VsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VsStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            VsStatus::NullPointer
        }
        Ok(Err(Fail::Small(need))) => {
            set_error(format!("buffer too small: {need} entries needed"));
            VsStatus::BufferTooSmall
        }
        Ok(Err(Fail::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            VsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail::Lib(Error::Input(format!("{what} is not valid UTF-8"))))
}

unsafe fn sim_ref<'a>(p: *const VsSimulation) -> Result<&'a VsSimulation, Fail> {
    p.as_ref().ok_or(Fail::Null("simulation"))
}

unsafe fn sim_mut<'a>(p: *mut VsSimulation) -> Result<&'a mut VsSimulation, Fail> {
    p.as_mut().ok_or(Fail::Null("simulation"))
}

fn build(config: RunConfig) -> Result<Box<VsSimulation>, Fail> {
    let op = bench::operator_for(&config)?;
    let state = bench::initial_state(&config, &op)?;
    Ok(Box::new(VsSimulation { config, op, state }))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn vs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a simulation with the benchmark defaults for `case`, `nx` cells
/// in x and `nv` cells per velocity axis, projected at t = 0.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn vs_simulation_new(
    case: VsCase,
    nx: usize,
    nv: usize,
    degree: usize,
    out: *mut *mut VsSimulation,
) -> VsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let c = match case {
            VsCase::Landau => Case::Landau,
            VsCase::TwoStream => Case::TwoStream,
            VsCase::Weibel => Case::Weibel,
        };
        let mut cfg = RunConfig::new(c);
        cfg.nx = nx;
        cfg.nv = vec![nv; c.kind().n_v_axes()];
        cfg.degree = degree;
        *out = Box::into_raw(build(cfg)?);
        Ok(())
    })
}

/// Creates a simulation from flat `key = value` configuration text.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_simulation_from_config(
    config: *const c_char,
    out: *mut *mut VsSimulation,
) -> VsStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail::Null("out"));
        }
        let cfg = RunConfig::parse(str_arg(config, "config")?)?;
        *out = Box::into_raw(build(cfg)?);
        Ok(())
    })
}

/// Releases a simulation. NULL is ignored.
///
/// # Safety
/// `sim` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn vs_simulation_free(sim: *mut VsSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances by `duration` using the configured CFL rule.
///
/// # Safety
/// `sim` must be a live handle; `steps` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn vs_simulation_advance(sim: *mut VsSimulation, duration: f64, steps: *mut usize) -> VsStatus {
    guard(|| {
        let s = sim_mut(sim)?;
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::Usage(format!("duration must be finite and non-negative, got {duration}")).into());
        }
        let t0 = s.state.t;
        let mut cfg = s.config.clone();
        cfg.t_final = duration;
        let controls = cfg.controls()?;
        let mut local = s.state.clone();
        local.t = 0.0;
        let outcome = integrate(&s.op, local, &controls, false, |_, _| Ok(()))?;
        s.state = outcome.state;
        s.state.t = t0 + duration;
        if !steps.is_null() {
            *steps = outcome.steps;
        }
        Ok(())
    })
}

/// Replaces the state by its velocity reflection `f(x, -v)` (and `-B`).
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn vs_simulation_reflect(sim: *mut VsSimulation) -> VsStatus {
    guard(|| {
        let s = sim_mut(sim)?;
        s.state = reflect_v(&s.state)?;
        Ok(())
    })
}

/// Current time and monitored integrals.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_simulation_quantities(sim: *const VsSimulation, out: *mut VsQuantities) -> VsStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        let q = conserved_quantities(&s.state);
        *out = VsQuantities {
            t: s.state.t,
            mass: q.mass,
            l2_f: q.l2_f,
            kinetic_energy: q.kinetic_energy,
            field_energy: q.field_energy,
        };
        Ok(())
    })
}

/// Phase-space dimension (2 or 3) and number of field components (1 or 3).
///
/// # Safety
/// `sim` must be a live handle; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_simulation_shape(
    sim: *const VsSimulation,
    dim: *mut usize,
    n_fields: *mut usize,
) -> VsStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let d = dim.as_mut().ok_or(Fail::Null("dim"))?;
        let n = n_fields.as_mut().ok_or(Fail::Null("n_fields"))?;
        *d = s.state.f.mesh().dim();
        *n = s.state.kind.n_field_components();
        Ok(())
    })
}

unsafe fn point_arg<'a>(point: *const f64, dim: usize, want: usize) -> Result<&'a [f64], Fail> {
    if point.is_null() {
        return Err(Fail::Null("point"));
    }
    if dim != want {
        return Err(Error::Usage(format!("point has {dim} coordinates, expected {want}")).into());
    }
    Ok(std::slice::from_raw_parts(point, dim))
}

/// Evaluates `f_h` at a phase-space point (`dim` coordinates: x, v...).
/// With `filtered` nonzero the SIAC-filtered value is returned instead.
///
/// # Safety
/// `point` must hold `dim` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_simulation_eval_f(
    sim: *const VsSimulation,
    point: *const f64,
    dim: usize,
    filtered: c_int,
    out: *mut f64,
) -> VsStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let p = point_arg(point, dim, s.state.f.mesh().dim())?;
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        *out = if filtered != 0 {
            postprocess_point(&s.state.f, 0, p, &SiacKernel::new(s.state.degree())?)?
        } else {
            s.state.f.eval(p)?[0]
        };
        Ok(())
    })
}

/// Evaluates field component `component` at `x`, optionally filtered.
///
/// # Safety
/// `sim` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_simulation_eval_field(
    sim: *const VsSimulation,
    component: usize,
    x: f64,
    filtered: c_int,
    out: *mut f64,
) -> VsStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        let nc = s.state.fields.n_components();
        if component >= nc {
            return Err(Error::Usage(format!("component {component} out of range (0..{nc})")).into());
        }
        *out = if filtered != 0 {
            postprocess_point(&s.state.fields, component, &[x], &SiacKernel::new(s.state.degree())?)?
        } else {
            s.state.fields.eval(&[x])?[component]
        };
        Ok(())
    })
}

/// Copies the modal coefficients of `f_h` into `buf`. `needed` receives the
/// required length; pass `len = 0` to query it.
///
/// # Safety
/// `buf` must hold `len` doubles (may be NULL when `len == 0`).
#[no_mangle]
pub unsafe extern "C" fn vs_simulation_f_coefficients(
    sim: *const VsSimulation,
    buf: *mut f64,
    len: usize,
    needed: *mut usize,
) -> VsStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let c = s.state.f.coeffs();
        if !needed.is_null() {
            *needed = c.len();
        }
        if len == 0 && needed.is_null() {
            return Err(Fail::Null("needed"));
        }
        if len == 0 {
            return Ok(());
        }
        if len < c.len() {
            return Err(Fail::Small(c.len()));
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, c.len()).copy_from_slice(c);
        Ok(())
    })
}

/// Writes a snapshot file readable by the `filter` CLI subcommand.
///
/// # Safety
/// `path` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn vs_simulation_save(sim: *const VsSimulation, path: *const c_char) -> VsStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let p = str_arg(path, "path")?;
        write_snapshot(Path::new(p), s.config.case.name(), &s.state)?;
        Ok(())
    })
}

fn fill(norms: &ErrorNorms, l2: &mut [f64; 3], linf: &mut [f64; 3]) {
    for (i, v) in norms.field_l2.iter().enumerate().take(3) {
        l2[i] = *v;
    }
    for (i, v) in norms.field_linf.iter().enumerate().take(3) {
        linf[i] = *v;
    }
}

/// Runs the time-reversal experiment described by configuration text.
///
/// # Safety
/// `config` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vs_reversibility(config: *const c_char, out: *mut VsErrorReport) -> VsStatus {
    guard(|| {
        let cfg = RunConfig::parse(str_arg(config, "config")?)?;
        let out = out.as_mut().ok_or(Fail::Null("out"))?;
        let r = bench::reversibility_experiment(&cfg)?;
        let mut rep = VsErrorReport {
            steps: r.steps,
            n_fields: r.raw.field_l2.len(),
            f_l2: r.raw.f_l2,
            f_linf: r.raw.f_linf,
            ..Default::default()
        };
        fill(&r.raw, &mut rep.field_l2, &mut rep.field_linf);
        if let Some(f) = &r.filtered {
            rep.has_filtered = 1;
            rep.f_l2_filtered = f.f_l2;
            rep.f_linf_filtered = f.f_linf;
            fill(f, &mut rep.field_l2_filtered, &mut rep.field_linf_filtered);
        }
        *out = rep;
        Ok(())
    })
}

/// SIAC kernel coefficients for degree `k` (`2k + 1` values).
///
/// # Safety
/// `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn vs_kernel_coefficients(degree: usize, buf: *mut f64, len: usize) -> VsStatus {
    guard(|| {
        let c = kernel_coefficients(degree)?;
        if len < c.len() {
            return Err(Fail::Small(c.len()));
        }
        if buf.is_null() {
            return Err(Fail::Null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, c.len()).copy_from_slice(&c);
        Ok(())
    })
}
