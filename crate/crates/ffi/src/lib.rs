//! C ABI over the quadtrack core.
//!
//! Objects cross the boundary as opaque pointers created by `qt_*_new`-style
//! constructors and released by the matching `*_free`. Every fallible call
//! returns a [`QtStatus`]; the message of the last failure on the calling
//! thread is available through [`qt_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;

use quadtrack::dynamics::ParticleState;
use quadtrack::field::{EvalCtx, Field};
use quadtrack::gauge::{build, Gauge};
use quadtrack::harmonics::{compute_gradients, load_harmonics_with, GradientTable};
use quadtrack::integrators::{Integrator, IntegratorSpec, Method};
use quadtrack::profile::{StepGeometry, StepGradient};
use quadtrack::sampling::InterpMode;
use quadtrack::tracker::{track, Lattice, TrackOptions};
use quadtrack::Error;

/// Result of a C API call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Io = 4,
    Parse = 5,
    FixedPoint = 6,
    Data = 7,
    UndefinedField = 8,
    Panic = 9,
}

/// A potential table with its coefficient source.
pub struct QtField {
    field: Field,
    ctx: EvalCtx,
}

/// A configured one-step map.
pub struct QtIntegrator {
    integrator: Integrator,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> QtStatus {
    match err {
        Error::Io { .. } => QtStatus::Io,
        Error::Parse { .. } | Error::Json(_) => QtStatus::Parse,
        Error::Invalid(_) => QtStatus::InvalidArgument,
        Error::Domain(_) => QtStatus::Domain,
        Error::Data { .. } => QtStatus::Data,
        Error::FixedPoint { .. } => QtStatus::FixedPoint,
        Error::UndefinedField(_) => QtStatus::UndefinedField,
    }
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Runs `f`, converting errors and panics into a status and a stored message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QtStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer passed as {what}"));
            QtStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
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
            QtStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(Error::Invalid(format!("{what} is not valid UTF-8"))))
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, Fail> {
    s.parse().map_err(Fail::Core)
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

fn boxed_field(field: Field) -> *mut QtField {
    Box::into_raw(Box::new(QtField {
        field,
        ctx: EvalCtx::new(),
    }))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn qt_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Analytic step-gradient quadrupole sampled every `dz` on `[0, zmax]`.
///
/// `gauge` is one of `af`, `coulomb`, `hfc`; `mode` one of `exact`,
/// `spline`, `interval`, `nearest`, `previous`.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn qt_field_analytic(
    alpha: f64,
    l1: f64,
    l2: f64,
    z2: f64,
    zmax: f64,
    dz: f64,
    nd: u32,
    gauge: *const c_char,
    mode: *const c_char,
    out: *mut *mut QtField,
) -> QtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let gauge: Gauge = parse(text(gauge, "gauge")?)?;
        let mode: InterpMode = parse(text(mode, "mode")?)?;
        let profile = StepGradient::new(StepGeometry { alpha, l1, l2, z2, zmax })?;
        if !(dz > 0.0) {
            return Err(Error::Invalid(format!("grid spacing {dz} must be positive")).into());
        }
        let n = quadtrack::tracker::steps_for(zmax, dz)?;
        let z = (0..=n).map(|k| k as f64 * dz).collect();
        let gt = GradientTable::from_profile(Arc::new(profile), z, nd as usize + 2)?;
        let table = build(&gt, gauge, nd as usize, 1.0)?;
        *out = boxed_field(Field::new(Arc::new(table), mode)?);
        Ok(())
    })
}

/// Field reconstructed from a harmonics file. `radius <= 0` takes the radius
/// from the file header; `pad > 0` adds that much zero padding at each end.
///
/// # Safety
/// String arguments must be null or NUL-terminated; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn qt_field_from_harmonics(
    path: *const c_char,
    radius: f64,
    pad: f64,
    nd: u32,
    scale: f64,
    gauge: *const c_char,
    mode: *const c_char,
    out: *mut *mut QtField,
) -> QtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let path = text(path, "path")?;
        let gauge: Gauge = parse(text(gauge, "gauge")?)?;
        let mode: InterpMode = parse(text(mode, "mode")?)?;
        let mut hs = load_harmonics_with(Path::new(path), (radius > 0.0).then_some(radius), false)?;
        if pad > 0.0 {
            hs = hs.zero_pad(pad)?;
        }
        let gt = compute_gradients(&hs, nd as usize + 2)?;
        let table = build(&gt, gauge, nd as usize, scale)?;
        *out = boxed_field(Field::new(Arc::new(table), mode)?);
        Ok(())
    })
}

/// # Safety
/// `field` must be null or a pointer returned by a `qt_field_*` constructor, freed once.
#[no_mangle]
pub unsafe extern "C" fn qt_field_free(field: *mut QtField) {
    if !field.is_null() {
        drop(Box::from_raw(field));
    }
}

/// Number of stored terms of `A_x`, `A_y`, `A_z`.
///
/// # Safety
/// `field` must be a live handle; `counts` must point to 3 writable values.
#[no_mangle]
pub unsafe extern "C" fn qt_field_counts(field: *const QtField, counts: *mut usize) -> QtStatus {
    guard(|| {
        let f = field.as_ref().ok_or(Fail::Null("field"))?;
        if counts.is_null() {
            return Err(Fail::Null("counts"));
        }
        let c = f.field.term_counts();
        std::ptr::copy_nonoverlapping(c.as_ptr(), counts, 3);
        Ok(())
    })
}

/// `(A_x, A_y, A_z)` at `(x, y, z)`.
///
/// # Safety
/// `field` must be a live handle not used concurrently; `a` must point to 3 writable values.
#[no_mangle]
pub unsafe extern "C" fn qt_field_potential(field: *mut QtField, x: f64, y: f64, z: f64, a: *mut f64) -> QtStatus {
    guard(|| {
        let f = field.as_mut().ok_or(Fail::Null("field"))?;
        if a.is_null() {
            return Err(Fail::Null("a"));
        }
        let v = f.field.potential(&mut f.ctx, x, y, z)?;
        std::ptr::copy_nonoverlapping(v.as_ptr(), a, 3);
        Ok(())
    })
}

/// Integrator by name (`midpoint`, `rk4`, `gauss4`, `gauss6`, `lie2`,
/// `lie4`, `lie6`). Non-positive `fp_tol` or zero `fp_max` keep the defaults.
///
/// # Safety
/// `method` must be null or NUL-terminated; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn qt_integrator_new(
    method: *const c_char,
    step: f64,
    fp_tol: f64,
    fp_max: u32,
    out: *mut *mut QtIntegrator,
) -> QtStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let method: Method = parse(text(method, "method")?)?;
        let mut spec = IntegratorSpec::new(method, step);
        if fp_tol > 0.0 {
            spec.fp_tol = fp_tol;
        }
        if fp_max > 0 {
            spec.fp_max = fp_max;
        }
        *out = Box::into_raw(Box::new(QtIntegrator {
            integrator: Integrator::new(spec)?,
        }));
        Ok(())
    })
}

/// # Safety
/// `integrator` must be null or a pointer from [`qt_integrator_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn qt_integrator_free(integrator: *mut QtIntegrator) {
    if !integrator.is_null() {
        drop(Box::from_raw(integrator));
    }
}

/// Tracks `state_in = (X, Y, P_x, P_y)` through `pairs` focusing/defocusing
/// couples of `field`, or through the single magnet when `pairs` is 0.
/// Writes the exit (or last surviving) state and whether the particle was lost.
///
/// # Safety
/// Handles must be live; `state_in` and `state_out` must point to 4 values;
/// `lost` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn qt_track(
    field: *const QtField,
    integrator: *const QtIntegrator,
    pairs: usize,
    state_in: *const f64,
    delta: f64,
    state_out: *mut f64,
    lost: *mut bool,
) -> QtStatus {
    guard(|| {
        let f = field.as_ref().ok_or(Fail::Null("field"))?;
        let it = integrator.as_ref().ok_or(Fail::Null("integrator"))?;
        if state_in.is_null() {
            return Err(Fail::Null("state_in"));
        }
        if state_out.is_null() {
            return Err(Fail::Null("state_out"));
        }
        let w = std::slice::from_raw_parts(state_in, 4);
        let s0 = ParticleState::new(w[0], w[1], w[2], w[3]).with_delta(delta)?;
        let lattice = if pairs == 0 {
            Lattice::single(f.field.clone())
        } else {
            Lattice::fodo(&f.field, pairs)?
        };
        let r = track(&lattice, &s0, &TrackOptions::new(*it.integrator.spec()))?;
        std::ptr::copy_nonoverlapping(r.last.coords().as_ptr(), state_out, 4);
        if let Some(l) = lost.as_mut() {
            *l = r.lost();
        }
        Ok(())
    })
}
