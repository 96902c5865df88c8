//! C ABI over the `gkpmod` library.
//!
//! Objects cross the boundary as opaque handles created by `*_new`-style
//! functions and released by the matching `*_free`. Every fallible call
//! returns a [`GkpStatus`]; the message of the last failure on the calling
//! thread is available from [`gkp_last_error`]. Panics never unwind into C.

use gkpmod::cli::{self, Command, RunConfig};
use gkpmod::hilbert::{squeezing_of_state, FockSpace, ModularOp, SqueezingReport, StateVector};
use gkpmod::linalg::C64;
use gkpmod::modular_measure::{AncillaPrep, Measurement, TargetState};
use gkpmod::rng::{substream, ShotRng};
use gkpmod::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Truncation = 4,
    Regime = 5,
    ZeroProbability = 6,
    Numerical = 7,
    Io = 8,
    Panic = 9,
}

impl From<&Error> for GkpStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => GkpStatus::InvalidArgument,
            Error::Config(_) => GkpStatus::Config,
            Error::Truncation { .. } => GkpStatus::Truncation,
            Error::Regime(_) | Error::InvalidRegime(_) => GkpStatus::Regime,
            Error::ZeroProbability(_) => GkpStatus::ZeroProbability,
            Error::DegenerateSharpness(_) | Error::Convergence(_) | Error::Quadrature { .. } => GkpStatus::Numerical,
            Error::Io(_) => GkpStatus::Io,
        }
    }
}

/// Code displacement measured by a [`GkpMeasurement`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkpStabilizer {
    Sq = 0,
    Sp = 1,
    Z = 2,
    X = 3,
}

impl From<GkpStabilizer> for ModularOp {
    fn from(s: GkpStabilizer) -> Self {
        match s {
            GkpStabilizer::Sq => ModularOp::Sq,
            GkpStabilizer::Sp => ModularOp::Sp,
            GkpStabilizer::Z => ModularOp::Z,
            GkpStabilizer::X => ModularOp::X,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GkpSqueezing {
    pub delta_q: f64,
    pub delta_p: f64,
    pub mean_photons: f64,
    pub degenerate: bool,
}

impl From<SqueezingReport> for GkpSqueezing {
    fn from(r: SqueezingReport) -> Self {
        GkpSqueezing { delta_q: r.delta_q, delta_p: r.delta_p, mean_photons: r.mean_photons, degenerate: r.degenerate }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GkpAncilla {
    /// Mean photon number of the real coherent amplitude.
    pub mean_photons: f64,
    pub fock_cutoff: usize,
    pub counter_displacement: bool,
    pub readout_efficiency: f64,
}

/// Target oscillator state.
pub struct GkpState(TargetState);

/// A configured modular measurement.
pub struct GkpMeasurement(Measurement);

/// Per-shot random stream.
pub struct GkpRng(ShotRng);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), GkpError>) -> GkpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GkpStatus::Ok,
        Ok(Err(e)) => {
            set_error(&e.message);
            e.status
        }
        Err(_) => {
            set_error("panic inside gkpmod");
            GkpStatus::Panic
        }
    }
}

struct GkpError {
    status: GkpStatus,
    message: String,
}

impl From<Error> for GkpError {
    fn from(e: Error) -> Self {
        GkpError { status: GkpStatus::from(&e), message: e.to_string() }
    }
}

fn null(what: &str) -> GkpError {
    GkpError { status: GkpStatus::NullPointer, message: format!("{what} is null") }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, GkpError> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), GkpError> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, GkpError> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| GkpError { status: GkpStatus::InvalidArgument, message: format!("{what} is not UTF-8") })
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gkp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn gkp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Vacuum of a `dim`-level target.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn gkp_state_vacuum(dim: usize, out: *mut *mut GkpState) -> GkpStatus {
    guard(|| {
        let s = StateVector::vacuum(FockSpace::new(dim)?);
        write(out, boxed(GkpState(TargetState::Pure(s))), "out")
    })
}

/// Squeezed vacuum with the given Δ_q.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn gkp_state_squeezed(dim: usize, delta_q: f64, out: *mut *mut GkpState) -> GkpStatus {
    guard(|| {
        let s = gkpmod::hilbert::make_squeezed_vacuum(delta_q, FockSpace::new(dim)?)?;
        write(out, boxed(GkpState(TargetState::Pure(s))), "out")
    })
}

/// Coherent state |re + i·im⟩.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn gkp_state_coherent(dim: usize, re: f64, im: f64, out: *mut *mut GkpState) -> GkpStatus {
    guard(|| {
        let s = gkpmod::hilbert::make_coherent(C64::new(re, im), FockSpace::new(dim)?)?;
        write(out, boxed(GkpState(TargetState::Pure(s))), "out")
    })
}

/// # Safety
/// `state` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gkp_state_free(state: *mut GkpState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Fock dimension of the state, 0 for a null handle.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gkp_state_dim(state: *const GkpState) -> usize {
    state.as_ref().map_or(0, |s| s.0.space().dim())
}

/// Effective squeezing report of the state.
///
/// # Safety
/// `state` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gkp_state_squeezing(state: *const GkpState, out: *mut GkpSqueezing) -> GkpStatus {
    guard(|| {
        let r = match &deref(state, "state")?.0 {
            TargetState::Pure(s) => squeezing_of_state(s),
            TargetState::Mixed(r) => gkpmod::hilbert::effective_squeezing(r),
        };
        write(out, r.into(), "out")
    })
}

/// Random stream keyed by (seed, stream name, shot index).
///
/// # Safety
/// `stream` must be a NUL-terminated UTF-8 string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gkp_rng_new(seed: u64, stream: *const c_char, shot: u64, out: *mut *mut GkpRng) -> GkpStatus {
    guard(|| {
        let name = string(stream, "stream")?;
        write(out, boxed(GkpRng(substream(seed, name, shot))), "out")
    })
}

/// # Safety
/// `rng` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gkp_rng_free(rng: *mut GkpRng) {
    if !rng.is_null() {
        drop(Box::from_raw(rng));
    }
}

/// Measurement of `stabilizer` on a `dim`-level target.
///
/// # Safety
/// `ancilla` must point to a valid [`GkpAncilla`] and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn gkp_measurement_new(
    stabilizer: GkpStabilizer,
    ancilla: *const GkpAncilla,
    dim: usize,
    out: *mut *mut GkpMeasurement,
) -> GkpStatus {
    guard(|| {
        let a = deref(ancilla, "ancilla")?;
        let mut prep = AncillaPrep::with_mean_photons(a.mean_photons);
        prep.fock_cutoff = a.fock_cutoff;
        prep.counter_displacement_on = a.counter_displacement;
        prep.readout_efficiency = a.readout_efficiency;
        let m = Measurement::new(stabilizer.into(), prep, FockSpace::new(dim)?)?;
        write(out, boxed(GkpMeasurement(m)), "out")
    })
}

/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gkp_measurement_free(m: *mut GkpMeasurement) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

unsafe fn matched<'a>(
    m: *const GkpMeasurement,
    s: *const GkpState,
) -> Result<(&'a Measurement, &'a TargetState), GkpError> {
    let m = &deref(m, "measurement")?.0;
    let s = &deref(s, "state")?.0;
    if m.space() != s.space() {
        return Err(Error::InvalidArgument(format!(
            "state dimension {} differs from measurement dimension {}",
            s.space().dim(),
            m.space().dim()
        ))
        .into());
    }
    Ok((m, s))
}

/// Outcome density P(β) for the given input state.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn gkp_measurement_density(
    m: *const GkpMeasurement,
    state: *const GkpState,
    beta_re: f64,
    beta_im: f64,
    out: *mut f64,
) -> GkpStatus {
    guard(|| {
        let (m, s) = matched(m, state)?;
        let pops = m.frame(s).populations();
        write(out, m.density(&pops, C64::new(beta_re, beta_im)), "out")
    })
}

/// Most likely outcome β for the given input state.
///
/// # Safety
/// Handles must be live and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn gkp_measurement_max_likelihood(
    m: *const GkpMeasurement,
    state: *const GkpState,
    beta_re: *mut f64,
    beta_im: *mut f64,
) -> GkpStatus {
    guard(|| {
        let (m, s) = matched(m, state)?;
        let (b, _) = m.max_likelihood(&m.frame(s).populations());
        write(beta_re, b.re, "beta_re")?;
        write(beta_im, b.im, "beta_im")
    })
}

/// Draws an outcome β from P(β).
///
/// # Safety
/// Handles must be live and the outputs writable.
#[no_mangle]
pub unsafe extern "C" fn gkp_measurement_sample(
    m: *const GkpMeasurement,
    state: *const GkpState,
    rng: *mut GkpRng,
    beta_re: *mut f64,
    beta_im: *mut f64,
) -> GkpStatus {
    guard(|| {
        let (m, s) = matched(m, state)?;
        let rng = rng.as_mut().ok_or_else(|| null("rng"))?;
        let b = m.sample(&m.frame(s).populations(), &mut rng.0)?;
        write(beta_re, b.re, "beta_re")?;
        write(beta_im, b.im, "beta_im")
    })
}

/// Normalized post-measurement state for outcome β, as a new handle, and
/// the outcome density.
///
/// # Safety
/// Handles must be live and the outputs writable; `density` may be null.
#[no_mangle]
pub unsafe extern "C" fn gkp_measurement_apply(
    m: *const GkpMeasurement,
    state: *const GkpState,
    beta_re: f64,
    beta_im: f64,
    out: *mut *mut GkpState,
    density: *mut f64,
) -> GkpStatus {
    guard(|| {
        let (m, s) = matched(m, state)?;
        let (post, p) = m.post(&m.frame(s), C64::new(beta_re, beta_im))?;
        let t = TargetState::from_frame(&post, m.basis(), m.turns(), m.space())?;
        if !density.is_null() {
            density.write(p);
        }
        write(out, boxed(GkpState(t)), "out")
    })
}

/// `1/√(4πα²)` and `1/√(4πα√(1+α²))`.
///
/// # Safety
/// Outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn gkp_expected_squeezing(alpha: f64, estimate: *mut f64, lower_bound: *mut f64) -> GkpStatus {
    guard(|| {
        if alpha.is_nan() || alpha <= 0.0 {
            return Err(Error::InvalidArgument("alpha must be positive".into()).into());
        }
        let (e, l) = gkpmod::analytics::expected_squeezing(alpha);
        write(estimate, e, "estimate")?;
        write(lower_bound, l, "lower_bound")
    })
}

/// First `n` sine coefficients b_n of the flux drive with depth δ.
///
/// # Safety
/// `out` must point to `n` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gkp_drive_coefficients(delta: f64, f_t: f64, n: usize, out: *mut f64) -> GkpStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = gkpmod::drive::DriveSpec::new(delta, 2.0 * std::f64::consts::PI * f_t);
        let b = gkpmod::drive::fourier_coeffs(&spec, n)?;
        std::ptr::copy_nonoverlapping(b.as_ptr(), out, n);
        Ok(())
    })
}

/// Runs a CLI command (`"fig-scaling"`, `"params"`, ...) with a TOML config
/// string, writing its files into `out_dir`.
///
/// # Safety
/// All arguments must be NUL-terminated UTF-8 strings; `config_toml` may be
/// null for the defaults.
#[no_mangle]
pub unsafe extern "C" fn gkp_run_command(
    command: *const c_char,
    config_toml: *const c_char,
    out_dir: *const c_char,
) -> GkpStatus {
    guard(|| {
        let name = string(command, "command")?;
        let cmd = Command::from_name(name).ok_or_else(|| GkpError {
            status: GkpStatus::InvalidArgument,
            message: format!("unknown command {name}"),
        })?;
        let text = if config_toml.is_null() { "" } else { string(config_toml, "config_toml")? };
        let cfg = RunConfig::from_toml_str(text, &[])?;
        cli::run(cmd, &cfg, Path::new(string(out_dir, "out_dir")?))?;
        Ok(())
    })
}
