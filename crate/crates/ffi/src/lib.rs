//! C ABI over `qftsim`.
//!
//! Objects are opaque heap handles created by `qft_*_new`/`qft_*_from_*`
//! style constructors and released with the matching `qft_*_free`. Every
//! fallible call returns a [`QftStatus`]; on failure the thread-local
//! message from [`qft_last_error`] describes the cause. Spin indices are
//! 0-based.

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::c_char;
use num_complex::Complex64;
use qftsim::analysis::FidelityReport;
use qftsim::compiler::{compile_qft, load_published_program_for, CompileOptions};
use qftsim::nmr::{thermal_state, SpinSystem};
use qftsim::operator::{DeviationMatrix, Operator};
use qftsim::pulse::{format_program, parse_program, simulate, PulseProgram, SimulationMode};
use qftsim::qft::{bit_reversal, ideal_qft};
use qftsim::Error;

/// Spin system handle.
pub struct QftSystem(SpinSystem);

/// Pulse program handle.
pub struct QftProgram(PulseProgram);

/// Deviation density matrix handle.
pub struct QftDensity(DeviationMatrix);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QftStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Numerical = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QftCompileMode {
    Exact = 0,
    InputAware = 1,
    Published = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QftSimulationMode {
    Unitary = 0,
    Relaxing = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct QftFidelityReport {
    pub fidelity: f64,
    pub attenuation: f64,
    pub fidelity_aligned: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> QftStatus {
    match e {
        Error::Syntax { .. } | Error::Json(_) => QftStatus::Parse,
        Error::ZeroNorm | Error::RankDeficient { .. } | Error::NotHermitian(_) => {
            QftStatus::Numerical
        }
        _ => QftStatus::InvalidArgument,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (QftStatus, String)>) -> QftStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            QftStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            QftStatus::Panic
        }
    }
}

fn lib(e: Error) -> (QftStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (QftStatus, String) {
    (QftStatus::NullPointer, format!("{what} is null"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, (QftStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (QftStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (QftStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), (QftStatus, String)> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn qft_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must come from this library and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn qft_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qft_system_alanine(out: *mut *mut QftSystem) -> QftStatus {
    guard(|| put(out, QftSystem(SpinSystem::alanine())))
}

/// # Safety
/// `json` must be a nul-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qft_system_from_json(
    json: *const c_char,
    out: *mut *mut QftSystem,
) -> QftStatus {
    guard(|| {
        let text = c_str(json, "json")?;
        put(out, QftSystem(SpinSystem::from_json(text).map_err(lib)?))
    })
}

/// # Safety
/// `sys` must come from this library and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn qft_system_free(sys: *mut QftSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Number of spins, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qft_system_spin_count(sys: *const QftSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.0.n)
}

/// Parses pulse-program text against `sys`.
///
/// # Safety
/// Pointers must be valid; `text` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn qft_program_parse(
    text: *const c_char,
    sys: *const QftSystem,
    out: *mut *mut QftProgram,
) -> QftStatus {
    guard(|| {
        let text = c_str(text, "text")?;
        let sys = borrow(sys, "system")?;
        put(out, QftProgram(parse_program(text, &sys.0).map_err(lib)?))
    })
}

/// QFT program for every spin of `sys`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qft_program_compile(
    sys: *const QftSystem,
    mode: QftCompileMode,
    out: *mut *mut QftProgram,
) -> QftStatus {
    guard(|| {
        let sys = &borrow(sys, "system")?.0;
        let program = match mode {
            QftCompileMode::Published => load_published_program_for(sys).map_err(lib)?,
            QftCompileMode::Exact => {
                compile_qft(sys, &CompileOptions::exact())
                    .map_err(lib)?
                    .program
            }
            QftCompileMode::InputAware => {
                compile_qft(sys, &CompileOptions::input_aware())
                    .map_err(lib)?
                    .program
            }
        };
        put(out, QftProgram(program))
    })
}

/// # Safety
/// `p` must come from this library and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn qft_program_free(p: *mut QftProgram) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of events, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qft_program_len(p: *const QftProgram) -> usize {
    p.as_ref().map_or(0, |p| p.0.len())
}

/// Canonical text of the program; release with [`qft_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qft_program_to_text(
    p: *const QftProgram,
    out: *mut *mut c_char,
) -> QftStatus {
    guard(|| {
        let p = borrow(p, "program")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let text =
            CString::new(format_program(&p.0)).map_err(|e| (QftStatus::Panic, e.to_string()))?;
        *out = text.into_raw();
        Ok(())
    })
}

/// Thermal deviation `Σ I_z` of `sys`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qft_density_thermal(
    sys: *const QftSystem,
    out: *mut *mut QftDensity,
) -> QftStatus {
    guard(|| {
        let sys = borrow(sys, "system")?;
        put(out, QftDensity(thermal_state(&sys.0)))
    })
}

/// Builds a deviation matrix from row-major real and imaginary parts of
/// length `dim·dim`. Must be Hermitian and traceless.
///
/// # Safety
/// `re` and `im` must each point to `dim·dim` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn qft_density_from_parts(
    dim: usize,
    re: *const f64,
    im: *const f64,
    out: *mut *mut QftDensity,
) -> QftStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return Err(null("matrix data"));
        }
        let len = dim
            .checked_mul(dim)
            .ok_or((QftStatus::InvalidArgument, "dimension overflow".into()))?;
        let re = std::slice::from_raw_parts(re, len);
        let im = std::slice::from_raw_parts(im, len);
        let entries: Vec<Complex64> = re
            .iter()
            .zip(im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect();
        let op = Operator::from_row_major(dim, &entries).map_err(lib)?;
        put(out, QftDensity(DeviationMatrix::new(op).map_err(lib)?))
    })
}

/// # Safety
/// `rho` must come from this library and not be freed yet.
#[no_mangle]
pub unsafe extern "C" fn qft_density_free(rho: *mut QftDensity) {
    if !rho.is_null() {
        drop(Box::from_raw(rho));
    }
}

/// Matrix dimension, or 0 for a null handle.
///
/// # Safety
/// `rho` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qft_density_dim(rho: *const QftDensity) -> usize {
    rho.as_ref().map_or(0, |r| r.0.dim())
}

/// Copies the row-major parts into `re` and `im`, each of length `len`,
/// which must equal `dim·dim`.
///
/// # Safety
/// `re` and `im` must each point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qft_density_copy_parts(
    rho: *const QftDensity,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> QftStatus {
    guard(|| {
        let rho = borrow(rho, "density")?;
        if re.is_null() || im.is_null() {
            return Err(null("output buffer"));
        }
        let entries = rho.0.operator().to_row_major();
        if entries.len() != len {
            return Err((
                QftStatus::InvalidArgument,
                format!("buffer holds {len} entries, matrix has {}", entries.len()),
            ));
        }
        let re = std::slice::from_raw_parts_mut(re, len);
        let im = std::slice::from_raw_parts_mut(im, len);
        for (k, z) in entries.iter().enumerate() {
            re[k] = z.re;
            im[k] = z.im;
        }
        Ok(())
    })
}

/// Evolves `rho0` through `program`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qft_simulate(
    program: *const QftProgram,
    sys: *const QftSystem,
    rho0: *const QftDensity,
    mode: QftSimulationMode,
    out: *mut *mut QftDensity,
) -> QftStatus {
    guard(|| {
        let program = borrow(program, "program")?;
        let sys = borrow(sys, "system")?;
        let rho0 = borrow(rho0, "density")?;
        let mode = match mode {
            QftSimulationMode::Unitary => SimulationMode::Unitary,
            QftSimulationMode::Relaxing => SimulationMode::Relaxing,
        };
        let rho = simulate(&program.0, &sys.0, &rho0.0, mode).map_err(lib)?;
        put(out, QftDensity(rho))
    })
}

/// `U ρ U†` with `U` the QFT followed by bit reversal, the action the
/// compiled programs implement.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qft_density_apply_qft(
    rho: *const QftDensity,
    out: *mut *mut QftDensity,
) -> QftStatus {
    guard(|| {
        let rho = borrow(rho, "density")?;
        let n = rho.0.n_spins();
        let u = &bit_reversal(n).map_err(lib)? * &ideal_qft(n).map_err(lib)?;
        put(out, QftDensity(rho.0.conjugate_by(&u)))
    })
}

/// Fidelity, attenuation and frame-aligned fidelity of `exp` against
/// `theory`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn qft_fidelity_report(
    theory: *const QftDensity,
    exp: *const QftDensity,
    out: *mut QftFidelityReport,
) -> QftStatus {
    guard(|| {
        let theory = borrow(theory, "theory")?;
        let exp = borrow(exp, "experiment")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let r = FidelityReport::compute(&theory.0, &exp.0).map_err(lib)?;
        *out = QftFidelityReport {
            fidelity: r.fidelity,
            attenuation: r.attenuation,
            fidelity_aligned: r.fidelity_aligned,
        };
        Ok(())
    })
}
