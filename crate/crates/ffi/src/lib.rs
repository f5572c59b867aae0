//! C ABI for `oamclone`.
//!
//! Every function returns an [`OamStatus`] and writes results through out
//! pointers. On failure the message is available from
//! [`oamclone_last_error`] on the same thread until the next failing call.
//! Handles are created by `*_new`/`*_run` functions and released with the
//! matching `*_free`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use num_complex::Complex64;
use oamclone::cloning::{AncillaMode, CloneResult, Cloner, QubitSpec};
use oamclone::experiment::{
    predicted_fidelity, rate_budget, simulate_counts_with, ImperfectionModel, Interval, LossBudget,
};
use oamclone::fock::{pol_h, ModeBasis, Path, PhotonState};
use oamclone::interference::{coincidence_expectation, SpectralProfile, SpectralShape};
use oamclone::qudit::{qudit_clone, qudit_formula, QuditSpec};
use oamclone::sampling::seeded_rng;
use oamclone::Error;

#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum OamStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Precondition = 4,
    UndefinedEstimate = 5,
    Internal = 6,
}

/// Which computation backs a clone run.
#[repr(C)]
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum OamCloneRoute {
    /// Fock-space evolution with the exact ancilla mixture.
    Full = 0,
    /// Fock-space evolution with a Monte-Carlo ancilla.
    MonteCarlo = 1,
    /// Coalescence projector on the two-qubit space.
    Projector = 2,
}

/// Result of a clone run.
pub struct OamCloneResult {
    inner: CloneResult,
}

/// Loss budget.
pub struct OamLossBudget {
    inner: LossBudget,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> OamStatus {
    match err {
        Error::Config(_) => OamStatus::Config,
        Error::Precondition(_) => OamStatus::Precondition,
        Error::UndefinedEstimate(_) => OamStatus::UndefinedEstimate,
        _ => OamStatus::InvalidArgument,
    }
}

fn fail(status: OamStatus, msg: impl Into<String>) -> OamStatus {
    set_error(msg.into());
    status
}

fn guard<F: FnOnce() -> Result<(), OamStatus>>(f: F) -> OamStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => OamStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(OamStatus::Internal, "internal panic"),
    }
}

fn lib<T>(r: oamclone::Result<T>) -> Result<T, OamStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), OamStatus> {
    if p.is_null() {
        Err(fail(OamStatus::NullPointer, format!("{name} is null")))
    } else {
        Ok(())
    }
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, OamStatus> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(OamStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn oamclone_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn oamclone_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Clones `alpha |+2> + beta |-2>` (normalized internally). `samples` and
/// `seed` are used by the Monte-Carlo route only.
#[no_mangle]
pub unsafe extern "C" fn oamclone_clone_run(
    alpha_re: f64,
    alpha_im: f64,
    beta_re: f64,
    beta_im: f64,
    route: OamCloneRoute,
    samples: u32,
    seed: u64,
    out: *mut *mut OamCloneResult,
) -> OamStatus {
    guard(|| {
        non_null(out, "out")?;
        let q = lib(QubitSpec::new(
            Complex64::new(alpha_re, alpha_im),
            Complex64::new(beta_re, beta_im),
        ))?;
        let cloner = lib(Cloner::new())?;
        let inner = match route {
            OamCloneRoute::Full => lib(cloner.run_full(&q, AncillaMode::Exact))?,
            OamCloneRoute::MonteCarlo => lib(cloner.run_full(
                &q,
                AncillaMode::MonteCarlo {
                    samples: samples as usize,
                    seed,
                },
            ))?,
            OamCloneRoute::Projector => lib(cloner.run_projector(&q))?,
        };
        *out = Box::into_raw(Box::new(OamCloneResult { inner }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oamclone_clone_result_free(handle: *mut OamCloneResult) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

#[no_mangle]
pub unsafe extern "C" fn oamclone_clone_result_fidelity(handle: *const OamCloneResult, out: *mut f64) -> OamStatus {
    guard(|| {
        non_null(handle, "handle")?;
        non_null(out, "out")?;
        *out = (*handle).inner.fidelity;
        Ok(())
    })
}

/// Single-port success probability.
#[no_mangle]
pub unsafe extern "C" fn oamclone_clone_result_success_probability(
    handle: *const OamCloneResult,
    out: *mut f64,
) -> OamStatus {
    guard(|| {
        non_null(handle, "handle")?;
        non_null(out, "out")?;
        *out = (*handle).inner.success_probability;
        Ok(())
    })
}

/// Writes `S1, S2, S3` to `out[0..3]`.
#[no_mangle]
pub unsafe extern "C" fn oamclone_clone_result_stokes(handle: *const OamCloneResult, out: *mut f64) -> OamStatus {
    guard(|| {
        non_null(handle, "handle")?;
        non_null(out, "out")?;
        let s = (*handle).inner.stokes;
        ptr::copy_nonoverlapping(s.as_ptr(), out, 3);
        Ok(())
    })
}

/// Writes the 2x2 clone density row-major as `(re, im)` pairs to `out[0..8]`,
/// in the `(+2, -2)` order.
#[no_mangle]
pub unsafe extern "C" fn oamclone_clone_result_density(handle: *const OamCloneResult, out: *mut f64) -> OamStatus {
    guard(|| {
        non_null(handle, "handle")?;
        non_null(out, "out")?;
        let m = (*handle).inner.clone_density.matrix();
        for r in 0..2 {
            for c in 0..2 {
                let k = 2 * (2 * r + c);
                *out.add(k) = m[(r, c)].re;
                *out.add(k + 1) = m[(r, c)].im;
            }
        }
        Ok(())
    })
}

/// Expected both-in-`a'` coincidence probability for two horizontally
/// polarized photons carrying the named OAM states (`h, v, a, d, +2, -2`).
#[no_mangle]
pub unsafe extern "C" fn oamclone_hom_coincidence(
    state_a: *const c_char,
    state_b: *const c_char,
    delay_um: f64,
    center_wavelength_nm: f64,
    bandwidth_nm: f64,
    out: *mut f64,
) -> OamStatus {
    guard(|| {
        non_null(out, "out")?;
        let qa = lib(QubitSpec::named(c_str(state_a, "state_a")?))?;
        let qb = lib(QubitSpec::named(c_str(state_b, "state_b")?))?;
        let profile = SpectralProfile {
            center_wavelength_nm,
            bandwidth_nm,
            shape: SpectralShape::Gaussian,
        };
        lib(profile.validate())?;
        let basis = lib(ModeBasis::build(&Path::ALL, &[-2, 2]))?;
        let photon = |path, q: &QubitSpec| PhotonState::product(&basis, path, pol_h(), &[(2, q.alpha), (-2, q.beta)]);
        let a = lib(photon(Path::A, &qa))?;
        let b = lib(photon(Path::B, &qb))?;
        *out = lib(coincidence_expectation(&a, &b, delay_um, &profile))?;
        Ok(())
    })
}

/// Closed-form qudit fidelity and both-port success probability.
#[no_mangle]
pub unsafe extern "C" fn oamclone_qudit_formula(d: u32, fidelity: *mut f64, success: *mut f64) -> OamStatus {
    guard(|| {
        non_null(fidelity, "fidelity")?;
        non_null(success, "success")?;
        let (f, p) = lib(qudit_formula(d as usize))?;
        *fidelity = f;
        *success = p;
        Ok(())
    })
}

/// Simulated qudit cloner for the normalized input `re[k] + i im[k]`.
/// `abstract_labels` switches off the reflection OAM flip.
#[no_mangle]
pub unsafe extern "C" fn oamclone_qudit_clone(
    re: *const f64,
    im: *const f64,
    d: usize,
    abstract_labels: bool,
    fidelity: *mut f64,
    success: *mut f64,
) -> OamStatus {
    guard(|| {
        non_null(re, "re")?;
        non_null(im, "im")?;
        non_null(fidelity, "fidelity")?;
        non_null(success, "success")?;
        let re = std::slice::from_raw_parts(re, d);
        let im = std::slice::from_raw_parts(im, d);
        let amps = re.iter().zip(im).map(|(r, i)| Complex64::new(*r, *i)).collect();
        let spec = lib(if abstract_labels {
            QuditSpec::abstract_mode(amps)
        } else {
            QuditSpec::new(amps)
        })?;
        let c = lib(qudit_clone(&spec))?;
        *fidelity = c.fidelity;
        *success = c.success_prob;
        Ok(())
    })
}

/// `(F_prep R + 1/2) / (R + 1)`.
#[no_mangle]
pub unsafe extern "C" fn oamclone_predicted_fidelity(f_prep: f64, enhancement: f64, out: *mut f64) -> OamStatus {
    guard(|| {
        non_null(out, "out")?;
        let m = ImperfectionModel { f_prep, enhancement };
        lib(m.validate())?;
        *out = predicted_fidelity(&m);
        Ok(())
    })
}

/// Budget with the default parameters.
#[no_mangle]
pub unsafe extern "C" fn oamclone_budget_new(out: *mut *mut OamLossBudget) -> OamStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = Box::into_raw(Box::new(OamLossBudget {
            inner: LossBudget::default(),
        }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oamclone_budget_free(handle: *mut OamLossBudget) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

#[no_mangle]
pub unsafe extern "C" fn oamclone_budget_set_fiber_coupling(
    handle: *mut OamLossBudget,
    min: f64,
    max: f64,
) -> OamStatus {
    guard(|| {
        non_null(handle, "handle")?;
        let mut b = (*handle).inner;
        b.fiber_coupling = Interval::new(min, max);
        lib(b.validate())?;
        (*handle).inner = b;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn oamclone_budget_set_source_rate(handle: *mut OamLossBudget, c_source: f64) -> OamStatus {
    guard(|| {
        non_null(handle, "handle")?;
        let mut b = (*handle).inner;
        b.c_source = c_source;
        lib(b.validate())?;
        (*handle).inner = b;
        Ok(())
    })
}

/// Coincidence rate interval in Hz over the fiber-coupling range.
#[no_mangle]
pub unsafe extern "C" fn oamclone_budget_rate(handle: *const OamLossBudget, min: *mut f64, max: *mut f64) -> OamStatus {
    guard(|| {
        non_null(handle, "handle")?;
        non_null(min, "min")?;
        non_null(max, "max")?;
        let r = lib(rate_budget(&(*handle).inner))?;
        *min = r.min;
        *max = r.max;
        Ok(())
    })
}

/// Poisson counts on the two detectors for `duration_s` seconds at the
/// mid-coupling rate.
#[no_mangle]
pub unsafe extern "C" fn oamclone_simulate_counts(
    handle: *const OamLossBudget,
    f_prep: f64,
    enhancement: f64,
    duration_s: f64,
    seed: u64,
    c1: *mut u64,
    c2: *mut u64,
) -> OamStatus {
    guard(|| {
        non_null(handle, "handle")?;
        non_null(c1, "c1")?;
        non_null(c2, "c2")?;
        let m = ImperfectionModel { f_prep, enhancement };
        let rec = lib(simulate_counts_with(
            &mut seeded_rng(seed),
            &m,
            &(*handle).inner,
            duration_s,
        ))?;
        *c1 = rec.c1;
        *c2 = rec.c2;
        Ok(())
    })
}
