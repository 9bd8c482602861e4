//! C ABI over `tdlab`.
//!
//! Models and return specifications live behind opaque handles that the
//! caller frees with the matching `*_free` function. Every fallible call
//! returns a [`TdlabStatus`]; on failure a description is available from
//! [`tdlab_last_error`] on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tdlab::algebra::{classify, variance_bound, DEFAULT_EPSILON};
use tdlab::operator::{apply_operator, iterate, IterateConfig, Verdict};
use tdlab::{Error, Mrp, ReturnSpec, ValueFunction};

/// Opaque Markov reward process.
pub struct TdlabMrp {
    inner: Mrp,
}

/// Opaque return specification.
pub struct TdlabSpec {
    inner: ReturnSpec,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    SizeMismatch = 4,
    Singular = 5,
    Unsupported = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdlabClassification {
    pub is_linear: bool,
    pub is_affine: bool,
    pub is_convex: bool,
    pub is_compound: bool,
    pub is_nstep: bool,
    pub weak_recency: bool,
    pub strong_recency: bool,
    pub weight_sum: f64,
    pub modulus: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TdlabVerdict {
    Converged = 0,
    Diverged = 1,
    Exhausted = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdlabIterateResult {
    pub verdict: TdlabVerdict,
    /// Updates performed.
    pub iterations: usize,
    /// Max-norm distance to the fixed point after the last update.
    pub final_distance: f64,
    /// Ratio of the last two distances, or NaN with fewer than two.
    pub last_growth_ratio: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> TdlabStatus {
    match e {
        Error::Parse(_) => TdlabStatus::Parse,
        Error::SizeMismatch { .. } | Error::WrongStateCount(_) => TdlabStatus::SizeMismatch,
        Error::SingularSystem => TdlabStatus::Singular,
        Error::NonVanishingTail | Error::UnsupportedTail(_) | Error::UnsupportedFamily(_) | Error::NonConvexSpec(_) => {
            TdlabStatus::Unsupported
        }
        Error::Io(_) => TdlabStatus::Io,
        _ => TdlabStatus::InvalidArgument,
    }
}

struct Failure(TdlabStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(TdlabStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TdlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TdlabStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TdlabStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(TdlabStatus::Parse, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn check_len(len: usize, expected: usize) -> Result<(), Failure> {
    if len == expected {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, got: len }.into())
    }
}

unsafe fn store_mrp(out: *mut *mut TdlabMrp, mrp: impl FnOnce() -> tdlab::Result<Mrp>) -> TdlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inner = mrp()?;
        *out = Box::into_raw(Box::new(TdlabMrp { inner }));
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tdlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failing call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tdlab_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Random walk with `n` non-terminal states and terminals at both ends.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_mrp_random_walk(n: usize, gamma: f64, out: *mut *mut TdlabMrp) -> TdlabStatus {
    store_mrp(out, || Mrp::random_walk(n, gamma))
}

/// Two-state MRP that stays put with probability `p`, with zero rewards.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_mrp_two_state(p: f64, gamma: f64, out: *mut *mut TdlabMrp) -> TdlabStatus {
    store_mrp(out, || Mrp::two_state(p, gamma))
}

/// Parses an MRP from its text format.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_mrp_from_text(text: *const c_char, out: *mut *mut TdlabMrp) -> TdlabStatus {
    let text = match str_arg(text, "text") {
        Ok(t) => t,
        Err(f) => return guard(|| Err(f)),
    };
    store_mrp(out, || Mrp::from_text(text))
}

/// # Safety
/// `mrp` must come from a `tdlab_mrp_*` constructor and not be used after.
#[no_mangle]
pub unsafe extern "C" fn tdlab_mrp_free(mrp: *mut TdlabMrp) {
    if !mrp.is_null() {
        drop(Box::from_raw(mrp));
    }
}

/// Number of states, terminals included; 0 for a null handle.
///
/// # Safety
/// `mrp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tdlab_mrp_n_states(mrp: *const TdlabMrp) -> usize {
    mrp.as_ref().map_or(0, |m| m.inner.n_states())
}

/// Writes the exact state values into `out[0..len]`; `len` must equal
/// the number of states.
///
/// # Safety
/// `mrp` must be a live handle and `out` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_mrp_exact_values(mrp: *const TdlabMrp, out: *mut f64, len: usize) -> TdlabStatus {
    guard(|| {
        let m = ref_arg(mrp, "mrp")?;
        check_len(len, m.inner.n_states())?;
        let out = slice_out(out, len, "out")?;
        out.copy_from_slice(&m.inner.exact_values()?);
        Ok(())
    })
}

/// Parses a specification such as `lambda:0.9` or `sparse:0.75:3`.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_spec_parse(text: *const c_char, out: *mut *mut TdlabSpec) -> TdlabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let inner = ReturnSpec::parse(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(TdlabSpec { inner }));
        Ok(())
    })
}

/// # Safety
/// `spec` must come from `tdlab_spec_parse` and not be used after.
#[no_mangle]
pub unsafe extern "C" fn tdlab_spec_free(spec: *mut TdlabSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Places the estimator in the hierarchy at discount `gamma`.
///
/// # Safety
/// `spec` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_spec_classify(
    spec: *const TdlabSpec,
    gamma: f64,
    eps: f64,
    out: *mut TdlabClassification,
) -> TdlabStatus {
    guard(|| {
        let s = ref_arg(spec, "spec")?;
        if out.is_null() {
            return Err(null("out"));
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::BadDiscount(gamma).into());
        }
        let c = classify(&s.inner.impulse(), gamma, eps)?;
        *out = TdlabClassification {
            is_linear: c.is_linear,
            is_affine: c.is_affine,
            is_convex: c.is_convex,
            is_compound: c.is_compound,
            is_nstep: c.is_nstep,
            weak_recency: c.weak_recency,
            strong_recency: c.strong_recency,
            weight_sum: c.weight_sum,
            modulus: c.modulus,
        };
        Ok(())
    })
}

/// Worst-case contraction modulus at discount `gamma`.
///
/// # Safety
/// `spec` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_spec_modulus(spec: *const TdlabSpec, gamma: f64, out: *mut f64) -> TdlabStatus {
    let mut c = TdlabClassification {
        is_linear: false,
        is_affine: false,
        is_convex: false,
        is_compound: false,
        is_nstep: false,
        weak_recency: false,
        strong_recency: false,
        weight_sum: 0.0,
        modulus: 0.0,
    };
    let status = tdlab_spec_classify(spec, gamma, DEFAULT_EPSILON, &mut c);
    if status != TdlabStatus::Ok {
        return status;
    }
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = c.modulus;
        Ok(())
    })
}

/// Applies the expected-update operator of `spec` on `mrp` to `v`.
///
/// # Safety
/// `v` and `out` must be valid for `len` reads and writes respectively.
#[no_mangle]
pub unsafe extern "C" fn tdlab_apply_operator(
    mrp: *const TdlabMrp,
    spec: *const TdlabSpec,
    v: *const f64,
    out: *mut f64,
    len: usize,
) -> TdlabStatus {
    guard(|| {
        let m = ref_arg(mrp, "mrp")?;
        let s = ref_arg(spec, "spec")?;
        check_len(len, m.inner.n_states())?;
        let v = ValueFunction::new(slice_arg(v, len, "v")?.to_vec());
        let hv = apply_operator(&m.inner, &s.inner.impulse(), &v)?;
        slice_out(out, len, "out")?.copy_from_slice(&hv);
        Ok(())
    })
}

/// Iterates `v ← v + step (H v - v)` from `v0` until convergence to
/// `1e-10`, divergence past `1e6` or `max_iters` updates.
///
/// # Safety
/// `v0` must be valid for `len` reads and `out` for writes.
#[no_mangle]
pub unsafe extern "C" fn tdlab_iterate(
    mrp: *const TdlabMrp,
    spec: *const TdlabSpec,
    v0: *const f64,
    len: usize,
    step: f64,
    max_iters: usize,
    out: *mut TdlabIterateResult,
) -> TdlabStatus {
    guard(|| {
        let m = ref_arg(mrp, "mrp")?;
        let s = ref_arg(spec, "spec")?;
        if out.is_null() {
            return Err(null("out"));
        }
        check_len(len, m.inner.n_states())?;
        let v0 = ValueFunction::new(slice_arg(v0, len, "v0")?.to_vec());
        let cfg = IterateConfig {
            step,
            max_iters,
            ..IterateConfig::default()
        };
        let trace = iterate(&m.inner, &s.inner.impulse(), &v0, &cfg)?;
        let verdict = match trace.verdict {
            Verdict::Converged(_) => TdlabVerdict::Converged,
            Verdict::Diverged(_) => TdlabVerdict::Diverged,
            Verdict::Exhausted => TdlabVerdict::Exhausted,
        };
        *out = TdlabIterateResult {
            verdict,
            iterations: trace.records.len() - 1,
            final_distance: trace.records.last().map_or(f64::NAN, |r| r.linf_dist),
            last_growth_ratio: trace.growth_ratios().last().copied().unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// `((1 - modulus) / (1 - gamma))² kappa`.
#[no_mangle]
pub extern "C" fn tdlab_variance_bound(modulus: f64, gamma: f64, kappa: f64) -> f64 {
    variance_bound(modulus, gamma, kappa)
}
