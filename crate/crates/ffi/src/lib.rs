//! C interface to `copsym`.
//!
//! Objects are opaque handles created by `copsym_*_new`-style functions and
//! released with the matching `*_free`. Every fallible call returns a
//! [`CopsymStatus`]; on failure `copsym_last_error()` describes the problem
//! for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use copsym::{
    bootstrap::Method, pseudo_observations, run_test, run_test_empirical, BernsteinOrder, CopulaSpec, Error,
    GridSpec, PValueRule, PseudoSample, Sample, TestOptions, TestResult,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopsymStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Input = 3,
    Format = 4,
    EmptySample = 5,
    Config = 6,
    Network = 7,
    Io = 8,
    InvalidUtf8 = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CopsymStatistic {
    R = 0,
    S = 1,
    T = 2,
}

/// A bivariate sample.
pub struct CopsymSample {
    sample: Sample,
    pseudo: PseudoSample,
}

/// A parametric copula.
pub struct CopsymCopula(CopulaSpec);

/// The outcome of a symmetry test.
pub struct CopsymTestResult(TestResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CopsymStatus {
    match e {
        Error::Domain(_) => CopsymStatus::Domain,
        Error::Input(_) => CopsymStatus::Input,
        Error::Format(_) => CopsymStatus::Format,
        Error::EmptySample(_) => CopsymStatus::EmptySample,
        Error::Config(_) => CopsymStatus::Config,
        Error::Network(_) => CopsymStatus::Network,
        Error::Io { .. } => CopsymStatus::Io,
    }
}

struct Fail(CopsymStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CopsymStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CopsymStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CopsymStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic".into());
            CopsymStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(p: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn copsym_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn copsym_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a sample from `n` pairs `(x[i], y[i])`.
///
/// # Safety
/// `x` and `y` must point to `n` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn copsym_sample_new(
    x: *const f64,
    y: *const f64,
    n: usize,
    out: *mut *mut CopsymSample,
) -> CopsymStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n > 0 && (x.is_null() || y.is_null()) {
            return Err(null("x or y"));
        }
        let (xs, ys) = if n == 0 {
            (&[][..], &[][..])
        } else {
            (std::slice::from_raw_parts(x, n), std::slice::from_raw_parts(y, n))
        };
        let sample = Sample::from_columns(xs, ys)?;
        let pseudo = pseudo_observations(&sample);
        out.write(Box::into_raw(Box::new(CopsymSample { sample, pseudo })));
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn copsym_sample_len(s: *const CopsymSample) -> usize {
    s.as_ref().map_or(0, |s| s.sample.len())
}

/// Copies pairs into `x` and `y`, each holding at least `len` doubles.
///
/// # Safety
/// `s` must be a live handle; `x` and `y` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn copsym_sample_copy(
    s: *const CopsymSample,
    x: *mut f64,
    y: *mut f64,
    len: usize,
) -> CopsymStatus {
    guard(|| {
        let s = deref(s, "sample")?;
        let n = s.sample.len();
        if len < n {
            return Err(Fail(CopsymStatus::Input, format!("buffer holds {len} values, sample has {n}")));
        }
        if x.is_null() || y.is_null() {
            return Err(null("x or y"));
        }
        for (i, &(a, b)) in s.sample.pairs().iter().enumerate() {
            x.add(i).write(a);
            y.add(i).write(b);
        }
        Ok(())
    })
}

/// # Safety
/// `s` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn copsym_sample_free(s: *mut CopsymSample) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Parses a copula token such as `gumbel:tau=0.5:delta=0.25`.
///
/// # Safety
/// `token` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn copsym_copula_parse(token: *const c_char, out: *mut *mut CopsymCopula) -> CopsymStatus {
    guard(|| {
        if token.is_null() {
            return Err(null("token"));
        }
        let s = CStr::from_ptr(token)
            .to_str()
            .map_err(|_| Fail(CopsymStatus::InvalidUtf8, "token is not UTF-8".into()))?;
        let spec: CopulaSpec = s.parse()?;
        write_out(out, Box::into_raw(Box::new(CopsymCopula(spec))), "out")
    })
}

/// # Safety
/// `c` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn copsym_copula_free(c: *mut CopsymCopula) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn copsym_copula_cdf(c: *const CopsymCopula, u: f64, v: f64, out: *mut f64) -> CopsymStatus {
    guard(|| {
        let c = deref(c, "copula")?;
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return Err(Fail(CopsymStatus::Domain, format!("({u}, {v}) is outside the unit square")));
        }
        write_out(out, c.0.cdf(u, v), "out")
    })
}

/// Draws `n` pairs from the copula; the same seed gives the same sample.
///
/// # Safety
/// `c` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn copsym_copula_sample(
    c: *const CopsymCopula,
    n: usize,
    seed: u64,
    out: *mut *mut CopsymSample,
) -> CopsymStatus {
    guard(|| {
        let c = deref(c, "copula")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sample = copsym::sample_copula(&c.0, n, seed)?;
        let pseudo = pseudo_observations(&sample);
        out.write(Box::into_raw(Box::new(CopsymSample { sample, pseudo })));
        Ok(())
    })
}

/// Empirical Bernstein copula of order `m` at `(u, v)`.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn copsym_bernstein_copula(
    s: *const CopsymSample,
    m: usize,
    u: f64,
    v: f64,
    out: *mut f64,
) -> CopsymStatus {
    guard(|| {
        let s = deref(s, "sample")?;
        if s.sample.is_empty() {
            return Err(Error::EmptySample("sample has no observations".into()).into());
        }
        if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
            return Err(Fail(CopsymStatus::Domain, format!("({u}, {v}) is outside the unit square")));
        }
        let order = BernsteinOrder::new(m)?;
        write_out(out, copsym::bernstein_copula(&s.pseudo, order, u, v), "out")
    })
}

/// Runs the symmetry test. `m = 0` picks the default order; `empirical`
/// non-zero uses the empirical copula and ignores `m`.
///
/// # Safety
/// `s` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn copsym_test_run(
    s: *const CopsymSample,
    m: usize,
    grid: usize,
    replicates: usize,
    seed: u64,
    empirical: bool,
    plus_one: bool,
    out: *mut *mut CopsymTestResult,
) -> CopsymStatus {
    guard(|| {
        let s = deref(s, "sample")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = TestOptions {
            grid: GridSpec::new(grid)?,
            replicates,
            seed,
            rule: if plus_one { PValueRule::PlusOne } else { PValueRule::Plain },
        };
        let res = if empirical {
            run_test_empirical(&s.sample, &opts)?
        } else {
            let order = if m == 0 { None } else { Some(BernsteinOrder::new(m)?) };
            run_test(&s.sample, order, &opts)?
        };
        out.write(Box::into_raw(Box::new(CopsymTestResult(res))));
        Ok(())
    })
}

/// Statistic value, its sqrt(n)-scaled form and p-value.
///
/// # Safety
/// `r` must be a live handle; each output pointer must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn copsym_test_result_statistic(
    r: *const CopsymTestResult,
    which: CopsymStatistic,
    value: *mut f64,
    scaled: *mut f64,
    p_value: *mut f64,
) -> CopsymStatus {
    guard(|| {
        let r = &deref(r, "result")?.0;
        let st = &r.statistics;
        let (v, sc, p) = match which {
            CopsymStatistic::R => (st.r, st.scaled_r, r.p_values.r),
            CopsymStatistic::S => (st.s, st.scaled_s, r.p_values.s),
            CopsymStatistic::T => (st.t, st.scaled_t, r.p_values.t),
        };
        for (ptr, x) in [(value, v), (scaled, sc), (p_value, p)] {
            if !ptr.is_null() {
                ptr.write(x);
            }
        }
        Ok(())
    })
}

/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn copsym_test_result_n(r: *const CopsymTestResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.n)
}

/// Bernstein order used, or 0 for the empirical-copula test.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn copsym_test_result_m(r: *const CopsymTestResult) -> usize {
    r.as_ref().map_or(0, |r| match r.0.method {
        Method::Bernstein => r.0.m.unwrap_or(0),
        Method::Empirical => 0,
    })
}

/// Number of warnings attached to the result.
///
/// # Safety
/// `r` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn copsym_test_result_warning_count(r: *const CopsymTestResult) -> usize {
    r.as_ref().map_or(0, |r| r.0.warnings.len())
}

/// Warning `i` as a newly allocated string; release it with `copsym_string_free`.
///
/// # Safety
/// `r` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn copsym_test_result_warning(r: *const CopsymTestResult, i: usize) -> *mut c_char {
    match r.as_ref().and_then(|r| r.0.warnings.get(i)) {
        Some(w) => CString::new(w.replace('\0', " ")).expect("no nul").into_raw(),
        None => ptr::null_mut(),
    }
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn copsym_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `r` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn copsym_test_result_free(r: *mut CopsymTestResult) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
