//! C ABI over `nilcalc`.
//!
//! Conventions: every call returns an `NcStatus`; results go through out
//! pointers. Handles are opaque and owned by the caller, who releases them
//! with the matching `*_free`. The message of the most recent failure on the
//! calling thread is available from `nc_last_error`. Panics never cross the
//! boundary; they surface as `NC_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nilcalc::group::{builtin_group, classify_pfaffian_form, isometry_graph_group, StratifiedGroup};
use nilcalc::kernel::{eval_v, synthesize_kernel, Axis, KernelGrid, SynthOptions, TruncationSpec};
use nilcalc::multiplier::Multiplier;
use nilcalc::spectral::{decompose, CLUSTER_TOL};
use nilcalc::{Error, ErrorClass};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NcStatus {
    Ok = 0,
    NullPointer = 1,
    /// bad input: unknown name, malformed JSON, wrong dimensions, grid too coarse
    Invalid = 2,
    /// singular η, ambiguous spectrum, failed fit
    Numerical = 3,
    Io = 4,
    /// caller's buffer is too small; the required size was written back
    BufferTooSmall = 5,
    Panic = 6,
}

/// A 2-step stratified group.
pub struct NcGroup {
    inner: StratifiedGroup,
}

/// A spectral multiplier F(λ).
pub struct NcMultiplier {
    inner: Multiplier,
}

/// Kernel samples on a centred grid over 𝔤₁ × 𝔤₂.
pub struct NcKernel {
    inner: KernelGrid,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> NcStatus {
    match e.class() {
        ErrorClass::Validation => NcStatus::Invalid,
        ErrorClass::Numerical => NcStatus::Numerical,
        ErrorClass::Io => NcStatus::Io,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard<F: FnOnce() -> Result<(), (NcStatus, String)>>(f: F) -> NcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NcStatus::Ok,
        Ok(Err((s, msg))) => {
            set_error(msg);
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(msg);
            NcStatus::Panic
        }
    }
}

fn lib(e: Error) -> (NcStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (NcStatus, String) {
    (NcStatus::NullPointer, format!("{what} is null"))
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, (NcStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| (NcStatus::Invalid, format!("{what}: {e}")))
}

unsafe fn slice_in<'a, T>(p: *const T, n: usize, what: &str) -> Result<&'a [T], (NcStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

/// Copy `s` plus a NUL into `buf`; `*len` holds the capacity on entry and the
/// required size (including NUL) on exit.
unsafe fn write_str(s: &str, buf: *mut c_char, len: *mut usize) -> Result<(), (NcStatus, String)> {
    if len.is_null() {
        return Err(null("len"));
    }
    let need = s.len() + 1;
    let cap = *len;
    *len = need;
    if buf.is_null() || cap < need {
        return Err((NcStatus::BufferTooSmall, format!("need {need} bytes")));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Message of the last failure on this thread. `*len` holds the capacity of
/// `buf` on entry and the required size (including NUL) on exit.
///
/// # Safety
/// `buf` must be writable for `*len` bytes; `len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nc_last_error(buf: *mut c_char, len: *mut usize) -> NcStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    match write_str(&msg, buf, len) {
        Ok(()) => NcStatus::Ok,
        Err((s, _)) => s,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn nc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Built-in group by name ("H1", "H2", "N32", "G37D", "HTYPE3", "37A-graph").
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nc_group_builtin(name: *const c_char, out: *mut *mut NcGroup) -> NcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let name = cstr(name, "name")?;
        let g = if name == "37A-graph" { isometry_graph_group() } else { builtin_group(name).map_err(lib)? };
        *out = Box::into_raw(Box::new(NcGroup { inner: g }));
        Ok(())
    })
}

/// Group from its JSON definition (1-based structure constants).
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nc_group_from_json(json: *const c_char, out: *mut *mut NcGroup) -> NcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = StratifiedGroup::from_json(cstr(json, "json")?).map_err(lib)?;
        *out = Box::into_raw(Box::new(NcGroup { inner: g }));
        Ok(())
    })
}

/// # Safety
/// `g` must come from `nc_group_*` and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nc_group_free(g: *mut NcGroup) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}

/// First- and second-layer dimensions.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nc_group_dims(g: *const NcGroup, d1: *mut usize, d2: *mut usize) -> NcStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("group"))?;
        if d1.is_null() || d2.is_null() {
            return Err(null("d1/d2"));
        }
        *d1 = g.inner.d1;
        *d2 = g.inner.d2;
        Ok(())
    })
}

/// Pfaffian class name ("37A", …, "37D₁", UTF-8) of a group with d1 = 4, d2 = 3;
/// `buf`/`len` as in `nc_last_error`.
///
/// # Safety
/// `g` and `len` must be valid; `buf` writable for `*len` bytes.
#[no_mangle]
pub unsafe extern "C" fn nc_group_classify(g: *const NcGroup, buf: *mut c_char, len: *mut usize) -> NcStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("group"))?;
        let c = classify_pfaffian_form(&g.inner).map_err(lib)?;
        write_str(c.as_str(), buf, len)
    })
}

/// Distinct nonzero eigenvalues b_j of |J_η| (descending) with multiplicities
/// r_j, and r₀ = dim ker J_η.
/// `*count` holds the capacity of `b`/`r` on entry and the number of blocks on exit.
///
/// # Safety
/// `eta` readable for `n_eta` values; `b`, `r` writable for `*count`; others valid.
#[no_mangle]
pub unsafe extern "C" fn nc_spectrum(
    g: *const NcGroup,
    eta: *const f64,
    n_eta: usize,
    b: *mut f64,
    r: *mut usize,
    count: *mut usize,
    r0: *mut usize,
) -> NcStatus {
    guard(|| {
        let g = g.as_ref().ok_or_else(|| null("group"))?;
        let eta = slice_in(eta, n_eta, "eta")?;
        if count.is_null() || r0.is_null() {
            return Err(null("count/r0"));
        }
        let sd = decompose(&g.inner, eta, CLUSTER_TOL).map_err(lib)?;
        let cap = *count;
        *count = sd.done;
        *r0 = sd.r0;
        if sd.done > cap || (sd.done > 0 && (b.is_null() || r.is_null())) {
            return Err((NcStatus::BufferTooSmall, format!("need {} blocks", sd.done)));
        }
        for j in 0..sd.done {
            *b.add(j) = sd.b[j];
            *r.add(j) = sd.r[j];
        }
        Ok(())
    })
}

unsafe fn put_multiplier(m: nilcalc::Result<Multiplier>, out: *mut *mut NcMultiplier) -> Result<(), (NcStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(NcMultiplier { inner: m.map_err(lib)? }));
    Ok(())
}

/// Smooth bump supported in (a, b).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nc_multiplier_bump(a: f64, b: f64, out: *mut *mut NcMultiplier) -> NcStatus {
    guard(|| put_multiplier(Multiplier::bump(a, b), out))
}

/// Heat multiplier e^{−tλ}.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn nc_multiplier_heat(t: f64, out: *mut *mut NcMultiplier) -> NcStatus {
    guard(|| put_multiplier(Multiplier::heat(t), out))
}

/// F(λ) ↦ F(sλ).
///
/// # Safety
/// `m` must be a valid multiplier handle.
#[no_mangle]
pub unsafe extern "C" fn nc_multiplier_dilate(m: *mut NcMultiplier, s: f64) -> NcStatus {
    guard(|| {
        let m = m.as_mut().ok_or_else(|| null("multiplier"))?;
        if !(s > 0.0 && s.is_finite()) {
            return Err((NcStatus::Invalid, "dilation must be positive".into()));
        }
        m.inner = m.inner.clone().dilate(s);
        Ok(())
    })
}

/// # Safety
/// `m` must come from `nc_multiplier_*` and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nc_multiplier_free(m: *mut NcMultiplier) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// V(ξ, η), the Fourier transform of the kernel in (x, u) at (ξ, η).
///
/// # Safety
/// `eta`/`xi` readable for d2/d1 values; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn nc_eval_v(
    m: *const NcMultiplier,
    g: *const NcGroup,
    eta: *const f64,
    xi: *const f64,
    re: *mut f64,
    im: *mut f64,
) -> NcStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("multiplier"))?;
        let g = g.as_ref().ok_or_else(|| null("group"))?;
        let eta = slice_in(eta, g.inner.d2, "eta")?;
        let xi = slice_in(xi, g.inner.d1, "xi")?;
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let v = eval_v(&m.inner, &g.inner, eta, xi, &TruncationSpec::default()).map_err(lib)?;
        *re = v.re;
        *im = v.im;
        Ok(())
    })
}

/// Synthesize the convolution kernel of F(L) on a centred grid: `counts` and
/// `spacings` hold d1 + d2 entries (x axes first). `nyquist_safety` ≤ 0 takes
/// the default.
///
/// # Safety
/// `counts`/`spacings` readable for d1 + d2 entries; other pointers valid.
#[no_mangle]
pub unsafe extern "C" fn nc_kernel_synthesize(
    m: *const NcMultiplier,
    g: *const NcGroup,
    counts: *const usize,
    spacings: *const f64,
    nyquist_safety: f64,
    out: *mut *mut NcKernel,
) -> NcStatus {
    guard(|| {
        let m = m.as_ref().ok_or_else(|| null("multiplier"))?;
        let g = g.as_ref().ok_or_else(|| null("group"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let n = g.inner.d1 + g.inner.d2;
        let counts = slice_in(counts, n, "counts")?;
        let spacings = slice_in(spacings, n, "spacings")?;
        let axes: Vec<Axis> = counts.iter().zip(spacings).map(|(c, s)| Axis::new(*c, *s)).collect();
        let mut opts = SynthOptions::default();
        if nyquist_safety > 0.0 {
            opts.nyquist_safety = nyquist_safety;
        }
        let (xa, ua) = axes.split_at(g.inner.d1);
        let k = synthesize_kernel(&m.inner, &g.inner, xa, ua, &TruncationSpec::default(), &opts).map_err(lib)?;
        *out = Box::into_raw(Box::new(NcKernel { inner: k }));
        Ok(())
    })
}

/// Number of grid samples.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn nc_kernel_len(k: *const NcKernel, len: *mut usize) -> NcStatus {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        if len.is_null() {
            return Err(null("len"));
        }
        *len = k.inner.len();
        Ok(())
    })
}

/// Copy the samples (row-major, last axis fastest) into `re`/`im`, each of capacity `cap`.
///
/// # Safety
/// `re`/`im` writable for `cap` values.
#[no_mangle]
pub unsafe extern "C" fn nc_kernel_values(k: *const NcKernel, re: *mut f64, im: *mut f64, cap: usize) -> NcStatus {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        let n = k.inner.len();
        if cap < n {
            return Err((NcStatus::BufferTooSmall, format!("need {n} values")));
        }
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        for (i, v) in k.inner.values.iter().enumerate() {
            *re.add(i) = v.re;
            *im.add(i) = v.im;
        }
        Ok(())
    })
}

/// Write the grid in NKG1 format to `path`.
///
/// # Safety
/// `k` valid; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nc_kernel_write_nkg1(k: *const NcKernel, path: *const c_char) -> NcStatus {
    guard(|| {
        let k = k.as_ref().ok_or_else(|| null("kernel"))?;
        let path = cstr(path, "path")?;
        let f = std::fs::File::create(path).map_err(|e| (NcStatus::Io, format!("{path}: {e}")))?;
        k.inner.write_nkg1(std::io::BufWriter::new(f)).map_err(lib)
    })
}

/// # Safety
/// `k` must come from `nc_kernel_synthesize` and not be used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nc_kernel_free(k: *mut NcKernel) {
    if !k.is_null() {
        drop(Box::from_raw(k));
    }
}
