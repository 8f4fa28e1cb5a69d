//! C ABI over `snls-core`.
//!
//! Objects cross the boundary as opaque handles created by `snls_*_new`
//! style calls and released with the matching `*_free`. Every fallible call
//! returns an [`SnlsStatus`]; the message of the last failure on the calling
//! thread is available from [`snls_last_error`]. Strings are copied into
//! caller buffers and always NUL-terminated when they fit.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use snls::numerics::kernel::QKernel;
use snls::numerics::lattice::{BumpParams, LatticeSpec, TestFunction};
use snls::perturbation::{expand, expectation, two_point, PerturbativeSolution};
use snls::power_counting::subcritical_report;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnlsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Computation = 4,
    Panic = 5,
}

/// Perturbative solution `F_0..F_K` for one nonlinearity.
pub struct SnlsExpansion {
    sol: PerturbativeSolution,
}

/// Lattice with its propagator, ready for kernel evaluations.
pub struct SnlsLattice {
    spec: LatticeSpec,
    q: QKernel,
}

/// Smooth bump test function on a lattice.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct SnlsBump {
    pub center_t: f64,
    pub center_x: f64,
    pub radius_t: f64,
    pub radius_x: f64,
    /// Fraction of the radius on which the bump equals one.
    pub plateau: f64,
    pub amplitude: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SnlsComplex {
    pub re: f64,
    pub im: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn guard(f: impl FnOnce() -> Result<(), (SnlsStatus, String)>) -> SnlsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SnlsStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            SnlsStatus::Panic
        }
    }
}

fn null(what: &str) -> (SnlsStatus, String) {
    (SnlsStatus::NullPointer, format!("{what} is null"))
}

/// Copies `s` with a trailing NUL; `out_len` receives the required size.
unsafe fn write_str(s: &str, buf: *mut c_char, cap: usize, out_len: *mut usize) -> Result<(), (SnlsStatus, String)> {
    let need = s.len() + 1;
    if !out_len.is_null() {
        *out_len = need;
    }
    if buf.is_null() || cap < need {
        return Err((SnlsStatus::BufferTooSmall, format!("buffer of {cap} bytes, need {need}")));
    }
    ptr::copy_nonoverlapping(s.as_ptr(), buf as *mut u8, s.len());
    *buf.add(s.len()) = 0;
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn snls_version() -> *const c_char {
    static V: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(c) => c,
        Err(_) => panic!("version string"),
    };
    V.as_ptr()
}

/// Copies the last error message of this thread into `buf`. Returns the
/// size needed including the terminator.
///
/// # Safety
/// `buf` must be null or point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn snls_last_error(buf: *mut c_char, cap: usize) -> usize {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    let mut need = 0;
    let _ = write_str(&msg, buf, cap, &mut need);
    need
}

/// Expands the solution of the `|ψ|^{2κ}ψ` equation through order `order`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn snls_expand(kappa: u32, order: u32, out: *mut *mut SnlsExpansion) -> SnlsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let sol = expand(kappa, order).map_err(|e| (SnlsStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(SnlsExpansion { sol }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`snls_expand`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snls_expansion_free(h: *mut SnlsExpansion) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

unsafe fn expansion<'a>(h: *const SnlsExpansion) -> Result<&'a SnlsExpansion, (SnlsStatus, String)> {
    h.as_ref().ok_or_else(|| null("expansion"))
}

fn coefficient(h: &SnlsExpansion, k: u32) -> Result<&snls::Expr, (SnlsStatus, String)> {
    h.sol.coefficients.get(k as usize).ok_or_else(|| (SnlsStatus::InvalidArgument, format!("order {k} not expanded")))
}

/// Highest expanded order `K`.
///
/// # Safety
/// `h` must be a live expansion handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snls_expansion_order(h: *const SnlsExpansion, out: *mut u32) -> SnlsStatus {
    guard(|| {
        let h = expansion(h)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = h.sol.coefficients.len() as u32 - 1;
        Ok(())
    })
}

/// Number of monomials in `F_k`.
///
/// # Safety
/// `h` must be a live expansion handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snls_expansion_term_count(h: *const SnlsExpansion, k: u32, out: *mut usize) -> SnlsStatus {
    guard(|| {
        let f = coefficient(expansion(h)?, k)?;
        *out.as_mut().ok_or_else(|| null("out"))? = f.len();
        Ok(())
    })
}

/// `F_k` in display form. On `BUFFER_TOO_SMALL`, `out_len` holds the size
/// needed.
///
/// # Safety
/// `h` must be a live handle, `buf` null or `cap` writable bytes, `out_len`
/// null or writable.
#[no_mangle]
pub unsafe extern "C" fn snls_expansion_coefficient(
    h: *const SnlsExpansion,
    k: u32,
    buf: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> SnlsStatus {
    guard(|| write_str(&coefficient(expansion(h)?, k)?.to_string(), buf, cap, out_len))
}

/// `F_k` as JSON, same buffer protocol as [`snls_expansion_coefficient`].
///
/// # Safety
/// As for [`snls_expansion_coefficient`].
#[no_mangle]
pub unsafe extern "C" fn snls_expansion_coefficient_json(
    h: *const SnlsExpansion,
    k: u32,
    buf: *mut c_char,
    cap: usize,
    out_len: *mut usize,
) -> SnlsStatus {
    guard(|| write_str(&coefficient(expansion(h)?, k)?.to_json().to_string(), buf, cap, out_len))
}

/// Whether `E[ψ]` vanishes through order `k`.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snls_mean_vanishes(h: *const SnlsExpansion, k: u32, out: *mut bool) -> SnlsStatus {
    guard(|| {
        let h = expansion(h)?;
        let e = expectation(&h.sol, k).map_err(|e| (SnlsStatus::InvalidArgument, e.to_string()))?;
        *out.as_mut().ok_or_else(|| null("out"))? = e.is_zero();
        Ok(())
    })
}

/// Number of distinct two-point diagrams through order `k`.
///
/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snls_two_point_diagram_count(h: *const SnlsExpansion, k: u32, out: *mut usize) -> SnlsStatus {
    guard(|| {
        let h = expansion(h)?;
        let d = two_point(&h.sol, k).map_err(|e| (SnlsStatus::InvalidArgument, e.to_string()))?;
        *out.as_mut().ok_or_else(|| null("out"))? = d.len();
        Ok(())
    })
}

/// Whether power counting finds finitely many divergent graphs through
/// `k_max` in dimension `d`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn snls_subcritical(d: u32, kappa: u32, k_max: u32, out: *mut bool) -> SnlsStatus {
    guard(|| {
        if d == 0 || kappa == 0 || k_max > 12 {
            return Err((SnlsStatus::InvalidArgument, format!("d={d} kappa={kappa} k_max={k_max}")));
        }
        *out.as_mut().ok_or_else(|| null("out"))? = subcritical_report(d as u64, kappa, k_max).subcritical;
        Ok(())
    })
}

/// Reference `d = 1` lattice on `[0,1] × [0,2π)` with `nt × nx` points.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn snls_lattice_new(nt: usize, nx: usize, out: *mut *mut SnlsLattice) -> SnlsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut spec = LatticeSpec::reference();
        spec.nt = nt;
        spec.nx = nx;
        spec.epsilon = 2.0 * spec.dt();
        let q = snls::numerics::kernel::kernel_q(&spec).map_err(|e| (SnlsStatus::InvalidArgument, e.to_string()))?;
        *out = Box::into_raw(Box::new(SnlsLattice { spec, q }));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from [`snls_lattice_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn snls_lattice_free(h: *mut SnlsLattice) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

fn bump(b: &SnlsBump) -> BumpParams {
    BumpParams {
        center_t: b.center_t,
        center_x: b.center_x,
        radius_t: b.radius_t,
        radius_x: b.radius_x,
        plateau: b.plateau,
        amplitude: b.amplitude,
    }
}

/// Lattice covariance `Q(f₁⊗f₂)` of the linear solution.
///
/// # Safety
/// `lat` must be a live lattice handle; `f1`, `f2` readable; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn snls_q_pair(
    lat: *const SnlsLattice,
    f1: *const SnlsBump,
    f2: *const SnlsBump,
    out: *mut SnlsComplex,
) -> SnlsStatus {
    guard(|| {
        let lat = lat.as_ref().ok_or_else(|| null("lattice"))?;
        let (f1, f2) = (f1.as_ref().ok_or_else(|| null("f1"))?, f2.as_ref().ok_or_else(|| null("f2"))?);
        if f1.radius_t <= 0.0 || f1.radius_x <= 0.0 || f2.radius_t <= 0.0 || f2.radius_x <= 0.0 {
            return Err((SnlsStatus::InvalidArgument, "bump radii must be positive".into()));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let z = lat.q.pair_tf(&TestFunction::bump(&lat.spec, &bump(f1)), &TestFunction::bump(&lat.spec, &bump(f2)));
        *out = SnlsComplex { re: z.re, im: z.im };
        Ok(())
    })
}
