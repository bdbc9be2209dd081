//! C ABI over the collision kinematics, the nonlinear operator and the
//! linearized-operator diagnostics.
//!
//! Objects are opaque handles created by `*_new` and released by `*_free`.
//! Every fallible call returns a `BkStatus`; the message of the last failure
//! on the calling thread is available through `bk_last_error`.
//! Array arguments are caller-owned; lengths are element counts.

#![allow(clippy::missing_safety_doc)]

use binarykin::collision::{AngularKernel, CollisionOperator, MixtureConfig, QuadratureSpec};
use binarykin::equilibrium::{build_invariant_basis, InvariantBasis};
use binarykin::kinematics::{post_collision, CollisionInput, MassPair};
use binarykin::linop::{assemble_l, estimate_coercivity, AssembledL, LanczosOptions, DEFAULT_DENSE_BUDGET};
use binarykin::vgrid::{VelocityGrid, DEFAULT_RADIUS_FACTOR};
use binarykin::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BkStatus {
    Ok = 0,
    NullPointer = 1,
    /// Wrong length, range or configuration.
    InvalidArgument = 2,
    /// Non-finite values, failed factorization or no convergence.
    Numerical = 3,
    /// Dense storage budget exceeded.
    Sizing = 4,
    /// Input outside the mathematical domain (e.g. nonpositive F for entropy).
    Domain = 5,
    /// A Rust panic was caught at the boundary.
    Panic = 6,
}

/// Velocity grid plus precomputed collision quadrature.
pub struct BkOperator {
    op: CollisionOperator,
}

/// Assembled linearized operator with its invariant basis.
pub struct BkLinearized {
    l: AssembledL,
    basis: InvariantBasis,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> BkStatus {
    match e {
        Error::Config(_) | Error::Contract(_) | Error::Parse { .. } | Error::Range { .. } | Error::UnsupportedOrder(_) => {
            BkStatus::InvalidArgument
        }
        Error::Sizing(_) => BkStatus::Sizing,
        Error::Domain(_) | Error::Singularity(_) | Error::Cfl { .. } => BkStatus::Domain,
        _ => BkStatus::Numerical,
    }
}

/// Runs `f`, records any error or panic, and converts it to a status.
fn guard(f: impl FnOnce() -> Result<(), (BkStatus, String)>) -> BkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => BkStatus::Ok,
        Ok(Err((s, m))) => {
            set_error(&m);
            s
        }
        Err(_) => {
            set_error("panic inside binarykin");
            BkStatus::Panic
        }
    }
}

fn lift(e: Error) -> (BkStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (BkStatus, String) {
    (BkStatus::NullPointer, format!("{what} is null"))
}

unsafe fn slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], (BkStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], (BkStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn check_len(len: usize, want: usize, what: &str) -> Result<(), (BkStatus, String)> {
    if len != want {
        return Err((BkStatus::InvalidArgument, format!("{what} has length {len}, expected {want}")));
    }
    Ok(())
}

/// Library version, static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Copies the last error message of this thread into `buf` (truncated,
/// always NUL-terminated when `cap > 0`). Returns the full message length.
#[no_mangle]
pub unsafe extern "C" fn bk_last_error(buf: *mut c_char, cap: usize) -> usize {
    LAST_ERROR.with(|e| {
        let bytes = e.borrow();
        let bytes = bytes.as_bytes();
        if !buf.is_null() && cap > 0 {
            let n = bytes.len().min(cap - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Post-collision velocities for masses `(m_a, m_b)`; `omega` need not be
/// normalized. All arrays hold three values.
#[no_mangle]
pub unsafe extern "C" fn bk_post_collision(
    m_a: f64,
    m_b: f64,
    v: *const f64,
    v_star: *const f64,
    omega: *const f64,
    v_out: *mut f64,
    v_star_out: *mut f64,
) -> BkStatus {
    guard(|| {
        let v = slice(v, 3, "v")?;
        let vs = slice(v_star, 3, "v_star")?;
        let w = slice(omega, 3, "omega")?;
        let vo = slice_mut(v_out, 3, "v_out")?;
        let vso = slice_mut(v_star_out, 3, "v_star_out")?;
        let masses = MassPair::new(m_a, m_b).map_err(lift)?;
        let input = CollisionInput { v: [v[0], v[1], v[2]], v_star: [vs[0], vs[1], vs[2]], omega: [w[0], w[1], w[2]] };
        let out = post_collision(masses, input).map_err(lift)?;
        vo.copy_from_slice(&out.v_prime);
        vso.copy_from_slice(&out.v_star_prime);
        Ok(())
    })
}

/// Builds an operator on `points_per_axis^3` velocity nodes with
/// `|cos theta|` angular kernel. `radius <= 0` selects `6/sqrt(min mass)`.
#[no_mangle]
pub unsafe extern "C" fn bk_operator_new(
    m_a: f64,
    m_b: f64,
    gamma: f64,
    points_per_axis: usize,
    radius: f64,
    sphere_points: usize,
    out: *mut *mut BkOperator,
) -> BkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let masses = MassPair::new(m_a, m_b).map_err(lift)?;
        let mixture = MixtureConfig::new(masses, gamma, AngularKernel::default()).map_err(lift)?;
        let grid = if radius > 0.0 {
            VelocityGrid::new(radius, points_per_axis)
        } else {
            VelocityGrid::for_masses(masses, points_per_axis, DEFAULT_RADIUS_FACTOR)
        }
        .map_err(lift)?;
        let quad = QuadratureSpec { sphere_points, ..QuadratureSpec::default() };
        let op = CollisionOperator::new(mixture, quad, &grid).map_err(lift)?;
        *out = Box::into_raw(Box::new(BkOperator { op }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bk_operator_free(op: *mut BkOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Number of velocity nodes, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn bk_operator_len(op: *const BkOperator) -> usize {
    op.as_ref().map_or(0, |o| o.op.grid().len())
}

/// Node coordinates, `3 * len` values in node order.
#[no_mangle]
pub unsafe extern "C" fn bk_operator_nodes(op: *const BkOperator, out: *mut f64, len: usize) -> BkStatus {
    guard(|| {
        let o = op.as_ref().ok_or_else(|| null("op"))?;
        let nodes = o.op.grid().nodes();
        check_len(len, 3 * nodes.len(), "out")?;
        let dst = slice_mut(out, len, "out")?;
        for (k, v) in nodes.iter().enumerate() {
            dst[3 * k..3 * k + 3].copy_from_slice(v);
        }
        Ok(())
    })
}

/// `Q^{ab}(F^a, F^b)` on the grid; species indices are 0 (A) or 1 (B).
#[no_mangle]
pub unsafe extern "C" fn bk_eval_q(
    op: *const BkOperator,
    f_alpha: *const f64,
    f_beta: *const f64,
    alpha: u32,
    beta: u32,
    out: *mut f64,
    len: usize,
) -> BkStatus {
    guard(|| {
        let o = op.as_ref().ok_or_else(|| null("op"))?;
        let n = o.op.grid().len();
        check_len(len, n, "arrays")?;
        if alpha > 1 || beta > 1 {
            return Err((BkStatus::InvalidArgument, format!("species indices ({alpha}, {beta}) must be 0 or 1")));
        }
        let fa = slice(f_alpha, n, "f_alpha")?;
        let fb = slice(f_beta, n, "f_beta")?;
        let q = o.op.eval_q(fa, fb, alpha as usize, beta as usize).map_err(lift)?;
        slice_mut(out, n, "out")?.copy_from_slice(&q);
        Ok(())
    })
}

/// Entropy production of the positive pair `(F^A, F^B)`.
#[no_mangle]
pub unsafe extern "C" fn bk_entropy_production(
    op: *const BkOperator,
    f_a: *const f64,
    f_b: *const f64,
    len: usize,
    out: *mut f64,
) -> BkStatus {
    guard(|| {
        let o = op.as_ref().ok_or_else(|| null("op"))?;
        let n = o.op.grid().len();
        check_len(len, n, "arrays")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let d = o.op.entropy_production(slice(f_a, n, "f_a")?, slice(f_b, n, "f_b")?).map_err(lift)?;
        *out = d;
        Ok(())
    })
}

/// Assembles the linearized operator (dense, `2 len` square).
#[no_mangle]
pub unsafe extern "C" fn bk_linearized_new(op: *const BkOperator, out: *mut *mut BkLinearized) -> BkStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let o = op.as_ref().ok_or_else(|| null("op"))?;
        let l = assemble_l(&o.op, DEFAULT_DENSE_BUDGET).map_err(lift)?;
        let basis = build_invariant_basis(o.op.mixture().masses, o.op.grid()).map_err(lift)?;
        *out = Box::into_raw(Box::new(BkLinearized { l, basis }));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn bk_linearized_free(lin: *mut BkLinearized) {
    if !lin.is_null() {
        drop(Box::from_raw(lin));
    }
}

/// `L f` for a stacked `(f^A, f^B)` of length `2 * nodes`.
#[no_mangle]
pub unsafe extern "C" fn bk_linearized_apply(lin: *const BkLinearized, f: *const f64, out: *mut f64, len: usize) -> BkStatus {
    guard(|| {
        let l = lin.as_ref().ok_or_else(|| null("lin"))?;
        check_len(len, l.l.dim(), "arrays")?;
        let y = l.l.apply(slice(f, len, "f")?);
        slice_mut(out, len, "out")?.copy_from_slice(&y);
        Ok(())
    })
}

/// Coercivity constant and the minimizer's largest normalized
/// `nu`-inner product with an invariant.
#[no_mangle]
pub unsafe extern "C" fn bk_coercivity(
    lin: *const BkLinearized,
    seed: u64,
    delta_hat: *mut f64,
    orthogonality: *mut f64,
) -> BkStatus {
    guard(|| {
        let l = lin.as_ref().ok_or_else(|| null("lin"))?;
        if delta_hat.is_null() || orthogonality.is_null() {
            return Err(null("output pointer"));
        }
        let c = estimate_coercivity(&l.l, &l.basis, LanczosOptions { seed, ..LanczosOptions::default() }).map_err(lift)?;
        *delta_hat = c.delta_hat;
        *orthogonality = c.orthogonality;
        Ok(())
    })
}
