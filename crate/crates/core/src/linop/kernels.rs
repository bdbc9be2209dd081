//! Pointwise integral kernels of `K`.
//!
//! Conventions: `u = v* - v`, `u_par = (u.w)w`, `u_perp = u - u_par`, so that
//! `v' = v + c u_par` with `c = 2 m_b/(m_a+m_b)` and
//! `v*' = v + u_perp + ((m_b - m_a)/(m_a+m_b)) u_par`.
//! Kernels are returned without their constant prefactors, see
//! [`typical_prefactor`] and [`hybrid_prefactor`].

use super::KernelSplitConfig;
use crate::collision::MixtureConfig;
use crate::error::{Error, Result};
use crate::quadrature::{bessel_i0e, integrate};
use crate::vec3::{self, Vec3};
use serde::Serialize;
use std::f64::consts::PI;

/// `2 (m_b/2pi)^{3/2}`: constant of the typical and degenerate parts.
pub fn typical_prefactor(m_beta: f64) -> f64 {
    2.0 * (m_beta / (2.0 * PI)).powf(1.5)
}

/// `2 (m_a m_b)^{3/4} / (2pi)^{3/2}`: constant of the mixed-species hybrid part.
pub fn hybrid_prefactor(m_alpha: f64, m_beta: f64) -> f64 {
    2.0 * (m_alpha * m_beta).powf(0.75) / (2.0 * PI).powf(1.5)
}

/// Which component carries the three free dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Orientation {
    /// `u_par in R^3`, `u_perp` in the plane orthogonal to it.
    Parallel,
    /// `u_perp in R^3`, `u_par` in the plane orthogonal to it.
    Perpendicular,
}

/// Jacobian of `du dw -> du_perp du_par` for the given orientation:
/// `2/|u_par|^2` or `2/|u_perp|^2`.
pub fn kernel_measure_factor(orientation: Orientation, u_par_norm: f64, u_perp_norm: f64) -> Result<f64> {
    let r = match orientation {
        Orientation::Parallel => u_par_norm,
        Orientation::Perpendicular => u_perp_norm,
    };
    if !(r > 0.0) {
        return Err(Error::Singularity(format!("{orientation:?} component has zero length")));
    }
    Ok(2.0 / (r * r))
}

/// Derived variables at one kernel argument.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct KernelPoint {
    pub u_par: Vec3,
    pub u_perp: Vec3,
    pub zeta_par: Vec3,
    pub zeta_perp: Vec3,
    pub xi: Vec3,
    pub eta: Vec3,
}

impl KernelPoint {
    /// Requires `u_par != 0` and `u_perp` orthogonal to it.
    pub fn new(mixture: &MixtureConfig, alpha: usize, beta: usize, v: Vec3, u_par: Vec3, u_perp: Vec3) -> Result<Self> {
        let a = vec3::norm(u_par);
        if !(a > 0.0) {
            return Err(Error::Singularity("u_par = 0".into()));
        }
        let e = vec3::scale(1.0 / a, u_par);
        if vec3::dot(e, u_perp).abs() > 1e-10 * (1.0 + vec3::norm(u_perp)) {
            return Err(Error::Contract("u_perp is not orthogonal to u_par".into()));
        }
        let (ma, mb) = (mixture.mass(alpha), mixture.mass(beta));
        let mt = ma + mb;
        let v_par = vec3::scale(vec3::dot(v, e), e);
        let v_perp = vec3::sub(v, v_par);
        let c = 2.0 * mb / mt;
        let x = vec3::scale(ma.sqrt(), vec3::axpy(v, c, u_par));
        let y = vec3::scale(mb.sqrt(), vec3::add(v, vec3::add(u_par, u_perp)));
        Ok(Self {
            u_par,
            u_perp,
            zeta_par: vec3::axpy(v_par, mb / mt, u_par),
            zeta_perp: v_perp,
            xi: vec3::scale(0.5, vec3::add(x, y)),
            eta: vec3::scale(0.5, vec3::sub(y, x)),
        })
    }
}

/// `2pi int_0^inf r e^{-m (r-p)^2/2} I0e(m p r) (a^2+r^2)^{(gamma-1)/2}
/// chi(sqrt(a^2+r^2)) B(r) dr`.
fn ring_integral(m: f64, p: f64, a: f64, gamma: f64, cfg: &KernelSplitConfig, b_over_cos: impl Fn(f64) -> f64) -> Result<f64> {
    let f = |r: f64| {
        let rho2 = a * a + r * r;
        let chi = cfg.chi(rho2.sqrt());
        if chi == 0.0 {
            return 0.0;
        }
        r * (-0.5 * m * (r - p) * (r - p)).exp() * bessel_i0e(m * p * r) * rho2.powf(0.5 * (gamma - 1.0)) * chi * b_over_cos(r)
    };
    let top = p + 16.0 / m.sqrt();
    let mut breaks = vec![0.0, a.min(top), p.min(top), top];
    for lim in [cfg.epsilon, 2.0 * cfg.epsilon] {
        if lim > a {
            breaks.push((lim * lim - a * a).sqrt().min(top));
        }
    }
    breaks.sort_by(|x, y| x.partial_cmp(y).unwrap());
    breaks.dedup();
    let mut total = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let r = integrate(f, w[0], w[1], 1e-300, 1e-11, 300);
            if !r.converged && r.error > 1e-8 * r.value.abs().max(1e-300) {
                return Err(Error::Quadrature { estimate: r.error });
            }
            total += r.value;
        }
    }
    Ok(2.0 * PI * total)
}

/// Typical part `k^(1)_{ab}(v, u_par)`.
pub fn eval_kernel_k1(mixture: &MixtureConfig, cfg: &KernelSplitConfig, alpha: usize, beta: usize, v: Vec3, u_par: Vec3) -> Result<f64> {
    let a = vec3::norm(u_par);
    if !(a > 0.0) {
        return Err(Error::Singularity("k1 requires u_par != 0".into()));
    }
    let (ma, mb) = (mixture.mass(alpha), mixture.mass(beta));
    let mt = ma + mb;
    let e = vec3::scale(1.0 / a, u_par);
    let vp = vec3::dot(v, e);
    let p = vec3::norm(vec3::sub(v, vec3::scale(vp, e)));
    let zeta = vp + mb / mt * a;
    let expo = -0.5 * mb * (zeta * zeta + (ma / mt) * (ma / mt) * a * a);
    let kernel = mixture.kernel;
    let ring = ring_integral(mb, p, a, mixture.gamma, cfg, |r| kernel.over_abs_cos(a / (a * a + r * r).sqrt()))?;
    Ok(expo.exp() * ring / a)
}

/// Second-part kernels. For `alpha == beta` this is the degenerate kernel
/// `k^(2)_{aa}(v, u_perp)` (three-dimensional `u_perp`, `u_par` integrated out
/// and ignored here). For `alpha != beta` it is the pointwise hybrid kernel at
/// `(u_perp, u_par)`.
pub fn eval_kernel_k2(
    mixture: &MixtureConfig,
    cfg: &KernelSplitConfig,
    alpha: usize,
    beta: usize,
    v: Vec3,
    u_perp: Vec3,
    u_par: Vec3,
) -> Result<f64> {
    let kernel = mixture.kernel;
    if alpha == beta {
        let a = vec3::norm(u_perp);
        if !(a > 0.0) {
            return Err(Error::Singularity("degenerate k2 requires u_perp != 0".into()));
        }
        let m = mixture.mass(alpha);
        let e = vec3::scale(1.0 / a, u_perp);
        let ve = vec3::dot(v, e);
        let p = vec3::norm(vec3::sub(v, vec3::scale(ve, e)));
        let zeta = ve + 0.5 * a;
        let expo = -0.5 * m * (zeta * zeta + 0.25 * a * a);
        let ring = ring_integral(m, p, a, mixture.gamma, cfg, |r| kernel.over_abs_cos(r / (a * a + r * r).sqrt()))?;
        return Ok(expo.exp() * ring / a);
    }
    let pt = KernelPoint::new(mixture, alpha, beta, v, u_par, u_perp)?;
    let a = vec3::norm(u_par);
    let u = (a * a + vec3::norm2(u_perp)).sqrt();
    let chi = cfg.chi(u);
    if chi == 0.0 {
        return Ok(0.0);
    }
    let expo = -0.5 * (vec3::norm2(pt.xi) + vec3::norm2(pt.eta));
    Ok(expo.exp() * chi * u.powf(mixture.gamma - 1.0) * kernel.over_abs_cos(a / u) / a)
}
