//! Linearized operator `L f = nu f + K f` around the bi-Maxwellian, its kernel
//! representation, the `(eps, m)` cutoff split and coercivity estimation.
//!
//! On the grid, `L` is evaluated in the normalized form
//! `(L f)^a(v) = sqrt(mu^a(v)) sum_b sum W mu^b(v*) [g^a + g^b_* - g^a' - g^b_*']`
//! with `g = f/sqrt(mu)`, which keeps every Maxwellian factor exact.

mod assemble;
mod coercivity;
mod decay;
mod kernels;
mod probes;
mod split;

pub use assemble::{assemble_l, assemble_strong, strong_matches, AssembledL, StrongMatrix, DEFAULT_DENSE_BUDGET};
pub use coercivity::{dense_coercivity, estimate_coercivity, Coercivity, LanczosMode, LanczosOptions};
pub use decay::{verify_kernel_decay, DecayRow};
pub use kernels::{
    eval_kernel_k1, eval_kernel_k2, kernel_measure_factor, typical_prefactor, hybrid_prefactor, KernelPoint, Orientation,
};
pub use probes::{k_ratio_probe, probe_derivative_estimates, random_smooth_pair, DerivativeProbe, FeasiblePair};
pub use split::{apply_split, ks_ratio, smooth_asymmetry, smooth_test_space, split_ks_kc, RatioEstimate, SplitResult};

use crate::collision::{CollisionOperator, MixtureConfig, Sample};
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::vec3::{self, Vec3};
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Cutoff parameters: `chi` vanishes below `epsilon`, equals one above
/// `2 epsilon`; `m_trunc` is the radius in `|v| + |v*|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelSplitConfig {
    pub epsilon: f64,
    pub m_trunc: f64,
}

impl Default for KernelSplitConfig {
    fn default() -> Self {
        Self { epsilon: 0.25, m_trunc: 6.0 }
    }
}

impl KernelSplitConfig {
    pub fn new(epsilon: f64, m_trunc: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Range { key: "epsilon".into(), message: format!("{epsilon} not in (0, 1)") });
        }
        if !(m_trunc > 1.0 && m_trunc.is_finite()) {
            return Err(Error::Range { key: "m_trunc".into(), message: format!("{m_trunc} must exceed 1") });
        }
        Ok(Self { epsilon, m_trunc })
    }

    /// No cutoff: `chi = 1` on `r > 0`. Only meaningful for kernel evaluation.
    pub fn no_cutoff() -> Self {
        Self { epsilon: 0.0, m_trunc: f64::INFINITY }
    }

    /// C^2 quintic ramp on `[eps, 2 eps]`.
    #[inline]
    pub fn chi(&self, r: f64) -> f64 {
        if r <= self.epsilon {
            return if self.epsilon == 0.0 && r > 0.0 { 1.0 } else { 0.0 };
        }
        if r >= 2.0 * self.epsilon {
            return 1.0;
        }
        let t = (r - self.epsilon) / self.epsilon;
        t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }

    /// `chi(|u|) 1_{|v|+|v*| <= m}`: the share of a sample assigned to `K_c`.
    #[inline]
    pub fn compact_share(&self, speed: f64, v_norm: f64, v_star_norm: f64) -> f64 {
        if v_norm + v_star_norm <= self.m_trunc {
            self.chi(speed)
        } else {
            0.0
        }
    }
}

/// Continuum collision frequency
/// `nu^a(v) = sum_b int_{S^2} b dw int |v - v*|^gamma mu^b(v*) dv*`.
/// The radial integral is reduced analytically over spheres around `v`.
pub fn eval_nu(mixture: &MixtureConfig, species: usize, v: Vec3) -> Result<f64> {
    let _ = species;
    let speed = vec3::norm(v);
    let g = mixture.gamma;
    let mut total = 0.0;
    for b in 0..2 {
        let m = mixture.mass(b);
        let pref = (m / (2.0 * PI)).powf(1.5);
        // Sphere average of the Gaussian at distance r from v.
        let integrand = |r: f64| {
            if r <= 0.0 {
                return 0.0;
            }
            let shell = if speed * r * m < 1e-8 {
                4.0 * PI * (-0.5 * m * (speed * speed + r * r)).exp()
            } else {
                let x = m * r * speed;
                2.0 * PI * (-0.5 * m * (speed - r) * (speed - r)).exp() * (-(-2.0 * x).exp_m1()) / x
            };
            pref * r.powf(g + 2.0) * shell
        };
        let width = 14.0 / m.sqrt();
        let top = speed + width;
        let mut breaks = vec![0.0, (speed - width).max(0.0) * 0.5];
        if speed > 0.0 {
            breaks.push((speed - width).max(0.0));
            breaks.push(speed);
        }
        breaks.push(top);
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        let mut radial = 0.0;
        for w in breaks.windows(2) {
            if w[1] > w[0] {
                let r = integrate(integrand, w[0], w[1], 1e-14, 1e-11, 400);
                if !r.converged {
                    return Err(Error::Quadrature { estimate: r.error });
                }
                radial += r.value;
            }
        }
        total += radial;
    }
    Ok(total * mixture.kernel.sphere_integral())
}

/// Strong-form grid evaluation of `K` (and `L`) at one spatial point.
///
/// `share(sample, i)` scales each off-diagonal sample contribution and
/// `self_share(i)` the coincident-node correction; both are one for the full
/// operator.
pub(crate) fn apply_k_weighted(
    op: &CollisionOperator,
    stacked: &[f64],
    share: &(dyn Fn(&Sample, usize) -> f64 + Sync),
    self_share: &(dyn Fn(usize) -> f64 + Sync),
) -> Result<Vec<f64>> {
    let nv = op.grid().len();
    if stacked.len() != 2 * nv {
        return Err(Error::Contract(format!("expected {} stacked values, got {}", 2 * nv, stacked.len())));
    }
    if let Some(p) = stacked.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("input to K at stacked index {p}")));
    }
    let g: [Vec<f64>; 2] = std::array::from_fn(|s| {
        stacked[s * nv..(s + 1) * nv].iter().zip(op.sqrt_mu(s)).map(|(f, r)| f / r).collect()
    });
    let sw = op.self_weight();
    let out: Vec<f64> = (0..2 * nv)
        .into_par_iter()
        .map(|row| {
            let (a, i) = (row / nv, row % nv);
            let mut acc = 0.0;
            for b in 0..2 {
                let mb = op.mu(b);
                let pair = op.mixture().pair(a, b);
                op.node_samples(i, pair, |s| {
                    let c = share(&s, i);
                    if c != 0.0 {
                        let d = g[b][s.j]
                            - op.interp_normalized(&g[b], b, 0.5, s.s_star_prime)
                            - op.interp_normalized(&g[a], a, 0.5, s.s_prime);
                        acc += c * s.weight * mb[s.j] * d;
                    }
                });
                acc -= self_share(i) * sw * mb[i] * g[a][i];
            }
            op.sqrt_mu(a)[i] * acc
        })
        .collect();
    if let Some(p) = out.iter().position(|x| !x.is_finite()) {
        return Err(Error::NonFinite(format!("K output at stacked index {p}")));
    }
    Ok(out)
}

/// `K f` for a stacked pair `[f^A..., f^B...]` at one spatial point.
pub fn apply_k(op: &CollisionOperator, stacked: &[f64]) -> Result<Vec<f64>> {
    apply_k_weighted(op, stacked, &|_, _| 1.0, &|_| 1.0)
}

/// `L f = nu f + K f` in strong form.
pub fn apply_l(op: &CollisionOperator, stacked: &[f64]) -> Result<Vec<f64>> {
    let nu = op.nu_grid();
    let nv = op.grid().len();
    let mut out = apply_k(op, stacked)?;
    for (r, o) in out.iter_mut().enumerate() {
        *o += nu[r / nv][r % nv] * stacked[r];
    }
    Ok(out)
}

/// Species-stacked `nu` of the grid operator.
pub fn nu_stacked(op: &CollisionOperator) -> Vec<f64> {
    let nu = op.nu_grid();
    nu[0].iter().chain(&nu[1]).copied().collect()
}

/// `|f|_nu^2` with weight power `l`, stacked layout.
pub fn nu_norm_sq(op: &CollisionOperator, stacked: &[f64], l: f64) -> f64 {
    let g = op.mixture().gamma;
    let nv = op.grid().len();
    let mut acc = 0.0;
    for (r, x) in stacked.iter().enumerate() {
        let i = r % nv;
        let v = op.grid().node(i);
        acc += op.grid().weights()[i] * (1.0 + vec3::norm(v)).powf(g * (2.0 * l + 1.0)) * x * x;
    }
    acc
}

/// Stacked `L^2_v` inner product with weight `w^{2l}`.
pub fn weighted_inner(op: &CollisionOperator, f: &[f64], h: &[f64], l: f64) -> f64 {
    let g = op.mixture().gamma;
    let nv = op.grid().len();
    f.iter()
        .zip(h)
        .enumerate()
        .map(|(r, (a, b))| {
            let i = r % nv;
            let v = op.grid().node(i);
            op.grid().weights()[i] * (1.0 + vec3::norm(v)).powf(2.0 * g * l) * a * b
        })
        .sum()
}
