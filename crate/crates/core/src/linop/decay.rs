//! Weighted decay of the typical kernel:
//! `I(v) = C_T int |k^(1)(v, u)| w^s(v)/w^s(v + c u) du`, reported together
//! with `I(v) <v>^{2-gamma}`, `<v> = 1 + |v|`.

use super::{eval_kernel_k1, typical_prefactor, KernelSplitConfig};
use crate::collision::MixtureConfig;
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use serde::Serialize;
use std::cell::Cell;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayRow {
    pub speed: f64,
    pub integral: f64,
    pub normalized: f64,
    /// Accumulated quadrature error estimate of `integral`.
    pub error: f64,
}

const REL_TOL: f64 = 1e-7;

/// `s <= 0` is the weight power. Axisymmetry about `v` reduces the `u`
/// integral to `(rho, t = cos angle(u, v))`.
pub fn verify_kernel_decay(
    mixture: &MixtureConfig,
    cfg: &KernelSplitConfig,
    alpha: usize,
    beta: usize,
    speeds: &[f64],
    s: f64,
) -> Result<Vec<DecayRow>> {
    if s > 0.0 {
        return Err(Error::Range { key: "weight_power".into(), message: format!("{s} must be <= 0") });
    }
    let (ma, mb) = (mixture.mass(alpha), mixture.mass(beta));
    let mt = ma + mb;
    let c = 2.0 * mb / mt;
    let g = mixture.gamma;
    let pref = typical_prefactor(mb);
    let mut rows = Vec::with_capacity(speeds.len());
    for &speed in speeds {
        if !(speed >= 0.0 && speed.is_finite()) {
            return Err(Error::Range { key: "speeds".into(), message: format!("{speed} is not a valid speed") });
        }
        let failure: Cell<Option<Error>> = Cell::new(None);
        let err_acc = Cell::new(0.0);
        let v = [0.0, 0.0, speed];
        let inner = |rho: f64| -> f64 {
            if rho <= 0.0 {
                return 0.0;
            }
            let f = |t: f64| {
                let st = (1.0 - t * t).max(0.0).sqrt();
                let u = [rho * st, 0.0, rho * t];
                match eval_kernel_k1(mixture, cfg, alpha, beta, v, u) {
                    Ok(k) => {
                        let vs2 = speed * speed + 2.0 * c * speed * rho * t + c * c * rho * rho;
                        let ratio = ((1.0 + speed) / (1.0 + vs2.max(0.0).sqrt())).powf(g * s);
                        k.abs() * ratio
                    }
                    Err(e) => {
                        failure.set(Some(e));
                        0.0
                    }
                }
            };
            let mut breaks = vec![-1.0, 1.0];
            if speed > 0.0 {
                let t_star = -(mb / mt) * rho / speed;
                if t_star > -1.0 && t_star < 1.0 {
                    breaks.insert(1, t_star);
                }
            }
            let mut acc = 0.0;
            for w in breaks.windows(2) {
                let r = integrate(f, w[0], w[1], 1e-300, REL_TOL, 200);
                acc += r.value;
            }
            rho * rho * acc
        };
        let b = mb / mt;
        let c2 = ma / mt;
        let tail = 16.0 / (mb.sqrt() * c2.min(b));
        let mut breaks = vec![0.0, speed / b, speed / b + tail];
        breaks.dedup();
        let mut total = 0.0;
        let mut converged = true;
        for w in breaks.windows(2) {
            if w[1] > w[0] {
                let r = integrate(inner, w[0], w[1], 1e-300, REL_TOL, 200);
                converged &= r.converged;
                err_acc.set(err_acc.get() + r.error);
                total += r.value;
            }
        }
        if let Some(e) = failure.take() {
            return Err(e);
        }
        let integral = pref * 2.0 * PI * total;
        let error = pref * 2.0 * PI * err_acc.get();
        if !converged && error > 1e-4 * integral {
            return Err(Error::Quadrature { estimate: error });
        }
        rows.push(DecayRow { speed, integral, normalized: integral * (1.0 + speed).powf(2.0 - g), error });
    }
    Ok(rows)
}
