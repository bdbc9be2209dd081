//! Measured constants for the `K` boundedness estimate and the derivative
//! inequalities for `nu` and `K`.

use super::{apply_k, nu_norm_sq, nu_stacked, weighted_inner};
use crate::collision::CollisionOperator;
use crate::error::{Error, Result};
use crate::vec3;
use crate::vgrid::velocity_derivative;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Random smooth stacked pair: `sqrt(mu^a)` times a random quadratic plus a
/// displaced Gaussian bump.
pub fn random_smooth_pair(op: &CollisionOperator, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = op.grid();
    let mut out = Vec::with_capacity(2 * grid.len());
    for s in 0..2 {
        let m = op.mixture().mass(s);
        let c0: f64 = rng.gen_range(-1.0..1.0);
        let c1: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0) * m.sqrt());
        let c2: f64 = rng.gen_range(-0.5..0.5) * m;
        let d: f64 = rng.gen_range(-1.0..1.0);
        let v0: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0) / m.sqrt());
        for (i, v) in grid.nodes().iter().enumerate() {
            let poly = c0 + vec3::dot(c1, *v) + c2 * vec3::norm2(*v);
            let bump = d * (-0.25 * m * vec3::norm2(vec3::sub(*v, v0))).exp();
            out.push(op.sqrt_mu(s)[i] * poly + bump);
        }
    }
    out
}

/// `sup |<w^{2l} K f1, f2>| / (|w^l f1|_nu |w^l f2|_nu)` over `pairs` random
/// smooth pairs.
pub fn k_ratio_probe(op: &CollisionOperator, l: f64, pairs: usize, seed: u64) -> Result<f64> {
    let mut sup: f64 = 0.0;
    for p in 0..pairs {
        let f1 = random_smooth_pair(op, seed.wrapping_add(2 * p as u64));
        let f2 = random_smooth_pair(op, seed.wrapping_add(2 * p as u64 + 1));
        let kf = apply_k(op, &f1)?;
        let num = weighted_inner(op, &kf, &f2, l).abs();
        let den = (nu_norm_sq(op, &f1, l) * nu_norm_sq(op, &f2, l)).sqrt();
        sup = sup.max(num / den);
    }
    Ok(sup)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FeasiblePair {
    pub eta: f64,
    pub c_eta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivativeProbe {
    pub axis: usize,
    pub l: f64,
    /// Smallest `C_eta` making the `nu` inequality hold on every sample.
    pub nu: Vec<FeasiblePair>,
    /// Smallest `C_eta` making the `K` inequality hold on every sample pair.
    pub k: Vec<FeasiblePair>,
}

fn stacked_derivative(op: &CollisionOperator, f: &[f64], axis: usize) -> Result<Vec<f64>> {
    let nv = op.grid().len();
    let mut out = velocity_derivative(&f[..nv], op.grid(), axis)?;
    out.extend(velocity_derivative(&f[nv..], op.grid(), axis)?);
    Ok(out)
}

/// Grid search over `etas` for the smallest `C_eta` in
/// `<w^{2l} d(nu f), d f> >= |w^l d f|^2 - eta S - C |w^l f|^2` and
/// `|<w^{2l} d(K f1), d f2>| <= (eta S' + C |w^l f1|) |w^l d f2|`,
/// with `S`, `S'` summing over derivatives of order at most one.
pub fn probe_derivative_estimates(
    op: &CollisionOperator,
    samples: &[Vec<f64>],
    axis: usize,
    l: f64,
    etas: &[f64],
) -> Result<DerivativeProbe> {
    if samples.is_empty() {
        return Err(Error::Contract("derivative probe needs at least one sample".into()));
    }
    let nu = nu_stacked(op);
    struct Row {
        lhs_nu: f64,
        a: f64,
        s_sq: f64,
        s_lin: f64,
        b0: f64,
        df_norm: f64,
    }
    let mut rows = Vec::with_capacity(samples.len());
    let mut derivs = Vec::with_capacity(samples.len());
    for f in samples {
        let df = stacked_derivative(op, f, axis)?;
        let nuf: Vec<f64> = f.iter().zip(&nu).map(|(a, b)| a * b).collect();
        let dnuf = stacked_derivative(op, &nuf, axis)?;
        let lhs_nu = weighted_inner(op, &dnuf, &df, l);
        let a = nu_norm_sq(op, &df, l);
        let b0 = nu_norm_sq(op, f, l);
        let mut s_sq = b0;
        let mut s_lin = b0.sqrt();
        for ax in 0..3 {
            let d = stacked_derivative(op, f, ax)?;
            let x = nu_norm_sq(op, &d, l);
            s_sq += x;
            s_lin += x.sqrt();
        }
        rows.push(Row { lhs_nu, a, s_sq, s_lin, b0, df_norm: a.sqrt() });
        derivs.push(df);
    }
    // K pairs: (f_k, f_{k+1}) cyclically, a single sample pairs with itself.
    let mut k_lhs = Vec::with_capacity(samples.len());
    for (k, f1) in samples.iter().enumerate() {
        let kf = apply_k(op, f1)?;
        let dkf = stacked_derivative(op, &kf, axis)?;
        let j = (k + 1) % samples.len();
        k_lhs.push((weighted_inner(op, &dkf, &derivs[j], l).abs(), k, j));
    }
    let mut nu_out = Vec::with_capacity(etas.len());
    let mut k_out = Vec::with_capacity(etas.len());
    for &eta in etas {
        let mut c_nu: f64 = 0.0;
        for r in &rows {
            let deficit = -(r.lhs_nu - r.a + eta * r.s_sq);
            c_nu = c_nu.max(deficit.max(0.0) / r.b0);
        }
        let mut c_k: f64 = 0.0;
        for (lhs, k, j) in &k_lhs {
            let need = lhs / rows[*j].df_norm - eta * rows[*k].s_lin;
            c_k = c_k.max(need.max(0.0) / rows[*k].b0.sqrt());
        }
        nu_out.push(FeasiblePair { eta, c_eta: c_nu });
        k_out.push(FeasiblePair { eta, c_eta: c_k });
    }
    Ok(DerivativeProbe { axis, l, nu: nu_out, k: k_out })
}
