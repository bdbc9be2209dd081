//! `K = K_s + K_c`: a sample goes to `K_c` with weight
//! `chi_eps(|v - v*|) 1_{|v|+|v*| <= m}`, the remainder to `K_s`.

use super::{apply_k_weighted, assemble_strong, weighted_inner, KernelSplitConfig, StrongMatrix};
use crate::collision::{CollisionOperator, Sample};
use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::vec3;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct SplitResult {
    pub ks: Vec<f64>,
    pub kc: Vec<f64>,
}

/// Fraction of `int_{|u|<h/2} |u|^gamma du` carried by `chi`.
fn ball_chi_fraction(cfg: &KernelSplitConfig, gamma: f64, h: f64) -> Result<f64> {
    let top = 0.5 * h;
    let full = top.powf(3.0 + gamma) / (3.0 + gamma);
    let mut breaks = vec![0.0, cfg.epsilon.min(top), (2.0 * cfg.epsilon).min(top), top];
    breaks.dedup();
    let mut part = 0.0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let r = integrate(|r| cfg.chi(r) * r.powf(2.0 + gamma), w[0], w[1], 1e-15, 1e-12, 200);
            if !r.converged {
                return Err(Error::Quadrature { estimate: r.error });
            }
            part += r.value;
        }
    }
    Ok((part / full).clamp(0.0, 1.0))
}

struct Shares {
    cfg: KernelSplitConfig,
    speeds: Vec<f64>,
    ball: f64,
}

impl Shares {
    fn new(op: &CollisionOperator, cfg: KernelSplitConfig) -> Result<Self> {
        KernelSplitConfig::new(cfg.epsilon, cfg.m_trunc)?;
        let speeds = op.grid().nodes().iter().map(|v| vec3::norm(*v)).collect();
        let ball = ball_chi_fraction(&cfg, op.mixture().gamma, op.grid().spacing())?;
        Ok(Self { cfg, speeds, ball })
    }
    fn compact(&self, s: &Sample, i: usize) -> f64 {
        self.cfg.compact_share(s.speed, self.speeds[i], self.speeds[s.j])
    }
    fn compact_self(&self, i: usize) -> f64 {
        if 2.0 * self.speeds[i] <= self.cfg.m_trunc {
            self.ball
        } else {
            0.0
        }
    }
}

/// Evaluates `(K_s f, K_c f)` for a stacked pair at one spatial point.
pub fn split_ks_kc(op: &CollisionOperator, cfg: KernelSplitConfig, stacked: &[f64]) -> Result<SplitResult> {
    let sh = Shares::new(op, cfg)?;
    let kc = apply_k_weighted(op, stacked, &|s, i| sh.compact(s, i), &|i| sh.compact_self(i))?;
    let ks = apply_k_weighted(op, stacked, &|s, i| 1.0 - sh.compact(s, i), &|i| 1.0 - sh.compact_self(i))?;
    Ok(SplitResult { ks, kc })
}

/// Applies one part of the split (`small = true` for `K_s`).
pub fn apply_split(op: &CollisionOperator, cfg: KernelSplitConfig, stacked: &[f64], small: bool) -> Result<Vec<f64>> {
    let sh = Shares::new(op, cfg)?;
    if small {
        apply_k_weighted(op, stacked, &|s, i| 1.0 - sh.compact(s, i), &|i| 1.0 - sh.compact_self(i))
    } else {
        apply_k_weighted(op, stacked, &|s, i| sh.compact(s, i), &|i| sh.compact_self(i))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RatioEstimate {
    pub ratio: f64,
    /// Rank of the test space after dropping near-dependent directions.
    pub subspace_dim: usize,
}

/// Test space for [`ks_ratio`], per species: `sqrt(mu)` times the quadratics
/// in `sqrt(m) v`, plus Gaussian bumps of width `h` centred at a quarter, half
/// and three quarters of the radius on the six half-axes.
pub fn smooth_test_space(op: &CollisionOperator) -> Vec<Vec<f64>> {
    let grid = op.grid();
    let nv = grid.len();
    let h = grid.spacing();
    let mut out = Vec::new();
    for s in 0..2 {
        let sm = op.mixture().mass(s).sqrt();
        let mut push = |f: &dyn Fn(usize, [f64; 3]) -> f64| {
            let mut col = vec![0.0; 2 * nv];
            for (i, v) in grid.nodes().iter().enumerate() {
                col[s * nv + i] = f(i, *v);
            }
            out.push(col);
        };
        let sq = op.sqrt_mu(s);
        push(&|i, _| sq[i]);
        for a in 0..3 {
            push(&|i, v| sq[i] * sm * v[a]);
            for b in a..3 {
                push(&|i, v| sq[i] * sm * sm * v[a] * v[b]);
            }
        }
        for frac in [0.25, 0.5, 0.75] {
            for a in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut c = [0.0; 3];
                    c[a] = sign * frac * grid.radius();
                    push(&|_, v| (-0.5 * vec3::norm2(vec3::sub(v, c)) / (h * h)).exp());
                }
            }
        }
    }
    out
}

/// Measured `eta = sup |<w^{2l} K_s f1, f2>| / (|w^l f1|_nu |w^l f2|_nu)`
/// over `f1, f2` in [`smooth_test_space`]: the spectral norm of
/// `G^{-1/2} B G^{-1/2}` with `B = <w^{2l} K_s phi_q, phi_p>` and `G` the
/// `nu`-Gram matrix. Grid-scale modes are left out because the
/// interpolation amplifies them at the outer cells independently of the
/// split.
pub fn ks_ratio(op: &CollisionOperator, cfg: KernelSplitConfig, l: f64, budget: usize) -> Result<RatioEstimate> {
    let sh = Shares::new(op, cfg)?;
    let strong = assemble_strong(op, &|s, i| 1.0 - sh.compact(s, i), &|i| 1.0 - sh.compact_self(i), budget)?;
    let phi = smooth_test_space(op);
    let dim = phi.len();
    let ks: Vec<Vec<f64>> = phi.iter().map(|f| (&strong.k * DVector::from_column_slice(f)).as_slice().to_vec()).collect();
    let b = DMatrix::from_fn(dim, dim, |p, q| weighted_inner(op, &ks[q], &phi[p], l));
    let (t, r) = gram_whitener(op, &phi, l);
    let m = t.transpose() * b * &t;
    let ratio = m.singular_values().iter().cloned().fold(0.0, f64::max);
    if !ratio.is_finite() {
        return Err(Error::NonFinite("K_s ratio".into()));
    }
    Ok(RatioEstimate { ratio, subspace_dim: r })
}

/// `U Lambda^{-1/2}` of the `nu`-Gram matrix of `phi` on its numerically
/// nonsingular range, and the rank of that range.
fn gram_whitener(op: &CollisionOperator, phi: &[Vec<f64>], l: f64) -> (DMatrix<f64>, usize) {
    let dim = phi.len();
    let g = DMatrix::from_fn(dim, dim, |p, q| {
        let prod: Vec<f64> = phi[p].iter().zip(&phi[q]).map(|(a, b)| a * b).collect();
        nu_weighted_sum(op, &prod, l)
    });
    let eig = SymmetricEigen::new(g);
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..dim).filter(|&k| eig.eigenvalues[k] > 1e-10 * top).collect();
    let t = DMatrix::from_fn(dim, keep.len(), |p, k| eig.eigenvectors[(p, keep[k])] / eig.eigenvalues[keep[k]].sqrt());
    (t, keep.len())
}

/// `||S - S^T||_2 / ||S||_2` for `S = <L phi_q, phi_p>` whitened by the
/// `nu`-Gram matrix, over [`smooth_test_space`], with `L = diag(nu) + K`
/// from the strong form.
pub fn smooth_asymmetry(op: &CollisionOperator, strong: &StrongMatrix) -> Result<f64> {
    let phi = smooth_test_space(op);
    let dim = phi.len();
    let lphi: Vec<Vec<f64>> = phi
        .iter()
        .map(|f| {
            let mut y = (&strong.k * DVector::from_column_slice(f)).as_slice().to_vec();
            for (r, v) in y.iter_mut().enumerate() {
                *v += strong.nu[r] * f[r];
            }
            y
        })
        .collect();
    let b = DMatrix::from_fn(dim, dim, |p, q| weighted_inner(op, &lphi[q], &phi[p], 0.0));
    let (t, _) = gram_whitener(op, &phi, 0.0);
    let s = t.transpose() * b * &t;
    let top = |m: &DMatrix<f64>| m.singular_values().iter().cloned().fold(0.0, f64::max);
    let a = top(&(&s - s.transpose())) / top(&s);
    if !a.is_finite() {
        return Err(Error::NonFinite("smooth asymmetry".into()));
    }
    Ok(a)
}

/// `sum_r q w^{g(2l+1)} x_r` over a stacked vector (the `nu`-norm weight).
fn nu_weighted_sum(op: &CollisionOperator, x: &[f64], l: f64) -> f64 {
    let g = op.mixture().gamma;
    let nv = op.grid().len();
    x.iter()
        .enumerate()
        .map(|(r, v)| {
            let i = r % nv;
            op.grid().weights()[i] * (1.0 + vec3::norm(op.grid().node(i))).powf(g * (2.0 * l + 1.0)) * v
        })
        .sum()
}
