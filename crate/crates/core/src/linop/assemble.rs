//! Dense assembly of the grid operator.
//!
//! The weak form sums `1/4 W mu^a mu^b_* Delta^2` over samples, where
//! `Delta = g^a + g^b_* - g^a' - g^b_*'`, so `A` is symmetric positive
//! semidefinite by construction and `L_h = Q^{-1} A` with `Q = diag(q)`.

use super::apply_k_weighted;
use crate::collision::{CollisionOperator, Sample};
use crate::equilibrium::InvariantBasis;
use crate::error::{Error, Result};
use crate::interp::trilinear_stencil;
use crate::vec3;
use nalgebra::{DMatrix, DVector};

/// Upper bound on dense matrix storage, bytes.
pub const DEFAULT_DENSE_BUDGET: usize = 1 << 30;

fn check_budget(rows: usize, budget: usize) -> Result<()> {
    let bytes = rows.saturating_mul(rows).saturating_mul(8);
    if bytes > budget {
        return Err(Error::Sizing(format!(
            "dense {rows}x{rows} matrix needs {} MiB, budget is {} MiB",
            bytes >> 20,
            budget >> 20
        )));
    }
    Ok(())
}

/// Weak-form assembled `L` on one velocity grid.
#[derive(Clone, Debug)]
pub struct AssembledL {
    a: DMatrix<f64>,
    q: Vec<f64>,
    nu: Vec<f64>,
    gamma: f64,
    norm_a: f64,
    nv: usize,
}

impl AssembledL {
    pub fn dim(&self) -> usize {
        self.q.len()
    }
    pub fn nv(&self) -> usize {
        self.nv
    }
    /// Symmetric weak-form matrix `A = Q L_h`.
    pub fn weak_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }
    /// Trapezoid weights repeated over both species.
    pub fn weights(&self) -> &[f64] {
        &self.q
    }
    /// Grid collision frequency, stacked.
    pub fn nu_diag(&self) -> &[f64] {
        &self.nu
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// `L_h = Q^{-1} A` as a dense matrix.
    pub fn l_matrix(&self) -> DMatrix<f64> {
        let mut m = self.a.clone();
        for (r, q) in self.q.iter().enumerate() {
            m.row_mut(r).scale_mut(1.0 / q);
        }
        m
    }

    /// `K_h = L_h - diag(nu)`.
    pub fn k_matrix(&self) -> DMatrix<f64> {
        let mut m = self.l_matrix();
        for (r, nu) in self.nu.iter().enumerate() {
            m[(r, r)] -= nu;
        }
        m
    }

    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let y = &self.a * DVector::from_column_slice(f);
        y.iter().zip(&self.q).map(|(y, q)| y / q).collect()
    }

    /// `||A - A^T||_F / ||A||_F`.
    pub fn asymmetry(&self) -> f64 {
        let d = &self.a - self.a.transpose();
        d.norm() / self.norm_a.max(f64::MIN_POSITIVE)
    }

    /// Per-node `w(v) q` (the `nu`-norm weight with `l = 0`).
    pub fn nu_norm_weights(&self, vnodes: &[[f64; 3]]) -> Vec<f64> {
        (0..self.dim())
            .map(|r| self.q[r] * (1.0 + vec3::norm(vnodes[r % self.nv])).powf(self.gamma))
            .collect()
    }

    /// `<L f, f> / <f, f>` in `L^2_v`.
    pub fn rayleigh(&self, f: &[f64]) -> f64 {
        let v = DVector::from_column_slice(f);
        let num = v.dot(&(&self.a * &v));
        let den: f64 = f.iter().zip(&self.q).map(|(x, q)| q * x * x).sum();
        num / den
    }

    /// `||L chi_j||_nu` for the six basis vectors.
    pub fn kernel_residuals(&self, basis: &InvariantBasis) -> Result<[f64; 6]> {
        if basis.grid().len() != self.nv {
            return Err(Error::Contract("basis grid does not match the assembled operator".into()));
        }
        let w = self.nu_norm_weights(basis.grid().nodes());
        let mut out = [0.0; 6];
        for (j, o) in out.iter_mut().enumerate() {
            let r = self.apply(basis.vector(j));
            *o = r.iter().zip(&w).map(|(x, w)| w * x * x).sum::<f64>().sqrt();
        }
        Ok(out)
    }
}

/// Adds `scale * e e^T` to the upper triangle for a sparse vector `e`.
#[inline]
fn rank_one_upper(a: &mut DMatrix<f64>, idx: &[usize], val: &[f64]) {
    for p in 0..idx.len() {
        let (ip, vp) = (idx[p], val[p]);
        for q in 0..idx.len() {
            let iq = idx[q];
            if iq >= ip {
                a[(ip, iq)] += vp * val[q];
            }
        }
    }
}

/// Assembles the weak-form operator. Fails with a sizing error before
/// allocating when the dense matrix exceeds `budget` bytes.
pub fn assemble_l(op: &CollisionOperator, budget: usize) -> Result<AssembledL> {
    let grid = op.grid();
    let nv = grid.len();
    let n = grid.points_per_axis();
    let dim = 2 * nv;
    check_budget(dim, budget)?;
    let mut a = DMatrix::<f64>::zeros(dim, dim);
    let q = grid.weights();
    let lm = [op.log_mu(0), op.log_mu(1)];
    let mut idx: Vec<usize> = Vec::with_capacity(18);
    let mut val: Vec<f64> = Vec::with_capacity(18);
    // Each unordered sample enters once: AA and BB over j > i, AB over all j;
    // either way the ordered 1/4 weight doubles to 1/2.
    for (sa, sb) in [(0usize, 0usize), (1, 1), (0, 1)] {
        let pair = op.mixture().pair(sa, sb);
        let (oa, ob) = (sa * nv, sb * nv);
        for i in 0..nv {
            let j0 = if sa == sb { i + 1 } else { 0 };
            for j in j0..nv {
                if j == i {
                    continue;
                }
                op.pair_samples(i, j, pair, |s: Sample| {
                    let c = (0.5 * q[i] * s.weight).sqrt();
                    let base = lm[sa][i] + lm[sb][j];
                    idx.clear();
                    val.clear();
                    idx.push(oa + i);
                    val.push(c * (0.5 * lm[sb][j]).exp());
                    idx.push(ob + j);
                    val.push(c * (0.5 * lm[sa][i]).exp());
                    for (sp, pt, off) in [(sa, s.s_prime, oa), (sb, s.s_star_prime, ob)] {
                        if let Some((ci, cw)) = trilinear_stencil(n, pt) {
                            let t = op.corner_damping(sp, 0.5, pt, &ci).unwrap_or([1.0; 8]);
                            for c8 in 0..8 {
                                if cw[c8] != 0.0 {
                                    idx.push(off + ci[c8]);
                                    val.push(-c * cw[c8] * t[c8] * (0.5 * (base - lm[sp][ci[c8]])).exp());
                                }
                            }
                        }
                    }
                    rank_one_upper(&mut a, &idx, &val);
                });
            }
        }
    }
    for r in 0..dim {
        for c in 0..r {
            a[(r, c)] = a[(c, r)];
        }
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("assembled operator".into()));
    }
    let nu = super::nu_stacked(op);
    let qq: Vec<f64> = q.iter().chain(q).copied().collect();
    let norm_a = a.norm();
    Ok(AssembledL { a, q: qq, nu, gamma: op.mixture().gamma, norm_a, nv })
}

/// Dense strong-form matrix of a (possibly filtered) `K`, stacked layout.
#[derive(Clone, Debug)]
pub struct StrongMatrix {
    pub k: DMatrix<f64>,
    pub nu: Vec<f64>,
    pub q: Vec<f64>,
}

impl StrongMatrix {
    /// `||Q L - (Q L)^T||_F / ||Q L||_F` for `L = diag(nu) + K`.
    pub fn asymmetry(&self) -> f64 {
        let mut m = self.k.clone();
        for (r, nu) in self.nu.iter().enumerate() {
            m[(r, r)] += nu;
        }
        for (r, q) in self.q.iter().enumerate() {
            m.row_mut(r).scale_mut(*q);
        }
        (&m - m.transpose()).norm() / m.norm()
    }
}

/// Assembles the strong form of `K` column by column through the sample
/// loop, with the same share functions as the split.
pub fn assemble_strong(
    op: &CollisionOperator,
    share: &(dyn Fn(&Sample, usize) -> f64 + Sync),
    self_share: &(dyn Fn(usize) -> f64 + Sync),
    budget: usize,
) -> Result<StrongMatrix> {
    let nv = op.grid().len();
    let n = op.grid().points_per_axis();
    let dim = 2 * nv;
    check_budget(dim, budget)?;
    let mut k = DMatrix::<f64>::zeros(dim, dim);
    let lm = [op.log_mu(0), op.log_mu(1)];
    let sw = op.self_weight();
    for a in 0..2 {
        for i in 0..nv {
            let row = a * nv + i;
            let half_i = 0.5 * lm[a][i];
            for b in 0..2 {
                let pair = op.mixture().pair(a, b);
                op.node_samples(i, pair, |s| {
                    let c = share(&s, i) * s.weight;
                    if c == 0.0 {
                        return;
                    }
                    let j = s.j;
                    k[(row, b * nv + j)] += c * (half_i + 0.5 * lm[b][j]).exp();
                    for (sp, pt) in [(b, s.s_star_prime), (a, s.s_prime)] {
                        if let Some((ci, cw)) = trilinear_stencil(n, pt) {
                            let t = op.corner_damping(sp, 0.5, pt, &ci).unwrap_or([1.0; 8]);
                            for c8 in 0..8 {
                                if cw[c8] != 0.0 {
                                    let m = ci[c8];
                                    k[(row, sp * nv + m)] -= c * cw[c8] * t[c8] * (lm[b][j] + half_i - 0.5 * lm[sp][m]).exp();
                                }
                            }
                        }
                    }
                });
                k[(row, row)] -= self_share(i) * sw * lm[b][i].exp();
            }
        }
    }
    if k.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("strong-form matrix".into()));
    }
    let q = op.grid().weights();
    Ok(StrongMatrix { k, nu: super::nu_stacked(op), q: q.iter().chain(q).copied().collect() })
}

/// Matrix-free check that a strong matrix reproduces `apply_k_weighted`.
pub fn strong_matches(
    op: &CollisionOperator,
    m: &StrongMatrix,
    f: &[f64],
    share: &(dyn Fn(&Sample, usize) -> f64 + Sync),
    self_share: &(dyn Fn(usize) -> f64 + Sync),
) -> Result<f64> {
    let direct = apply_k_weighted(op, f, share, self_share)?;
    let via = &m.k * DVector::from_column_slice(f);
    let scale = direct.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    Ok(direct.iter().zip(via.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale)
}
