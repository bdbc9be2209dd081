//! Smallest eigenvalue of the pencil `(A, D)`, `D = diag(q w)`, restricted to
//! the `D`-orthogonal complement of the six collision invariants.

use super::AssembledL;
use crate::equilibrium::InvariantBasis;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct LanczosOptions {
    pub max_iterations: usize,
    /// Ritz residual tolerance relative to the largest Ritz value of the
    /// iterated operator.
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { max_iterations: 800, tolerance: 1e-9, seed: 7 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Coercivity {
    pub delta_hat: f64,
    /// `|P C z - delta z| / delta` for the returned unit vector `z`.
    pub residual: f64,
    pub iterations: usize,
    pub mode: LanczosMode,
    /// `max_j |<x, chi_j>_nu| / (|x|_nu |chi_j|_nu)` for the minimizer `x`.
    pub orthogonality: f64,
    /// Largest Rayleigh quotient over `span(chi_j)`, nu-normalized.
    pub kernel_rayleigh: f64,
    #[serde(skip)]
    pub minimizer: Vec<f64>,
}

struct Pencil<'a> {
    l: &'a AssembledL,
    inv_sd: Vec<f64>,
    sd: Vec<f64>,
    y: DMatrix<f64>,
}

impl<'a> Pencil<'a> {
    fn new(l: &'a AssembledL, basis: &InvariantBasis) -> Result<Self> {
        if basis.grid().len() != l.nv() {
            return Err(Error::Contract("basis grid does not match the assembled operator".into()));
        }
        let d = l.nu_norm_weights(basis.grid().nodes());
        let sd: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
        let inv_sd = sd.iter().map(|x| 1.0 / x).collect();
        let dim = l.dim();
        let mut y0 = DMatrix::<f64>::zeros(dim, 6);
        for j in 0..6 {
            for (r, x) in basis.vector(j).iter().enumerate() {
                y0[(r, j)] = sd[r] * x;
            }
        }
        let y = y0.qr().q();
        Ok(Self { l, inv_sd, sd, y })
    }

    fn project(&self, x: &mut DVector<f64>) {
        let c = self.y.tr_mul(x);
        *x -= &self.y * c;
    }

    /// `C x = D^{-1/2} A D^{-1/2} x`.
    fn apply_c(&self, x: &DVector<f64>) -> DVector<f64> {
        let t = DVector::from_iterator(x.len(), x.iter().zip(&self.inv_sd).map(|(a, b)| a * b));
        let u = self.l.weak_matrix() * t;
        DVector::from_iterator(u.len(), u.iter().zip(&self.inv_sd).map(|(a, b)| a * b))
    }

    fn kernel_rayleigh(&self) -> f64 {
        let cy = DMatrix::from_columns(&(0..6).map(|j| self.apply_c(&self.y.column(j).into_owned())).collect::<Vec<_>>());
        let small = self.y.tr_mul(&cy);
        let sym = (&small + small.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Back to `f`-coordinates and the nu-orthogonality measure.
    fn finish(&self, z: &DVector<f64>, basis: &InvariantBasis) -> (Vec<f64>, f64) {
        let x: Vec<f64> = z.iter().zip(&self.inv_sd).map(|(a, b)| a * b).collect();
        let d: Vec<f64> = self.sd.iter().map(|s| s * s).collect();
        let nx = x.iter().zip(&d).map(|(a, w)| w * a * a).sum::<f64>().sqrt();
        let mut worst: f64 = 0.0;
        for j in 0..6 {
            let c = basis.vector(j);
            let ip: f64 = x.iter().zip(c).zip(&d).map(|((a, b), w)| w * a * b).sum();
            let nc = c.iter().zip(&d).map(|(a, w)| w * a * a).sum::<f64>().sqrt();
            worst = worst.max(ip.abs() / (nx * nc));
        }
        (x, worst)
    }
}

/// How the extreme eigenvalue was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum LanczosMode {
    /// Lanczos on `M^{-1}`, `M = P C P + s Y Y^T`, through a dense Cholesky factor.
    ShiftInvert,
    /// Lanczos on `P C P` directly.
    Direct,
}

impl<'a> Pencil<'a> {
    /// Dense `P C P + s Y Y^T` with `s` above the spectrum of `C`.
    fn deflated_dense(&self) -> DMatrix<f64> {
        let a = self.l.weak_matrix();
        let dim = a.nrows();
        let mut c = DMatrix::<f64>::from_fn(dim, dim, |r, k| a[(r, k)] * self.inv_sd[r] * self.inv_sd[k]);
        let cy = &c * &self.y;
        let ycy = self.y.tr_mul(&cy);
        let shift = 10.0 * c.norm();
        // P C P = C - Y (CY)^T - (CY) Y^T + Y (Y^T C Y) Y^T
        c -= &self.y * cy.transpose();
        c -= &cy * self.y.transpose();
        c += &self.y * (ycy + DMatrix::<f64>::identity(6, 6) * shift) * self.y.transpose();
        (&c + c.transpose()) * 0.5
    }
}

/// Lanczos with full reorthogonalization on the deflated, `D`-scaled pencil.
/// Shift-invert is tried first; a failed factorization (no positive gap)
/// falls back to the direct iteration.
pub fn estimate_coercivity(l: &AssembledL, basis: &InvariantBasis, opts: LanczosOptions) -> Result<Coercivity> {
    let pencil = Pencil::new(l, basis)?;
    if let Some(chol) = pencil.deflated_dense().cholesky() {
        let apply = |x: &DVector<f64>| chol.solve(x);
        if let Ok((_, z, it)) = lanczos(&pencil, &apply, true, opts) {
            return pencil.report(z, it, LanczosMode::ShiftInvert, basis);
        }
    }
    let apply = |x: &DVector<f64>| pencil.apply_c(x);
    let (_, z, it) = lanczos(&pencil, &apply, false, opts)?;
    pencil.report(z, it, LanczosMode::Direct, basis)
}

impl<'a> Pencil<'a> {
    fn report(&self, mut z: DVector<f64>, iterations: usize, mode: LanczosMode, basis: &InvariantBasis) -> Result<Coercivity> {
        self.project(&mut z);
        z /= z.norm();
        let mut cz = self.apply_c(&z);
        self.project(&mut cz);
        let rq = z.dot(&cz);
        let residual = (&cz - &z * rq).norm() / rq.abs().max(f64::MIN_POSITIVE);
        let (x, orth) = self.finish(&z, basis);
        Ok(Coercivity {
            delta_hat: rq,
            residual,
            iterations,
            mode,
            orthogonality: orth,
            kernel_rayleigh: self.kernel_rayleigh(),
            minimizer: x,
        })
    }
}

/// Returns the extreme Ritz pair (largest when `largest`, else smallest) of
/// `P apply P` and the iteration count.
fn lanczos(
    pencil: &Pencil,
    apply: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    largest: bool,
    opts: LanczosOptions,
) -> Result<(f64, DVector<f64>, usize)> {
    let dim = pencil.l.dim();
    let max_it = opts.max_iterations.min(dim - 6).max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q = DVector::from_fn(dim, |_, _| rng.gen::<f64>() - 0.5);
    pencil.project(&mut q);
    q /= q.norm();
    let mut basis_v: Vec<DVector<f64>> = Vec::with_capacity(max_it + 1);
    let mut alpha = Vec::with_capacity(max_it);
    let mut beta: Vec<f64> = Vec::with_capacity(max_it);
    basis_v.push(q);
    let mut last_resid = f64::INFINITY;
    for k in 0..max_it {
        let mut w = apply(&basis_v[k]);
        pencil.project(&mut w);
        let a = w.dot(&basis_v[k]);
        alpha.push(a);
        // Two passes of classical Gram-Schmidt keep the basis orthogonal.
        for _ in 0..2 {
            for v in &basis_v {
                let c = v.dot(&w);
                w.axpy(-c, v, 1.0);
            }
            pencil.project(&mut w);
        }
        let b = w.norm();
        let steps = k + 1;
        let scale_a = alpha.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let check = steps % 10 == 0 || steps == max_it || b < 1e-13 * scale_a;
        if check {
            let t = DMatrix::from_fn(steps, steps, |r, c| {
                if r == c {
                    alpha[r]
                } else if r + 1 == c {
                    beta[r]
                } else if c + 1 == r {
                    beta[c]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let pick = eig.eigenvalues.iter().enumerate().fold((0, f64::NAN), |acc, (i, v)| {
                let better = acc.1.is_nan() || if largest { *v > acc.1 } else { *v < acc.1 };
                if better {
                    (i, *v)
                } else {
                    acc
                }
            });
            let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let s = eig.eigenvectors.column(pick.0).into_owned();
            last_resid = b * s[steps - 1].abs();
            if last_resid <= opts.tolerance * scale || b < 1e-13 * scale {
                let mut z = DVector::zeros(dim);
                for (i, v) in basis_v.iter().take(steps).enumerate() {
                    z.axpy(s[i], v, 1.0);
                }
                return Ok((pick.1, z, steps));
            }
        }
        if b == 0.0 {
            break;
        }
        beta.push(b);
        basis_v.push(w / b);
    }
    Err(Error::IterationLimit { iterations: alpha.len(), residual: last_resid })
}

/// Dense oracle: all eigenvalues of the deflated pencil, ascending, with the
/// invariant directions shifted out of the way. Only for small grids.
pub fn dense_coercivity(l: &AssembledL, basis: &InvariantBasis) -> Result<Vec<f64>> {
    let pencil = Pencil::new(l, basis)?;
    let dim = l.dim();
    let mut ev: Vec<f64> = SymmetricEigen::new(pencil.deflated_dense()).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev.truncate(dim - 6);
    Ok(ev)
}
