//! Bi-Maxwellian equilibria, collision invariants, the hydrodynamic
//! projection and macroscopic moments.

use crate::error::{Error, Result};
use crate::kinematics::MassPair;
use crate::vec3::{self, Vec3};
use crate::vgrid::{DistributionPair, SpatialGrid, VelocityGrid, DEFAULT_RADIUS_FACTOR};
use nalgebra::{Matrix6, Vector6};
use serde::Serialize;
use std::f64::consts::PI;

/// Pivot threshold for Gram-Schmidt, relative to the raw vector norm.
pub const PIVOT_TOL: f64 = 1e-10;

pub const RAW_NAMES: [&str; 6] = [
    "(e1:sqrt mu)",
    "(e2:sqrt mu)",
    "v1(m:sqrt mu)",
    "v2(m:sqrt mu)",
    "v3(m:sqrt mu)",
    "|v|^2(m:sqrt mu)",
];

/// `ln mu(v)` for a species of mass `m`, given `|v|^2`.
#[inline]
pub fn log_maxwellian(m: f64, v2: f64) -> f64 {
    1.5 * (m / (2.0 * PI)).ln() - 0.5 * m * v2
}

/// `(mu^A(v), mu^B(v))` with `mu^a = (m^a/2pi)^{3/2} exp(-m^a |v|^2/2)`.
pub fn maxwellian_eval(masses: MassPair, v: Vec3) -> (f64, f64) {
    let v2 = vec3::norm2(v);
    (log_maxwellian(masses.m_alpha, v2).exp(), log_maxwellian(masses.m_beta, v2).exp())
}

/// The global equilibrium pair; `masses.m_alpha` is species A.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BiMaxwellian {
    pub masses: MassPair,
}

impl BiMaxwellian {
    pub fn new(masses: MassPair) -> Self {
        Self { masses }
    }

    #[inline]
    pub fn mass(&self, species: usize) -> f64 {
        if species == 0 {
            self.masses.m_alpha
        } else {
            self.masses.m_beta
        }
    }

    #[inline]
    pub fn log_eval(&self, species: usize, v: Vec3) -> f64 {
        log_maxwellian(self.mass(species), vec3::norm2(v))
    }

    #[inline]
    pub fn eval(&self, species: usize, v: Vec3) -> f64 {
        self.log_eval(species, v).exp()
    }

    #[inline]
    pub fn sqrt_eval(&self, species: usize, v: Vec3) -> f64 {
        (0.5 * self.log_eval(species, v)).exp()
    }

    /// Species values on the grid nodes.
    pub fn on_grid(&self, species: usize, grid: &VelocityGrid) -> Vec<f64> {
        grid.nodes().iter().map(|v| self.eval(species, *v)).collect()
    }

    pub fn sqrt_on_grid(&self, species: usize, grid: &VelocityGrid) -> Vec<f64> {
        grid.nodes().iter().map(|v| self.sqrt_eval(species, *v)).collect()
    }

    /// Stacked `[sqrt mu^A..., sqrt mu^B...]`.
    pub fn sqrt_stacked(&self, grid: &VelocityGrid) -> Vec<f64> {
        let mut out = self.sqrt_on_grid(0, grid);
        out.extend(self.sqrt_on_grid(1, grid));
        out
    }
}

/// The six raw invariants as stacked pair vectors; the energy one carries
/// `energy_scale * |v|^2`.
pub fn raw_invariants(masses: MassPair, grid: &VelocityGrid, energy_scale: f64) -> [Vec<f64>; 6] {
    let mu = BiMaxwellian::new(masses);
    let nv = grid.len();
    let mut raw: [Vec<f64>; 6] = std::array::from_fn(|_| vec![0.0; 2 * nv]);
    for s in 0..2 {
        let m = mu.mass(s);
        for (i, v) in grid.nodes().iter().enumerate() {
            let r = mu.sqrt_eval(s, *v);
            let p = s * nv + i;
            raw[s][p] = r;
            for a in 0..3 {
                raw[2 + a][p] = v[a] * m * r;
            }
            raw[5][p] = energy_scale * vec3::norm2(*v) * m * r;
        }
    }
    raw
}

/// Orthonormalized collision invariants on a velocity grid.
#[derive(Clone, Debug)]
pub struct InvariantBasis {
    masses: MassPair,
    grid: VelocityGrid,
    raw: [Vec<f64>; 6],
    basis: [Vec<f64>; 6],
    /// `raw_k = sum_j r[(j,k)] basis_j`.
    r: Matrix6<f64>,
    raw_gram: Matrix6<f64>,
}

/// `sum_s sum_i q_i f g` for stacked pair vectors.
pub fn pair_inner(grid: &VelocityGrid, f: &[f64], g: &[f64]) -> f64 {
    let nv = grid.len();
    grid.inner(&f[..nv], &g[..nv]) + grid.inner(&f[nv..], &g[nv..])
}

pub fn build_invariant_basis(masses: MassPair, grid: &VelocityGrid) -> Result<InvariantBasis> {
    let need = DEFAULT_RADIUS_FACTOR / masses.min().sqrt();
    if grid.radius() < need * (1.0 - 1e-12) {
        return Err(Error::Contract(format!(
            "velocity radius {} does not resolve the Maxwellians (need >= {need})",
            grid.radius()
        )));
    }
    let raw = raw_invariants(masses, grid, 1.0);
    let mut basis: [Vec<f64>; 6] = raw.clone();
    let mut r = Matrix6::<f64>::zeros();
    for k in 0..6 {
        let raw_norm = pair_inner(grid, &raw[k], &raw[k]).sqrt();
        for j in 0..k {
            let c = pair_inner(grid, &basis[j], &basis[k]);
            r[(j, k)] = c;
            let (head, tail) = basis.split_at_mut(k);
            for (x, y) in tail[0].iter_mut().zip(&head[j]) {
                *x -= c * y;
            }
        }
        let nrm = pair_inner(grid, &basis[k], &basis[k]).sqrt();
        if !(nrm > PIVOT_TOL * raw_norm) || !nrm.is_finite() {
            return Err(Error::Assembly(format!(
                "invariant {} is numerically dependent on the previous ones (pivot {nrm:.3e})",
                RAW_NAMES[k]
            )));
        }
        r[(k, k)] = nrm;
        for x in basis[k].iter_mut() {
            *x /= nrm;
        }
    }
    let mut raw_gram = Matrix6::<f64>::zeros();
    for i in 0..6 {
        for j in 0..6 {
            raw_gram[(i, j)] = pair_inner(grid, &raw[i], &raw[j]);
        }
    }
    Ok(InvariantBasis { masses, grid: grid.clone(), raw, basis, r, raw_gram })
}

impl InvariantBasis {
    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }
    pub fn masses(&self) -> MassPair {
        self.masses
    }
    /// Orthonormal vector `chi_j` (stacked).
    pub fn vector(&self, j: usize) -> &[f64] {
        &self.basis[j]
    }
    pub fn vectors(&self) -> &[Vec<f64>; 6] {
        &self.basis
    }
    pub fn raw(&self, j: usize) -> &[f64] {
        &self.raw[j]
    }
    /// Upper-triangular change of basis, `raw = basis * R`.
    pub fn gram_data(&self) -> &Matrix6<f64> {
        &self.r
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != 2 * self.grid.len() {
            return Err(Error::Contract(format!(
                "vector of length {len} does not live on the basis grid ({} nodes)",
                self.grid.len()
            )));
        }
        Ok(())
    }

    pub fn coefficients(&self, stacked: &[f64]) -> Result<[f64; 6]> {
        self.check_len(stacked.len())?;
        Ok(std::array::from_fn(|j| pair_inner(&self.grid, stacked, &self.basis[j])))
    }

    /// `P0` of a single stacked velocity vector.
    pub fn project_velocity(&self, stacked: &[f64]) -> Result<Vec<f64>> {
        let c = self.coefficients(stacked)?;
        let mut out = vec![0.0; stacked.len()];
        for (j, cj) in c.iter().enumerate() {
            for (o, b) in out.iter_mut().zip(&self.basis[j]) {
                *o += cj * b;
            }
        }
        Ok(out)
    }

    /// Removes the invariant components of a stacked vector in place.
    pub fn deflate_velocity(&self, stacked: &mut [f64]) -> Result<()> {
        let p = self.project_velocity(stacked)?;
        for (x, y) in stacked.iter_mut().zip(p) {
            *x -= y;
        }
        Ok(())
    }
}

/// Hydrodynamic projection applied pointwise in x.
pub fn project_p0(basis: &InvariantBasis, f: &DistributionPair) -> Result<DistributionPair> {
    if f.nv() != basis.grid.len() {
        return Err(Error::Contract("field is not sampled on the basis grid".into()));
    }
    let mut out = DistributionPair::zeros(f.nx(), f.nv());
    for x in 0..f.nx() {
        let p = basis.project_velocity(&f.stacked_at(x))?;
        out.set_stacked_at(x, &p);
    }
    Ok(out)
}

/// Mass of each species, momentum and energy of the perturbation, integrated
/// over the torus.
pub fn conservation_functionals(
    masses: MassPair,
    vgrid: &VelocityGrid,
    xgrid: &SpatialGrid,
    f: &DistributionPair,
) -> Result<[f64; 6]> {
    f.check_shape(xgrid, vgrid)?;
    let raw = raw_invariants(masses, vgrid, 0.5);
    let mut out = [0.0; 6];
    for x in 0..f.nx() {
        let s = f.stacked_at(x);
        for (j, o) in out.iter_mut().enumerate() {
            *o += pair_inner(vgrid, &s, &raw[j]);
        }
    }
    for o in out.iter_mut() {
        *o *= xgrid.cell_volume();
    }
    Ok(out)
}

/// Coefficients `(a, b, c)` of the invariant part of `f`, pointwise in x.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MacroState {
    pub a: Vec<[f64; 2]>,
    pub b: Vec<[f64; 3]>,
    pub c: Vec<f64>,
}

pub fn macroscopic_moments(basis: &InvariantBasis, f: &DistributionPair) -> Result<MacroState> {
    if f.nv() != basis.grid.len() {
        return Err(Error::Contract("field is not sampled on the basis grid".into()));
    }
    let chol = basis
        .raw_gram
        .cholesky()
        .ok_or_else(|| Error::Assembly("raw invariant Gram matrix is singular".into()))?;
    let mut st = MacroState { a: Vec::new(), b: Vec::new(), c: Vec::new() };
    for x in 0..f.nx() {
        let s = f.stacked_at(x);
        let rhs = Vector6::from_fn(|j, _| pair_inner(&basis.grid, &s, &basis.raw[j]));
        let sol = chol.solve(&rhs);
        st.a.push([sol[0], sol[1]]);
        st.b.push([sol[2], sol[3], sol[4]]);
        st.c.push(sol[5]);
    }
    Ok(st)
}

/// `(a:sqrt mu) + (b.v)(m:sqrt mu) + c|v|^2 (m:sqrt mu)` on the basis grid.
pub fn reconstruct(basis: &InvariantBasis, st: &MacroState) -> DistributionPair {
    let nv = basis.grid.len();
    let nx = st.c.len();
    let mut out = DistributionPair::zeros(nx, nv);
    for x in 0..nx {
        let coef = [st.a[x][0], st.a[x][1], st.b[x][0], st.b[x][1], st.b[x][2], st.c[x]];
        let mut v = vec![0.0; 2 * nv];
        for (j, c) in coef.iter().enumerate() {
            for (o, r) in v.iter_mut().zip(&basis.raw[j]) {
                *o += c * r;
            }
        }
        out.set_stacked_at(x, &v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn origin_value() {
        let m = MassPair::new(1.0, 1.0).unwrap();
        let (a, b) = maxwellian_eval(m, [0.0; 3]);
        let want = (2.0 * PI).powf(-1.5);
        assert!((a - want).abs() < 1e-15 && (b - want).abs() < 1e-15);
    }

    #[test]
    fn coarse_radius_is_rejected() {
        let m = MassPair::new(1.0, 1.0).unwrap();
        let g = VelocityGrid::new(3.0, 9).unwrap();
        assert!(matches!(build_invariant_basis(m, &g), Err(Error::Contract(_))));
    }
}
