//! Velocity and periodic spatial grids, phase-space fields, weighted norms,
//! finite differences and the energy functional.

use crate::error::{Error, Result};
use crate::kinematics::MassPair;
use crate::vec3::{self, Vec3};
use serde::Serialize;
use std::f64::consts::PI;

/// Default truncation radius in units of the slower species' thermal speed.
pub const DEFAULT_RADIUS_FACTOR: f64 = 6.0;

/// Uniform Cartesian velocity lattice on `[-R, R]^3` with trapezoidal weights.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityGrid {
    radius: f64,
    n: usize,
    h: f64,
    axis: Vec<f64>,
    axis_weights: Vec<f64>,
    nodes: Vec<Vec3>,
    weights: Vec<f64>,
}

impl VelocityGrid {
    pub fn new(radius: f64, points_per_axis: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Config(format!("velocity radius must be positive, got {radius}")));
        }
        let n = points_per_axis;
        if n < 3 || n % 2 == 0 {
            return Err(Error::Config(format!("points_per_axis must be odd and >= 3, got {n}")));
        }
        let h = 2.0 * radius / (n - 1) as f64;
        // Centered construction keeps v -> -v symmetry exact.
        let c = (n / 2) as isize;
        let axis: Vec<f64> = (0..n as isize).map(|i| (i - c) as f64 * h).collect();
        let axis_weights: Vec<f64> =
            (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect();
        let mut nodes = Vec::with_capacity(n * n * n);
        let mut weights = Vec::with_capacity(n * n * n);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    nodes.push([axis[i], axis[j], axis[k]]);
                    weights.push(axis_weights[i] * axis_weights[j] * axis_weights[k]);
                }
            }
        }
        Ok(Self { radius, n, h, axis, axis_weights, nodes, weights })
    }

    /// Radius `factor / sqrt(min mass)`, wide enough for the lighter species.
    pub fn for_masses(masses: MassPair, points_per_axis: usize, radius_factor: f64) -> Result<Self> {
        Self::new(radius_factor / masses.min().sqrt(), points_per_axis)
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
    pub fn points_per_axis(&self) -> usize {
        self.n
    }
    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn nodes(&self) -> &[Vec3] {
        &self.nodes
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }
    pub fn axis_weights(&self) -> &[f64] {
        &self.axis_weights
    }
    #[inline]
    pub fn node(&self, idx: usize) -> Vec3 {
        self.nodes[idx]
    }
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.n + k
    }
    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    /// Index of the node at `-v`.
    pub fn mirror(&self, idx: usize) -> usize {
        let [i, j, k] = self.coords(idx);
        let m = self.n - 1;
        self.index(m - i, m - j, m - k)
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().zip(&self.weights).map(|(a, w)| a * w).sum()
    }

    /// `sum_v q(v) f(v) g(v)`.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).zip(&self.weights).map(|((a, b), w)| a * b * w).sum()
    }

    /// Nodes with `0 <= v_x <= v_y <= v_z` (one per octahedral orbit) and
    /// their orbit sizes.
    pub fn fundamental_nodes(&self) -> Vec<(usize, usize)> {
        let c = self.n / 2;
        let mut out = Vec::new();
        for i in c..self.n {
            for j in i..self.n {
                for k in j..self.n {
                    let a = [i - c, j - c, k - c];
                    out.push((self.index(i, j, k), orbit_size(a)));
                }
            }
        }
        out
    }
}

fn orbit_size(a: [usize; 3]) -> usize {
    // 48 / |stabilizer|: sign flips of nonzero entries times distinct permutations.
    let signs = a.iter().filter(|&&x| x != 0).count();
    let perms = if a[0] == a[1] && a[1] == a[2] {
        1
    } else if a[0] == a[1] || a[1] == a[2] || a[0] == a[2] {
        3
    } else {
        6
    };
    (1 << signs) * perms
}

/// Periodic grid on `[-pi, pi]^dims`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpatialGrid {
    dims: usize,
    n: usize,
    h: f64,
}

impl SpatialGrid {
    pub fn new(dims: usize, points_per_axis: usize) -> Result<Self> {
        if dims != 1 && dims != 3 {
            return Err(Error::Config(format!("spatial dims must be 1 or 3, got {dims}")));
        }
        if points_per_axis < 2 {
            return Err(Error::Config(format!("spatial points_per_axis must be >= 2, got {points_per_axis}")));
        }
        Ok(Self { dims, n: points_per_axis, h: 2.0 * PI / points_per_axis as f64 })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }
    pub fn points_per_axis(&self) -> usize {
        self.n
    }
    pub fn spacing(&self) -> f64 {
        self.h
    }
    pub fn len(&self) -> usize {
        self.n.pow(self.dims as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Quadrature weight of one spatial cell.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dims as i32)
    }
    pub fn measure(&self) -> f64 {
        (2.0 * PI).powi(self.dims as i32)
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        match self.dims {
            1 => [idx, 0, 0],
            _ => [idx / (n * n), (idx / n) % n, idx % n],
        }
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        match self.dims {
            1 => c[0],
            _ => (c[0] * self.n + c[1]) * self.n + c[2],
        }
    }

    pub fn position(&self, idx: usize) -> Vec3 {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dims {
            x[a] = -PI + c[a] as f64 * self.h;
        }
        x
    }

    /// Neighbor index shifted by `offset` along `axis`, periodic.
    pub fn shifted(&self, idx: usize, axis: usize, offset: isize) -> usize {
        let mut c = self.coords(idx);
        let n = self.n as isize;
        c[axis] = (((c[axis] as isize + offset) % n + n) % n) as usize;
        self.index(c)
    }
}

/// Species pair of phase-space fields, layout `[x][v]`.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    nx: usize,
    nv: usize,
}

impl DistributionPair {
    pub fn zeros(nx: usize, nv: usize) -> Self {
        Self { a: vec![0.0; nx * nv], b: vec![0.0; nx * nv], nx, nv }
    }

    pub fn from_parts(a: Vec<f64>, b: Vec<f64>, nx: usize, nv: usize) -> Result<Self> {
        if a.len() != nx * nv || b.len() != nx * nv {
            return Err(Error::Contract(format!(
                "field lengths ({}, {}) do not match {nx} x {nv}",
                a.len(),
                b.len()
            )));
        }
        Ok(Self { a, b, nx, nv })
    }

    /// A single-x state built from species velocity fields.
    pub fn from_velocity(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let nv = a.len();
        Self::from_parts(a, b, 1, nv)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn nv(&self) -> usize {
        self.nv
    }

    pub fn species(&self, s: usize) -> &[f64] {
        if s == 0 {
            &self.a
        } else {
            &self.b
        }
    }

    pub fn species_mut(&mut self, s: usize) -> &mut Vec<f64> {
        if s == 0 {
            &mut self.a
        } else {
            &mut self.b
        }
    }

    /// Velocity slices `(f^A(x,.), f^B(x,.))`.
    pub fn at(&self, x: usize) -> (&[f64], &[f64]) {
        let r = x * self.nv..(x + 1) * self.nv;
        (&self.a[r.clone()], &self.b[r])
    }

    /// Velocity vector at `x` stacked as `[A..., B...]`.
    pub fn stacked_at(&self, x: usize) -> Vec<f64> {
        let (a, b) = self.at(x);
        let mut out = Vec::with_capacity(2 * self.nv);
        out.extend_from_slice(a);
        out.extend_from_slice(b);
        out
    }

    pub fn set_stacked_at(&mut self, x: usize, v: &[f64]) {
        let nv = self.nv;
        self.a[x * nv..(x + 1) * nv].copy_from_slice(&v[..nv]);
        self.b[x * nv..(x + 1) * nv].copy_from_slice(&v[nv..]);
    }

    pub fn check_shape(&self, xgrid: &SpatialGrid, vgrid: &VelocityGrid) -> Result<()> {
        if self.nx != xgrid.len() || self.nv != vgrid.len() {
            return Err(Error::Contract(format!(
                "field shape {}x{} does not match grids {}x{}",
                self.nx,
                self.nv,
                xgrid.len(),
                vgrid.len()
            )));
        }
        Ok(())
    }

    pub fn first_non_finite(&self) -> Option<(usize, usize, usize)> {
        for (s, f) in [&self.a, &self.b].into_iter().enumerate() {
            if let Some(p) = f.iter().position(|x| !x.is_finite()) {
                return Some((s, p / self.nv, p % self.nv));
            }
        }
        None
    }

    pub fn max_abs(&self) -> f64 {
        self.a.iter().chain(&self.b).fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Soft-potential weight `w(v) = (1+|v|)^gamma` raised to the power `l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightSpec {
    pub gamma: f64,
    pub l: f64,
}

impl WeightSpec {
    pub fn new(gamma: f64, l: f64) -> Result<Self> {
        if !(gamma > -3.0 && gamma < 0.0) {
            return Err(Error::Range { key: "gamma".into(), message: format!("{gamma} not in (-3, 0)") });
        }
        if !(l >= 0.0 && l.is_finite()) {
            return Err(Error::Range { key: "l".into(), message: format!("{l} must be nonnegative") });
        }
        Ok(Self { gamma, l })
    }

    #[inline]
    pub fn w(&self, v: Vec3) -> f64 {
        (1.0 + vec3::norm(v)).powf(self.gamma)
    }

    /// `w(v)^p`.
    #[inline]
    pub fn w_pow(&self, v: Vec3, p: f64) -> f64 {
        (1.0 + vec3::norm(v)).powf(self.gamma * p)
    }
}

/// `sum_{species, x, v} |w^l f|^2 w q_v dx`, square-rooted.
pub fn weighted_norm_nu(weights: WeightSpec, xgrid: &SpatialGrid, vgrid: &VelocityGrid, f: &DistributionPair) -> Result<f64> {
    f.check_shape(xgrid, vgrid)?;
    let factors = nu_factors(weights, vgrid);
    let mut acc = 0.0;
    for s in 0..2 {
        let field = f.species(s);
        for x in 0..f.nx() {
            let row = &field[x * f.nv()..(x + 1) * f.nv()];
            acc += row.iter().zip(&factors).map(|(v, c)| v * v * c).sum::<f64>();
        }
    }
    Ok((acc * xgrid.cell_volume()).sqrt())
}

/// Per-node factor `w^{2l+1} q_v`.
pub fn nu_factors(weights: WeightSpec, vgrid: &VelocityGrid) -> Vec<f64> {
    vgrid
        .nodes()
        .iter()
        .zip(vgrid.weights())
        .map(|(v, q)| weights.w_pow(*v, 2.0 * weights.l + 1.0) * q)
        .collect()
}

/// Velocity-only squared nu-norm of a stacked pair `[A..., B...]` with weight power `l`.
pub fn velocity_norm_nu_sq(weights: WeightSpec, vgrid: &VelocityGrid, stacked: &[f64]) -> f64 {
    let nv = vgrid.len();
    let mut acc = 0.0;
    for (i, (v, q)) in vgrid.nodes().iter().zip(vgrid.weights()).enumerate() {
        let c = weights.w_pow(*v, 2.0 * weights.l + 1.0) * q;
        acc += c * (stacked[i] * stacked[i] + stacked[nv + i] * stacked[nv + i]);
    }
    acc
}

/// Mixed derivative multi-index: `alpha` acts on x, `beta` on v.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct MultiIndex {
    pub alpha: [u8; 3],
    pub beta: [u8; 3],
}

impl MultiIndex {
    pub const ZERO: MultiIndex = MultiIndex { alpha: [0; 3], beta: [0; 3] };

    pub fn x(axis: usize) -> Self {
        let mut m = Self::ZERO;
        m.alpha[axis] = 1;
        m
    }

    pub fn v(axis: usize) -> Self {
        let mut m = Self::ZERO;
        m.beta[axis] = 1;
        m
    }

    pub fn order_x(&self) -> usize {
        self.alpha.iter().map(|&a| a as usize).sum()
    }

    pub fn order_v(&self) -> usize {
        self.beta.iter().map(|&a| a as usize).sum()
    }

    pub fn order(&self) -> usize {
        self.order_x() + self.order_v()
    }

    pub fn label(&self) -> String {
        format!(
            "x{}{}{}_v{}{}{}",
            self.alpha[0], self.alpha[1], self.alpha[2], self.beta[0], self.beta[1], self.beta[2]
        )
    }
}

/// All multi-indices with total order `<= n_max`, x-derivatives restricted to
/// the active spatial axes; ordered by total order, then lexicographically.
pub fn multi_indices(n_max: usize, spatial_dims: usize) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let xr = |a: usize| if a < spatial_dims { n_max } else { 0 };
    for a0 in 0..=xr(0) {
        for a1 in 0..=xr(1) {
            for a2 in 0..=xr(2) {
                for b0 in 0..=n_max {
                    for b1 in 0..=n_max {
                        for b2 in 0..=n_max {
                            let m = MultiIndex {
                                alpha: [a0 as u8, a1 as u8, a2 as u8],
                                beta: [b0 as u8, b1 as u8, b2 as u8],
                            };
                            if m.order() <= n_max {
                                out.push(m);
                            }
                        }
                    }
                }
            }
        }
    }
    out.sort_by_key(|m| (m.order(), std::cmp::Reverse(m.alpha), std::cmp::Reverse(m.beta)));
    out
}

/// Finite-difference derivative of one species field (layout `[x][v]`).
///
/// x-derivatives are periodic and centered; v-derivatives are centered in the
/// interior and one-sided second order at the cube faces. Per-axis order is
/// at most 2 and `|beta| <= 2`.
pub fn finite_diff(field: &[f64], xgrid: &SpatialGrid, vgrid: &VelocityGrid, index: MultiIndex) -> Result<Vec<f64>> {
    let nv = vgrid.len();
    let nx = xgrid.len();
    if field.len() != nx * nv {
        return Err(Error::Contract("field does not match grids".into()));
    }
    if index.order_v() > 2 || index.order_x() > 2 {
        return Err(Error::UnsupportedOrder(format!("{} exceeds second order", index.label())));
    }
    for a in xgrid.dims()..3 {
        if index.alpha[a] != 0 {
            return Err(Error::Contract(format!("x-derivative along inactive axis {a}")));
        }
    }
    let mut cur = field.to_vec();
    for axis in 0..3 {
        for _ in 0..index.alpha[axis] {
            cur = diff_x(&cur, xgrid, nv, axis, 1);
        }
        match index.beta[axis] {
            0 => {}
            1 => cur = diff_v(&cur, vgrid, nx, axis, 1),
            2 => cur = diff_v(&cur, vgrid, nx, axis, 2),
            _ => unreachable!(),
        }
    }
    Ok(cur)
}

fn diff_x(f: &[f64], xgrid: &SpatialGrid, nv: usize, axis: usize, _order: usize) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    let inv = 1.0 / (2.0 * xgrid.spacing());
    for x in 0..xgrid.len() {
        let xp = xgrid.shifted(x, axis, 1);
        let xm = xgrid.shifted(x, axis, -1);
        for v in 0..nv {
            out[x * nv + v] = (f[xp * nv + v] - f[xm * nv + v]) * inv;
        }
    }
    out
}

fn diff_v(f: &[f64], vgrid: &VelocityGrid, nx: usize, axis: usize, order: usize) -> Vec<f64> {
    let n = vgrid.points_per_axis();
    let nv = vgrid.len();
    let h = vgrid.spacing();
    let stride = match axis {
        0 => n * n,
        1 => n,
        _ => 1,
    };
    let mut out = vec![0.0; f.len()];
    for x in 0..nx {
        let base = x * nv;
        for idx in 0..nv {
            let c = vgrid.coords(idx)[axis];
            let at = |o: isize| f[base + (idx as isize + o * stride as isize) as usize];
            let val = if order == 1 {
                if c == 0 {
                    (-3.0 * at(0) + 4.0 * at(1) - at(2)) / (2.0 * h)
                } else if c == n - 1 {
                    (3.0 * at(0) - 4.0 * at(-1) + at(-2)) / (2.0 * h)
                } else {
                    (at(1) - at(-1)) / (2.0 * h)
                }
            } else if c == 0 {
                (2.0 * at(0) - 5.0 * at(1) + 4.0 * at(2) - at(3)) / (h * h)
            } else if c == n - 1 {
                (2.0 * at(0) - 5.0 * at(-1) + 4.0 * at(-2) - at(-3)) / (h * h)
            } else {
                (at(1) - 2.0 * at(0) + at(-1)) / (h * h)
            };
            out[base + idx] = val;
        }
    }
    out
}

/// Incremental form of the energy functional: instantaneous weighted norms
/// plus trapezoidal time integrals of the dissipation norms.
#[derive(Clone, Debug)]
pub struct EnergyAccumulator {
    gamma: f64,
    indices: Vec<MultiIndex>,
    last: Option<(f64, Vec<f64>)>,
    dissipation: Vec<f64>,
    instantaneous: Vec<f64>,
}

impl EnergyAccumulator {
    pub fn new(order: usize, gamma: f64, spatial_dims: usize) -> Result<Self> {
        if order > 2 {
            return Err(Error::UnsupportedOrder(format!("energy order {order} > 2")));
        }
        let indices = multi_indices(order, spatial_dims);
        let k = indices.len();
        Ok(Self { gamma, indices, last: None, dissipation: vec![0.0; k], instantaneous: vec![0.0; k] })
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn push(&mut self, t: f64, f: &DistributionPair, xgrid: &SpatialGrid, vgrid: &VelocityGrid) -> Result<()> {
        f.check_shape(xgrid, vgrid)?;
        let k = self.indices.len();
        let mut l2 = vec![0.0; k];
        let mut nu = vec![0.0; k];
        let dx = xgrid.cell_volume();
        for (slot, idx) in self.indices.iter().enumerate() {
            let p = idx.order_v() as f64;
            let ws = WeightSpec { gamma: self.gamma, l: p };
            let wl2: Vec<f64> = vgrid
                .nodes()
                .iter()
                .zip(vgrid.weights())
                .map(|(v, q)| ws.w_pow(*v, 2.0 * p) * q * dx)
                .collect();
            let wnu: Vec<f64> = vgrid
                .nodes()
                .iter()
                .zip(&wl2)
                .map(|(v, c)| c * ws.w(*v))
                .collect();
            for s in 0..2 {
                let d = finite_diff(f.species(s), xgrid, vgrid, *idx)?;
                for (pos, val) in d.iter().enumerate() {
                    let v = pos % f.nv();
                    l2[slot] += val * val * wl2[v];
                    nu[slot] += val * val * wnu[v];
                }
            }
        }
        if let Some((t0, prev)) = &self.last {
            let dt = t - t0;
            if dt < 0.0 {
                return Err(Error::Contract("energy history must be time-ordered".into()));
            }
            for s in 0..k {
                self.dissipation[s] += 0.5 * dt * (prev[s] + nu[s]);
            }
        }
        self.instantaneous = l2;
        self.last = Some((t, nu));
        Ok(())
    }

    /// `||w^{|beta|} d f||^2_{L^2}` per multi-index at the latest time.
    pub fn instantaneous(&self) -> &[f64] {
        &self.instantaneous
    }

    pub fn instantaneous_total(&self) -> f64 {
        self.instantaneous.iter().sum()
    }

    pub fn dissipation(&self) -> &[f64] {
        &self.dissipation
    }

    pub fn energy(&self) -> f64 {
        self.instantaneous.iter().map(|x| 0.5 * x).sum::<f64>() + self.dissipation.iter().sum::<f64>()
    }
}

/// Energy functional of a stored history `(t_k, f(t_k))`.
pub fn energy_functional(
    history: &[(f64, DistributionPair)],
    order: usize,
    gamma: f64,
    xgrid: &SpatialGrid,
    vgrid: &VelocityGrid,
) -> Result<f64> {
    if history.is_empty() {
        return Err(Error::Contract("energy functional needs a non-empty history".into()));
    }
    let mut acc = EnergyAccumulator::new(order, gamma, xgrid.dims())?;
    for (t, f) in history {
        acc.push(*t, f, xgrid, vgrid)?;
    }
    Ok(acc.energy())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_cube_volume() {
        let g = VelocityGrid::new(2.5, 11).unwrap();
        let s: f64 = g.weights().iter().sum();
        assert!((s - 125.0).abs() < 1e-10);
    }

    #[test]
    fn orbit_sizes_cover_grid() {
        let g = VelocityGrid::new(1.0, 9).unwrap();
        let total: usize = g.fundamental_nodes().iter().map(|p| p.1).sum();
        assert_eq!(total, g.len());
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 1).len(), 5);
        assert_eq!(multi_indices(1, 3).len(), 7);
        assert_eq!(multi_indices(0, 3), vec![MultiIndex::ZERO]);
    }

    #[test]
    fn rejects_even_counts_and_bad_dims() {
        assert!(VelocityGrid::new(1.0, 8).is_err());
        assert!(SpatialGrid::new(2, 8).is_err());
    }
}

/// First derivative along velocity axis `axis` of a single velocity field.
pub fn velocity_derivative(field: &[f64], vgrid: &VelocityGrid, axis: usize) -> Result<Vec<f64>> {
    if field.len() != vgrid.len() {
        return Err(Error::Contract("field does not match the velocity grid".into()));
    }
    if axis > 2 {
        return Err(Error::Contract(format!("velocity axis {axis} out of range")));
    }
    Ok(diff_v(field, vgrid, 1, axis, 1))
}
