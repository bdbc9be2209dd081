//! Quadrature of the nonlinear collision operators `Q^{ab}`, the perturbation
//! forms `Gamma^{ab}`, entropy production and invariant pairings.
//!
//! The velocity integral runs over the grid nodes `v*` (trapezoidal weights)
//! and the angular integral over a folded direction set. The coincident node
//! `v* = v` is replaced by the local correction
//! `int_{|u|<h/2} |u|^gamma du = 4 pi (h/2)^{3+gamma}/(3+gamma)` times the
//! exact angular integral of `b`.

use crate::equilibrium::{log_maxwellian, BiMaxwellian};
use crate::error::{Error, Result};
use crate::interp::{trilinear, trilinear_stencil, Interpolation, MAX_LOG_GAP};
use crate::kinematics::MassPair;
use crate::sphere::{lebedev, monte_carlo, DirectionSet};
use crate::vec3::{self, Vec3};
use crate::vgrid::VelocityGrid;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Angular factor `b(cos theta)`; both families are even in `cos theta`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum KernelFamily {
    /// `b = C_b |cos theta|`
    AbsCos,
    /// `b = C_b cos^2 theta`
    CosSquared,
}

impl KernelFamily {
    /// Accepts `abs_cos` / `cos_squared`, with `-` or `_`.
    pub fn parse(s: &str) -> Option<Self> {
        match s.replace('-', "_").as_str() {
            "abs_cos" => Some(Self::AbsCos),
            "cos_squared" => Some(Self::CosSquared),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AngularKernel {
    pub family: KernelFamily,
    pub c_b: f64,
}

impl Default for AngularKernel {
    fn default() -> Self {
        Self { family: KernelFamily::AbsCos, c_b: 1.0 }
    }
}

impl AngularKernel {
    pub fn new(family: KernelFamily, c_b: f64) -> Result<Self> {
        if !(c_b.is_finite() && c_b > 0.0) {
            return Err(Error::Range { key: "c_b".into(), message: format!("{c_b} must be positive") });
        }
        Ok(Self { family, c_b })
    }

    #[inline]
    pub fn eval(&self, cos: f64) -> f64 {
        match self.family {
            KernelFamily::AbsCos => self.c_b * cos.abs(),
            KernelFamily::CosSquared => self.c_b * cos * cos,
        }
    }

    /// `b / |cos theta|`.
    #[inline]
    pub fn over_abs_cos(&self, cos: f64) -> f64 {
        match self.family {
            KernelFamily::AbsCos => self.c_b,
            KernelFamily::CosSquared => self.c_b * cos.abs(),
        }
    }

    /// `int_{S^2} b(w.e) dw`, independent of `e`.
    pub fn sphere_integral(&self) -> f64 {
        match self.family {
            KernelFamily::AbsCos => 2.0 * PI * self.c_b,
            KernelFamily::CosSquared => 4.0 * PI / 3.0 * self.c_b,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.family {
            KernelFamily::AbsCos => "abs_cos",
            KernelFamily::CosSquared => "cos_squared",
        }
    }
}

/// Physical problem: species masses (A, B), soft-potential exponent and
/// angular kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MixtureConfig {
    pub masses: MassPair,
    pub gamma: f64,
    pub kernel: AngularKernel,
}

impl MixtureConfig {
    pub fn new(masses: MassPair, gamma: f64, kernel: AngularKernel) -> Result<Self> {
        MassPair::new(masses.m_alpha, masses.m_beta)?;
        if !(gamma > -3.0 && gamma < 0.0) {
            return Err(Error::Range { key: "gamma".into(), message: format!("{gamma} not in the open interval (-3, 0)") });
        }
        AngularKernel::new(kernel.family, kernel.c_b)?;
        Ok(Self { masses, gamma, kernel })
    }

    #[inline]
    pub fn mass(&self, species: usize) -> f64 {
        if species == 0 {
            self.masses.m_alpha
        } else {
            self.masses.m_beta
        }
    }

    /// Ordered pair `(m_alpha, m_beta)` for species indices.
    pub fn pair(&self, alpha: usize, beta: usize) -> MassPair {
        MassPair { m_alpha: self.mass(alpha), m_beta: self.mass(beta) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum QuadMode {
    Deterministic,
    MonteCarlo,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureSpec {
    /// Lebedev order in deterministic mode, direction count in Monte-Carlo mode.
    pub sphere_points: usize,
    pub mode: QuadMode,
    pub seed: u64,
    pub interpolation: Interpolation,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { sphere_points: 14, mode: QuadMode::Deterministic, seed: 0, interpolation: Interpolation::Normalized }
    }
}

impl QuadratureSpec {
    /// Direction set ready for even integrands (hemisphere, weights sum to 4 pi).
    pub fn directions(&self) -> Result<DirectionSet> {
        match self.mode {
            QuadMode::Deterministic => lebedev(self.sphere_points)?.folded(),
            QuadMode::MonteCarlo => monte_carlo(self.seed, self.sphere_points),
        }
    }
}

/// One `(v*, w)` quadrature sample for a fixed output node.
#[derive(Clone, Copy, Debug)]
pub struct Sample {
    pub j: usize,
    /// `q_j |u|^gamma b(cos theta) w_k`
    pub weight: f64,
    /// `v'` in lattice index coordinates.
    pub s_prime: [f64; 3],
    /// `v*'` in lattice index coordinates.
    pub s_star_prime: [f64; 3],
    /// `|v - v*|`
    pub speed: f64,
}

/// Precomputed quadrature data for all collision-type operators on one grid.
#[derive(Clone, Debug)]
pub struct CollisionOperator {
    mixture: MixtureConfig,
    quad: QuadratureSpec,
    grid: VelocityGrid,
    dirs: DirectionSet,
    coords: Vec<[i32; 3]>,
    upow: Vec<f64>,
    inv_dnorm: Vec<f64>,
    self_weight: f64,
    mu: [Vec<f64>; 2],
    sqrt_mu: [Vec<f64>; 2],
    log_mu: [Vec<f64>; 2],
    /// Spread of `log mu` over the corners of each lattice cell.
    cell_spread: [Vec<f64>; 2],
}

impl CollisionOperator {
    pub fn new(mixture: MixtureConfig, quad: QuadratureSpec, grid: &VelocityGrid) -> Result<Self> {
        let dirs = quad.directions()?;
        Self::with_directions(mixture, quad, grid, dirs)
    }

    /// Uses a caller-supplied (already folded) direction set.
    pub fn with_directions(mixture: MixtureConfig, quad: QuadratureSpec, grid: &VelocityGrid, dirs: DirectionSet) -> Result<Self> {
        let mixture = MixtureConfig::new(mixture.masses, mixture.gamma, mixture.kernel)?;
        let n = grid.points_per_axis();
        let h = grid.spacing();
        let span = 2 * n - 1;
        let mut upow = vec![0.0; span * span * span];
        let mut inv_dnorm = vec![0.0; span * span * span];
        for a in 0..span {
            for b in 0..span {
                for c in 0..span {
                    let d = [a as f64 - (n - 1) as f64, b as f64 - (n - 1) as f64, c as f64 - (n - 1) as f64];
                    let dn = vec3::norm(d);
                    let t = (a * span + b) * span + c;
                    if dn > 0.0 {
                        upow[t] = (dn * h).powf(mixture.gamma);
                        inv_dnorm[t] = 1.0 / dn;
                    }
                }
            }
        }
        let coords = (0..grid.len())
            .map(|p| {
                let c = grid.coords(p);
                [c[0] as i32, c[1] as i32, c[2] as i32]
            })
            .collect();
        let g = mixture.gamma;
        let self_weight = mixture.kernel.sphere_integral() * 4.0 * PI * (0.5 * h).powf(3.0 + g) / (3.0 + g);
        let mu_eq = BiMaxwellian::new(mixture.masses);
        let log_mu: [Vec<f64>; 2] =
            std::array::from_fn(|s| grid.nodes().iter().map(|v| log_maxwellian(mu_eq.mass(s), vec3::norm2(*v))).collect());
        let mu = std::array::from_fn(|s| log_mu[s].iter().map(|l| l.exp()).collect());
        let sqrt_mu = std::array::from_fn(|s| log_mu[s].iter().map(|l| (0.5 * l).exp()).collect());
        let cell_spread = std::array::from_fn(|s| {
            let lm = &log_mu[s];
            let mut out = vec![0.0; n * n * n];
            for i in 0..n - 1 {
                for j in 0..n - 1 {
                    for k in 0..n - 1 {
                        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                        for c in 0..8 {
                            let x = lm[((i + (c >> 2)) * n + j + ((c >> 1) & 1)) * n + k + (c & 1)];
                            lo = lo.min(x);
                            hi = hi.max(x);
                        }
                        out[(i * n + j) * n + k] = hi - lo;
                    }
                }
            }
            out
        });
        Ok(Self { mixture, quad, grid: grid.clone(), dirs, coords, upow, inv_dnorm, self_weight, mu, sqrt_mu, log_mu, cell_spread })
    }

    pub fn mixture(&self) -> &MixtureConfig {
        &self.mixture
    }
    pub fn quad(&self) -> &QuadratureSpec {
        &self.quad
    }
    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }
    pub fn directions(&self) -> &DirectionSet {
        &self.dirs
    }
    /// Weight of the coincident-node correction (angular factor included).
    pub fn self_weight(&self) -> f64 {
        self.self_weight
    }
    pub fn mu(&self, s: usize) -> &[f64] {
        &self.mu[s]
    }
    pub fn sqrt_mu(&self, s: usize) -> &[f64] {
        &self.sqrt_mu[s]
    }
    pub fn log_mu(&self, s: usize) -> &[f64] {
        &self.log_mu[s]
    }

    /// Per-corner damping `t_c` for interpolating `g = f / mu^p` at `pt`:
    /// the corner factor `(mu(pt) / mu_c)^p` is capped at `e^{p MAX_LOG_GAP}`,
    /// which only bites where the Maxwellian of species `s` is not resolved by
    /// the lattice. The first corner of the stencil is the cell's base node.
    #[inline]
    pub fn corner_damping(&self, s: usize, p: f64, pt: [f64; 3], idx: &[usize; 8]) -> Option<[f64; 8]> {
        if self.cell_spread[s][idx[0]] <= MAX_LOG_GAP {
            return None;
        }
        let h = self.grid.spacing();
        let r = self.grid.radius();
        let v = [pt[0] * h - r, pt[1] * h - r, pt[2] * h - r];
        let lm_pt = log_maxwellian(self.mixture.mass(s), vec3::norm2(v));
        let lm = &self.log_mu[s];
        Some(std::array::from_fn(|c| (p * (MAX_LOG_GAP - (lm_pt - lm[idx[c]])).min(0.0)).exp()))
    }

    /// Normalized interpolant of `g = f / mu_s^p` at `pt` (index units).
    #[inline]
    pub fn interp_normalized(&self, g: &[f64], s: usize, p: f64, pt: [f64; 3]) -> f64 {
        let n = self.grid.points_per_axis();
        match trilinear_stencil(n, pt) {
            Some((idx, w)) => {
                let mut acc = 0.0;
                match self.corner_damping(s, p, pt, &idx) {
                    None => {
                        for c in 0..8 {
                            acc += w[c] * g[idx[c]];
                        }
                    }
                    Some(t) => {
                        for c in 0..8 {
                            acc += w[c] * t[c] * g[idx[c]];
                        }
                    }
                }
                acc
            }
            None => 0.0,
        }
    }

    #[inline]
    fn table_index(&self, i: usize, j: usize) -> usize {
        let n = self.grid.points_per_axis() as i32;
        let span = (2 * n - 1) as usize;
        let ci = self.coords[i];
        let cj = self.coords[j];
        let a = (ci[0] - cj[0] + n - 1) as usize;
        let b = (ci[1] - cj[1] + n - 1) as usize;
        let c = (ci[2] - cj[2] + n - 1) as usize;
        (a * span + b) * span + c
    }

    /// Visits all direction samples for the node pair `(i, j)`, `i != j`, of the
    /// ordered species pair with masses `pair`.
    #[inline(always)]
    pub fn pair_samples(&self, i: usize, j: usize, pair: MassPair, mut f: impl FnMut(Sample)) {
        let t = self.table_index(i, j);
        let base = self.grid.weights()[j] * self.upow[t];
        let inv = self.inv_dnorm[t];
        let ci = self.coords[i];
        let cj = self.coords[j];
        let d = [(ci[0] - cj[0]) as f64, (ci[1] - cj[1]) as f64, (ci[2] - cj[2]) as f64];
        let speed = self.grid.spacing() / inv;
        let (c_v, c_vs) = pair.coefficients();
        let si = [ci[0] as f64, ci[1] as f64, ci[2] as f64];
        let sj = [cj[0] as f64, cj[1] as f64, cj[2] as f64];
        for (w, wk) in self.dirs.dirs.iter().zip(&self.dirs.weights) {
            let dw = vec3::dot(d, *w);
            let b = self.mixture.kernel.eval(dw * inv);
            if b == 0.0 {
                continue;
            }
            let p = vec3::scale(dw, *w);
            f(Sample {
                j,
                weight: base * b * wk,
                s_prime: vec3::axpy(si, -c_v, p),
                s_star_prime: vec3::axpy(sj, c_vs, p),
                speed,
            });
        }
    }

    /// All samples with `j != i`.
    #[inline(always)]
    pub fn node_samples(&self, i: usize, pair: MassPair, mut f: impl FnMut(Sample)) {
        for j in 0..self.grid.len() {
            if j != i {
                self.pair_samples(i, j, pair, &mut f);
            }
        }
    }

    fn check_field(&self, f: &[f64], what: &str) -> Result<()> {
        if f.len() != self.grid.len() {
            return Err(Error::Contract(format!(
                "{what} has {} values but the velocity grid has {} nodes",
                f.len(),
                self.grid.len()
            )));
        }
        Ok(())
    }

    fn check_output(&self, out: &[f64], what: &str, nodes: &[usize]) -> Result<()> {
        if let Some(p) = out.iter().position(|x| !x.is_finite()) {
            let v = self.grid.node(nodes[p]);
            return Err(Error::NonFinite(format!("{what} at node {} (v = {:?})", nodes[p], v)));
        }
        Ok(())
    }

    /// `Q^{ab}(F^a, F^b)` at the listed nodes.
    pub fn eval_q_at(&self, f_alpha: &[f64], f_beta: &[f64], alpha: usize, beta: usize, nodes: &[usize]) -> Result<Vec<f64>> {
        self.check_field(f_alpha, "F_alpha")?;
        self.check_field(f_beta, "F_beta")?;
        let pair = self.mixture.pair(alpha, beta);
        let n = self.grid.points_per_axis();
        let out: Vec<f64> = match self.quad.interpolation {
            Interpolation::Normalized => {
                let ga: Vec<f64> = f_alpha.iter().zip(&self.mu[alpha]).map(|(f, m)| f / m).collect();
                let gb: Vec<f64> = f_beta.iter().zip(&self.mu[beta]).map(|(f, m)| f / m).collect();
                let mb = &self.mu[beta];
                nodes
                    .par_iter()
                    .map(|&i| {
                        let gi = ga[i];
                        let mut acc = 0.0;
                        self.node_samples(i, pair, |s| {
                            let gain = self.interp_normalized(&ga, alpha, 1.0, s.s_prime)
                                * self.interp_normalized(&gb, beta, 1.0, s.s_star_prime);
                            acc += s.weight * mb[s.j] * (gain - gi * gb[s.j]);
                        });
                        self.mu[alpha][i] * acc
                    })
                    .collect()
            }
            Interpolation::Plain => nodes
                .par_iter()
                .map(|&i| {
                    let fi = f_alpha[i];
                    let mut acc = 0.0;
                    self.node_samples(i, pair, |s| {
                        let gain = trilinear(f_alpha, n, s.s_prime) * trilinear(f_beta, n, s.s_star_prime);
                        acc += s.weight * (gain - fi * f_beta[s.j]);
                    });
                    acc
                })
                .collect(),
        };
        self.check_output(&out, "Q", nodes)?;
        Ok(out)
    }

    pub fn eval_q(&self, f_alpha: &[f64], f_beta: &[f64], alpha: usize, beta: usize) -> Result<Vec<f64>> {
        let nodes: Vec<usize> = (0..self.grid.len()).collect();
        self.eval_q_at(f_alpha, f_beta, alpha, beta, &nodes)
    }

    /// `sum_b Q^{ab}(F^a, F^b)` for both species.
    pub fn eval_collision(&self, fa: &[f64], fb: &[f64]) -> Result<[Vec<f64>; 2]> {
        let f = [fa, fb];
        let mut out = [vec![0.0; fa.len()], vec![0.0; fa.len()]];
        for a in 0..2 {
            for b in 0..2 {
                let q = self.eval_q(f[a], f[b], a, b)?;
                for (o, x) in out[a].iter_mut().zip(q) {
                    *o += x;
                }
            }
        }
        Ok(out)
    }

    /// `(Gamma_gain^{ab}, Gamma_loss^{ab})(f^a, f^b)` on the whole grid.
    pub fn eval_gamma(&self, f_alpha: &[f64], f_beta: &[f64], alpha: usize, beta: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_field(f_alpha, "f_alpha")?;
        self.check_field(f_beta, "f_beta")?;
        let nodes: Vec<usize> = (0..self.grid.len()).collect();
        let gain = self.gamma_gain_at(f_alpha, f_beta, alpha, beta, &nodes);
        let freq = self.loss_frequency(f_beta, beta);
        let loss: Vec<f64> = f_alpha.iter().zip(&freq).map(|(f, l)| f * l).collect();
        self.check_output(&gain, "Gamma gain", &nodes)?;
        self.check_output(&loss, "Gamma loss", &nodes)?;
        Ok((gain, loss))
    }

    /// Gain part of `Gamma^{ab}` at the listed nodes.
    pub fn gamma_gain_at(&self, f_alpha: &[f64], f_beta: &[f64], alpha: usize, beta: usize, nodes: &[usize]) -> Vec<f64> {
        let pair = self.mixture.pair(alpha, beta);
        let n = self.grid.points_per_axis();
        let sw = self.self_weight;
        match self.quad.interpolation {
            Interpolation::Normalized => {
                let ga: Vec<f64> = f_alpha.iter().zip(&self.sqrt_mu[alpha]).map(|(f, m)| f / m).collect();
                let gb: Vec<f64> = f_beta.iter().zip(&self.sqrt_mu[beta]).map(|(f, m)| f / m).collect();
                let mb = &self.mu[beta];
                nodes
                    .par_iter()
                    .map(|&i| {
                        let mut acc = sw * mb[i] * ga[i] * gb[i];
                        self.node_samples(i, pair, |s| {
                            acc += s.weight
                                * mb[s.j]
                                * self.interp_normalized(&ga, alpha, 0.5, s.s_prime)
                                * self.interp_normalized(&gb, beta, 0.5, s.s_star_prime);
                        });
                        self.sqrt_mu[alpha][i] * acc
                    })
                    .collect()
            }
            Interpolation::Plain => {
                let rb = &self.sqrt_mu[beta];
                nodes
                    .par_iter()
                    .map(|&i| {
                        let mut acc = sw * rb[i] * f_alpha[i] * f_beta[i];
                        self.node_samples(i, pair, |s| {
                            acc += s.weight * rb[s.j] * trilinear(f_alpha, n, s.s_prime) * trilinear(f_beta, n, s.s_star_prime);
                        });
                        acc
                    })
                    .collect()
            }
        }
    }

    /// `lambda^{ab}[f^b](v) = int int B sqrt(mu^b(v*)) f^b(v*)`, so that the loss
    /// term is `f^a(v) lambda^{ab}(v)`. The output species is implied by the
    /// caller; the integrand depends only on `beta`.
    pub fn loss_frequency(&self, f_beta: &[f64], beta: usize) -> Vec<f64> {
        let rb = &self.sqrt_mu[beta];
        let sw = self.self_weight;
        let q = self.grid.weights();
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = sw * rb[i] * f_beta[i];
                for j in 0..self.grid.len() {
                    if j == i {
                        continue;
                    }
                    let t = self.table_index(i, j);
                    acc += q[j] * self.upow[t] * self.angular_sum(i, j) * rb[j] * f_beta[j];
                }
                acc
            })
            .collect()
    }

    /// `sum_k w_k b(w_k . u/|u|)` for the node pair.
    #[inline]
    pub fn angular_sum(&self, i: usize, j: usize) -> f64 {
        let t = self.table_index(i, j);
        let inv = self.inv_dnorm[t];
        let ci = self.coords[i];
        let cj = self.coords[j];
        let d = [(ci[0] - cj[0]) as f64, (ci[1] - cj[1]) as f64, (ci[2] - cj[2]) as f64];
        self.dirs
            .dirs
            .iter()
            .zip(&self.dirs.weights)
            .map(|(w, wk)| wk * self.mixture.kernel.eval(vec3::dot(d, *w) * inv))
            .sum()
    }

    /// Grid collision frequency `nu^a` for both species. The cross section does
    /// not depend on the species, so both entries coincide.
    pub fn nu_grid(&self) -> [Vec<f64>; 2] {
        let mut out = vec![0.0; self.grid.len()];
        for b in 0..2 {
            let lf = self.loss_frequency(&self.sqrt_mu[b], b);
            for (o, x) in out.iter_mut().zip(lf) {
                *o += x;
            }
        }
        [out.clone(), out]
    }

    /// `Gamma(f, f)` summed over partners: `(gain, loss frequency)` per species,
    /// with loss = `f^a * frequency^a`.
    pub fn gamma_split(&self, fa: &[f64], fb: &[f64]) -> Result<([Vec<f64>; 2], [Vec<f64>; 2])> {
        self.check_field(fa, "f^A")?;
        self.check_field(fb, "f^B")?;
        let f = [fa, fb];
        let nodes: Vec<usize> = (0..self.grid.len()).collect();
        let mut gain = [vec![0.0; fa.len()], vec![0.0; fa.len()]];
        let lam_b: [Vec<f64>; 2] = std::array::from_fn(|b| self.loss_frequency(f[b], b));
        let mut freq = [vec![0.0; fa.len()], vec![0.0; fa.len()]];
        for a in 0..2 {
            for b in 0..2 {
                let g = self.gamma_gain_at(f[a], f[b], a, b, &nodes);
                for (o, x) in gain[a].iter_mut().zip(g) {
                    *o += x;
                }
                for (o, x) in freq[a].iter_mut().zip(&lam_b[b]) {
                    *o += x;
                }
            }
            self.check_output(&gain[a], "Gamma gain", &nodes)?;
        }
        Ok((gain, freq))
    }

    /// Symmetrized entropy production
    /// `-1/4 sum_{ab} sum B (F'F*' - FF*) log(F'F*'/(FF*))` for positive `F`.
    /// Samples whose post-collision point leaves the cube are skipped.
    pub fn entropy_production(&self, fa: &[f64], fb: &[f64]) -> Result<f64> {
        self.check_field(fa, "F^A")?;
        self.check_field(fb, "F^B")?;
        for (s, f) in [fa, fb].iter().enumerate() {
            if let Some(p) = f.iter().position(|x| !(*x > 0.0)) {
                return Err(Error::Domain(format!(
                    "F must be positive for the entropy; species {} node {} has {}",
                    if s == 0 { "A" } else { "B" },
                    p,
                    f[p]
                )));
            }
        }
        let fields = [fa, fb];
        let n = self.grid.points_per_axis();
        let q = self.grid.weights();
        let mut total = 0.0;
        // (A,B) and (B,A) sample sets coincide, hence the factor 2.
        for (a, b, factor) in [(0usize, 0usize, 1.0), (1, 1, 1.0), (0, 1, 2.0)] {
            let pair = self.mixture.pair(a, b);
            let normalized = self.quad.interpolation == Interpolation::Normalized;
            let (ga, gb): (Vec<f64>, Vec<f64>) = if normalized {
                (
                    fields[a].iter().zip(&self.mu[a]).map(|(f, m)| f / m).collect(),
                    fields[b].iter().zip(&self.mu[b]).map(|(f, m)| f / m).collect(),
                )
            } else {
                (fields[a].to_vec(), fields[b].to_vec())
            };
            let ma = &self.mu[a];
            let mb = &self.mu[b];
            let part: f64 = (0..self.grid.len())
                .into_par_iter()
                .map(|i| {
                    let mut acc = 0.0;
                    self.node_samples(i, pair, |s| {
                        let p = if normalized {
                            self.interp_normalized(&ga, a, 1.0, s.s_prime) * self.interp_normalized(&gb, b, 1.0, s.s_star_prime)
                        } else {
                            trilinear(&ga, n, s.s_prime) * trilinear(&gb, n, s.s_star_prime)
                        };
                        let r = ga[i] * gb[s.j];
                        if p > 0.0 && r > 0.0 {
                            let scale = if normalized { mb[s.j] } else { 1.0 };
                            acc += s.weight * scale * (p - r) * (p / r).ln();
                        }
                    });
                    let scale_i = if normalized { ma[i] } else { 1.0 };
                    q[i] * scale_i * acc
                })
                .collect::<Vec<f64>>()
                .iter()
                .sum();
            total += factor * part;
        }
        let d = -0.25 * total;
        if !d.is_finite() {
            return Err(Error::NonFinite("entropy production".into()));
        }
        Ok(d)
    }

    /// Direct pairing `sum_{ab} <Q^{ab}(F^a,F^b), log F^a>`.
    pub fn entropy_pairing_direct(&self, fa: &[f64], fb: &[f64]) -> Result<f64> {
        if fa.iter().chain(fb).any(|x| !(*x > 0.0)) {
            return Err(Error::Domain("F must be positive for the entropy".into()));
        }
        let c = self.eval_collision(fa, fb)?;
        let la: Vec<f64> = fa.iter().map(|x| x.ln()).collect();
        let lb: Vec<f64> = fb.iter().map(|x| x.ln()).collect();
        Ok(self.grid.inner(&c[0], &la) + self.grid.inner(&c[1], &lb))
    }

    /// `<CF, Psi_j>` for `Psi in {e1, e2, v1 m, v2 m, v3 m, |v|^2 m}`.
    pub fn collision_invariant_pairing(&self, fa: &[f64], fb: &[f64]) -> Result<[f64; 6]> {
        let c = self.eval_collision(fa, fb)?;
        let mut out = [0.0; 6];
        for s in 0..2 {
            let m = self.mixture.mass(s);
            for (i, v) in self.grid.nodes().iter().enumerate() {
                let w = self.grid.weights()[i] * c[s][i];
                let psi = invariant_values(s, m, *v);
                for k in 0..6 {
                    out[k] += w * psi[k];
                }
            }
        }
        Ok(out)
    }

    /// Same pairing evaluated through the exact pre/post symmetrization:
    /// `1/2 sum_{ab} sum B F^a F^b_* [Psi^a(v') + Psi^b(v*') - Psi^a(v) - Psi^b(v*)]`
    /// with `v', v*'` from the exact kinematics. Vanishes up to roundoff.
    pub fn symmetrized_invariant_pairing(&self, fa: &[f64], fb: &[f64]) -> Result<[f64; 6]> {
        self.check_field(fa, "F^A")?;
        self.check_field(fb, "F^B")?;
        let fields = [fa, fb];
        let h = self.grid.spacing();
        let r = self.grid.radius();
        let q = self.grid.weights();
        let to_v = |s: [f64; 3]| [s[0] * h - r, s[1] * h - r, s[2] * h - r];
        let mut out = [0.0; 6];
        for a in 0..2 {
            for b in 0..2 {
                let pair = self.mixture.pair(a, b);
                let (ma, mb) = (self.mixture.mass(a), self.mixture.mass(b));
                let part: Vec<[f64; 6]> = (0..self.grid.len())
                    .into_par_iter()
                    .map(|i| {
                        let mut acc = [0.0; 6];
                        let vi = self.grid.node(i);
                        let pi = invariant_values(a, ma, vi);
                        self.node_samples(i, pair, |s| {
                            let vj = self.grid.node(s.j);
                            let w = s.weight * fields[a][i] * fields[b][s.j];
                            let p1 = invariant_values(a, ma, to_v(s.s_prime));
                            let p2 = invariant_values(b, mb, to_v(s.s_star_prime));
                            let p4 = invariant_values(b, mb, vj);
                            for k in 0..6 {
                                acc[k] += w * ((p1[k] - pi[k]) + (p2[k] - p4[k]));
                            }
                        });
                        acc.map(|x| 0.5 * q[i] * x)
                    })
                    .collect();
                for p in part {
                    for k in 0..6 {
                        out[k] += p[k];
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Size of `sum_b Q^{ab}(mu^a, mu^b)` on the grid.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct EquilibriumResidual {
    pub max_abs: f64,
    /// `(sum_a sum_v q (1+|v|)^gamma |r^a|^2)^{1/2}`
    pub nu_norm: f64,
}

pub fn equilibrium_residual(op: &CollisionOperator) -> Result<EquilibriumResidual> {
    let r = op.eval_collision(op.mu(0), op.mu(1))?;
    let g = op.mixture().gamma;
    let q = op.grid().weights();
    let mut max_abs = 0.0f64;
    let mut sq = 0.0;
    for ra in &r {
        for (i, v) in op.grid().nodes().iter().enumerate() {
            max_abs = max_abs.max(ra[i].abs());
            sq += q[i] * (1.0 + vec3::norm(*v)).powf(g) * ra[i] * ra[i];
        }
    }
    Ok(EquilibriumResidual { max_abs, nu_norm: sq.sqrt() })
}

/// Random smooth positive pair `(F^A, F^B)`: per species, a drifting Maxwellian
/// with random density, bulk velocity and temperature plus a smaller displaced
/// Gaussian.
pub fn random_positive_state(masses: MassPair, grid: &VelocityGrid, seed: u64) -> [Vec<f64>; 2] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    std::array::from_fn(|s| {
        let m = if s == 0 { masses.m_alpha } else { masses.m_beta };
        let rho: f64 = rng.gen_range(0.5..1.5);
        let temp: f64 = rng.gen_range(0.8..1.25);
        let u: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-0.3..0.3) / m.sqrt());
        let rho2: f64 = rng.gen_range(0.05..0.3);
        let u2: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0) / m.sqrt());
        grid.nodes()
            .iter()
            .map(|v| {
                let a = rho * (m / (2.0 * PI * temp)).powf(1.5) * (-0.5 * m * vec3::norm2(vec3::sub(*v, u)) / temp).exp();
                let b = rho2 * (m / PI).powf(1.5) * (-m * vec3::norm2(vec3::sub(*v, u2))).exp();
                a + b
            })
            .collect()
    })
}

/// Collision invariants of species `s` at velocity `v`.
#[inline]
pub fn invariant_values(s: usize, m: f64, v: Vec3) -> [f64; 6] {
    [
        if s == 0 { 1.0 } else { 0.0 },
        if s == 1 { 1.0 } else { 0.0 },
        m * v[0],
        m * v[1],
        m * v[2],
        m * vec3::norm2(v),
    ]
}

/// Monte-Carlo estimate of `Q^{ab}` with a batch-means standard error.
pub fn eval_q_monte_carlo(
    mixture: MixtureConfig,
    quad: QuadratureSpec,
    grid: &VelocityGrid,
    f_alpha: &[f64],
    f_beta: &[f64],
    alpha: usize,
    beta: usize,
    nodes: &[usize],
    batches: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if batches < 2 {
        return Err(Error::Config("Monte-Carlo error bars need at least two batches".into()));
    }
    let per = (quad.sphere_points / batches).max(1);
    let mut runs = Vec::with_capacity(batches);
    for b in 0..batches {
        let dirs = monte_carlo(quad.seed.wrapping_add(b as u64 * 0x9e37_79b9), per)?;
        let op = CollisionOperator::with_directions(mixture, quad, grid, dirs)?;
        runs.push(op.eval_q_at(f_alpha, f_beta, alpha, beta, nodes)?);
    }
    let k = batches as f64;
    let mut mean = vec![0.0; nodes.len()];
    let mut err = vec![0.0; nodes.len()];
    for p in 0..nodes.len() {
        let m = runs.iter().map(|r| r[p]).sum::<f64>() / k;
        let var = runs.iter().map(|r| (r[p] - m).powi(2)).sum::<f64>() / (k - 1.0);
        mean[p] = m;
        err[p] = (var / k).sqrt();
    }
    Ok((mean, err))
}
