//! Time integration of `(d_t + v.grad_x) f + L f = Gamma(f, f)` on a periodic
//! box: Strang splitting with semi-Lagrangian transport and a semi-implicit
//! collision step.

use crate::collision::{CollisionOperator, MixtureConfig, QuadratureSpec};
use crate::equilibrium::{build_invariant_basis, conservation_functionals, raw_invariants, InvariantBasis};
use crate::error::{Error, Result};
use crate::linop::{assemble_l, AssembledL};
use crate::vec3;
use crate::vgrid::{finite_diff, DistributionPair, EnergyAccumulator, MultiIndex, SpatialGrid, VelocityGrid};
use nalgebra::{Cholesky, DVector, Dyn};
use rayon::prelude::*;
use std::sync::{Arc, Mutex};
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_end: f64,
    pub inner_iterations: usize,
    pub cfl_limit: f64,
    /// Order `N` of the monitored energy functional.
    pub energy_order: usize,
    pub monitor_entropy: bool,
    /// Growth of the instantaneous norm that counts as blow-up.
    pub blowup_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { dt: 0.05, t_end: 1.0, inner_iterations: 2, cfl_limit: 0.9, energy_order: 1, monitor_entropy: true, blowup_factor: 1e3 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Range { key: "dt".into(), message: format!("{} must be positive", self.dt) });
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Range { key: "t_end".into(), message: format!("{} must be nonnegative", self.t_end) });
        }
        if self.inner_iterations == 0 {
            return Err(Error::Range { key: "inner_iterations".into(), message: "must be at least 1".into() });
        }
        if !(self.cfl_limit > 0.0) {
            return Err(Error::Range { key: "cfl_limit".into(), message: "must be positive".into() });
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Everything a run needs, built once.
pub struct Operators {
    pub collision: CollisionOperator,
    pub l: AssembledL,
    pub basis: InvariantBasis,
    pub xgrid: SpatialGrid,
    pub vgrid: VelocityGrid,
    nu_weights: Vec<f64>,
    implicit: Mutex<Option<(f64, Arc<Cholesky<f64, Dyn>>)>>,
}

impl Operators {
    pub fn new(mixture: MixtureConfig, quad: QuadratureSpec, vgrid: &VelocityGrid, xgrid: &SpatialGrid, budget: usize) -> Result<Self> {
        let collision = CollisionOperator::new(mixture, quad, vgrid)?;
        let l = assemble_l(&collision, budget)?;
        let basis = build_invariant_basis(mixture.masses, vgrid)?;
        let nu_weights = l.nu_norm_weights(vgrid.nodes());
        Ok(Self { collision, l, basis, xgrid: xgrid.clone(), vgrid: vgrid.clone(), nu_weights, implicit: Mutex::new(None) })
    }

    pub fn mixture(&self) -> &MixtureConfig {
        self.collision.mixture()
    }

    /// Cholesky factor of `Q + dt A`, cached for the last `dt`.
    fn implicit_factor(&self, dt: f64) -> Result<Arc<Cholesky<f64, Dyn>>> {
        let mut slot = self.implicit.lock().unwrap_or_else(|e| e.into_inner());
        if let Some((d, c)) = slot.as_ref() {
            if *d == dt {
                return Ok(c.clone());
            }
        }
        let mut m = self.l.weak_matrix() * dt;
        for (r, q) in self.l.weights().iter().enumerate() {
            m[(r, r)] += q;
        }
        let c = Arc::new(
            m.cholesky().ok_or_else(|| Error::Numerical("Q + dt A is not positive definite".into()))?,
        );
        *slot = Some((dt, c.clone()));
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonitorRecord {
    pub t: f64,
    pub conservation: [f64; 6],
    pub entropy_production: f64,
    pub energy_e: f64,
    pub instantaneous_norms: Vec<f64>,
    pub coercivity_numerator: f64,
    pub coercivity_denominator: f64,
    pub min_f: f64,
}

impl MonitorRecord {
    /// CSV header in field order; `labels` name the multi-indices.
    pub fn header(labels: &[String]) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((1..=6).map(|j| format!("conservation_{j}")));
        h.push("entropy_production".into());
        h.push("energy_E".into());
        h.extend(labels.iter().map(|l| format!("norm_{l}")));
        h.push("coercivity_numerator".into());
        h.push("coercivity_denominator".into());
        h.push("min_F".into());
        h
    }

    pub fn row(&self) -> Vec<f64> {
        let mut r = vec![self.t];
        r.extend(self.conservation);
        r.push(self.entropy_production);
        r.push(self.energy_e);
        r.extend(&self.instantaneous_norms);
        r.push(self.coercivity_numerator);
        r.push(self.coercivity_denominator);
        r.push(self.min_f);
        r
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum RunStatus {
    Completed,
    Aborted(String),
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub records: Vec<MonitorRecord>,
    pub final_state: DistributionPair,
    pub status: RunStatus,
    /// Relative change between the second and third fixed-point sweep on the
    /// initial state.
    pub sweep_residual: f64,
    /// Multi-index labels of `instantaneous_norms`.
    pub labels: Vec<String>,
}

/// Checks `dt max|v| / h_x <= cfl_limit`.
pub fn check_cfl(config: &SolverConfig, vgrid: &VelocityGrid, xgrid: &SpatialGrid) -> Result<()> {
    let vmax = vgrid.nodes().iter().map(|v| vec3::norm(*v)).fold(0.0, f64::max);
    let ratio = config.dt * vmax / xgrid.spacing();
    if ratio > config.cfl_limit {
        return Err(Error::Cfl { ratio, limit: config.cfl_limit });
    }
    Ok(())
}

/// Periodic four-point Lagrange weights for the departure offset
/// `shift` (in cells). Returns the base offset and weights for `k-1..k+2`.
fn cubic_weights(shift: f64) -> (isize, [f64; 4]) {
    let base = shift.floor();
    let t = shift - base;
    let w = [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ];
    (base as isize, w)
}

/// Semi-Lagrangian advection `f(x) <- f(x - v tau)` along every active axis.
pub fn transport(f: &mut DistributionPair, vgrid: &VelocityGrid, xgrid: &SpatialGrid, tau: f64) {
    let nv = vgrid.len();
    let nx = xgrid.len();
    for axis in 0..xgrid.dims() {
        for s in 0..2 {
            let src = f.species(s).to_vec();
            let dst = f.species_mut(s);
            let cols: Vec<Vec<f64>> = (0..nv)
                .into_par_iter()
                .map(|v| {
                    let shift = -vgrid.node(v)[axis] * tau / xgrid.spacing();
                    let (base, w) = cubic_weights(shift);
                    (0..nx)
                        .map(|x| {
                            let mut acc = 0.0;
                            for (k, wk) in w.iter().enumerate() {
                                let xs = xgrid.shifted(x, axis, base + k as isize - 1);
                                acc += wk * src[xs * nv + v];
                            }
                            acc
                        })
                        .collect()
                })
                .collect();
            for (v, col) in cols.iter().enumerate() {
                for (x, val) in col.iter().enumerate() {
                    dst[x * nv + v] = *val;
                }
            }
        }
    }
}

/// One fixed-point sweep at a single spatial point: `L` implicit, `Gamma`
/// lagged, `(Q + dt A) f = Q (f_n + dt Gamma(f_k, f_k))`.
fn collision_sweep(ops: &Operators, f_n: &[f64], f_k: &[f64], dt: f64) -> Result<Vec<f64>> {
    let nv = ops.vgrid.len();
    let (gain, freq) = ops.collision.gamma_split(&f_k[..nv], &f_k[nv..])?;
    let q = ops.l.weights();
    let rhs = DVector::from_fn(2 * nv, |r, _| {
        let (s, i) = (r / nv, r % nv);
        q[r] * (f_n[r] + dt * (gain[s][i] - freq[s][i] * f_k[r]))
    });
    let out = ops.implicit_factor(dt)?.solve(&rhs);
    Ok(out.iter().copied().collect())
}

/// Collision substep at one spatial point followed by the conservative
/// correction `f <- f - P0 (f - f_n)`.
pub fn collision_step(ops: &Operators, f_n: &[f64], dt: f64, sweeps: usize) -> Result<Vec<f64>> {
    let mut f = f_n.to_vec();
    for _ in 0..sweeps {
        f = collision_sweep(ops, f_n, &f, dt)?;
    }
    let diff: Vec<f64> = f.iter().zip(f_n).map(|(a, b)| a - b).collect();
    let p = ops.basis.project_velocity(&diff)?;
    for (a, b) in f.iter_mut().zip(p) {
        *a -= b;
    }
    Ok(f)
}

/// One Strang step: half transport, collision at every x, half transport.
pub fn step(config: &SolverConfig, state: &DistributionPair, ops: &Operators) -> Result<DistributionPair> {
    state.check_shape(&ops.xgrid, &ops.vgrid)?;
    if let Some((s, x, v)) = state.first_non_finite() {
        return Err(Error::NonFinite(format!("state species {s} x {x} v {v}")));
    }
    check_cfl(config, &ops.vgrid, &ops.xgrid)?;
    let mut f = state.clone();
    transport(&mut f, &ops.vgrid, &ops.xgrid, 0.5 * config.dt);
    for x in 0..f.nx() {
        let fx = f.stacked_at(x);
        let nx = collision_step(ops, &fx, config.dt, config.inner_iterations)?;
        f.set_stacked_at(x, &nx);
    }
    transport(&mut f, &ops.vgrid, &ops.xgrid, 0.5 * config.dt);
    if let Some((s, x, v)) = f.first_non_finite() {
        return Err(Error::NonFinite(format!("after step: species {s} x {x} v {v}")));
    }
    Ok(f)
}

fn coercivity_terms(ops: &Operators, f: &DistributionPair) -> Result<(f64, f64)> {
    let dx = ops.xgrid.cell_volume();
    let mut idx = vec![MultiIndex::ZERO];
    idx.extend((0..ops.xgrid.dims()).map(MultiIndex::x));
    let (mut num, mut den) = (0.0, 0.0);
    let nv = ops.vgrid.len();
    for ix in idx {
        let d: [Vec<f64>; 2] = [
            finite_diff(f.species(0), &ops.xgrid, &ops.vgrid, ix)?,
            finite_diff(f.species(1), &ops.xgrid, &ops.vgrid, ix)?,
        ];
        for x in 0..f.nx() {
            let s: Vec<f64> = d[0][x * nv..(x + 1) * nv].iter().chain(&d[1][x * nv..(x + 1) * nv]).copied().collect();
            let ls = ops.l.apply(&s);
            let q = ops.l.weights();
            num += dx * s.iter().zip(&ls).zip(q).map(|((a, b), q)| q * a * b).sum::<f64>();
            den += dx * s.iter().zip(&ops.nu_weights).map(|(a, w)| w * a * a).sum::<f64>();
        }
    }
    Ok((num, den))
}

fn record(ops: &Operators, config: &SolverConfig, t: f64, f: &DistributionPair, energy: &mut EnergyAccumulator) -> Result<MonitorRecord> {
    let masses = ops.mixture().masses;
    let conservation = conservation_functionals(masses, &ops.vgrid, &ops.xgrid, f)?;
    energy.push(t, f, &ops.xgrid, &ops.vgrid)?;
    let (num, den) = coercivity_terms(ops, f)?;
    let nv = ops.vgrid.len();
    let mut min_f = f64::INFINITY;
    let mut entropy = 0.0;
    for x in 0..f.nx() {
        let (a, b) = f.at(x);
        let big: [Vec<f64>; 2] = std::array::from_fn(|s| {
            let fs = if s == 0 { a } else { b };
            (0..nv).map(|i| ops.collision.mu(s)[i] + ops.collision.sqrt_mu(s)[i] * fs[i]).collect()
        });
        for v in big.iter().flatten() {
            min_f = min_f.min(*v);
        }
        if config.monitor_entropy {
            // Round-off leaves F slightly negative far in the tails; the
            // entropy is taken of the positive part.
            let pos: [Vec<f64>; 2] = std::array::from_fn(|s| big[s].iter().map(|v| v.max(f64::MIN_POSITIVE)).collect());
            entropy += ops.collision.entropy_production(&pos[0], &pos[1])? * ops.xgrid.cell_volume();
        }
    }
    Ok(MonitorRecord {
        t,
        conservation,
        entropy_production: if config.monitor_entropy { entropy } else { f64::NAN },
        energy_e: energy.energy(),
        instantaneous_norms: energy.instantaneous().to_vec(),
        coercivity_numerator: num,
        coercivity_denominator: den,
        min_f,
    })
}

/// Relative change between fixed-point sweeps 2 and 3 at the first spatial
/// point.
pub fn sweep_residual(ops: &Operators, f: &DistributionPair, dt: f64) -> Result<f64> {
    let f_n = f.stacked_at(0);
    let mut it = f_n.clone();
    let mut prev = it.clone();
    for _ in 0..3 {
        prev = it;
        it = collision_sweep(ops, &f_n, &prev, dt)?;
    }
    let num = it.iter().zip(&prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den = prev.iter().map(|a| a * a).sum::<f64>().sqrt();
    Ok(if den > 0.0 { num / den } else { 0.0 })
}

/// Integrates to `t_end`, recording monitors at `t = 0` and after every step.
/// NaN or blow-up stops the run early with the records gathered so far.
pub fn run(config: &SolverConfig, ops: &Operators, f_init: &DistributionPair) -> Result<RunOutput> {
    config.validate()?;
    f_init.check_shape(&ops.xgrid, &ops.vgrid)?;
    check_cfl(config, &ops.vgrid, &ops.xgrid)?;
    let mut energy = EnergyAccumulator::new(config.energy_order, ops.mixture().gamma, ops.xgrid.dims())?;
    let labels = energy.indices().iter().map(|m| m.label()).collect();
    let sweep = sweep_residual(ops, f_init, config.dt)?;
    let mut records = vec![record(ops, config, 0.0, f_init, &mut energy)?];
    let initial = records[0].instantaneous_norms.iter().sum::<f64>();
    let mut f = f_init.clone();
    let steps = config.steps();
    let mut status = RunStatus::Completed;
    for k in 0..steps {
        let t = ((k + 1) as f64 * config.dt).min(config.t_end);
        let next = match step(config, &f, ops) {
            Ok(n) => n,
            Err(Error::NonFinite(m)) => {
                status = RunStatus::Aborted(format!("non-finite value at t = {t}: {m}"));
                break;
            }
            Err(e) => return Err(e),
        };
        f = next;
        let rec = record(ops, config, t, &f, &mut energy)?;
        let now = rec.instantaneous_norms.iter().sum::<f64>();
        records.push(rec);
        if initial > 0.0 && now > config.blowup_factor * initial {
            status = RunStatus::Aborted(format!("blow-up at t = {t}: norm grew by {:.3e}", now / initial));
            break;
        }
    }
    Ok(RunOutput { records, final_state: f, status, sweep_residual: sweep, labels })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoercivityIntegral {
    pub lhs: f64,
    pub rhs: f64,
    /// `None` when `rhs = 0` (degenerate run).
    pub ratio: Option<f64>,
}

/// Trapezoid integrals of `<L d f, d f>` and `||d f||_nu^2` over `[t1, t2]`.
pub fn coercivity_time_integral(records: &[MonitorRecord], t1: f64, t2: f64) -> Result<CoercivityIntegral> {
    let inside: Vec<&MonitorRecord> = records.iter().filter(|r| r.t >= t1 - 1e-12 && r.t <= t2 + 1e-12).collect();
    if inside.len() < 2 {
        return Err(Error::Contract(format!("window [{t1}, {t2}] holds fewer than two records")));
    }
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for w in inside.windows(2) {
        let dt = w[1].t - w[0].t;
        lhs += 0.5 * dt * (w[0].coercivity_numerator + w[1].coercivity_numerator);
        rhs += 0.5 * dt * (w[0].coercivity_denominator + w[1].coercivity_denominator);
    }
    Ok(CoercivityIntegral { lhs, rhs, ratio: if rhs > 0.0 { Some(lhs / rhs) } else { None } })
}

/// Relative drift scale for conservation entry `j`: `||f0|| ||Psi_j||` over
/// phase space (Cauchy-Schwarz bound of the functional).
pub fn conservation_scale(ops: &Operators, f0: &DistributionPair) -> Result<[f64; 6]> {
    let raw = raw_invariants(ops.mixture().masses, &ops.vgrid, 0.5);
    let dx = ops.xgrid.cell_volume();
    let measure = ops.xgrid.measure();
    let mut fnorm = 0.0;
    for x in 0..f0.nx() {
        let s = f0.stacked_at(x);
        fnorm += dx * crate::equilibrium::pair_inner(&ops.vgrid, &s, &s);
    }
    let fnorm = fnorm.sqrt();
    Ok(std::array::from_fn(|j| fnorm * (measure * crate::equilibrium::pair_inner(&ops.vgrid, &raw[j], &raw[j])).sqrt()))
}

/// `amplitude (v1^2 - v2^2)(m : sqrt mu) cos(x1)`: orthogonal to every
/// collision invariant at each x.
pub fn shear_initial_data(ops: &Operators, amplitude: f64) -> DistributionPair {
    let nv = ops.vgrid.len();
    let nx = ops.xgrid.len();
    let mut f = DistributionPair::zeros(nx, nv);
    for s in 0..2 {
        let m = ops.mixture().mass(s);
        let sq = ops.collision.sqrt_mu(s).to_vec();
        let dst = f.species_mut(s);
        for x in 0..nx {
            let c = ops.xgrid.position(x)[0].cos();
            for (i, v) in ops.vgrid.nodes().iter().enumerate() {
                dst[x * nv + i] = amplitude * (v[0] * v[0] - v[1] * v[1]) * m * sq[i] * c;
            }
        }
    }
    f
}
