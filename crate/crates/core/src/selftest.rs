//! Fast property suite behind the `selftest` command. Everything written to
//! the output directory depends only on the seed, so two runs give
//! byte-identical files.

use crate::cli::{kinematics_report, qtest_rows, QTEST_HEADER};
use crate::collision::{random_positive_state, AngularKernel, CollisionOperator, MixtureConfig, QuadratureSpec};
use crate::config::{default_config_text, parse_config, RunConfig};
use crate::equilibrium::{build_invariant_basis, project_p0};
use crate::error::{Error, Result};
use crate::io;
use crate::kinematics::MassPair;
use crate::linop::{
    apply_k, assemble_l, estimate_coercivity, eval_kernel_k1, eval_kernel_k2, random_smooth_pair, split_ks_kc,
    verify_kernel_decay, KernelSplitConfig, LanczosOptions,
};
use crate::solver::{conservation_scale, run, shear_initial_data, Operators, SolverConfig};
use crate::vgrid::{DistributionPair, SpatialGrid, VelocityGrid, DEFAULT_RADIUS_FACTOR};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::Path;

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    /// Bound the value is compared against.
    pub tolerance: f64,
    /// `le`: value <= tolerance; `gt`: value > tolerance.
    pub relation: &'static str,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub artifacts: Vec<String>,
}

fn le(name: &'static str, value: f64, tolerance: f64) -> Check {
    Check { name, value, tolerance, relation: "le", pass: value <= tolerance }
}

fn gt(name: &'static str, value: f64, bound: f64) -> Check {
    Check { name, value, tolerance: bound, relation: "gt", pass: value > bound }
}

fn mixture(m: (f64, f64), gamma: f64) -> Result<MixtureConfig> {
    MixtureConfig::new(MassPair::new(m.0, m.1)?, gamma, AngularKernel::default())
}

/// Runs the suite and writes its artifacts under `out`.
pub fn run_suite(seed: u64, out: &Path) -> Result<SelftestReport> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut checks = Vec::new();
    let mut artifacts = Vec::new();

    let kin = kinematics_report(100_000, seed, None, 100, 1e-5)?;
    checks.push(le(
        "kinematics_residual",
        kin.max_momentum_residual.max(kin.max_energy_residual).max(kin.max_relative_speed_residual),
        kin.residual_tolerance,
    ));
    checks.push(le("jacobian_residual", kin.jacobian_residual, kin.jacobian_tolerance));

    let mix = mixture((7.0, 8.0), -1.0)?;
    let quad = QuadratureSpec::default();
    let rows = qtest_rows(mix, quad, &[7, 9], DEFAULT_RADIUS_FACTOR, 2, seed)?;
    let last = rows.last().expect("two rows");
    checks.push(le("equilibrium_residual", last.residual, 1e-3));
    checks.push(le("symmetrized_pairing", rows.iter().map(|r| r.symmetrized_pairing).fold(0.0, f64::max), 1e-10));
    let qpath = out.join("qtest.csv");
    io::write_table(&qpath, &QTEST_HEADER, &rows.iter().map(|r| r.values()).collect::<Vec<_>>())?;
    artifacts.push("qtest.csv".to_string());

    let grid = VelocityGrid::for_masses(mix.masses, 7, DEFAULT_RADIUS_FACTOR)?;
    let op = CollisionOperator::new(mix, quad, &grid)?;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..3 {
        let [fa, fb] = random_positive_state(mix.masses, &grid, seed.wrapping_add(100 + k));
        worst = worst.max(op.entropy_production(&fa, &fb)?);
    }
    checks.push(le("entropy_production_sign", worst, 1e-6));
    checks.push(le("entropy_production_equilibrium", op.entropy_production(op.mu(0), op.mu(1))?.abs(), 1e-4));

    let l = assemble_l(&op, 1 << 30)?;
    let basis = build_invariant_basis(mix.masses, &grid)?;
    checks.push(le("operator_asymmetry", l.asymmetry(), 1e-12));
    let w = l.nu_norm_weights(grid.nodes());
    let a = l.weak_matrix();
    let c = DMatrix::from_fn(l.dim(), l.dim(), |r, k| a[(r, k)] / (w[r] * w[k]).sqrt());
    let min_rq = SymmetricEigen::new(c).eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    checks.push(gt("min_rayleigh_quotient", min_rq, -1e-8));
    let co = estimate_coercivity(&l, &basis, LanczosOptions { seed, ..LanczosOptions::default() })?;
    checks.push(gt("coercivity_delta_hat", co.delta_hat, 0.0));
    checks.push(le("minimizer_orthogonality", co.orthogonality, 1e-8));

    let f = random_smooth_pair(&op, seed);
    let fp = DistributionPair::from_parts(f[..grid.len()].to_vec(), f[grid.len()..].to_vec(), 1, grid.len())?;
    let p1 = project_p0(&basis, &fp)?;
    let p2 = project_p0(&basis, &p1)?;
    let idem = (0..2)
        .flat_map(|s| p1.species(s).iter().zip(p2.species(s)).map(|(x, y)| (x - y).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    checks.push(le("projection_idempotence", idem, 1e-12));

    let split = split_ks_kc(&op, KernelSplitConfig::default(), &f)?;
    let full = apply_k(&op, &f)?;
    let scale = full.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let part = split.ks.iter().zip(&split.kc).zip(&full).map(|((s, c), k)| (s + c - k).abs()).fold(0.0, f64::max) / scale;
    checks.push(le("split_partition", part, 1e-10));

    let eq = mixture((1.0, 1.0), -1.0)?;
    let nc = KernelSplitConfig::no_cutoff();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_726e);
    let mut sym = 0.0f64;
    for _ in 0..10 {
        let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let x: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-2.0..2.0));
        let k1 = eval_kernel_k1(&eq, &nc, 0, 0, v, x)?;
        let k2 = eval_kernel_k2(&eq, &nc, 0, 0, v, x, [0.0; 3])?;
        sym = sym.max((k1 - k2).abs() / k1.abs().max(1e-300));
    }
    checks.push(le("kernel_exchange_symmetry", sym, 1e-8));

    let decay = verify_kernel_decay(&eq, &nc, 0, 0, &[1.0, 2.0, 4.0], 0.0)?;
    let (lo, hi) = decay.iter().fold((f64::INFINITY, 0.0f64), |(l, h), r| (l.min(r.normalized), h.max(r.normalized)));
    checks.push(le("kernel_decay_band", hi / lo, 10.0));

    let cfg_ok = parse_config(&default_config_text())? == RunConfig::default();
    checks.push(le("config_round_trip", if cfg_ok { 0.0 } else { 1.0 }, 0.0));

    let xgrid = SpatialGrid::new(1, 4)?;
    let ops = Operators::new(mix, quad, &grid, &xgrid, 1 << 30)?;
    let f0 = shear_initial_data(&ops, 1e-3);
    let sc = SolverConfig { dt: 0.05, t_end: 0.2, ..SolverConfig::default() };
    let res = run(&sc, &ops, &f0)?;
    let cs = conservation_scale(&ops, &f0)?;
    let first = &res.records[0];
    let mut drift = 0.0f64;
    for r in &res.records {
        for j in 0..6 {
            drift = drift.max((r.conservation[j] - first.conservation[j]).abs() / cs[j] / sc.t_end);
        }
    }
    checks.push(le("solver_conservation_drift", drift, 1e-6));
    checks.push(gt("solver_min_f", res.records.iter().map(|r| r.min_f).fold(f64::INFINITY, f64::min), -1e-8));
    io::write_monitors(&out.join("monitors.csv"), &res.labels, &res.records)?;
    let fpath = out.join("final_state.csv");
    io::write_field(&fpath, &grid, &xgrid, &res.final_state, &[("mass_a", "7".into()), ("mass_b", "8".into())])?;
    let back = io::read_field(&fpath)?;
    let rt = (0..2)
        .flat_map(|s| back.field.species(s).iter().zip(res.final_state.species(s)).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>())
        .fold(0.0, f64::max);
    checks.push(le("field_round_trip", rt, 0.0));
    artifacts.push("monitors.csv".to_string());
    artifacts.push("final_state.csv".to_string());

    let passed = checks.iter().all(|c| c.pass);
    let report = SelftestReport { seed, passed, checks, artifacts: artifacts.clone() };
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Contract(e.to_string()))?;
    let rpath = out.join("selftest.json");
    std::fs::write(&rpath, json + "\n").map_err(|e| Error::io(&rpath, e))?;
    let mut report = report;
    report.artifacts.push("selftest.json".to_string());
    Ok(report)
}

