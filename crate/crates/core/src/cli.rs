//! Command-line front end. Every command prints one JSON object or a CSV
//! table on stdout; diagnostics go to stderr.

use crate::collision::{
    equilibrium_residual, random_positive_state, AngularKernel, CollisionOperator, KernelFamily, MixtureConfig, QuadratureSpec,
};
use crate::config::{parse_config, InitialProfile, RunConfig};
use crate::equilibrium::{build_invariant_basis, conservation_functionals, macroscopic_moments, pair_inner};
use crate::error::{Error, Result};
use crate::io;
use crate::kinematics::{check_random_collisions, max_jacobian_residual, MassPair};
use crate::linop::{
    assemble_l, dense_coercivity, estimate_coercivity, ks_ratio, verify_kernel_decay, KernelSplitConfig, LanczosOptions,
};
use crate::parallel;
use crate::solver::{coercivity_time_integral, conservation_scale, run, shear_initial_data, Operators, RunStatus};
use crate::vgrid::{DistributionPair, VelocityGrid, DEFAULT_RADIUS_FACTOR};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::path::PathBuf;

/// Residual bound for exact kinematics.
pub const KINEMATICS_TOL: f64 = 1e-12;
/// Bound on `|det + 1|` of the finite-difference Jacobian.
pub const JACOBIAN_TOL: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(name = "binarykin", version, about = "Two-species Boltzmann operators: checks, diagnostics and a small solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Conservation residuals of random collisions and the Jacobian determinant.
    KinematicsCheck(KinematicsArgs),
    /// Equilibrium annihilation and invariant pairings across grid resolutions (CSV).
    Qtest(QtestArgs),
    /// Conservation functionals and macroscopic fields of a stored state.
    Moments(MomentsArgs),
    /// Coercivity constant, symmetry and kernel residuals of the linearized operator.
    Coercivity(CoercivityArgs),
    /// Weighted integrals of the kernel against growing speeds (CSV).
    KernelDecay(KernelDecayArgs),
    /// Runs the solver from a config file.
    Simulate(SimulateArgs),
    /// Quick property suite; writes deterministic artifacts.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug, Clone)]
pub struct MixtureArgs {
    #[arg(long, default_value_t = 7.0)]
    pub mass_a: f64,
    #[arg(long, default_value_t = 8.0)]
    pub mass_b: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub gamma: f64,
    /// `abs_cos` or `cos_squared`.
    #[arg(long, default_value = "abs_cos")]
    pub kernel: String,
    #[arg(long, default_value_t = 1.0)]
    pub c_b: f64,
}

impl MixtureArgs {
    pub fn mixture(&self) -> Result<MixtureConfig> {
        let family = KernelFamily::parse(&self.kernel)
            .ok_or_else(|| Error::Config(format!("unknown kernel `{}` (abs_cos, cos_squared)", self.kernel)))?;
        MixtureConfig::new(MassPair::new(self.mass_a, self.mass_b)?, self.gamma, AngularKernel::new(family, self.c_b)?)
    }
}

#[derive(Args, Debug)]
pub struct KinematicsArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixed masses; both random in [0.1, 10] when omitted.
    #[arg(long)]
    pub mass_a: Option<f64>,
    #[arg(long)]
    pub mass_b: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub jacobian_samples: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub fd_step: f64,
}

#[derive(Args, Debug)]
pub struct QtestArgs {
    #[command(flatten)]
    pub mixture: MixtureArgs,
    #[arg(long, value_delimiter = ',', default_value = "17,25,33")]
    pub grids: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_RADIUS_FACTOR)]
    pub radius_factor: f64,
    #[arg(long, default_value_t = 14)]
    pub sphere_points: usize,
    /// `normalized` or `plain`.
    #[arg(long, default_value = "normalized")]
    pub interpolation: String,
    /// Random positive states for the invariant pairings.
    #[arg(long, default_value_t = 5)]
    pub states: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct MomentsArgs {
    #[arg(long)]
    pub state: PathBuf,
    /// Masses when the file does not record them.
    #[arg(long, default_value_t = 7.0)]
    pub mass_a: f64,
    #[arg(long, default_value_t = 8.0)]
    pub mass_b: f64,
}

#[derive(Args, Debug)]
pub struct CoercivityArgs {
    #[command(flatten)]
    pub mixture: MixtureArgs,
    /// Velocity points per axis.
    #[arg(long, default_value_t = 9)]
    pub grid: usize,
    #[arg(long, default_value_t = DEFAULT_RADIUS_FACTOR)]
    pub radius_factor: f64,
    #[arg(long, default_value_t = 14)]
    pub sphere_points: usize,
    #[arg(long, default_value_t = 0.25)]
    pub eps: f64,
    #[arg(long, default_value_t = 6.0)]
    pub mtrunc: f64,
    /// Weight power `l` of the small-part ratio.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub weight_power: f64,
    /// Skips the small-part ratio.
    #[arg(long)]
    pub no_split: bool,
    /// Writes the full deflated spectrum (dense, small grids only).
    #[arg(long)]
    pub spectrum: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 1024)]
    pub budget_mib: usize,
}

#[derive(Args, Debug)]
pub struct KernelDecayArgs {
    #[command(flatten)]
    pub mixture: MixtureArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    pub speeds: Vec<f64>,
    /// `s <= 0`.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub weight_power: f64,
    #[arg(long, default_value_t = 0)]
    pub alpha: usize,
    #[arg(long, default_value_t = 0)]
    pub beta: usize,
    /// Cutoff scale; 0 disables the cutoff.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `monitors_path`.
    #[arg(long)]
    pub monitors: Option<PathBuf>,
    /// Overrides `final_state_path`.
    #[arg(long)]
    pub final_state: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SelftestArgs {
    #[arg(long, default_value = "selftest_out")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KinematicsReport {
    pub samples: usize,
    pub seed: u64,
    pub masses: Option<[f64; 2]>,
    pub max_momentum_residual: f64,
    pub max_energy_residual: f64,
    pub max_relative_speed_residual: f64,
    pub residual_tolerance: f64,
    pub jacobian_samples: usize,
    pub jacobian_residual: f64,
    pub jacobian_tolerance: f64,
    pub fd_step: f64,
    pub pass: bool,
}

pub fn kinematics_report(
    samples: usize,
    seed: u64,
    masses: Option<MassPair>,
    jacobian_samples: usize,
    fd_step: f64,
) -> Result<KinematicsReport> {
    let r = check_random_collisions(seed, samples, masses, (0.1, 10.0), 5.0);
    let jac = max_jacobian_residual(seed, jacobian_samples, masses, fd_step)?;
    let worst = r.max_momentum_residual.max(r.max_energy_residual).max(r.max_relative_speed_residual);
    Ok(KinematicsReport {
        samples,
        seed,
        masses: masses.map(|m| [m.m_alpha, m.m_beta]),
        max_momentum_residual: r.max_momentum_residual,
        max_energy_residual: r.max_energy_residual,
        max_relative_speed_residual: r.max_relative_speed_residual,
        residual_tolerance: KINEMATICS_TOL,
        jacobian_samples,
        jacobian_residual: jac,
        jacobian_tolerance: JACOBIAN_TOL,
        fd_step,
        pass: worst <= KINEMATICS_TOL && jac <= JACOBIAN_TOL,
    })
}

/// One row of the equilibrium and pairing convergence table.
#[derive(Clone, Debug, Serialize)]
pub struct QtestRow {
    pub points_per_axis: usize,
    pub spacing: f64,
    /// `nu`-weighted norm of `sum_b Q^{ab}(mu^a, mu^b)`.
    pub residual: f64,
    pub residual_max: f64,
    /// `log(r_prev / r) / log(h_prev / h)`; NaN on the first row.
    pub order: f64,
    /// Largest `|<CF, Psi_j>|` over states and invariants.
    pub pairing: f64,
    /// Same through the exact pre/post symmetrization (roundoff only).
    pub symmetrized_pairing: f64,
}

pub const QTEST_HEADER: [&str; 7] =
    ["points_per_axis", "spacing", "residual", "residual_max", "order", "pairing", "symmetrized_pairing"];

impl QtestRow {
    pub fn values(&self) -> Vec<f64> {
        vec![
            self.points_per_axis as f64,
            self.spacing,
            self.residual,
            self.residual_max,
            self.order,
            self.pairing,
            self.symmetrized_pairing,
        ]
    }
}

pub fn qtest_rows(
    mixture: MixtureConfig,
    quad: QuadratureSpec,
    grids: &[usize],
    radius_factor: f64,
    states: usize,
    seed: u64,
) -> Result<Vec<QtestRow>> {
    let mut rows: Vec<QtestRow> = Vec::with_capacity(grids.len());
    for &n in grids {
        let grid = VelocityGrid::for_masses(mixture.masses, n, radius_factor)?;
        let op = CollisionOperator::new(mixture, quad, &grid)?;
        let res = equilibrium_residual(&op)?;
        let (mut pairing, mut sym) = (0.0f64, 0.0f64);
        for k in 0..states {
            let [fa, fb] = random_positive_state(mixture.masses, &grid, seed.wrapping_add(k as u64));
            for x in op.collision_invariant_pairing(&fa, &fb)? {
                pairing = pairing.max(x.abs());
            }
            for x in op.symmetrized_invariant_pairing(&fa, &fb)? {
                sym = sym.max(x.abs());
            }
        }
        let order = match rows.last() {
            Some(p) => (p.residual / res.nu_norm).ln() / (p.spacing / grid.spacing()).ln(),
            None => f64::NAN,
        };
        rows.push(QtestRow {
            points_per_axis: n,
            spacing: grid.spacing(),
            residual: res.nu_norm,
            residual_max: res.max_abs,
            order,
            pairing,
            symmetrized_pairing: sym,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentsReport {
    pub masses: [f64; 2],
    pub labels: [&'static str; 6],
    pub conservation: [f64; 6],
    /// Per spatial point: `a^A, a^B`.
    pub a: Vec<[f64; 2]>,
    pub b: Vec<[f64; 3]>,
    pub c: Vec<f64>,
    /// `max |<chi_i, chi_j> - delta_ij|` of the grid basis.
    pub basis_orthonormality_error: f64,
}

pub const CONSERVATION_LABELS: [&str; 6] = ["mass_A", "mass_B", "momentum_1", "momentum_2", "momentum_3", "energy"];

pub fn moments_report(masses: MassPair, vgrid: &VelocityGrid, xgrid: &crate::vgrid::SpatialGrid, f: &DistributionPair) -> Result<MomentsReport> {
    let basis = build_invariant_basis(masses, vgrid)?;
    let conservation = conservation_functionals(masses, vgrid, xgrid, f)?;
    let st = macroscopic_moments(&basis, f)?;
    let mut err = 0.0f64;
    for i in 0..6 {
        for j in 0..6 {
            let d = if i == j { 1.0 } else { 0.0 };
            err = err.max((pair_inner(vgrid, basis.vector(i), basis.vector(j)) - d).abs());
        }
    }
    Ok(MomentsReport {
        masses: [masses.m_alpha, masses.m_beta],
        labels: CONSERVATION_LABELS,
        conservation,
        a: st.a,
        b: st.b,
        c: st.c,
        basis_orthonormality_error: err,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct CoercivityReport {
    pub masses: [f64; 2],
    pub gamma: f64,
    pub points_per_axis: usize,
    pub radius: f64,
    pub delta_hat: f64,
    /// Ritz residual of `delta_hat`, relative to the largest Ritz value.
    pub lanczos_residual: f64,
    pub iterations: usize,
    /// Largest normalized `nu`-inner product of the minimizer with an invariant.
    pub orthogonality: f64,
    pub asymmetry: f64,
    pub kernel_residuals: [f64; 6],
    pub epsilon: Option<f64>,
    pub m_trunc: Option<f64>,
    /// Weighted operator ratio of the small part `K_s` on the smooth test space.
    pub ks_ratio: Option<f64>,
    pub ks_subspace_dim: Option<usize>,
}

pub fn coercivity_report(args: &CoercivityArgs) -> Result<(CoercivityReport, Option<Vec<f64>>)> {
    let mixture = args.mixture.mixture()?;
    let grid = VelocityGrid::for_masses(mixture.masses, args.grid, args.radius_factor)?;
    let quad = QuadratureSpec { sphere_points: args.sphere_points, ..QuadratureSpec::default() };
    let op = CollisionOperator::new(mixture, quad, &grid)?;
    let budget = args.budget_mib.saturating_mul(1 << 20);
    let l = assemble_l(&op, budget)?;
    let basis = build_invariant_basis(mixture.masses, &grid)?;
    let c = estimate_coercivity(&l, &basis, LanczosOptions { seed: args.seed, ..LanczosOptions::default() })?;
    let (epsilon, m_trunc, ratio, change) = if args.no_split {
        (None, None, None, None)
    } else {
        let cfg = KernelSplitConfig::new(args.eps, args.mtrunc)?;
        let r = ks_ratio(&op, cfg, args.weight_power, budget)?;
        (Some(args.eps), Some(args.mtrunc), Some(r.ratio), Some(r.subspace_dim))
    };
    let spectrum = match &args.spectrum {
        Some(_) => Some(dense_coercivity(&l, &basis)?),
        None => None,
    };
    Ok((
        CoercivityReport {
            masses: [mixture.masses.m_alpha, mixture.masses.m_beta],
            gamma: mixture.gamma,
            points_per_axis: args.grid,
            radius: grid.radius(),
            delta_hat: c.delta_hat,
            lanczos_residual: c.residual,
            iterations: c.iterations,
            orthogonality: c.orthogonality,
            asymmetry: l.asymmetry(),
            kernel_residuals: l.kernel_residuals(&basis)?,
            epsilon,
            m_trunc,
            ks_ratio: ratio,
            ks_subspace_dim: change,
        },
        spectrum,
    ))
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationSummary {
    pub status: String,
    pub steps: usize,
    pub t_final: f64,
    /// `max_t |C_j(t) - C_j(0)| / (scale_j t_final)` per functional.
    pub conservation_drift: [f64; 6],
    pub max_norm_growth: f64,
    pub min_f: f64,
    pub coercivity_ratio: Option<f64>,
    pub sweep_residual: f64,
    pub monitors_path: PathBuf,
    pub final_state_path: PathBuf,
}

/// Runs a configured simulation and writes both output files.
pub fn simulate(cfg: &RunConfig) -> Result<SimulationSummary> {
    let vgrid = cfg.velocity_grid()?;
    let xgrid = cfg.spatial_grid()?;
    let ops = Operators::new(cfg.mixture, cfg.quad, &vgrid, &xgrid, cfg.dense_budget())?;
    let f0 = match cfg.initial_profile {
        InitialProfile::Shear => shear_initial_data(&ops, cfg.initial_amplitude),
        InitialProfile::Zero => DistributionPair::zeros(xgrid.len(), vgrid.len()),
    };
    let out = run(&cfg.solver, &ops, &f0)?;
    io::write_monitors(&cfg.monitors_path, &out.labels, &out.records)?;
    let masses = cfg.mixture.masses;
    io::write_field(
        &cfg.final_state_path,
        &vgrid,
        &xgrid,
        &out.final_state,
        &[("mass_a", masses.m_alpha.to_string()), ("mass_b", masses.m_beta.to_string())],
    )?;
    let scale = conservation_scale(&ops, &f0)?;
    let first = &out.records[0];
    let last = out.records.last().unwrap_or(first);
    let span = last.t.max(f64::MIN_POSITIVE);
    let mut drift = [0.0f64; 6];
    for r in &out.records {
        for j in 0..6 {
            if scale[j] > 0.0 {
                drift[j] = drift[j].max((r.conservation[j] - first.conservation[j]).abs() / scale[j] / span);
            }
        }
    }
    let n0: f64 = first.instantaneous_norms.iter().sum();
    let growth = out
        .records
        .iter()
        .map(|r| r.instantaneous_norms.iter().sum::<f64>() / n0.max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let ratio = if out.records.len() >= 2 { coercivity_time_integral(&out.records, 0.0, last.t)?.ratio } else { None };
    Ok(SimulationSummary {
        status: match &out.status {
            RunStatus::Completed => "completed".into(),
            RunStatus::Aborted(m) => format!("aborted: {m}"),
        },
        steps: out.records.len() - 1,
        t_final: last.t,
        conservation_drift: drift,
        max_norm_growth: growth,
        min_f: out.records.iter().map(|r| r.min_f).fold(f64::INFINITY, f64::min),
        coercivity_ratio: ratio,
        sweep_residual: out.sweep_residual,
        monitors_path: cfg.monitors_path.clone(),
        final_state_path: cfg.final_state_path.clone(),
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string_pretty(v).map_err(|e| Error::Contract(format!("JSON encoding failed: {e}")))
}

/// What a command produced: text for stdout and whether it counts as success.
struct Outcome {
    text: String,
    ok: bool,
}

fn execute(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::KinematicsCheck(a) => {
            let masses = match (a.mass_a, a.mass_b) {
                (Some(x), Some(y)) => Some(MassPair::new(x, y)?),
                (None, None) => None,
                _ => return Err(Error::Config("give both --mass-a and --mass-b or neither".into())),
            };
            let r = kinematics_report(a.samples, a.seed, masses, a.jacobian_samples, a.fd_step)?;
            Ok(Outcome { ok: r.pass, text: to_json(&r)? })
        }
        Command::Qtest(a) => {
            let interpolation = crate::interp::Interpolation::parse(&a.interpolation)
                .ok_or_else(|| Error::Config(format!("unknown interpolation `{}`", a.interpolation)))?;
            let quad = QuadratureSpec { sphere_points: a.sphere_points, interpolation, ..QuadratureSpec::default() };
            let rows = qtest_rows(a.mixture.mixture()?, quad, &a.grids, a.radius_factor, a.states, a.seed)?;
            let vals: Vec<Vec<f64>> = rows.iter().map(|r| r.values()).collect();
            Ok(Outcome { ok: true, text: io::table_string(&QTEST_HEADER, &vals) })
        }
        Command::Moments(a) => {
            let file = io::read_field(&a.state)?;
            let pick = |k: &str, d: f64| file.metadata.get(k).and_then(|s| s.parse::<f64>().ok()).unwrap_or(d);
            let masses = MassPair::new(pick("mass_a", a.mass_a), pick("mass_b", a.mass_b))?;
            let r = moments_report(masses, &file.vgrid, &file.xgrid, &file.field)?;
            Ok(Outcome { ok: true, text: to_json(&r)? })
        }
        Command::Coercivity(a) => {
            let (r, spectrum) = coercivity_report(&a)?;
            if let (Some(path), Some(s)) = (&a.spectrum, spectrum) {
                let rows: Vec<Vec<f64>> = s.iter().enumerate().map(|(k, x)| vec![k as f64, *x]).collect();
                io::write_table(path, &["index", "eigenvalue"], &rows)?;
            }
            Ok(Outcome { ok: r.delta_hat > 0.0, text: to_json(&r)? })
        }
        Command::KernelDecay(a) => {
            let mixture = a.mixture.mixture()?;
            let cfg = if a.eps == 0.0 {
                KernelSplitConfig::no_cutoff()
            } else {
                KernelSplitConfig { m_trunc: f64::INFINITY, ..KernelSplitConfig::new(a.eps, 2.0)? }
            };
            let rows = verify_kernel_decay(&mixture, &cfg, a.alpha, a.beta, &a.speeds, a.weight_power)?;
            let vals: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.speed, r.integral, r.normalized, r.error]).collect();
            Ok(Outcome { ok: true, text: io::table_string(&["speed", "integral", "normalized", "error"], &vals) })
        }
        Command::Simulate(a) => {
            let text = std::fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
            let mut cfg = parse_config(&text)?;
            if let Some(p) = a.monitors {
                cfg.monitors_path = p;
            }
            if let Some(p) = a.final_state {
                cfg.final_state_path = p;
            }
            let s = simulate(&cfg)?;
            Ok(Outcome { ok: s.status == "completed", text: to_json(&s)? })
        }
        Command::Selftest(a) => {
            let r = crate::selftest::run_suite(a.seed, &a.out)?;
            Ok(Outcome { ok: r.passed, text: to_json(&r)? })
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 success, 1 runtime failure, 2 usage error.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    parallel::init_from_env();
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(o) => {
            println!("{}", o.text.trim_end());
            if o.ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
