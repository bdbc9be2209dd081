//! Flat `key = value` run configuration. `#` starts a comment, blank lines
//! are ignored, unknown and repeated keys are errors.

use crate::collision::{AngularKernel, KernelFamily, MixtureConfig, QuadMode, QuadratureSpec};
use crate::error::{Error, Result};
use crate::interp::Interpolation;
use crate::kinematics::MassPair;
use crate::linop::KernelSplitConfig;
use crate::solver::SolverConfig;
use crate::sphere::LEBEDEV_ORDERS;
use crate::vgrid::{SpatialGrid, VelocityGrid, DEFAULT_RADIUS_FACTOR};
use serde::Serialize;
use std::collections::BTreeSet;
use std::path::PathBuf;

/// Initial perturbation shapes for `simulate`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum InitialProfile {
    /// `A (v1^2 - v2^2)(m : sqrt mu) cos(x1)`
    Shear,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub mixture: MixtureConfig,
    pub velocity_points: usize,
    /// `None` means `radius_factor / sqrt(min mass)`.
    pub velocity_radius: Option<f64>,
    pub radius_factor: f64,
    pub spatial_dims: usize,
    pub spatial_points: usize,
    pub split: KernelSplitConfig,
    pub quad: QuadratureSpec,
    pub solver: SolverConfig,
    pub initial_profile: InitialProfile,
    pub initial_amplitude: f64,
    pub dense_budget_mib: usize,
    pub monitors_path: PathBuf,
    pub final_state_path: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mixture: MixtureConfig { masses: MassPair { m_alpha: 7.0, m_beta: 8.0 }, gamma: -1.0, kernel: AngularKernel::default() },
            velocity_points: 9,
            velocity_radius: None,
            radius_factor: DEFAULT_RADIUS_FACTOR,
            spatial_dims: 1,
            spatial_points: 8,
            split: KernelSplitConfig::default(),
            quad: QuadratureSpec::default(),
            solver: SolverConfig::default(),
            initial_profile: InitialProfile::Shear,
            initial_amplitude: 1e-3,
            dense_budget_mib: 1024,
            monitors_path: PathBuf::from("monitors.csv"),
            final_state_path: PathBuf::from("final_state.csv"),
            seed: 0,
        }
    }
}

/// Key, default as written in a file, one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("gamma", "-1", "soft-potential exponent, open interval (-3, 0)"),
    ("mass_a", "7", "mass of species A"),
    ("mass_b", "8", "mass of species B"),
    ("kernel", "abs_cos", "angular kernel: abs_cos or cos_squared"),
    ("c_b", "1", "angular kernel constant"),
    ("velocity_points", "9", "velocity nodes per axis, odd"),
    ("velocity_radius", "auto", "half-width of the velocity cube; auto = radius_factor/sqrt(min mass)"),
    ("radius_factor", "6", "used when velocity_radius = auto"),
    ("spatial_dims", "1", "1 or 3"),
    ("spatial_points", "8", "spatial nodes per axis"),
    ("epsilon", "0.25", "cutoff scale of chi"),
    ("m_trunc", "6", "truncation radius in |v| + |v*|"),
    ("sphere_points", "14", "Lebedev order (6, 14, 26, 38, 50) or Monte-Carlo count"),
    ("quadrature_mode", "deterministic", "deterministic or monte_carlo"),
    ("interpolation", "normalized", "normalized or plain"),
    ("dt", "0.05", "time step"),
    ("t_end", "1", "final time"),
    ("inner_iterations", "2", "fixed-point sweeps per collision step"),
    ("cfl_limit", "0.9", "bound on dt max|v| / h_x"),
    ("energy_order", "1", "order N of the monitored energy functional (<= 2)"),
    ("monitor_entropy", "true", "record entropy production"),
    ("blowup_factor", "1000", "norm growth treated as blow-up"),
    ("initial_profile", "shear", "shear or zero"),
    ("initial_amplitude", "0.001", "amplitude of the initial perturbation"),
    ("dense_budget_mib", "1024", "memory cap for dense operator matrices"),
    ("monitors_path", "monitors.csv", "monitor output"),
    ("final_state_path", "final_state.csv", "final state output"),
    ("seed", "0", "seed for every random choice"),
];

fn num(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v.parse().map_err(|_| Error::Parse { line, message: format!("`{key}` expects a number, got `{v}`") })?;
    if !x.is_finite() {
        return Err(Error::Range { key: key.into(), message: format!("{v} is not finite") });
    }
    Ok(x)
}

fn count(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| Error::Parse { line, message: format!("`{key}` expects a nonnegative integer, got `{v}`") })
}

fn boolean(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Parse { line, message: format!("`{key}` expects true or false, got `{v}`") }),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut c = RunConfig::default();
    let mut seen = BTreeSet::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::Parse { line, message: format!("expected `key = value`, got `{body}`") })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.iter().any(|(k, _, _)| *k == key) {
            return Err(Error::Parse { line, message: format!("unknown key `{key}`") });
        }
        if !seen.insert(key.to_string()) {
            return Err(Error::Parse { line, message: format!("key `{key}` given twice") });
        }
        match key {
            "gamma" => c.mixture.gamma = num(line, key, value)?,
            "mass_a" => c.mixture.masses.m_alpha = num(line, key, value)?,
            "mass_b" => c.mixture.masses.m_beta = num(line, key, value)?,
            "kernel" => {
                c.mixture.kernel.family = KernelFamily::parse(value)
                    .ok_or_else(|| Error::Parse { line, message: format!("unknown kernel `{value}`") })?
            }
            "c_b" => c.mixture.kernel.c_b = num(line, key, value)?,
            "velocity_points" => c.velocity_points = count(line, key, value)?,
            "velocity_radius" => c.velocity_radius = if value == "auto" { None } else { Some(num(line, key, value)?) },
            "radius_factor" => c.radius_factor = num(line, key, value)?,
            "spatial_dims" => c.spatial_dims = count(line, key, value)?,
            "spatial_points" => c.spatial_points = count(line, key, value)?,
            "epsilon" => c.split.epsilon = num(line, key, value)?,
            "m_trunc" => c.split.m_trunc = num(line, key, value)?,
            "sphere_points" => c.quad.sphere_points = count(line, key, value)?,
            "quadrature_mode" => {
                c.quad.mode = match value {
                    "deterministic" => QuadMode::Deterministic,
                    "monte_carlo" => QuadMode::MonteCarlo,
                    _ => return Err(Error::Parse { line, message: format!("unknown quadrature mode `{value}`") }),
                }
            }
            "interpolation" => {
                c.quad.interpolation = Interpolation::parse(value)
                    .ok_or_else(|| Error::Parse { line, message: format!("unknown interpolation `{value}`") })?
            }
            "dt" => c.solver.dt = num(line, key, value)?,
            "t_end" => c.solver.t_end = num(line, key, value)?,
            "inner_iterations" => c.solver.inner_iterations = count(line, key, value)?,
            "cfl_limit" => c.solver.cfl_limit = num(line, key, value)?,
            "energy_order" => c.solver.energy_order = count(line, key, value)?,
            "monitor_entropy" => c.solver.monitor_entropy = boolean(line, key, value)?,
            "blowup_factor" => c.solver.blowup_factor = num(line, key, value)?,
            "initial_profile" => {
                c.initial_profile = match value {
                    "shear" => InitialProfile::Shear,
                    "zero" => InitialProfile::Zero,
                    _ => return Err(Error::Parse { line, message: format!("unknown initial profile `{value}`") }),
                }
            }
            "initial_amplitude" => c.initial_amplitude = num(line, key, value)?,
            "dense_budget_mib" => c.dense_budget_mib = count(line, key, value)?,
            "monitors_path" => c.monitors_path = PathBuf::from(value),
            "final_state_path" => c.final_state_path = PathBuf::from(value),
            "seed" => c.seed = count(line, key, value)? as u64,
            _ => unreachable!(),
        }
    }
    c.quad.seed = c.seed;
    c.validate()?;
    Ok(c)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        MixtureConfig::new(self.mixture.masses, self.mixture.gamma, self.mixture.kernel)?;
        if self.velocity_points < 3 || self.velocity_points % 2 == 0 {
            return Err(Error::Range { key: "velocity_points".into(), message: format!("{} must be odd and >= 3", self.velocity_points) });
        }
        if let Some(r) = self.velocity_radius {
            if !(r > 0.0) {
                return Err(Error::Range { key: "velocity_radius".into(), message: format!("{r} must be positive") });
            }
        }
        if !(self.radius_factor > 0.0) {
            return Err(Error::Range { key: "radius_factor".into(), message: "must be positive".into() });
        }
        if self.spatial_dims != 1 && self.spatial_dims != 3 {
            return Err(Error::Range { key: "spatial_dims".into(), message: format!("{} must be 1 or 3", self.spatial_dims) });
        }
        if self.spatial_points < 2 {
            return Err(Error::Range { key: "spatial_points".into(), message: "must be >= 2".into() });
        }
        KernelSplitConfig::new(self.split.epsilon, self.split.m_trunc)?;
        match self.quad.mode {
            QuadMode::Deterministic if !LEBEDEV_ORDERS.contains(&self.quad.sphere_points) => {
                return Err(Error::Range {
                    key: "sphere_points".into(),
                    message: format!("{} is not one of {:?}", self.quad.sphere_points, LEBEDEV_ORDERS),
                });
            }
            QuadMode::MonteCarlo if self.quad.sphere_points < 2 => {
                return Err(Error::Range { key: "sphere_points".into(), message: "must be >= 2".into() });
            }
            _ => {}
        }
        self.solver.validate()?;
        if self.solver.energy_order > 2 {
            return Err(Error::Range { key: "energy_order".into(), message: "must be <= 2".into() });
        }
        if !(self.solver.blowup_factor > 1.0) {
            return Err(Error::Range { key: "blowup_factor".into(), message: "must exceed 1".into() });
        }
        if !self.initial_amplitude.is_finite() {
            return Err(Error::Range { key: "initial_amplitude".into(), message: "must be finite".into() });
        }
        if self.dense_budget_mib == 0 {
            return Err(Error::Range { key: "dense_budget_mib".into(), message: "must be positive".into() });
        }
        Ok(())
    }

    pub fn velocity_grid(&self) -> Result<VelocityGrid> {
        match self.velocity_radius {
            Some(r) => VelocityGrid::new(r, self.velocity_points),
            None => VelocityGrid::for_masses(self.mixture.masses, self.velocity_points, self.radius_factor),
        }
    }

    pub fn spatial_grid(&self) -> Result<SpatialGrid> {
        SpatialGrid::new(self.spatial_dims, self.spatial_points)
    }

    pub fn dense_budget(&self) -> usize {
        self.dense_budget_mib.saturating_mul(1 << 20)
    }
}

/// A config file listing every key at its default, with comments.
pub fn default_config_text() -> String {
    let mut s = String::new();
    for (k, v, d) in KEYS {
        s.push_str(&format!("# {d}\n{k} = {v}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_gives_defaults() {
        let c = parse_config("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.mixture.gamma, -1.0);
        assert_eq!((c.mixture.masses.m_alpha, c.mixture.masses.m_beta), (7.0, 8.0));
        assert_eq!((c.split.epsilon, c.split.m_trunc), (0.25, 6.0));
    }

    #[test]
    fn default_text_round_trips() {
        assert_eq!(parse_config(&default_config_text()).unwrap(), RunConfig::default());
    }

    #[test]
    fn gamma_out_of_range_names_key() {
        match parse_config("gamma = -3.5") {
            Err(Error::Range { key, message }) => {
                assert_eq!(key, "gamma");
                assert!(message.contains("(-3, 0)"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn line_numbers_and_unknown_keys() {
        match parse_config("# c\n\nfoo = 1") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("dt = 0.1\ndt = 0.2"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("dt 0.1"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_config("dt = abc"), Err(Error::Parse { line: 1, .. })));
    }
}
