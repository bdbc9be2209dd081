//! Binary elastic collisions between particles of unequal mass.
//!
//! Convention: `v` belongs to species alpha (mass `m_alpha`), `v_star` to
//! species beta (mass `m_beta`), and the omega-representation is used:
//!
//! ```text
//! v'  = v  - 2 m_beta /(m_alpha+m_beta) [(v - v*).w] w
//! v*' = v* + 2 m_alpha/(m_alpha+m_beta) [(v - v*).w] w
//! ```

use crate::error::{Error, Result};
use crate::vec3::{self, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const UNIT_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassPair {
    pub m_alpha: f64,
    pub m_beta: f64,
}

impl MassPair {
    pub fn new(m_alpha: f64, m_beta: f64) -> Result<Self> {
        for (name, m) in [("m_alpha", m_alpha), ("m_beta", m_beta)] {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {m}")));
            }
        }
        Ok(Self { m_alpha, m_beta })
    }

    /// `(2 m_beta/(m_alpha+m_beta), 2 m_alpha/(m_alpha+m_beta))`; they sum to 2.
    #[inline]
    pub fn coefficients(&self) -> (f64, f64) {
        let total = self.m_alpha + self.m_beta;
        (2.0 * self.m_beta / total, 2.0 * self.m_alpha / total)
    }

    pub fn swapped(&self) -> Self {
        Self { m_alpha: self.m_beta, m_beta: self.m_alpha }
    }

    pub fn min(&self) -> f64 {
        self.m_alpha.min(self.m_beta)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionInput {
    pub v: Vec3,
    pub v_star: Vec3,
    pub omega: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionOutcome {
    pub v_prime: Vec3,
    pub v_star_prime: Vec3,
}

/// Post-collision velocities; rejects `omega` that is not unit length.
pub fn post_collision(masses: MassPair, input: CollisionInput) -> Result<CollisionOutcome> {
    MassPair::new(masses.m_alpha, masses.m_beta)?;
    let n = vec3::norm(input.omega);
    if !((n - 1.0).abs() <= UNIT_TOL) {
        return Err(Error::Contract(format!("|omega| = {n} is not 1 within {UNIT_TOL:e}")));
    }
    Ok(post_collision_unchecked(masses, input))
}

#[inline]
pub fn post_collision_unchecked(masses: MassPair, input: CollisionInput) -> CollisionOutcome {
    let (ca, cb) = masses.coefficients();
    let s = vec3::dot(vec3::sub(input.v, input.v_star), input.omega);
    CollisionOutcome {
        v_prime: vec3::axpy(input.v, -ca * s, input.omega),
        v_star_prime: vec3::axpy(input.v_star, cb * s, input.omega),
    }
}

/// `cos(theta) = w.(v - v*)/|v - v*|`, zero when the velocities coincide.
pub fn cos_theta(input: &CollisionInput) -> f64 {
    let u = vec3::sub(input.v, input.v_star);
    let n = vec3::norm(u);
    if n == 0.0 {
        0.0
    } else {
        vec3::dot(u, input.omega) / n
    }
}

/// Central-difference determinant of `(v, v*) -> (v', v*')` at fixed omega.
pub fn jacobian_determinant(masses: MassPair, input: CollisionInput, fd_step: f64) -> Result<f64> {
    if !(fd_step > 0.0 && fd_step <= 1e-3) {
        return Err(Error::Numerical(format!("fd_step {fd_step} outside (0, 1e-3]")));
    }
    post_collision(masses, input)?;
    let mut jac = nalgebra::SMatrix::<f64, 6, 6>::zeros();
    for col in 0..6 {
        let eval = |delta: f64| {
            let mut inp = input;
            if col < 3 {
                inp.v[col] += delta;
            } else {
                inp.v_star[col - 3] += delta;
            }
            let out = post_collision_unchecked(masses, inp);
            [
                out.v_prime[0],
                out.v_prime[1],
                out.v_prime[2],
                out.v_star_prime[0],
                out.v_star_prime[1],
                out.v_star_prime[2],
            ]
        };
        let plus = eval(fd_step);
        let minus = eval(-fd_step);
        for row in 0..6 {
            jac[(row, col)] = (plus[row] - minus[row]) / (2.0 * fd_step);
        }
    }
    let det = jac.determinant();
    if !det.is_finite() {
        return Err(Error::Numerical("non-finite Jacobian determinant".into()));
    }
    Ok(det)
}

/// Seeded uniform samples on the unit sphere.
pub fn sample_sphere(seed: u64, n: usize) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| random_unit(&mut rng)).collect()
}

pub(crate) fn random_unit<R: Rng>(rng: &mut R) -> Vec3 {
    // Archimedes: z uniform on [-1,1], azimuth uniform.
    let z: f64 = rng.gen_range(-1.0..=1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    vec3::normalize([r * phi.cos(), r * phi.sin(), z])
}

/// Worst-case conservation residuals over a batch of random collisions.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct ConservationReport {
    pub samples: usize,
    pub max_momentum_residual: f64,
    pub max_energy_residual: f64,
    pub max_relative_speed_residual: f64,
}

/// Random collisions with `|v|, |v*| <= speed_bound`. Masses are fixed when
/// given, otherwise drawn uniformly from `mass_range`.
pub fn check_random_collisions(
    seed: u64,
    samples: usize,
    masses: Option<MassPair>,
    mass_range: (f64, f64),
    speed_bound: f64,
) -> ConservationReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = ConservationReport { samples, ..Default::default() };
    for _ in 0..samples {
        let m = masses.unwrap_or_else(|| MassPair {
            m_alpha: rng.gen_range(mass_range.0..=mass_range.1),
            m_beta: rng.gen_range(mass_range.0..=mass_range.1),
        });
        let v = vec3::scale(speed_bound * rng.gen::<f64>().cbrt(), random_unit(&mut rng));
        let vs = vec3::scale(speed_bound * rng.gen::<f64>().cbrt(), random_unit(&mut rng));
        let omega = random_unit(&mut rng);
        let out = post_collision_unchecked(m, CollisionInput { v, v_star: vs, omega });
        for k in 0..3 {
            let before = m.m_alpha * v[k] + m.m_beta * vs[k];
            let after = m.m_alpha * out.v_prime[k] + m.m_beta * out.v_star_prime[k];
            rep.max_momentum_residual = rep.max_momentum_residual.max((after - before).abs());
        }
        let e0 = m.m_alpha * vec3::norm2(v) + m.m_beta * vec3::norm2(vs);
        let e1 = m.m_alpha * vec3::norm2(out.v_prime) + m.m_beta * vec3::norm2(out.v_star_prime);
        if e0 > 0.0 {
            rep.max_energy_residual = rep.max_energy_residual.max((e1 - e0).abs() / e0);
        }
        let g0 = vec3::norm(vec3::sub(v, vs));
        let g1 = vec3::norm(vec3::sub(out.v_prime, out.v_star_prime));
        if g0 > 0.0 {
            rep.max_relative_speed_residual = rep.max_relative_speed_residual.max((g1 - g0).abs() / g0);
        }
    }
    rep
}

/// Largest `|det + 1|` over random configurations.
pub fn max_jacobian_residual(seed: u64, samples: usize, masses: Option<MassPair>, fd_step: f64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1ac0);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let m = masses.unwrap_or_else(|| MassPair {
            m_alpha: rng.gen_range(0.1..=10.0),
            m_beta: rng.gen_range(0.1..=10.0),
        });
        let v = vec3::scale(3.0 * rng.gen::<f64>(), random_unit(&mut rng));
        let vs = vec3::scale(3.0 * rng.gen::<f64>(), random_unit(&mut rng));
        let omega = random_unit(&mut rng);
        let det = jacobian_determinant(m, CollisionInput { v, v_star: vs, omega }, fd_step)?;
        worst = worst.max((det + 1.0).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unequal_head_on_example() {
        let m = MassPair::new(7.0, 8.0).unwrap();
        let out = post_collision(
            m,
            CollisionInput { v: [1.0, 0.0, 0.0], v_star: [0.0; 3], omega: [1.0, 0.0, 0.0] },
        )
        .unwrap();
        assert!((out.v_prime[0] + 1.0 / 15.0).abs() < 1e-15);
        assert!((out.v_star_prime[0] - 14.0 / 15.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_unit_omega_and_bad_mass() {
        let m = MassPair { m_alpha: 1.0, m_beta: 1.0 };
        let inp = CollisionInput { v: [1.0, 0.0, 0.0], v_star: [0.0; 3], omega: [1.0, 1.0, 0.0] };
        assert!(matches!(post_collision(m, inp), Err(Error::Contract(_))));
        assert!(matches!(MassPair::new(0.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn degenerate_fd_step() {
        let m = MassPair { m_alpha: 1.0, m_beta: 1.0 };
        let inp = CollisionInput { v: [1.0, 0.0, 0.0], v_star: [0.0; 3], omega: [0.0, 0.0, 1.0] };
        assert!(matches!(jacobian_determinant(m, inp, 0.0), Err(Error::Numerical(_))));
        assert!(matches!(jacobian_determinant(m, inp, 0.1), Err(Error::Numerical(_))));
    }
}
