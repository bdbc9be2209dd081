//! Quadrature on the unit sphere: fixed Lebedev node sets and seeded
//! Monte-Carlo directions.

use crate::error::{Error, Result};
use crate::kinematics::sample_sphere;
use crate::vec3::Vec3;
use std::f64::consts::PI;

pub const LEBEDEV_ORDERS: [usize; 5] = [6, 14, 26, 38, 50];

/// Directions with weights summing to `4 pi`.
#[derive(Clone, Debug, PartialEq)]
pub struct DirectionSet {
    pub dirs: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl DirectionSet {
    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(Vec3) -> f64) -> f64 {
        self.dirs.iter().zip(&self.weights).map(|(d, w)| w * f(*d)).sum()
    }

    /// Keeps one direction of each antipodal pair with doubled weight.
    /// Exact for integrands even under `w -> -w`; requires a centrally
    /// symmetric set.
    pub fn folded(&self) -> Result<DirectionSet> {
        let mut out = DirectionSet { dirs: Vec::new(), weights: Vec::new() };
        for (d, w) in self.dirs.iter().zip(&self.weights) {
            if is_upper(*d) {
                let anti = [-d[0], -d[1], -d[2]];
                let partner = self
                    .dirs
                    .iter()
                    .zip(&self.weights)
                    .find(|(e, _)| (e[0] - anti[0]).abs() + (e[1] - anti[1]).abs() + (e[2] - anti[2]).abs() < 1e-12);
                match partner {
                    Some((_, pw)) if (pw - w).abs() <= 1e-14 * w.abs() => {
                        out.dirs.push(*d);
                        out.weights.push(2.0 * w);
                    }
                    _ => return Err(Error::Contract("direction set is not centrally symmetric".into())),
                }
            }
        }
        Ok(out)
    }
}

fn is_upper(d: Vec3) -> bool {
    for c in d {
        if c > 1e-14 {
            return true;
        }
        if c < -1e-14 {
            return false;
        }
    }
    false
}

fn push_orbit(set: &mut DirectionSet, base: Vec3, weight: f64) {
    let mut seen: Vec<Vec3> = Vec::new();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    for p in perms {
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    let d = [sx * base[p[0]], sy * base[p[1]], sz * base[p[2]]];
                    let dup = seen
                        .iter()
                        .any(|e| (e[0] - d[0]).abs() + (e[1] - d[1]).abs() + (e[2] - d[2]).abs() < 1e-14);
                    if !dup {
                        seen.push(d);
                    }
                }
            }
        }
    }
    for d in seen {
        set.dirs.push(d);
        set.weights.push(4.0 * PI * weight);
    }
}

/// Lebedev rule with `order` points (6, 14, 26, 38 or 50).
pub fn lebedev(order: usize) -> Result<DirectionSet> {
    let mut s = DirectionSet { dirs: Vec::new(), weights: Vec::new() };
    let axis = [1.0, 0.0, 0.0];
    let edge = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2, 0.0];
    let r3 = 1.0 / 3f64.sqrt();
    let corner = [r3, r3, r3];
    match order {
        6 => push_orbit(&mut s, axis, 1.0 / 6.0),
        14 => {
            push_orbit(&mut s, axis, 1.0 / 15.0);
            push_orbit(&mut s, corner, 3.0 / 40.0);
        }
        26 => {
            push_orbit(&mut s, axis, 1.0 / 21.0);
            push_orbit(&mut s, edge, 4.0 / 105.0);
            push_orbit(&mut s, corner, 9.0 / 280.0);
        }
        38 => {
            push_orbit(&mut s, axis, 1.0 / 105.0);
            push_orbit(&mut s, corner, 9.0 / 280.0);
            push_orbit(&mut s, [0.4597008433809831, 0.8880738339771153, 0.0], 1.0 / 35.0);
        }
        50 => {
            push_orbit(&mut s, axis, 4.0 / 315.0);
            push_orbit(&mut s, edge, 64.0 / 2835.0);
            push_orbit(&mut s, corner, 27.0 / 1280.0);
            let a = 1.0 / 11f64.sqrt();
            push_orbit(&mut s, [a, a, 3.0 * a], 14641.0 / 725760.0);
        }
        _ => {
            return Err(Error::Config(format!(
                "sphere_points must be one of {LEBEDEV_ORDERS:?}, got {order}"
            )))
        }
    }
    Ok(s)
}

/// Seeded uniform directions with equal weights; antipodes are added so the
/// set folds exactly.
pub fn monte_carlo(seed: u64, n: usize) -> Result<DirectionSet> {
    if n == 0 {
        return Err(Error::Config("Monte-Carlo direction count must be positive".into()));
    }
    let dirs = sample_sphere(seed, n);
    let w = 4.0 * PI / n as f64;
    Ok(DirectionSet { dirs: dirs.iter().map(|d| if is_upper(*d) { *d } else { [-d[0], -d[1], -d[2]] }).collect(), weights: vec![w; n] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_counts() {
        for o in LEBEDEV_ORDERS {
            let s = lebedev(o).unwrap();
            assert_eq!(s.len(), o);
            assert!((s.weights.iter().sum::<f64>() - 4.0 * PI).abs() < 1e-12);
            assert_eq!(s.folded().unwrap().len(), o / 2);
        }
    }
}
