//! Trilinear interpolation of grid fields at off-grid points, in lattice
//! index coordinates. Values outside the cube are zero.

use serde::{Deserialize, Serialize};

/// What is interpolated at post-collision points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Interpolation {
    /// Trilinear on the Maxwellian-normalized field, Maxwellian restored exactly.
    Normalized,
    /// Trilinear on the raw field.
    Plain,
}

impl Interpolation {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "normalized" => Some(Self::Normalized),
            "plain" | "trilinear" => Some(Self::Plain),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Normalized => "normalized",
            Self::Plain => "plain",
        }
    }
}

/// Largest gap `log mu(v') - log mu(corner)` taken at face value by
/// normalized interpolation; wider gaps are clipped to it.
pub const MAX_LOG_GAP: f64 = 16.0;

const EDGE_TOL: f64 = 1e-9;

/// Corner indices and weights for a point `s` in index units on an
/// `n x n x n` lattice, or `None` outside the cube.
#[inline]
pub fn trilinear_stencil(n: usize, s: [f64; 3]) -> Option<([usize; 8], [f64; 8])> {
    let top = (n - 1) as f64;
    let mut base = [0usize; 3];
    let mut t = [0.0f64; 3];
    for a in 0..3 {
        let mut x = s[a];
        if !(x >= -EDGE_TOL && x <= top + EDGE_TOL) {
            return None;
        }
        x = x.clamp(0.0, top);
        let i = (x.floor() as usize).min(n - 2);
        base[a] = i;
        t[a] = x - i as f64;
    }
    let mut idx = [0usize; 8];
    let mut w = [0.0f64; 8];
    let mut c = 0;
    for di in 0..2 {
        let wx = if di == 0 { 1.0 - t[0] } else { t[0] };
        for dj in 0..2 {
            let wy = if dj == 0 { 1.0 - t[1] } else { t[1] };
            for dk in 0..2 {
                let wz = if dk == 0 { 1.0 - t[2] } else { t[2] };
                idx[c] = ((base[0] + di) * n + base[1] + dj) * n + base[2] + dk;
                w[c] = wx * wy * wz;
                c += 1;
            }
        }
    }
    Some((idx, w))
}

#[inline]
pub fn trilinear(field: &[f64], n: usize, s: [f64; 3]) -> f64 {
    match trilinear_stencil(n, s) {
        Some((idx, w)) => {
            let mut acc = 0.0;
            for c in 0..8 {
                acc += w[c] * field[idx[c]];
            }
            acc
        }
        None => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_linear_functions() {
        let n = 5;
        let f: Vec<f64> = (0..n * n * n)
            .map(|p| {
                let (i, j, k) = (p / 25, (p / 5) % 5, p % 5);
                1.0 + 2.0 * i as f64 - 0.5 * j as f64 + 0.25 * k as f64
            })
            .collect();
        let s = [1.3, 3.7, 4.0];
        let want = 1.0 + 2.0 * 1.3 - 0.5 * 3.7 + 0.25 * 4.0;
        assert!((trilinear(&f, n, s) - want).abs() < 1e-13);
        assert_eq!(trilinear(&f, n, [-0.1, 1.0, 1.0]), 0.0);
        assert_eq!(trilinear(&f, n, [1.0, 4.2, 1.0]), 0.0);
    }
}
