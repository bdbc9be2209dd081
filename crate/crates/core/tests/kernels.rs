use binarykin::collision::{AngularKernel, KernelFamily, MixtureConfig};
use binarykin::kinematics::{post_collision, CollisionInput, MassPair};
use binarykin::linop::{eval_kernel_k1, eval_kernel_k2, hybrid_prefactor, kernel_measure_factor, KernelSplitConfig, Orientation};
use binarykin::vec3::{self, Vec3};
use std::f64::consts::PI;

/// Gauss-Legendre nodes and weights on `[a, b]`.
fn gauss(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
    }
    out
}

/// Orthonormal `(e, f1, f2)` with `e` along the spherical angles.
fn frame(theta: f64, phi: f64) -> [Vec3; 3] {
    let (st, ct, sp, cp) = (theta.sin(), theta.cos(), phi.sin(), phi.cos());
    [[st * cp, st * sp, ct], [ct * cp, ct * sp, -st], [-sp, cp, 0.0]]
}

fn sqrt_mu(m: f64, v: Vec3) -> f64 {
    (m / (2.0 * PI)).powf(0.75) * (-0.25 * m * vec3::norm2(v)).exp()
}

fn test_fn(w: Vec3) -> f64 {
    (-0.5 * vec3::norm2(vec3::sub(w, [0.3, -0.2, 0.5]))).exp()
}

/// `int du dw |u|^g b sqrt(mu_a(v')) sqrt(mu_b(v*)) g(v*')` in `(u, w)`
/// coordinates through the collision map.
fn hybrid_direct(mix: &MixtureConfig, v: Vec3, rmax: f64) -> f64 {
    let (ma, mb) = (mix.mass(0), mix.mass(1));
    let radial = gauss(80, 0.0, rmax);
    let pol = gauss(20, 0.0, PI);
    let azi = gauss(40, 0.0, 2.0 * PI);
    let half = gauss(16, 0.0, 0.5 * PI);
    let mut total = 0.0;
    for &(tu, wtu) in &pol {
        for &(pu, wpu) in &azi {
            let [e, f1, f2] = frame(tu, pu);
            for &(r, wr) in &radial {
                let u = vec3::scale(r, e);
                let vs = vec3::add(v, u);
                let outer = wtu * wpu * wr * tu.sin() * r * r * r.powf(mix.gamma);
                // omega and -omega give the same outcome: integrate one hemisphere twice.
                for &(t, wt) in &half {
                    for &(p, wp) in &azi {
                        let (st, ct) = (t.sin(), t.cos());
                        let om = vec3::add(vec3::scale(ct, e), vec3::add(vec3::scale(st * p.cos(), f1), vec3::scale(st * p.sin(), f2)));
                        let o = post_collision(mix.masses, CollisionInput { v, v_star: vs, omega: om }).unwrap();
                        let val = mix.kernel.eval(ct) * sqrt_mu(ma, o.v_prime) * sqrt_mu(mb, vs) * test_fn(o.v_star_prime);
                        total += 2.0 * outer * wt * wp * st * val;
                    }
                }
            }
        }
    }
    total
}

/// Same integral through the pointwise hybrid kernel over `u_par in R^3`,
/// `u_perp` in the orthogonal plane.
fn hybrid_kernel(mix: &MixtureConfig, v: Vec3, rmax: f64) -> f64 {
    let (ma, mb) = (mix.mass(0), mix.mass(1));
    let cfg = KernelSplitConfig::no_cutoff();
    let radial = gauss(80, 0.0, rmax);
    let pol = gauss(20, 0.0, PI);
    let azi = gauss(40, 0.0, 2.0 * PI);
    let mut total = 0.0;
    for &(te, wte) in &pol {
        for &(pe, wpe) in &azi {
            let [e, f1, f2] = frame(te, pe);
            for &(a, wa) in &radial {
                let u_par = vec3::scale(a, e);
                for &(rho, wrho) in &radial {
                    for &(psi, wpsi) in &azi {
                        let u_perp = vec3::add(vec3::scale(rho * psi.cos(), f1), vec3::scale(rho * psi.sin(), f2));
                        let k = eval_kernel_k2(mix, &cfg, 0, 1, v, u_perp, u_par).unwrap();
                        let vsp = vec3::add(v, vec3::add(u_perp, vec3::scale((mb - ma) / (ma + mb), u_par)));
                        total += wte * wpe * te.sin() * wa * a * a * wrho * rho * wpsi * k * test_fn(vsp);
                    }
                }
            }
        }
    }
    hybrid_prefactor(ma, mb) * total
}

#[test]
fn hybrid_kernel_matches_direct_integral() {
    let mix = MixtureConfig::new(MassPair::new(1.0, 3.0).unwrap(), -1.0, AngularKernel::default()).unwrap();
    let v = [0.4, 0.1, -0.3];
    let direct = hybrid_direct(&mix, v, 9.0);
    let kernel = hybrid_kernel(&mix, v, 9.0);
    let rel = (direct - kernel).abs() / direct.abs();
    assert!(direct > 0.0);
    assert!(rel < 1e-4, "direct {direct} kernel {kernel} rel {rel:e}");
}

#[test]
fn measure_identity_on_gaussian() {
    let exact = 4.0 * PI.powf(2.5);
    // (u, w) side: |S^2| * int e^{-r^2} r^2 dr.
    let lhs = 4.0 * PI * gauss(60, 0.0, 10.0).iter().map(|&(r, w)| w * r * r * (-r * r).exp()).sum::<f64>() * 4.0 * PI;
    // (u_par, u_perp) side with the Jacobian factor.
    let mut rhs = 0.0;
    for &(a, wa) in &gauss(60, 0.0, 10.0) {
        let jac = kernel_measure_factor(Orientation::Parallel, a, 1.0).unwrap();
        let plane: f64 = gauss(60, 0.0, 10.0).iter().map(|&(r, w)| w * 2.0 * PI * r * (-r * r).exp()).sum();
        rhs += wa * 4.0 * PI * a * a * jac * (-a * a).exp() * plane;
    }
    assert!((lhs - exact).abs() / exact < 1e-12, "{lhs} vs {exact}");
    assert!((rhs - exact).abs() / exact < 1e-12, "{rhs} vs {exact}");
    assert!(kernel_measure_factor(Orientation::Perpendicular, 1.0, 0.0).is_err());
}

fn exchange_gap(family: KernelFamily, gamma: f64) -> f64 {
    let mix = MixtureConfig::new(MassPair::new(2.0, 2.0).unwrap(), gamma, AngularKernel::new(family, 1.3).unwrap()).unwrap();
    let cfg = KernelSplitConfig::no_cutoff();
    let mut gap = 0.0f64;
    for (v, x) in [([0.1, 0.2, -0.3], [1.0, 0.5, 0.0]), ([1.5, -0.7, 0.2], [-0.2, 0.1, 0.9])] {
        let k1 = eval_kernel_k1(&mix, &cfg, 0, 0, v, x).unwrap();
        let k2 = eval_kernel_k2(&mix, &cfg, 0, 0, v, x, [0.0; 3]).unwrap();
        gap = gap.max((k1 - k2).abs() / k1.abs());
    }
    gap
}

// Swapping the roles of u_par and u_perp swaps cos and sin of the deflection
// angle, so the two kernels agree only when b / |cos| is constant.
#[test]
fn equal_mass_exchange_symmetry_with_abs_cos_kernel() {
    for gamma in [-0.5, -1.0, -2.0] {
        let gap = exchange_gap(KernelFamily::AbsCos, gamma);
        assert!(gap <= 1e-8, "{gamma}: {gap:e}");
    }
}

#[test]
fn cos_squared_kernel_is_not_exchange_symmetric() {
    for gamma in [-0.5, -1.0, -2.0] {
        assert!(exchange_gap(KernelFamily::CosSquared, gamma) > 1e-3);
    }
}

#[test]
fn cutoff_removes_small_relative_speeds() {
    let mix = MixtureConfig::new(MassPair::new(1.0, 3.0).unwrap(), -1.0, AngularKernel::default()).unwrap();
    let cfg = KernelSplitConfig::new(0.5, 4.0).unwrap();
    let k = eval_kernel_k2(&mix, &cfg, 0, 1, [0.0; 3], [0.1, 0.0, 0.0], [0.0, 0.1, 0.0]).unwrap();
    assert_eq!(k, 0.0);
    assert!(eval_kernel_k1(&mix, &cfg, 0, 1, [0.0; 3], [0.0; 3]).is_err());
}
