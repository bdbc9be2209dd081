use binarykin::config::parse_config;
use binarykin::equilibrium::{build_invariant_basis, pair_inner, project_p0};
use binarykin::io::{read_field, write_field};
use binarykin::kinematics::{jacobian_determinant, post_collision, CollisionInput, MassPair};
use binarykin::linop::KernelSplitConfig;
use binarykin::vec3::{self, Vec3};
use binarykin::vgrid::{DistributionPair, SpatialGrid, VelocityGrid};
use proptest::prelude::*;

fn vel() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-5.0f64..5.0)
}

fn unit() -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-1.0f64..1.0)
        .prop_filter("away from zero", |w| vec3::norm(*w) > 0.1)
        .prop_map(vec3::normalize)
}

fn masses() -> impl Strategy<Value = MassPair> {
    (0.1f64..10.0, 0.1f64..10.0).prop_map(|(a, b)| MassPair::new(a, b).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn collision_conserves_momentum_energy_and_relative_speed(m in masses(), v in vel(), vs in vel(), w in unit()) {
        let o = post_collision(m, CollisionInput { v, v_star: vs, omega: w }).unwrap();
        for k in 0..3 {
            let d = m.m_alpha * (o.v_prime[k] - v[k]) + m.m_beta * (o.v_star_prime[k] - vs[k]);
            prop_assert!(d.abs() <= 1e-12 * (1.0 + m.m_alpha + m.m_beta) * 10.0);
        }
        let e0 = m.m_alpha * vec3::norm2(v) + m.m_beta * vec3::norm2(vs);
        let e1 = m.m_alpha * vec3::norm2(o.v_prime) + m.m_beta * vec3::norm2(o.v_star_prime);
        prop_assert!((e1 - e0).abs() <= 1e-12 * e0.max(1.0));
        let g0 = vec3::norm(vec3::sub(v, vs));
        let g1 = vec3::norm(vec3::sub(o.v_prime, o.v_star_prime));
        prop_assert!((g1 - g0).abs() <= 1e-12 * g0.max(1.0));
    }

    #[test]
    fn collision_map_is_an_involution(m in masses(), v in vel(), vs in vel(), w in unit()) {
        let o = post_collision(m, CollisionInput { v, v_star: vs, omega: w }).unwrap();
        let back = post_collision(m, CollisionInput { v: o.v_prime, v_star: o.v_star_prime, omega: w }).unwrap();
        for k in 0..3 {
            prop_assert!((back.v_prime[k] - v[k]).abs() <= 1e-11);
            prop_assert!((back.v_star_prime[k] - vs[k]).abs() <= 1e-11);
        }
    }

    #[test]
    fn jacobian_is_minus_one(m in masses(), v in vel(), vs in vel(), w in unit()) {
        let d = jacobian_determinant(m, CollisionInput { v, v_star: vs, omega: w }, 1e-5).unwrap();
        prop_assert!((d + 1.0).abs() <= 1e-6, "det = {}", d);
    }

    #[test]
    fn non_unit_omega_is_rejected(m in masses(), v in vel(), s in 1.01f64..3.0) {
        let out = post_collision(m, CollisionInput { v, v_star: v, omega: [s, 0.0, 0.0] });
        prop_assert!(out.is_err());
    }

    #[test]
    fn cutoff_profile_is_a_monotone_ramp(eps in 0.05f64..0.9, r1 in 0.0f64..3.0, r2 in 0.0f64..3.0) {
        let c = KernelSplitConfig::new(eps, 4.0).unwrap();
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!((0.0..=1.0).contains(&c.chi(lo)));
        prop_assert!(c.chi(lo) <= c.chi(hi) + 1e-15);
        if lo <= eps { prop_assert_eq!(c.chi(lo), 0.0); }
        if hi >= 2.0 * eps { prop_assert_eq!(c.chi(hi), 1.0); }
    }

    #[test]
    fn config_masses_parse(a in 0.1f64..20.0, b in 0.1f64..20.0) {
        let c = parse_config(&format!("mass_a = {a}\nmass_b = {b}\n")).unwrap();
        prop_assert_eq!(c.mixture.masses, MassPair::new(a, b).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projection_is_an_orthogonal_projector(m in masses(), n in prop::sample::select(vec![5usize, 7]), seed in 0u64..1000) {
        let grid = VelocityGrid::for_masses(m, n, 6.0).unwrap();
        let basis = build_invariant_basis(m, &grid).unwrap();
        let nv = grid.len();
        let vals: Vec<f64> = (0..2 * nv).map(|k| (((k as u64).wrapping_mul(2654435761).wrapping_add(seed * 97) % 1000) as f64 / 500.0) - 1.0).collect();
        let f = DistributionPair::from_parts(vals[..nv].to_vec(), vals[nv..].to_vec(), 1, nv).unwrap();
        let p1 = project_p0(&basis, &f).unwrap();
        let p2 = project_p0(&basis, &p1).unwrap();
        let scale = f.max_abs();
        for s in 0..2 {
            for (a, b) in p1.species(s).iter().zip(p2.species(s)) {
                prop_assert!((a - b).abs() <= 1e-10 * scale);
            }
        }
        let resid: Vec<f64> = f.stacked_at(0).iter().zip(p1.stacked_at(0)).map(|(a, b)| a - b).collect();
        for j in 0..6 {
            let ip = pair_inner(&grid, &resid, basis.vector(j));
            prop_assert!(ip.abs() <= 1e-10 * scale);
            let chi = basis.vector(j).to_vec();
            let pchi = basis.project_velocity(&chi).unwrap();
            for (a, b) in chi.iter().zip(&pchi) {
                prop_assert!((a - b).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn field_files_round_trip(n in prop::sample::select(vec![3usize, 5]), nx in 2usize..5, seed in 0u64..1000) {
        let vgrid = VelocityGrid::new(2.5, n).unwrap();
        let xgrid = SpatialGrid::new(1, nx).unwrap();
        let len = vgrid.len() * xgrid.len();
        let gen = |k: usize, s: u64| ((k as u64).wrapping_mul(6364136223846793005).wrapping_add(s) % 10007) as f64 * 1e-3 - 5.0 + 1e-13 * k as f64;
        let f = DistributionPair::from_parts((0..len).map(|k| gen(k, seed)).collect(), (0..len).map(|k| gen(k, seed + 1)).collect(), nx, vgrid.len()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        write_field(&path, &vgrid, &xgrid, &f, &[("mass_a", "2".into())]).unwrap();
        let back = read_field(&path).unwrap();
        prop_assert_eq!(back.metadata.get("mass_a").map(String::as_str), Some("2"));
        prop_assert_eq!(back.vgrid.points_per_axis(), n);
        prop_assert_eq!(&back.field, &f);
    }
}
